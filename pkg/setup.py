"""Build script.

The simulation kernels live in a Cython extension (domsde.integrate._kernels).
The extension is optional: if no C compiler (or Cython) is available the build
falls back to the pure-Python engine, which implements identical arithmetic.
"""

import warnings

from setuptools import setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """Build the extension if possible, otherwise warn and continue."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            warnings.warn(
                "building the compiled kernels failed (%s); "
                "falling back to the pure-Python engine" % exc
            )

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            warnings.warn(
                "building %s failed (%s); the pure-Python engine will be used"
                % (ext.name, exc)
            )


def make_extensions():
    try:
        from Cython.Build import cythonize
    except ImportError:
        warnings.warn("Cython not available; skipping compiled kernels")
        return []
    from setuptools import Extension

    # The kernels must be bit-identical to the pure-Python engine, so the
    # compiler may not alter IEEE arithmetic: no fused multiply-adds, and no
    # fusing of adjacent sin/cos calls into sincos (glibc's sincos can differ
    # from sin/cos by one ulp, which desynchronizes the two lanes).
    ext = Extension(
        "domsde.integrate._kernels",
        sources=["src/domsde/integrate/_kernels.pyx"],
        extra_compile_args=["-O3", "-ffp-contract=off",
                            "-fno-builtin-sin", "-fno-builtin-cos"],
    )
    return cythonize(
        [ext],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )


setup(
    ext_modules=make_extensions(),
    cmdclass={"build_ext": OptionalBuildExt},
)
