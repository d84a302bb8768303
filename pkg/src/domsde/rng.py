"""Counter-based per-path random streams.

Each simulated path owns an independent Philox stream keyed by
(master seed, path index). Philox is counter-based: distinct keys give
statistically independent streams, and a given stream produces identical
draws no matter how the draws are batched or which worker consumes them.
That property is what makes Monte Carlo results independent of the worker
count.

The optional ``family`` tag separates logical groups of paths that must not
share randomness (for example the direct-simulation arm of a Girsanov
cross-check versus the reweighted arm).
"""

import numpy as np

_MASK64 = np.uint64(0xFFFFFFFFFFFFFFFF)
_FAMILY_SHIFT = 56
_MAX_PATH_INDEX = (1 << _FAMILY_SHIFT) - 1


def path_stream(seed, path_index, family=0):
    """Return the numpy Generator for path ``path_index`` under ``seed``.

    Parameters
    ----------
    seed : int
        Master seed (any Python int; reduced mod 2^64).
    path_index : int
        Index of the path, < 2^56.
    family : int
        Stream family tag in [0, 255].
    """
    if not 0 <= path_index <= _MAX_PATH_INDEX:
        raise ValueError("path_index out of range: %r" % (path_index,))
    if not 0 <= family <= 255:
        raise ValueError("family tag out of range: %r" % (family,))
    key = np.empty(2, dtype=np.uint64)
    key[0] = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
    key[1] = (np.uint64(family) << np.uint64(_FAMILY_SHIFT)) | np.uint64(path_index)
    return np.random.Generator(np.random.Philox(key=key))
