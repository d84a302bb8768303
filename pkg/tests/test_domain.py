"""Domain membership, distances, exhaustions, and the cemetery state."""

import math

import numpy as np
import pytest

from domsde.domain import (
    CEMETERY,
    CompactifiedState,
    SpaceTimePoint,
    as_point,
    boundary_distance,
    box_domain,
    collision_free,
    contains,
    exhaustion_level,
    from_predicate,
    full_space,
    half_space,
    punctured_plane,
    punctured_space,
    which_level,
)
from domsde.errors import DimensionMismatchError, PreconditionError


def test_point_requires_nonnegative_time():
    with pytest.raises(PreconditionError):
        SpaceTimePoint(-0.1, [0.0])
    p = SpaceTimePoint(0.0, [1.0, 2.0])
    assert p.dim == 2
    assert p == SpaceTimePoint(0.0, [1.0, 2.0])


def test_as_point_checks_dimension():
    p = as_point((1.0, [3.0]), dim=1)
    assert p.t == 1.0 and p.x[0] == 3.0
    with pytest.raises(DimensionMismatchError):
        as_point((1.0, [3.0]), dim=2)


def test_cemetery_is_absorbing():
    alive = CompactifiedState(SpaceTimePoint(0.0, [1.0]))
    assert not alive.is_cemetery
    dead = alive.advance(CompactifiedState(CEMETERY))
    assert dead.is_cemetery
    # once absorbed, any proposed move is ignored
    still_dead = dead.advance(SpaceTimePoint(2.0, [5.0]))
    assert still_dead.is_cemetery
    assert still_dead is dead


def test_cemetery_is_a_singleton():
    assert CEMETERY is type(CEMETERY)()


def test_full_space_membership_and_distance():
    q = full_space(2)
    assert contains(q, (0.5, [1.0, -3.0]))
    with pytest.raises(PreconditionError):  # negative time is not a point
        contains(q, (-0.5, [1.0, -3.0]))
    assert q.exit_distance((0.5, [1.0, -3.0])) == math.inf
    # boundary distance counts the t = 0 face
    assert boundary_distance(q, (0.5, [1.0, -3.0])) == 0.5


def test_half_space_membership_and_distance():
    q = half_space(1)
    assert contains(q, (1.0, [0.25]))
    assert not contains(q, (1.0, [0.0]))  # boundary excluded (open set)
    assert not contains(q, (1.0, [-0.25]))
    assert q.exit_distance((1.0, [0.25])) == 0.25


def test_half_space_exhaustion_is_nested():
    q = half_space(1)
    q2, q3 = exhaustion_level(q, 2), exhaustion_level(q, 3)
    assert q2.contains(1.0, np.array([1.0]))
    assert not q2.contains(1.0, np.array([0.4]))  # below 1/2
    assert q3.contains(1.0, np.array([0.4]))  # above 1/3
    # closure(Q^2) inside Q^3
    assert q3.contains(1.0, np.array([2.0 - 1e-12]))


def test_box_domain_time_cap():
    q = box_domain([0.0], [1.0], time_hi=2.0)
    assert contains(q, (1.9, [0.5]))
    assert not contains(q, (2.0, [0.5]))
    # forward-reachable faces: spatial 0.5 each side, time face 0.1
    assert math.isclose(q.exit_distance((1.9, [0.5])), 0.1)


def test_punctured_plane_distance_uses_only_x1():
    q = punctured_plane()
    assert contains(q, (1.0, [0.5, 100.0]))
    assert not contains(q, (1.0, [0.0, 1.0]))
    assert q.exit_distance((1.0, [-0.25, 7.0])) == 0.25


def test_punctured_plane_exhaustion_excludes_slab():
    q = punctured_plane()
    q2 = exhaustion_level(q, 2)
    assert q2.contains(1.0, np.array([1.0, 0.0]))
    assert not q2.contains(1.0, np.array([0.25, 0.0]))  # |x1| < 1/2
    assert not q2.contains(1.0, np.array([3.0, 0.0]))  # outside ball


def test_punctured_space_clearance():
    q = punctured_space(2, [[0.0, 0.0], [3.0, 0.0]], rho=1.0)
    assert not contains(q, (1.0, [0.5, 0.0]))  # inside first core
    assert contains(q, (1.0, [1.5, 0.0]))
    assert math.isclose(q.exit_distance((1.0, [1.5, 0.0])), 0.5)


def test_punctured_space_without_centers_is_free():
    q = punctured_space(2, np.zeros((0, 2)), rho=1.0)
    assert contains(q, (1.0, [0.0, 0.0]))
    assert q.exit_distance((1.0, [0.0, 0.0])) == math.inf


def test_collision_free_separation():
    q = collision_free(2, 1)
    # particles at 1 and 2: pairwise distance 1, separation 1/sqrt(2)
    assert contains(q, (1.0, [1.0, 2.0]))
    assert math.isclose(q.exit_distance((1.0, [1.0, 2.0])), 1.0 / math.sqrt(2.0))
    assert not contains(q, (1.0, [1.5, 1.5]))  # collision


def test_predicate_domain_probes_distance():
    q = from_predicate(1, lambda t, x: abs(x[0]) < 2.0)
    assert contains(q, (1.0, [0.0]))
    assert not contains(q, (1.0, [2.5]))
    d = q.exit_distance((1.0, [0.5]))
    # probed lower bound on the true distance 1.5
    assert 1.4 <= d <= 1.5 + 1e-6


def test_which_level_finds_smallest_level():
    q = half_space(1)
    # Q^1 = (0,1) x (1,1) is empty, so the first level holding x = 1 is 2
    assert which_level(q, (0.5, [1.0]), 8) == 2
    assert which_level(q, (0.5, [0.3]), 8) == 4  # needs 1/n < 0.3
    assert which_level(q, (9.5, [1.0]), 8) is None  # t beyond every level
    with pytest.raises(PreconditionError):
        which_level(q, (0.5, [-1.0]), 8)


def test_exhaustion_level_rejects_zero():
    with pytest.raises(PreconditionError):
        exhaustion_level(full_space(1), 0)


def test_exhaustion_union_covers_points():
    """Every point of Q lands in some Q^n (spot check on a sample)."""
    q = punctured_plane()
    rng = np.random.default_rng(1234)
    for _ in range(50):
        x = rng.uniform(-5, 5, size=2)
        t = rng.uniform(0.0, 5.0)
        if not contains(q, (t, x)):
            continue
        n = which_level(q, (t, x), 10_000)
        assert n is not None
        assert exhaustion_level(q, n).contains(t, x)


def test_boundary_distance_requires_membership():
    q = half_space(1)
    with pytest.raises(PreconditionError):
        boundary_distance(q, (1.0, [-1.0]))


def test_region_sampling_stays_inside():
    region = exhaustion_level(punctured_plane(), 3)
    rng = np.random.default_rng(7)
    pts = region.sample(rng, 25)
    assert len(pts) == 25
    for p in pts:
        assert region.contains(p.t, p.x)
