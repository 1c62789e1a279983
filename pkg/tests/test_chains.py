import math

import numpy as np
import pytest
from scipy import stats

from whitney_walk.body import HPolytope, LpBall
from whitney_walk.chains import (
    Trajectory,
    chr_step,
    chr_step_many,
    cube_trajectory_to_points,
    make_rng,
    mp_step,
    mp_step_many,
    mp_transition_law,
    run_walk,
    sample_boundary_point,
    sample_point_in_cube,
)
from whitney_walk.diagnostics import chi_square_uniformity
from whitney_walk.errors import StepFailure
from whitney_walk.whitney import CubeIndex, DyadicCube, WhitneyContext, enumerate_cubes, in_decomposition


@pytest.fixture(scope="module")
def sq_ctx():
    return WhitneyContext(LpBall(np.zeros(2), 0.4, math.inf), math.inf)


@pytest.fixture(scope="module")
def sq_index(sq_ctx):
    dec = enumerate_cubes(sq_ctx, 9)
    return CubeIndex(dec.complete, dec.frontier)


# -- sampling inside and on cubes -----------------------------------------------

def test_point_in_unit_cube_is_in_open_range():
    rng = make_rng(1)
    Q = DyadicCube(0, (0, 0))
    X = np.array([sample_point_in_cube(Q, rng) for _ in range(2000)])
    assert np.all((X > 0) & (X < 1))


def test_point_in_cube_moments():
    rng = make_rng(2)
    Q = DyadicCube(3, (1, -2))
    N = 100_000
    X = np.array([sample_point_in_cube(Q, rng) for _ in range(N)])
    sigma = Q.side / math.sqrt(12)
    assert np.all(np.abs(X.mean(axis=0) - Q.center) <= 3 * sigma / math.sqrt(N))
    assert np.allclose(X.var(axis=0), Q.side ** 2 / 12, rtol=0.05)


def test_boundary_facets_equally_likely():
    rng = make_rng(3)
    Q = DyadicCube(0, (0, 0))
    N = 100_000
    facets = [sample_boundary_point(Q, rng)[1] for _ in range(N)]
    counts = {f: 0 for f in [(0, -1), (0, 1), (1, -1), (1, 1)]}
    for f in facets:
        counts[f] += 1
    sigma = math.sqrt(N * 0.25 * 0.75)
    for c in counts.values():
        assert abs(c - N / 4) <= 3 * sigma


def test_boundary_point_on_exactly_one_face():
    rng = make_rng(4)
    Q = DyadicCube(2, (1, 3, -1))
    for _ in range(500):
        x, (j, sgn) = sample_boundary_point(Q, rng)
        on_face = np.isclose(x, Q.lower, rtol=0, atol=0) | np.isclose(x, Q.upper, rtol=0, atol=0)
        assert on_face.sum() == 1 and on_face[j]
        assert x[j] == (Q.upper[j] if sgn > 0 else Q.lower[j])


def test_boundary_point_uniform_on_facet():
    rng = make_rng(5)
    Q = DyadicCube(0, (0, 0, 0))
    pts = {}
    for _ in range(60_000):
        x, (j, sgn) = sample_boundary_point(Q, rng)
        pts.setdefault((j, sgn), []).append(np.delete(x, j))
    for P in pts.values():
        P = np.array(P)
        H, _, _ = np.histogram2d(P[:, 0], P[:, 1], bins=4, range=[[0, 1], [0, 1]])
        assert stats.chisquare(H.ravel()).pvalue > 0.01 / 6


# -- the cube chain ------------------------------------------------------------------

def test_equal_side_full_facet_probability(sq_ctx, sq_index):
    Q = sq_ctx.cube(3, (0, 0))
    _, law = mp_transition_law(sq_index, Q)
    assert law[sq_ctx.cube(3, (-1, 0))] == 1 / 8


def test_half_side_quarter_facet_probability(sq_ctx, sq_index):
    Q = sq_ctx.cube(3, (0, 0))
    _, law = mp_transition_law(sq_index, Q)
    assert law[sq_ctx.cube(4, (2, 0))] == 1 / 32
    # the reverse move uses a whole facet of the small cube and is not thinned
    _, back = mp_transition_law(sq_index, sq_ctx.cube(4, (2, 0)))
    assert back[Q] == 1 / 8
    assert Q.volume / 32 == sq_ctx.cube(4, (2, 0)).volume / 8


def test_transition_law_is_a_distribution(sq_ctx, sq_index):
    for Q in sq_index.cubes:
        if Q.level >= 8:
            continue
        hold, law = mp_transition_law(sq_index, Q)
        assert hold >= 0.5
        assert hold + sum(law.values()) == pytest.approx(1.0, abs=1e-15)


def test_reversibility_exact_on_every_pair(sq_ctx, sq_index):
    checked = 0
    for Q in sq_index.cubes:
        if Q.level >= 8:
            continue
        _, law = mp_transition_law(sq_index, Q)
        for nb, p in law.items():
            if nb.level >= 8:
                continue
            _, back = mp_transition_law(sq_index, nb)
            assert Q.volume * p == nb.volume * back[Q]
            checked += 1
    assert checked > 500


@pytest.mark.parametrize("cube", [(3, (0, 0)), (4, (-4, 2)), (5, (-11, -5)), (5, (-11, -11))])
def test_empirical_kernel_matches_law(sq_ctx, sq_index, cube):
    Q = sq_ctx.cube(*cube)
    hold, law = mp_transition_law(sq_index, Q)
    N = 200_000
    lv, vt = mp_step_many(sq_ctx, np.full(N, Q.level), np.tile(Q.vertex, (N, 1)), make_rng(7))
    seen = {}
    for k, v in zip(lv.tolist(), map(tuple, vt.tolist())):
        seen[(k, v)] = seen.get((k, v), 0) + 1
    expected = dict(((nb.level, nb.vertex), p) for nb, p in law.items())
    expected[(Q.level, Q.vertex)] = hold
    assert set(seen) <= set(expected)
    for key, p in expected.items():
        sigma = math.sqrt(N * p * (1 - p))
        assert abs(seen.get(key, 0) - N * p) <= 4 * sigma, key


def test_scalar_and_batch_kernels_agree_in_law(sq_ctx, sq_index):
    Q = sq_ctx.cube(4, (-4, 2))
    hold, _ = mp_transition_law(sq_index, Q)
    rng = make_rng(8)
    N = 20_000
    stays = sum(mp_step(sq_ctx, Q, rng) == Q for _ in range(N))
    assert abs(stays - N * hold) <= 4 * math.sqrt(N * hold * (1 - hold))


def test_mp_chain_stays_in_decomposition(sq_ctx):
    rng = make_rng(9)
    Q = sq_ctx.cube(3, (0, 0))
    seen = set()
    for _ in range(100_000):
        Q = mp_step(sq_ctx, Q, rng)
        seen.add(Q)
    assert all(in_decomposition(sq_ctx, R) for R in seen)


def test_mp_laziness():
    ctx = WhitneyContext(HPolytope.simplex(2), 1)
    rng = make_rng(10)
    Q = ctx.cube(4, (1, 1))
    assert in_decomposition(ctx, Q)
    N = 40_000
    stays = 0
    for _ in range(N):
        R = mp_step(ctx, Q, rng)
        stays += R == Q
        Q = R
    assert stays / N >= 0.5 - 3 * math.sqrt(0.25 / N)


def test_offset_point_lands_in_abutting_cube(sq_ctx, sq_index):
    rng = make_rng(11)
    from whitney_walk.whitney import facet_contact, locate_cube
    for Q in sq_index.cubes:
        if Q.level > 6:
            continue
        for _ in range(20):
            x, (j, sgn) = sample_boundary_point(Q, rng)
            x[j] += sgn * Q.side / 4
            R = locate_cube(sq_ctx, x)
            assert facet_contact(Q, R) is not None
            assert abs(R.level - Q.level) <= 1


def test_retry_exhaustion_raises(sq_ctx):
    # the proposal sits on a dyadic line every time, so location never succeeds
    Q = sq_ctx.cube(4, (-4, 3))
    with pytest.raises(StepFailure):
        mp_step(sq_ctx, Q, _AlwaysOnGrid(), max_retries=3)


class _AlwaysOnGrid:
    """Generator stand-in that always proposes the top-left corner of the left facet."""

    def random(self, size=None):
        return 0.9 if size is None else np.full(size, 1.0)

    def integers(self, k, size=None):
        return 0


# -- coordinate hit-and-run --------------------------------------------------------------

def test_chr_conditional_move_uniform_on_box_chord(unit_box):
    rng = make_rng(12)
    x0 = np.array([0.5, 0.0])
    moved = []
    while len(moved) < 20_000:
        y = chr_step(unit_box, x0, rng)
        if y[1] == 0.0 and y[0] != 0.5:
            moved.append(y[0])
    assert stats.kstest(moved, stats.uniform(-1, 2).cdf).pvalue > 0.01


def test_chr_box_marginals_uniform(unit_box):
    rng = make_rng(13)
    X = np.tile([0.9, -0.9], (5000, 1))
    for _ in range(60):
        X = chr_step_many(unit_box, X, rng)
    for j in range(2):
        assert stats.kstest(X[:, j], stats.uniform(-1, 2).cdf).pvalue > 0.01


def test_chr_stays_inside_from_near_boundary(square):
    rng = make_rng(14)
    x = np.array([0.4 - 1e-6, 0.4 - 1e-6])
    for _ in range(100_000):
        x = chr_step(square, x, rng)
        assert np.all(np.abs(x) < 0.4)


def test_chr_laziness(simplex2):
    rng = make_rng(15)
    X = np.tile([0.25, 0.25], (20_000, 1))
    Y = chr_step_many(simplex2, X, rng)
    held = np.all(Y == X, axis=1).mean()
    assert held >= 0.5 - 3 * math.sqrt(0.25 / len(X))


def test_chr_outside_start_fails(square):
    rng = make_rng(16)
    with pytest.raises(StepFailure):
        for _ in range(64):
            chr_step(square, [0.5, 0.0], rng)


# -- runners ----------------------------------------------------------------------------------

def _kernel(body):
    return lambda x, rng: chr_step(body, x, rng)


def test_run_walk_zero_steps(square):
    traj = run_walk(_kernel(square), np.zeros(2), 0, seed=1)
    assert len(traj) == 1 and np.array_equal(traj.states[0], np.zeros(2))


def test_run_walk_is_deterministic(square):
    a = run_walk(_kernel(square), np.zeros(2), 50, seed=42)
    b = run_walk(_kernel(square), np.zeros(2), 50, seed=42)
    assert all(np.array_equal(x, y) for x, y in zip(a.states, b.states))
    assert a.seed == 42


def test_run_walk_stride_count(square):
    traj = run_walk(_kernel(square), np.zeros(2), 100, stride=10, seed=0)
    assert len(traj) == 11 == 100 // 10 + 1


def test_run_walk_rejects_bad_arguments(square):
    with pytest.raises(ValueError):
        run_walk(_kernel(square), np.zeros(2), -1)
    with pytest.raises(ValueError):
        run_walk(_kernel(square), np.zeros(2), 5, stride=0)


def test_empty_trajectory_gives_no_points():
    assert cube_trajectory_to_points(Trajectory([], 0, 1), make_rng(0)) == []


def test_single_cube_points_uniform():
    Q = DyadicCube(2, (0, 0))
    pts = np.array(cube_trajectory_to_points([Q] * 5000, make_rng(17)))
    H, _, _ = np.histogram2d(pts[:, 0], pts[:, 1], bins=4, range=[[0, 0.25], [0, 0.25]])
    assert stats.chisquare(H.ravel()).pvalue > 0.01


def test_stationary_cubes_give_uniform_points(sq_ctx, square):
    dec = enumerate_cubes(sq_ctx, 12)
    vols = np.array([Q.volume for Q in dec.complete])
    rng = make_rng(18)
    pick = rng.choice(len(vols), size=20_000, p=vols / vols.sum())
    pts = cube_trajectory_to_points([dec.complete[i] for i in pick], rng)
    assert chi_square_uniformity(pts, square, grid=4).p_value > 0.01
