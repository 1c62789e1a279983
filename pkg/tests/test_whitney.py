import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from whitney_walk.body import AxisBox, HPolytope, LpBall, MembershipBody
from whitney_walk.errors import BoundaryPointError, DomainError, MarginError
from whitney_walk.whitney import (
    CubeIndex,
    DyadicCube,
    WhitneyContext,
    candidate_levels,
    enumerate_cubes,
    facet_contact,
    in_decomposition,
    in_root_mesh,
    interiors_overlap,
    is_subdivided,
    locate_cube,
    locate_many,
    scale_exponent_for,
)

from invariants import whitney_report


@pytest.fixture
def ctx(square):
    return WhitneyContext(square, math.inf)


# -- cube arithmetic -----------------------------------------------------------

def test_cube_geometry_is_exact():
    Q = DyadicCube(3, (1, -2), scale=1)
    assert Q.side == 0.25
    assert Q.lower.tolist() == [0.25, -0.5]
    assert Q.center.tolist() == [0.375, -0.375]
    assert Q.volume == 0.0625
    assert Q.diameter(1) == 0.5 and Q.diameter(math.inf) == 0.25
    assert Q.diameter(2) == pytest.approx(math.sqrt(2) * 0.25)


def test_center_exact_far_from_unit_scale():
    Q = DyadicCube(500, (3,), scale=0)
    assert Q.center[0] == math.ldexp(3.5, -500)


@given(st.integers(0, 20), st.lists(st.integers(-1000, 1000), min_size=1, max_size=4))
def test_parent_child_round_trip(level, vertex):
    Q = DyadicCube(level, tuple(vertex))
    kids = Q.children()
    assert len(kids) == 2 ** Q.dim
    assert all(K.parent() == Q for K in kids)
    assert sum(K.volume for K in kids) == Q.volume
    assert Q.ancestor(level) == Q


@given(st.integers(1, 6), st.lists(st.integers(-50, 50), min_size=2, max_size=3), st.integers(0, 5))
def test_children_tile_parent_without_overlap(level, vertex, which):
    Q = DyadicCube(level, tuple(vertex))
    kids = Q.children()
    for a in kids:
        assert interiors_overlap(a, Q)
        for b in kids:
            if a != b:
                assert not interiors_overlap(a, b)


def test_facet_contact_areas():
    a = DyadicCube(2, (0, 0))
    assert facet_contact(a, DyadicCube(2, (1, 0))) == (0, 0.25)
    assert facet_contact(a, DyadicCube(3, (2, 1))) == (0, 0.125)
    assert facet_contact(a, DyadicCube(2, (1, 1))) is None  # corner only
    assert facet_contact(a, DyadicCube(2, (2, 0))) is None


def test_scale_exponent():
    assert scale_exponent_for(0.4) == 0
    assert scale_exponent_for(1.0) == 1
    assert scale_exponent_for(3.9) == 2
    assert scale_exponent_for(4.0) == 3


# -- the predicate ------------------------------------------------------------------

def test_subdivision_examples(ctx):
    assert is_subdivided(ctx, ctx.cube(0, (0, 0)))
    assert is_subdivided(ctx, ctx.cube(2, (0, 0)))
    assert not is_subdivided(ctx, ctx.cube(3, (0, 0)))


def test_root_mesh_examples(ctx):
    assert in_root_mesh(ctx, ctx.cube(0, (0, 0)))
    assert not in_root_mesh(ctx, ctx.cube(0, (2, 0)))
    with pytest.raises(ValueError):
        in_root_mesh(ctx, ctx.cube(1, (0, 0)))


def test_root_mesh_for_polytope_uses_set_distance():
    P = HPolytope.simplex(2)
    c = WhitneyContext(P, 2)
    assert in_root_mesh(c, c.cube(0, (0, 0)))
    assert not in_root_mesh(c, c.cube(0, (3, 3)))


def test_decomposition_membership_examples(ctx):
    assert in_decomposition(ctx, ctx.cube(3, (0, 0)))
    assert not in_decomposition(ctx, ctx.cube(2, (0, 0)))
    # centre (0.4375, 0.0625) lies outside the body
    assert not in_decomposition(ctx, ctx.cube(3, (3, 0)))


# -- location ---------------------------------------------------------------------

def test_locate_examples(ctx):
    assert locate_cube(ctx, [0.01, 0.01]) == ctx.cube(3, (0, 0))
    assert locate_cube(ctx, [0.01, -0.01]) == ctx.cube(3, (0, -1))


def test_locate_agrees_with_enumeration(ctx):
    dec = enumerate_cubes(ctx, 6)
    idx = CubeIndex(dec.complete, dec.frontier)
    Q = locate_cube(ctx, [0.2, 0.2])
    assert Q == idx.find([0.2, 0.2])
    assert in_decomposition(ctx, Q)


def test_locate_on_dyadic_boundary_raises(ctx):
    with pytest.raises(BoundaryPointError):
        locate_cube(ctx, [0.125, 0.01])


def test_locate_outside_raises(ctx):
    with pytest.raises(DomainError):
        locate_cube(ctx, [0.5, 0.0])


def test_locate_many_flags_bad_rows(ctx):
    levels, verts, ok = locate_many(ctx, np.array([[0.01, 0.01], [0.125, 0.0], [0.9, 0.9]]))
    assert ok.tolist() == [True, False, False]
    assert (levels[0], tuple(verts[0])) == (3, (0, 0))


@settings(max_examples=200, deadline=None)
@given(st.floats(-0.399, 0.399), st.floats(-0.399, 0.399), st.sampled_from([1.0, 2.0, math.inf]))
def test_located_cube_is_in_decomposition_and_levels_bracketed(u, v, p):
    c = WhitneyContext(LpBall(np.zeros(2), 0.4, math.inf), p)
    x = np.array([u, v])
    try:
        Q = locate_cube(c, x)
    except BoundaryPointError:
        return
    assert Q.contains_point(x)
    assert in_decomposition(c, Q)
    d = c.body.lp_distance_to_boundary(x, p)
    cands = candidate_levels(c, d)
    assert Q.level in cands and len(cands) <= 2


def test_candidate_levels_sorted_deepest_first(ctx):
    c = candidate_levels(ctx, 0.05)
    assert c == sorted(c, reverse=True)
    assert 1 <= len(c) <= 2


def test_membership_body_locates_like_exact_body():
    mb = MembershipBody(lambda y: bool(np.all(np.abs(y) <= 0.4)), 2, 0.4)
    exact = WhitneyContext(AxisBox.cube(2, 0.4), 1)
    approx = WhitneyContext(mb, 1)
    rng = np.random.default_rng(5)
    for x in rng.uniform(-0.3, 0.3, size=(40, 2)):
        assert locate_cube(approx, x) == locate_cube(exact, x)


def test_membership_body_margin_error_on_locate():
    mb = MembershipBody(lambda y: bool(np.all(np.abs(y) <= 0.4)), 2, 0.4, precision_bits=20)
    with pytest.raises(MarginError):
        locate_cube(WhitneyContext(mb, 1), [0.4 - 1e-6, 0.0])


# -- enumeration ------------------------------------------------------------------

def test_level3_cubes_of_square(ctx):
    dec = enumerate_cubes(ctx, 4)
    level3 = {Q.vertex for Q in dec.complete if Q.level == 3}
    assert level3 == {(0, 0), (-1, 0), (0, -1), (-1, -1)}


def test_depth_one_has_only_frontier(ctx):
    dec = enumerate_cubes(ctx, 1)
    assert dec.complete == [] and dec.frontier


def test_volume_telescopes_to_body():
    # in one dimension the frontier stays small, so a deep cutoff is cheap
    c = WhitneyContext(AxisBox([-0.4], [0.3]), 2)
    dec = enumerate_cubes(c, 30)
    frontier = sum(Q.volume for Q in dec.frontier)
    total = sum(Q.volume for Q in dec.complete)
    assert frontier < 1e-6 * 0.7
    assert 0.7 * (1 - 1e-6) <= total <= 0.7


@pytest.mark.parametrize("p", [1.0, 2.0, math.inf])
def test_complete_and_clipped_frontier_partition_box(p):
    box = AxisBox([-0.4, -0.3], [0.35, 0.4])
    dec = enumerate_cubes(WhitneyContext(box, p), 7)
    clipped = sum(
        float(np.prod(np.clip(np.minimum(Q.upper, box.upper) - np.maximum(Q.lower, box.lower), 0, None)))
        for Q in dec.frontier
    )
    total = sum(Q.volume for Q in dec.complete)
    assert total + clipped == pytest.approx(box.volume, rel=1e-12)


def test_enumeration_matches_membership_predicate(ctx):
    dec = enumerate_cubes(ctx, 5)
    found = set(dec.complete)
    for Q in dec.complete:
        assert in_decomposition(ctx, Q)
    # brute force over every cube of level <= 5 meeting the bounding box
    for k in range(6):
        m = 2 ** k
        for i in range(-m, m):
            for j in range(-m, m):
                Q = ctx.cube(k, (i, j))
                assert in_decomposition(ctx, Q) == (Q in found)


@pytest.mark.parametrize("body,p,depth", [
    (LpBall(np.zeros(2), 0.4, math.inf), 1, 5),
    (HPolytope.simplex(2), 2, 5),
    (LpBall(np.zeros(2), 0.7, 2), 2, 5),
    (LpBall(np.zeros(3), 0.4, math.inf), math.inf, 4),
])
def test_structural_invariants_small(body, p, depth):
    rep = whitney_report(WhitneyContext(body, p), depth, 500, np.random.default_rng(0))
    for key in ("disjoint", "center", "point", "abut", "resolved", "locate"):
        assert rep[key] == [], (key, rep[key][:3])
    assert rep["located"] == 500


def test_facet_neighbours_of_central_cube(ctx):
    dec = enumerate_cubes(ctx, 5)
    idx = CubeIndex(dec.complete, dec.frontier)
    nbrs = dict(idx.facet_neighbors(ctx.cube(3, (0, 0))))
    assert nbrs[ctx.cube(3, (-1, 0))] == 0.125
    assert nbrs[ctx.cube(4, (2, 0))] == 0.0625
    assert sum(nbrs.values()) == 4 * 0.125
