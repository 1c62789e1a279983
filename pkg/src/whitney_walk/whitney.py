"""Dyadic cubes and the l_p Whitney decomposition of a convex body.

A cube is stored exactly as ``(level, vertex, scale)`` and occupies
``2**(scale - level) * (vertex + [0, 1]^n)``.  The global ``scale`` is the
smallest exponent with ``2**scale > R_inf`` (zero when ``R_inf < 1``), so
level-0 cubes already contain the body's bounding box corners.

A cube belongs to the decomposition when its centre lies in ``K°``, it is
not subdivided, and its parent is subdivided; a cube is subdivided when
``lam * dist_p(center, R^n \\ K°) < diam_p`` with ``lam = 1/2``.  Because
``dist`` is 1-Lipschitz, a cube that is not subdivided has no subdivided
descendant, so checking the parent is enough to certify the whole ancestry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product
from typing import NamedTuple

import numpy as np

from .body import ConvexBody, format_p, norm_root, parse_p
from .errors import BoundaryPointError, LocateError

LAMBDA = 0.5
_LOG2_10_3 = math.log2(10.0 / 3.0)
MAX_LEVEL = 60


@dataclass(frozen=True, order=True)
class DyadicCube:
    level: int
    vertex: tuple[int, ...]
    scale: int = 0

    def __post_init__(self):
        if not isinstance(self.vertex, tuple):
            object.__setattr__(self, "vertex", tuple(int(v) for v in self.vertex))

    @property
    def dim(self) -> int:
        return len(self.vertex)

    @property
    def side_exponent(self) -> int:
        return self.scale - self.level

    @property
    def side(self) -> float:
        return math.ldexp(1.0, self.side_exponent)

    @property
    def lower(self) -> np.ndarray:
        return np.ldexp(np.array(self.vertex, dtype=float), self.side_exponent)

    @property
    def upper(self) -> np.ndarray:
        return np.ldexp(np.array(self.vertex, dtype=float) + 1.0, self.side_exponent)

    @property
    def center(self) -> np.ndarray:
        return np.ldexp(np.array(self.vertex, dtype=float) + 0.5, self.side_exponent)

    @property
    def volume(self) -> float:
        return math.ldexp(1.0, self.dim * self.side_exponent)

    def diameter(self, p) -> float:
        return norm_root(self.dim, p) * self.side

    def parent(self) -> DyadicCube:
        return DyadicCube(self.level - 1, tuple(v >> 1 for v in self.vertex), self.scale)

    def children(self) -> list[DyadicCube]:
        base = [2 * v for v in self.vertex]
        return [
            DyadicCube(self.level + 1, tuple(b + o for b, o in zip(base, offs)), self.scale)
            for offs in product((0, 1), repeat=self.dim)
        ]

    def ancestor(self, level: int) -> DyadicCube:
        shift = self.level - level
        if shift < 0:
            raise ValueError("requested ancestor is finer than the cube")
        return DyadicCube(level, tuple(v >> shift for v in self.vertex), self.scale)

    def contains_point(self, x, strict: bool = True) -> bool:
        x = np.asarray(x, dtype=float)
        if strict:
            return bool(np.all(x > self.lower) and np.all(x < self.upper))
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))

    def integer_bounds(self, level: int) -> tuple[list[int], list[int]]:
        """Corner coordinates in units of the level-``level`` side length."""
        shift = level - self.level
        if shift < 0:
            raise ValueError("level must be at least the cube's own level")
        return [v << shift for v in self.vertex], [(v + 1) << shift for v in self.vertex]

    def to_json(self) -> dict:
        return {
            "level": self.level,
            "vertex": list(self.vertex),
            "side": repr(self.side),
            "center": self.center.tolist(),
        }


def facet_contact(a: DyadicCube, b: DyadicCube):
    """Return ``(axis, area)`` if the cubes share an (n-1)-dimensional face piece, else None.

    Decided in exact integer arithmetic at the finer of the two levels.
    """
    if a.scale != b.scale or a.dim != b.dim:
        raise ValueError("cubes belong to different meshes")
    L = max(a.level, b.level)
    alo, ahi = a.integer_bounds(L)
    blo, bhi = b.integer_bounds(L)
    axis = None
    overlap = 1
    for i in range(a.dim):
        lo, hi = max(alo[i], blo[i]), min(ahi[i], bhi[i])
        if hi > lo:
            overlap *= hi - lo
        elif hi == lo and axis is None:
            axis = i
        else:
            return None
    if axis is None:
        return None
    return axis, math.ldexp(float(overlap), (a.scale - L) * (a.dim - 1))


def interiors_overlap(a: DyadicCube, b: DyadicCube) -> bool:
    L = max(a.level, b.level)
    alo, ahi = a.integer_bounds(L)
    blo, bhi = b.integer_bounds(L)
    return all(max(l1, l2) < min(h1, h2) for l1, h1, l2, h2 in zip(alo, ahi, blo, bhi))


def scale_exponent_for(R_inf: float) -> int:
    """Smallest ``a >= 0`` with ``2**a > R_inf``."""
    a = 0
    while math.ldexp(1.0, a) <= R_inf:
        a += 1
    return a


@dataclass(frozen=True)
class WhitneyContext:
    body: ConvexBody
    p: float
    precision_bits: int | None = None
    lam: float = field(default=LAMBDA, init=False)
    scale: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "p", parse_p(self.p))
        object.__setattr__(self, "scale", scale_exponent_for(self.body.outer_radius))
        if self.precision_bits is None:
            object.__setattr__(self, "precision_bits", self.body.precision_bits)

    @property
    def dim(self) -> int:
        return self.body.dim

    @property
    def root_factor(self) -> float:
        return norm_root(self.dim, self.p)

    def cube(self, level: int, vertex) -> DyadicCube:
        return DyadicCube(level, tuple(int(v) for v in vertex), self.scale)

    def describe(self) -> str:
        return f"p={format_p(self.p)} scale=2^{self.scale}"

    # vectorised predicate on arrays of centres
    def subdivided_many(self, centers: np.ndarray, diams: np.ndarray) -> np.ndarray:
        if self.body.exact_distances:
            gap = self.body.boundary_distance_many(centers, self.p)
            return self.lam * gap < diams
        return np.array(
            [not self.body.lp_distance_exceeds(c, d / self.lam, self.p) for c, d in zip(centers, diams)],
            dtype=bool,
        )

    def interior_many(self, X: np.ndarray) -> np.ndarray:
        if self.body.exact_distances:
            return self.body.boundary_distance_many(X, self.p) > 0
        return np.array([self.body.lp_distance_exceeds(x, 0.0, self.p) for x in X], dtype=bool)


def is_subdivided(ctx: WhitneyContext, Q: DyadicCube) -> bool:
    """``lam * dist_p(center(Q), R^n \\ K°) < diam_p(Q)``."""
    return bool(ctx.subdivided_many(Q.center[None, :], np.array([Q.diameter(ctx.p)]))[0])


def in_root_mesh(ctx: WhitneyContext, Q: DyadicCube) -> bool:
    if Q.level != 0:
        raise ValueError("root-mesh membership is defined for level-0 cubes only")
    return ctx.body.within_distance(Q.center, 0.5 * Q.diameter(ctx.p), ctx.p)


def center_in_interior(ctx: WhitneyContext, Q: DyadicCube) -> bool:
    return bool(ctx.interior_many(Q.center[None, :])[0])


def in_decomposition(ctx: WhitneyContext, Q: DyadicCube) -> bool:
    if Q.level < 0 or Q.scale != ctx.scale:
        return False
    if not center_in_interior(ctx, Q) or is_subdivided(ctx, Q):
        return False
    anc = Q
    while anc.level > 0:
        anc = anc.parent()
        if not is_subdivided(ctx, anc):
            return False
    return in_root_mesh(ctx, anc)


def candidate_levels(ctx: WhitneyContext, d: float) -> list[int]:
    """Levels allowed by the distance sandwich for a point at distance ``d``, deepest first."""
    base = math.log2(1.5 * ctx.root_factor / d)
    bmin = math.ceil(base - 0.01)
    bmax = math.floor(base + _LOG2_10_3 + 0.01)
    return [b + ctx.scale for b in range(bmax, bmin - 1, -1)]


_OK, _NOT_INTERIOR, _ON_BOUNDARY, _NO_CANDIDATE = 0, 1, 2, 3


def _locate_rows(ctx: WhitneyContext, X: np.ndarray):
    """Vectorised location; returns ``(levels, vertices, status)``."""
    N, n = X.shape
    p, scale = ctx.p, ctx.scale
    levels = np.full(N, -1, dtype=np.int64)
    vertices = np.zeros((N, n), dtype=np.int64)
    status = np.full(N, _NO_CANDIDATE, dtype=np.int8)
    d = ctx.body.boundary_distance_many(X, p)
    good = np.isfinite(d) & (d > 0)
    status[~good] = _NOT_INTERIOR
    if not np.any(good):
        return levels, vertices, status
    with np.errstate(divide="ignore"):
        base = np.log2(1.5 * ctx.root_factor / np.where(good, d, 1.0))
    bmin = np.ceil(base - 0.01).astype(np.int64)
    bmax = np.floor(base + _LOG2_10_3 + 0.01).astype(np.int64)
    pending = good.copy()
    saw_boundary = np.zeros(N, dtype=bool)
    rf = ctx.root_factor
    for offset in range(int(np.max(bmax[good] - bmin[good])) + 1 if np.any(good) else 0):
        b = bmax - offset
        k = b + scale
        rows = np.nonzero(pending & (b >= bmin) & (k >= 0) & (k <= MAX_LEVEL))[0]
        if rows.size == 0:
            continue
        br = b[rows]
        u = np.ldexp(X[rows], br[:, None])
        v = np.floor(u)
        on_edge = np.any(u == v, axis=1)
        saw_boundary[rows[on_edge]] = True
        sel = ~on_edge
        rows, br, v = rows[sel], br[sel], v[sel]
        if rows.size == 0:
            continue
        centers = np.ldexp(v + 0.5, -br[:, None])
        diam = rf * np.ldexp(1.0, -br)
        ok = ctx.interior_many(centers) & ~ctx.subdivided_many(centers, diam)
        kr = br + scale
        deep = kr > 0
        if np.any(deep & ok):
            idx = np.nonzero(deep & ok)[0]
            pv = np.floor(v[idx] / 2.0)
            pc = np.ldexp(pv + 0.5, -(br[idx, None] - 1))
            ok[idx] = ctx.subdivided_many(pc, 2.0 * diam[idx])
        for t in np.nonzero(~deep & ok)[0]:
            ok[t] = in_root_mesh(ctx, ctx.cube(0, v[t]))
        hit = rows[ok]
        levels[hit] = kr[ok]
        vertices[hit] = v[ok].astype(np.int64)
        status[hit] = _OK
        pending[hit] = False
    status[pending & saw_boundary] = _ON_BOUNDARY
    return levels, vertices, status


def locate_many(ctx: WhitneyContext, X) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Locate many points at once.

    Returns ``(levels, vertices, ok)``; rows with ``ok == False`` were on a
    cube boundary, too close to ``∂K``, or outside ``K°``.
    """
    X = ctx.body._points(X)
    levels, vertices, status = _locate_rows(ctx, X)
    return levels, vertices, status == _OK


def locate_cube(ctx: WhitneyContext, x) -> DyadicCube:
    """The Whitney cube containing ``x`` in its interior."""
    x = ctx.body._point(x)
    ctx.body.lp_distance_to_boundary(x, ctx.p)  # raises DomainError / MarginError
    levels, vertices, status = _locate_rows(ctx, x[None, :])
    s = status[0]
    if s == _OK:
        return ctx.cube(int(levels[0]), vertices[0].tolist())
    if s == _ON_BOUNDARY:
        raise BoundaryPointError(f"{x.tolist()} lies on a dyadic cube boundary")
    raise LocateError(f"no Whitney cube found for {x.tolist()}")


class Decomposition(NamedTuple):
    complete: list[DyadicCube]
    frontier: list[DyadicCube]


def _root_cubes(ctx: WhitneyContext) -> list[DyadicCube]:
    roots = []
    for v in product((-1, 0), repeat=ctx.dim):
        Q = ctx.cube(0, v)
        if ctx.body.intersects_box(Q.lower, Q.upper) and in_root_mesh(ctx, Q):
            roots.append(Q)
    return roots


def enumerate_cubes(ctx: WhitneyContext, a_max: int) -> Decomposition:
    """All Whitney cubes of level <= a_max, plus the subdivided cubes at level a_max.

    Subdivided cubes are explored only if they meet ``K°``; cubes whose
    centre lies outside ``K`` are still explored, since their children can
    be Whitney cubes.
    """
    if a_max < 0:
        raise ValueError("a_max must be non-negative")
    n, scale, rf = ctx.dim, ctx.scale, ctx.root_factor
    complete: list[DyadicCube] = []
    frontier: list[DyadicCube] = []
    offsets = np.array(list(product((0, 1), repeat=n)), dtype=np.int64)
    current = np.array([Q.vertex for Q in _root_cubes(ctx)], dtype=np.int64).reshape(-1, n)
    for k in range(a_max + 1):
        if current.size == 0:
            break
        e = scale - k
        centers = np.ldexp(current + 0.5, e)
        diam = np.full(len(current), rf * math.ldexp(1.0, e))
        sub = ctx.subdivided_many(centers, diam)
        inside = ctx.interior_many(centers)
        final = inside & ~sub
        complete.extend(DyadicCube(k, tuple(v), scale) for v in current[final].tolist())
        keep = sub.copy()
        outside_idx = np.nonzero(sub & ~inside)[0]
        if outside_idx.size:
            lo = np.ldexp(current[outside_idx].astype(float), e)
            hi = np.ldexp(current[outside_idx] + 1.0, e)
            keep[outside_idx] = ctx.body.intersects_boxes_many(lo, hi)
        nxt = current[keep]
        if k == a_max:
            frontier.extend(DyadicCube(k, tuple(v), scale) for v in nxt.tolist())
            break
        current = (2 * nxt[:, None, :] + offsets[None, :, :]).reshape(-1, n)
    complete.sort()
    frontier.sort()
    return Decomposition(complete, frontier)


class CubeIndex:
    """Exact lookup structure over a set of Whitney cubes."""

    def __init__(self, cubes, frontier=()):
        self.cubes = list(cubes)
        self._key = {(Q.level, Q.vertex): Q for Q in self.cubes}
        self._frontier = {(Q.level, Q.vertex) for Q in frontier}
        self.max_level = max((Q.level for Q in self.cubes), default=-1)
        self.levels = sorted({Q.level for Q in self.cubes})

    def __contains__(self, Q: DyadicCube) -> bool:
        return (Q.level, Q.vertex) in self._key

    def __len__(self):
        return len(self.cubes)

    def get(self, level, vertex):
        return self._key.get((level, tuple(vertex)))

    def find(self, x) -> DyadicCube | None:
        """The indexed cube whose closure contains ``x`` (None if it is unexplored)."""
        if not self.cubes:
            return None
        scale = self.cubes[0].scale
        x = np.asarray(x, dtype=float)
        for k in self.levels:
            v = tuple(int(t) for t in np.floor(np.ldexp(x, k - scale)))
            Q = self._key.get((k, v))
            if Q is not None:
                return Q
        return None

    def find_frontier(self, x, level: int, scale: int) -> bool:
        v = tuple(int(t) for t in np.floor(np.ldexp(np.asarray(x, dtype=float), level - scale)))
        return (level, v) in self._frontier

    def facet_neighbors(self, Q: DyadicCube) -> list[tuple[DyadicCube, float]]:
        """Cubes sharing a facet piece with ``Q`` and the exact shared (n-1)-volume.

        Relies on abutting Whitney cubes differing by at most one level; a
        facet whose far side is not resolved by indexed cubes raises KeyError.
        """
        n, k, v = Q.dim, Q.level, Q.vertex
        full = math.ldexp(1.0, Q.side_exponent * (n - 1))
        out = []
        for j in range(n):
            for sgn in (-1, 1):
                w = list(v)
                w[j] += sgn
                same = self._key.get((k, tuple(w)))
                if same is not None:
                    out.append((same, full))
                    continue
                big = self._key.get((k - 1, tuple(t >> 1 for t in w))) if k > 0 else None
                if big is not None:
                    out.append((big, full))
                    continue
                kids = []
                for offs in product((0, 1), repeat=n - 1):
                    c = [2 * t for t in w]
                    it = iter(offs)
                    for i in range(n):
                        c[i] += (0 if sgn > 0 else 1) if i == j else next(it)
                    kid = self._key.get((k + 1, tuple(c)))
                    if kid is None:
                        break
                    kids.append(kid)
                else:
                    piece = full / 2 ** (n - 1)
                    out.extend((kid, piece) for kid in kids)
                    continue
                raise KeyError(f"facet ({j}, {sgn:+d}) of {Q} is not resolved by indexed cubes")
        return out
