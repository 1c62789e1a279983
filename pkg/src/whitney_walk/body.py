"""Convex bodies given by oracles, plus closed-form test bodies.

Every body answers membership and reports an outer radius ``R_inf`` with
``K ⊆ R_inf · B_inf``.  The closed-form bodies (:class:`AxisBox`,
:class:`LpBall`, :class:`HPolytope`) also answer l_p distance queries
exactly; :class:`MembershipBody` only has a membership callable and answers
l_1 queries by binary search along coordinate rays.

Distances are always taken to the complement of the open interior, so a
point outside (or on the boundary of) ``K`` has distance zero.
"""

from __future__ import annotations

import json
import math
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.optimize import linprog
from scipy.special import gammaln

from .errors import (
    BodySpecError,
    DomainError,
    MarginError,
    UnsupportedCapability,
)

INF = math.inf
DEFAULT_PRECISION_BITS = 52


def parse_p(value) -> float:
    """Parse a norm index: a number >= 1, or ``"inf"``."""
    if isinstance(value, str):
        v = value.strip().lower()
        if v in ("inf", "infinity", "∞"):
            return INF
        value = float(v)
    p = float(value)
    if math.isnan(p) or p < 1:
        raise ValueError(f"norm index must be >= 1 or inf, got {value!r}")
    return p


def format_p(p: float) -> str:
    if p == INF:
        return "inf"
    return str(int(p)) if float(p).is_integer() else repr(float(p))


def dual_exponent(p: float) -> float:
    if p == 1:
        return INF
    if p == INF:
        return 1.0
    return p / (p - 1.0)


def norm_root(n: int, p: float) -> float:
    """``n ** (1/p)``, with ``n ** (1/inf) == 1`` exactly."""
    if p == INF:
        return 1.0
    if p == 1:
        return float(n)
    return float(n) ** (1.0 / p)


def lp_norm(v, p: float, axis=-1):
    return np.linalg.norm(np.asarray(v, dtype=float), ord=p, axis=axis)


class ConvexBody:
    """Interface shared by all bodies.

    Subclasses implement :meth:`contains` and :meth:`_gap`, the latter
    returning the l_p distance to the complement of the interior for a batch
    of points (values <= 0 for points not in the interior).
    """

    dim: int
    precision_bits: int = DEFAULT_PRECISION_BITS
    kind = "abstract"

    # -- helpers -----------------------------------------------------------
    def _point(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"expected a point of dimension {self.dim}, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValueError("point has non-finite coordinates")
        return x

    def _points(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.dim:
            raise ValueError(f"expected an (N, {self.dim}) array, got shape {X.shape}")
        return X

    # -- oracle surface ----------------------------------------------------
    def contains(self, x) -> bool:
        raise NotImplementedError

    def contains_many(self, X) -> np.ndarray:
        X = self._points(X)
        return np.fromiter((self.contains(x) for x in X), dtype=bool, count=len(X))

    @property
    def outer_radius(self) -> float:
        """``R_inf`` with ``K ⊆ R_inf · B_inf``."""
        raise NotImplementedError

    def inner_radius(self, p: float) -> float:
        """Largest ``r`` with ``r · B_p ⊆ K`` (balls centred at the origin)."""
        origin = np.zeros(self.dim)
        return max(0.0, float(self._gap(origin[None, :], p)[0]))

    def _gap(self, X: np.ndarray, p: float) -> np.ndarray:
        raise NotImplementedError

    def boundary_distance_many(self, X, p: float) -> np.ndarray:
        """Distance to ``R^n \\ K°`` for each row of ``X`` (zero outside)."""
        return np.maximum(self._gap(self._points(X), p), 0.0)

    def lp_distance_to_boundary(self, x, p: float) -> float:
        x = self._point(x)
        d = float(self._gap(x[None, :], p)[0])
        if not d > 0:
            raise DomainError("point is not in the interior of the body")
        return d

    def lp_distance_exceeds(self, x, gamma: float, p: float) -> bool:
        """True iff ``dist_p(x, R^n \\ K°) > gamma``."""
        x = self._point(x)
        if not math.isfinite(gamma):
            raise ValueError("gamma must be finite")
        return bool(self._gap(x[None, :], p)[0] > gamma)

    def chord_endpoints(self, x, j: int, tol: float | None = None) -> tuple[float, float]:
        x = self._point(x)
        tm, tp = self.chord_endpoints_many(x[None, :], np.array([j]))
        return float(tm[0]), float(tp[0])

    def chord_endpoints_many(self, X, j) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def intersects_box(self, lower, upper) -> bool:
        """Whether the closed box ``[lower, upper]`` meets ``K°``.

        May over-approximate (answer True) but never under-approximates.
        """
        R = self.outer_radius
        return bool(np.all(np.asarray(lower) < R) and np.all(np.asarray(upper) > -R))

    def intersects_boxes_many(self, lower, upper) -> np.ndarray:
        return np.array([self.intersects_box(lo, hi) for lo, hi in zip(lower, upper)], dtype=bool)

    def within_distance(self, x, radius: float, p: float) -> bool:
        """Whether ``dist_p(x, K) <= radius`` (distance to the set, not its boundary)."""
        raise NotImplementedError

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        R = self.outer_radius
        return -R * np.ones(self.dim), R * np.ones(self.dim)

    @property
    def volume(self) -> float | None:
        return None

    @property
    def exact_distances(self) -> bool:
        return True

    def interior_point(self) -> np.ndarray:
        return np.zeros(self.dim)

    def to_dict(self) -> dict:
        raise NotImplementedError


class AxisBox(ConvexBody):
    """The box ``[lower, upper]``."""

    kind = "box"

    def __init__(self, lower, upper, precision_bits: int = DEFAULT_PRECISION_BITS):
        self.lower = np.asarray(lower, dtype=float)
        self.upper = np.asarray(upper, dtype=float)
        if self.lower.ndim != 1 or self.lower.shape != self.upper.shape or self.lower.size == 0:
            raise ValueError("lower and upper must be equal-length vectors")
        if not np.all(self.lower < self.upper):
            raise ValueError("need lower < upper componentwise")
        self.dim = self.lower.size
        self.precision_bits = precision_bits

    @classmethod
    def cube(cls, n: int, radius: float) -> AxisBox:
        return cls(-radius * np.ones(n), radius * np.ones(n))

    def contains(self, x) -> bool:
        x = self._point(x)
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))

    def contains_many(self, X) -> np.ndarray:
        X = self._points(X)
        return np.all((X >= self.lower) & (X <= self.upper), axis=1)

    @property
    def outer_radius(self) -> float:
        return float(max(np.max(np.abs(self.lower)), np.max(np.abs(self.upper))))

    def _gap(self, X, p):
        # leaving a box means crossing one face, at the same cost in every l_p
        return np.min(np.minimum(X - self.lower, self.upper - X), axis=1)

    def chord_endpoints_many(self, X, j):
        X = self._points(X)
        j = np.broadcast_to(np.asarray(j), (len(X),))
        rows = np.arange(len(X))
        xj = X[rows, j]
        if np.any(self._gap(X, INF) <= 0):
            raise DomainError("chord requested from a point not in the interior")
        return self.lower[j] - xj, self.upper[j] - xj

    def intersects_box(self, lower, upper) -> bool:
        return bool(np.all(np.asarray(lower) < self.upper) and np.all(np.asarray(upper) > self.lower))

    def intersects_boxes_many(self, lower, upper):
        return np.all((lower < self.upper) & (upper > self.lower), axis=1)

    def within_distance(self, x, radius, p):
        x = self._point(x)
        excess = x - np.clip(x, self.lower, self.upper)
        return bool(lp_norm(excess, p) <= radius)

    def bounding_box(self):
        return self.lower.copy(), self.upper.copy()

    @property
    def volume(self) -> float:
        return float(np.prod(self.upper - self.lower))

    def interior_point(self):
        return 0.5 * (self.lower + self.upper)

    def to_dict(self):
        return {"type": "box", "lower": self.lower.tolist(), "upper": self.upper.tolist()}


class LpBall(ConvexBody):
    """``{y : ||y - center||_s <= radius}`` for an exponent ``s`` in ``[1, inf]``.

    l_p distances are exact for ``p`` in ``{1, inf, s}``; when ``s`` is 1 or
    inf every ``p`` is supported (the ball is then a polytope).
    """

    kind = "lp_ball"

    def __init__(self, center, radius: float, exponent, precision_bits: int = DEFAULT_PRECISION_BITS):
        self.center = np.asarray(center, dtype=float)
        if self.center.ndim != 1 or self.center.size == 0:
            raise ValueError("center must be a non-empty vector")
        self.radius = float(radius)
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        self.exponent = parse_p(exponent)
        self.dim = self.center.size
        self.precision_bits = precision_bits

    def _w(self, X):
        return np.abs(X - self.center)

    def contains(self, x) -> bool:
        x = self._point(x)
        return bool(lp_norm(x - self.center, self.exponent) <= self.radius)

    def contains_many(self, X):
        X = self._points(X)
        return lp_norm(X - self.center, self.exponent, axis=1) <= self.radius

    @property
    def outer_radius(self) -> float:
        return float(np.max(np.abs(self.center)) + self.radius)

    def _gap(self, X, p):
        s, rho, n = self.exponent, self.radius, self.dim
        a = self._w(X)
        if s == INF:
            return rho - np.max(a, axis=1)
        if s == 1:
            # the nearest facet has normal sign(w), of dual norm n^(1/q)
            return (rho - np.sum(a, axis=1)) / norm_root(n, dual_exponent(p))
        if p == s:
            return rho - lp_norm(a, s, axis=1)
        if p == 1:
            # worst l_1 move is along a single axis, away from the centre
            if s == 2:
                rest = rho * rho - np.sum(a * a, axis=1)[:, None] + a * a
                h = np.sqrt(np.maximum(rest, 0.0))
                t = np.where(rest >= 0, h - a, -a)
            else:
                rest = rho**s - np.sum(a**s, axis=1)[:, None] + a**s
                t = np.where(rest >= 0, np.maximum(rest, 0.0) ** (1.0 / s) - a, -a)
            out = np.min(t, axis=1)
            inside = lp_norm(a, s, axis=1) < rho
            return np.where(inside, out, -1.0)
        if p == INF:
            # worst l_inf move pushes every coordinate away from the centre
            if s == 2:
                sa = np.sum(a, axis=1)
                disc = sa * sa - n * (np.sum(a * a, axis=1) - rho * rho)
                t = (-sa + np.sqrt(np.maximum(disc, 0.0))) / n
                inside = np.sum(a * a, axis=1) < rho * rho
                return np.where(inside, t, -1.0)
            lo = np.zeros(len(a))
            hi = np.full(len(a), rho)
            inside = lp_norm(a, s, axis=1) < rho
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                big = lp_norm(a + mid[:, None], s, axis=1) >= rho
                hi = np.where(big, mid, hi)
                lo = np.where(big, lo, mid)
            return np.where(inside, lo, -1.0)
        raise UnsupportedCapability(
            f"l_{format_p(p)} distance to an l_{format_p(s)} ball has no closed form here"
        )

    def chord_endpoints_many(self, X, j):
        X = self._points(X)
        j = np.broadcast_to(np.asarray(j), (len(X),))
        rows = np.arange(len(X))
        w = X - self.center
        s, rho = self.exponent, self.radius
        if s == INF:
            others = np.abs(w).copy()
            others[rows, j] = 0.0
            h = np.where(np.max(others, axis=1) < rho, rho, np.nan)
        else:
            aw = np.abs(w) ** s
            rest = rho**s - (np.sum(aw, axis=1) - aw[rows, j])
            h = np.where(rest > 0, np.maximum(rest, 0.0) ** (1.0 / s), np.nan)
        wj = w[rows, j]
        tm, tp = -h - wj, h - wj
        if np.any(~(tm < 0)) or np.any(~(tp > 0)):
            raise DomainError("chord requested from a point not in the interior")
        return tm, tp

    def intersects_box(self, lower, upper) -> bool:
        nearest = np.clip(self.center, lower, upper)
        return bool(lp_norm(nearest - self.center, self.exponent) < self.radius)

    def intersects_boxes_many(self, lower, upper):
        nearest = np.clip(self.center, lower, upper)
        return lp_norm(nearest - self.center, self.exponent, axis=1) < self.radius

    def within_distance(self, x, radius, p):
        x = self._point(x)
        s = self.exponent
        w = np.abs(x - self.center)
        if s == INF:
            return bool(lp_norm(np.maximum(w - self.radius, 0.0), p) <= radius)
        if p == s:
            return bool(lp_norm(w, s) - self.radius <= radius)
        return _cvx_distance_to_set(self, x, p) <= radius

    def bounding_box(self):
        return self.center - self.radius, self.center + self.radius

    @property
    def volume(self) -> float:
        n, s = self.dim, self.exponent
        if s == INF:
            return (2 * self.radius) ** n
        logv = n * (math.log(2.0) + gammaln(1 + 1 / s)) - gammaln(1 + n / s) + n * math.log(self.radius)
        return float(math.exp(logv))

    def interior_point(self):
        return self.center.copy()

    def to_dict(self):
        return {
            "type": "lp_ball",
            "center": self.center.tolist(),
            "radius": self.radius,
            "p": format_p(self.exponent) if self.exponent == INF else self.exponent,
        }


class HPolytope(ConvexBody):
    """``{y : A y <= b}``, bounded with nonempty interior."""

    kind = "hpolytope"

    def __init__(self, A, b, interior_point=None, precision_bits: int = DEFAULT_PRECISION_BITS):
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        self.b = np.asarray(b, dtype=float).ravel()
        m, n = self.A.shape
        if self.b.shape != (m,):
            raise ValueError("A and b have inconsistent shapes")
        if np.any(np.all(self.A == 0, axis=1)):
            raise ValueError("degenerate constraint: a zero normal row")
        self.dim = n
        self.precision_bits = precision_bits
        self._qnorms: dict[float, np.ndarray] = {}
        if interior_point is None:
            interior_point = self._chebyshev_center()
        self._interior = np.asarray(interior_point, dtype=float)
        if self._interior.shape != (n,) or not np.all(self.A @ self._interior < self.b):
            raise ValueError("interior_point does not strictly satisfy every constraint")

    @classmethod
    def simplex(cls, n: int, shift: float = 0.25) -> HPolytope:
        """``{y : y_i >= -shift, sum(y) <= 1 - n * shift}``, a translated standard simplex."""
        A = np.vstack([-np.eye(n), np.ones((1, n))])
        b = np.concatenate([shift * np.ones(n), [1.0 - n * shift]])
        return cls(A, b, interior_point=np.full(n, 1.0 / (n + 1) - shift))

    def _chebyshev_center(self):
        m, n = self.A.shape
        norms = np.linalg.norm(self.A, axis=1)
        c = np.zeros(n + 1)
        c[-1] = -1.0
        A_ub = np.hstack([self.A, norms[:, None]])
        res = linprog(c, A_ub=A_ub, b_ub=self.b, bounds=[(None, None)] * n + [(0, None)], method="highs")
        if res.status != 0 or res.x[-1] <= 0:
            raise ValueError("polytope is empty, unbounded, or has empty interior")
        return res.x[:n]

    def _qnorm(self, p):
        q = dual_exponent(p)
        if q not in self._qnorms:
            self._qnorms[q] = lp_norm(self.A, q, axis=1)
        return self._qnorms[q]

    def contains(self, x) -> bool:
        x = self._point(x)
        return bool(np.all(self.A @ x <= self.b))

    def contains_many(self, X):
        X = self._points(X)
        return np.all(X @ self.A.T <= self.b, axis=1)

    @cached_property
    def _bbox(self):
        n = self.dim
        lo, hi = np.empty(n), np.empty(n)
        for i in range(n):
            c = np.zeros(n)
            c[i] = 1.0
            r1 = linprog(c, A_ub=self.A, b_ub=self.b, bounds=[(None, None)] * n, method="highs")
            r2 = linprog(-c, A_ub=self.A, b_ub=self.b, bounds=[(None, None)] * n, method="highs")
            if r1.status != 0 or r2.status != 0:
                raise ValueError("polytope is unbounded")
            lo[i], hi[i] = r1.fun, -r2.fun
        return lo, hi

    def bounding_box(self):
        lo, hi = self._bbox
        return lo.copy(), hi.copy()

    @property
    def outer_radius(self) -> float:
        lo, hi = self._bbox
        return float(max(np.max(np.abs(lo)), np.max(np.abs(hi))))

    def _gap(self, X, p):
        slack = self.b - X @ self.A.T
        return np.min(slack / self._qnorm(p), axis=1)

    def chord_endpoints_many(self, X, j):
        X = self._points(X)
        j = np.broadcast_to(np.asarray(j), (len(X),))
        slack = self.b - X @ self.A.T
        if np.any(slack <= 0):
            raise DomainError("chord requested from a point not in the interior")
        coef = self.A[:, j].T
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = slack / coef
        tp = np.min(np.where(coef > 0, ratio, np.inf), axis=1)
        tm = np.max(np.where(coef < 0, ratio, -np.inf), axis=1)
        if not (np.all(np.isfinite(tp)) and np.all(np.isfinite(tm))):
            raise DomainError("polytope is unbounded along a coordinate axis")
        return tm, tp

    def intersects_box(self, lower, upper) -> bool:
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        mid, half = 0.5 * (lower + upper), 0.5 * (upper - lower)
        centre_val = self.A @ mid
        spread = np.abs(self.A) @ half
        if np.any(centre_val - spread >= self.b):
            return False
        if np.all(centre_val + spread < self.b):
            return True
        n = self.dim
        corners = mid + half * _sign_corners(n)
        if np.any(np.all(corners @ self.A.T < self.b, axis=1)):
            return True
        # maximise a uniform slack t over the box
        c = np.zeros(n + 1)
        c[-1] = -1.0
        A_ub = np.hstack([self.A, np.ones((len(self.b), 1))])
        bounds = list(zip(lower, upper)) + [(None, 1.0)]
        res = linprog(c, A_ub=A_ub, b_ub=self.b, bounds=bounds, method="highs")
        return bool(res.status == 0 and -res.fun > 0)

    def intersects_boxes_many(self, lower, upper):
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        mid, half = 0.5 * (lower + upper), 0.5 * (upper - lower)
        centre_val = mid @ self.A.T
        spread = half @ np.abs(self.A).T
        out = np.all(centre_val + spread < self.b, axis=1)
        separated = np.any(centre_val - spread >= self.b, axis=1)
        for i in np.nonzero(~out & ~separated)[0]:
            out[i] = self.intersects_box(lower[i], upper[i])
        return out

    def within_distance(self, x, radius, p):
        x = self._point(x)
        if self.contains(x):
            return True
        return _cvx_distance_to_set(self, x, p) <= radius

    @cached_property
    def vertices(self) -> np.ndarray:
        from scipy.spatial import HalfspaceIntersection

        hs = HalfspaceIntersection(np.hstack([self.A, -self.b[:, None]]), self._interior)
        return hs.intersections

    @property
    def volume(self) -> float:
        from scipy.spatial import ConvexHull

        return float(ConvexHull(self.vertices).volume)

    def interior_point(self):
        return self._interior.copy()

    def to_dict(self):
        return {
            "n": self.dim,
            "A": self.A.tolist(),
            "b": self.b.tolist(),
            "interior_point": self._interior.tolist(),
        }


class MembershipBody(ConvexBody):
    """A body known only through a membership callable.

    Only l_1 queries are answered, by ``L + O(1)`` bisection steps along the
    ``2n`` coordinate rays.  Points closer to the boundary than
    ``2**(7 - L) * R_inf`` are refused with :class:`MarginError`, since the
    bisection can no longer certify a small multiplicative error there.
    """

    kind = "membership"

    def __init__(self, membership, dim: int, outer_radius: float, precision_bits: int = DEFAULT_PRECISION_BITS,
                 volume: float | None = None):
        self._membership = membership
        self.dim = int(dim)
        self._R = float(outer_radius)
        self.precision_bits = int(precision_bits)
        self._volume = volume

    def contains(self, x) -> bool:
        return bool(self._membership(self._point(x)))

    @property
    def outer_radius(self):
        return self._R

    @property
    def volume(self):
        return self._volume

    @property
    def exact_distances(self) -> bool:
        return False

    @property
    def min_margin(self) -> float:
        return 2.0 ** (7 - self.precision_bits) * self._R

    def _ray_exit(self, x, j, sign) -> float:
        lo, hi = 0.0, 2.0 * self._R + abs(x[j])
        y = x.copy()
        for _ in range(self.precision_bits + 2):
            mid = 0.5 * (lo + hi)
            y[j] = x[j] + sign * mid
            if self._membership(y):
                lo = mid
            else:
                hi = mid
            if hi - lo <= 0:
                break
        return lo

    def _require_l1(self, p):
        if p != 1:
            raise UnsupportedCapability("membership-only bodies answer l_1 distance queries only")

    def _gap(self, X, p):
        self._require_l1(p)
        out = np.empty(len(X))
        for k, x in enumerate(X):
            out[k] = self._l1_distance(x) if self._membership(x) else 0.0
        return out

    def _l1_distance(self, x) -> float:
        return min(self._ray_exit(x, j, s) for j in range(self.dim) for s in (-1.0, 1.0))

    def lp_distance_to_boundary(self, x, p):
        self._require_l1(p)
        x = self._point(x)
        if not self._membership(x):
            raise DomainError("point is not in the body")
        d = self._l1_distance(x)
        if d < self.min_margin:
            raise MarginError(f"point within {d:.3g} of the boundary; below the precision margin")
        return d

    def boundary_distance_many(self, X, p):
        self._require_l1(p)
        X = self._points(X)
        out = np.empty(len(X))
        for k, x in enumerate(X):
            if not self._membership(x):
                out[k] = 0.0
                continue
            d = self._l1_distance(x)
            out[k] = d if d >= self.min_margin else np.nan
        return out

    def lp_distance_exceeds(self, x, gamma, p):
        self._require_l1(p)
        x = self._point(x)
        if not math.isfinite(gamma):
            raise ValueError("gamma must be finite")
        if gamma < 0:
            return bool(self._membership(x))
        y = x.copy()
        for j in range(self.dim):
            for s in (-1.0, 1.0):
                y[j] = x[j] + s * gamma
                if not self._membership(y):
                    return False
            y[j] = x[j]
        return bool(self._membership(x))

    def inner_radius(self, p):
        self._require_l1(p)
        return self.lp_distance_to_boundary(np.zeros(self.dim), 1)

    def chord_endpoints_many(self, X, j):
        X = self._points(X)
        j = np.broadcast_to(np.asarray(j), (len(X),))
        tm, tp = np.empty(len(X)), np.empty(len(X))
        for k, x in enumerate(X):
            if not self._membership(x):
                raise DomainError("chord requested from a point not in the body")
            tp[k] = self._ray_exit(x, j[k], 1.0)
            tm[k] = -self._ray_exit(x, j[k], -1.0)
        return tm, tp

    def within_distance(self, x, radius, p):
        x = self._point(x)
        if self._membership(x):
            return True
        y = x.copy()
        for j in range(self.dim):
            for s in (-1.0, 1.0):
                y[j] = x[j] + s * radius
                if self._membership(y):
                    return True
            y[j] = x[j]
        return False

    def to_dict(self):
        raise BodySpecError("type", "membership-only bodies cannot be serialized")


def _sign_corners(n: int) -> np.ndarray:
    idx = np.arange(2**n)[:, None]
    return np.where((idx >> np.arange(n)) & 1, 1.0, -1.0)


def _cvx_distance_to_set(body, x, p) -> float:
    import cvxpy as cp

    y = cp.Variable(body.dim)
    if isinstance(body, HPolytope):
        cons = [body.A @ y <= body.b]
    else:
        cons = [cp.norm(y - body.center, body.exponent) <= body.radius]
    prob = cp.Problem(cp.Minimize(cp.norm(y - x, p)), cons)
    prob.solve()
    return float(prob.value)


# -- JSON ---------------------------------------------------------------------

def _vector(d, key, n=None):
    if key not in d:
        raise BodySpecError(key, "missing")
    try:
        v = np.asarray(d[key], dtype=float)
    except (TypeError, ValueError):
        raise BodySpecError(key, "not a numeric vector") from None
    if v.ndim != 1 or (n is not None and v.size != n) or not np.all(np.isfinite(v)):
        raise BodySpecError(key, f"expected a finite vector of length {n if n is not None else '>= 1'}")
    return v


def body_from_dict(d: dict) -> ConvexBody:
    if not isinstance(d, dict):
        raise BodySpecError("<root>", "body description must be a JSON object")
    kind = d.get("type")
    if kind is None and "A" in d:
        kind = "hpolytope"
    bits = d.get("precision_bits", DEFAULT_PRECISION_BITS)
    if kind == "box":
        lo = _vector(d, "lower")
        hi = _vector(d, "upper", lo.size)
        if not np.all(lo < hi):
            raise BodySpecError("upper", "must exceed lower componentwise")
        return AxisBox(lo, hi, precision_bits=bits)
    if kind == "lp_ball":
        c = _vector(d, "center")
        try:
            r = float(d["radius"])
        except KeyError:
            raise BodySpecError("radius", "missing") from None
        except (TypeError, ValueError):
            raise BodySpecError("radius", "not a number") from None
        if not r > 0:
            raise BodySpecError("radius", "must be positive")
        try:
            s = parse_p(d.get("p", 2))
        except ValueError as e:
            raise BodySpecError("p", str(e)) from None
        return LpBall(c, r, s, precision_bits=bits)
    if kind == "hpolytope":
        try:
            A = np.asarray(d["A"], dtype=float)
        except KeyError:
            raise BodySpecError("A", "missing") from None
        except (TypeError, ValueError):
            raise BodySpecError("A", "not a numeric matrix") from None
        n = d.get("n", A.shape[1] if A.ndim == 2 else None)
        if A.ndim != 2 or A.shape[1] != n:
            raise BodySpecError("A", f"expected rows of length n={n}")
        if np.any(np.all(A == 0, axis=1)):
            raise BodySpecError("A", "contains a zero row")
        b = _vector(d, "b", A.shape[0])
        ip = _vector(d, "interior_point", n) if "interior_point" in d else None
        if ip is not None and not np.all(A @ ip < b):
            raise BodySpecError("interior_point", "does not strictly satisfy A x < b")
        try:
            return HPolytope(A, b, interior_point=ip, precision_bits=bits)
        except ValueError as e:
            raise BodySpecError("A", str(e)) from None
    raise BodySpecError("type", f"unknown body type {kind!r}")


def load_body(path) -> ConvexBody:
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise BodySpecError("<json>", str(e)) from None
    return body_from_dict(d)


def save_body(body: ConvexBody, path) -> None:
    Path(path).write_text(json.dumps(body.to_dict(), indent=1) + "\n")
