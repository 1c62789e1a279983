"""Sample-based checks: binned TV distance, warmth, chi-square uniformity, mixing curves.

TV for the cube chain is measured over a :class:`WhitneyHistogram`, whose
bins are the Whitney cubes up to a depth plus one remainder bin holding
everything finer; the reference masses are exact.  Point samples are binned
on a regular grid over the body's bounding box, with grid-cell volumes
clipped to the body estimated by Monte Carlo.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy import stats

from .body import ConvexBody
from .chains import make_rng, mp_step_many
from .whitney import DyadicCube, WhitneyContext, enumerate_cubes

BIN_VOLUME_PROBES = 100_000
MIN_EXPECTED = 5.0


# ------------------------------------------------------------------ burn-in


def mp_burn_in(n: int, p: float, aspect: float, warmth: float, eps: float, C: float = 1.0) -> int:
    """Default step budget for the cube chain: ``C n^(4 + 2/p) (R/r)^2 log(M/eps)``."""
    expo = 4.0 + (0.0 if math.isinf(p) else 2.0 / p)
    return max(1, math.ceil(C * n**expo * aspect**2 * math.log(max(warmth, 1.0) / eps)))


def chr_burn_in(n: int, aspect: float, warmth: float, eps: float, C: float = 1.0) -> int:
    """Default step budget for coordinate hit-and-run: ``C n^9 (R/r)^2 log(M/eps)``."""
    return max(1, math.ceil(C * n**9 * aspect**2 * math.log(max(warmth, 1.0) / eps)))


def chr_point_burn_in(n: int, aspect: float, R: float, delta: float, eps: float, C: float = 1.0) -> int:
    """Budget for a start at a point ``delta`` from the boundary: the warm budget with ``log M`` replaced by ``log(R/delta)``."""
    return max(1, math.ceil(C * n**9 * aspect**2 * (math.log(R / delta) + math.log(1.0 / eps))))


# -------------------------------------------------------- Whitney histogram


class TVEstimate(NamedTuple):
    tv: float
    stderr: float


@dataclass
class WhitneyHistogram:
    """Visit counts over Whitney cubes of level <= depth plus a remainder bin (last entry)."""

    cubes: list[DyadicCube]
    pi: np.ndarray
    depth: int
    counts: np.ndarray = None
    _pos: dict = field(default=None, repr=False)

    def __post_init__(self):
        if self.counts is None:
            self.counts = np.zeros(len(self.cubes) + 1, dtype=np.int64)
        if len(self.pi) != len(self.cubes) + 1:
            raise ValueError("pi needs one entry per cube plus the remainder")
        self._pos = {(Q.level, Q.vertex): i for i, Q in enumerate(self.cubes)}

    @classmethod
    def for_context(cls, ctx: WhitneyContext, depth: int, vol_k: float) -> WhitneyHistogram:
        cubes = enumerate_cubes(ctx, depth).complete
        vols = np.array([Q.volume for Q in cubes]) / vol_k
        rest = 1.0 - vols.sum()
        if rest < 0:
            raise ValueError("vol_k is smaller than the enumerated cube volume")
        return cls(cubes, np.append(vols, rest), depth)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def n_bins(self) -> int:
        return len(self.cubes) + 1

    def bin_of(self, levels, vertices) -> np.ndarray:
        rest = len(self.cubes)
        return np.array(
            [self._pos.get((int(k), tuple(v)), rest) for k, v in zip(levels, np.asarray(vertices).tolist())],
            dtype=np.int64,
        )

    def add(self, levels, vertices) -> WhitneyHistogram:
        self.counts += np.bincount(self.bin_of(levels, vertices), minlength=self.n_bins)
        return self

    def add_cubes(self, cubes) -> WhitneyHistogram:
        cubes = list(cubes)
        if cubes:
            self.add([Q.level for Q in cubes], [Q.vertex for Q in cubes])
        return self

    def empty_copy(self) -> WhitneyHistogram:
        return WhitneyHistogram(self.cubes, self.pi, self.depth)

    def merge(self, other: WhitneyHistogram) -> WhitneyHistogram:
        out = self.empty_copy()
        out.counts = self.counts + other.counts
        return out


def binned_tv(counts, pi) -> float:
    counts = np.asarray(counts, dtype=float)
    return 0.5 * float(np.abs(counts / counts.sum() - pi).sum())


def tv_estimate(hist, pi=None, bootstrap: int = 200, rng=None) -> TVEstimate:
    """Binned TV distance to the reference masses with a multinomial bootstrap standard error.

    Accepts a :class:`WhitneyHistogram` or a raw count vector plus ``pi``.
    """
    if isinstance(hist, WhitneyHistogram):
        counts, pi = hist.counts, hist.pi
    else:
        counts = np.asarray(hist)
        if pi is None:
            raise ValueError("pi is required with raw counts")
    pi = np.asarray(pi, dtype=float)
    total = int(np.sum(counts))
    if total <= 0:
        raise ValueError("histogram is empty")
    tv = binned_tv(counts, pi)
    if bootstrap <= 1:
        return TVEstimate(tv, math.nan)
    rng = make_rng(0 if rng is None else rng)
    freq = np.asarray(counts, dtype=float) / total
    boot = rng.multinomial(total, freq, size=bootstrap) / total
    se = float(np.std(0.5 * np.abs(boot - pi).sum(axis=1), ddof=1))
    return TVEstimate(tv, se)


# ------------------------------------------------------------------ warmth


@dataclass
class WarmthReport:
    m_hat: float
    scheme: str
    argmax: int


def warmth(counts, pi, scheme: str = "bins") -> WarmthReport:
    """Largest ratio of empirical to reference bin mass."""
    counts = np.asarray(counts, dtype=float)
    pi = np.asarray(pi, dtype=float)
    if counts.sum() <= 0:
        raise ValueError("no samples")
    ratio = np.where(pi > 0, counts / counts.sum() / np.where(pi > 0, pi, 1.0), 0.0)
    if np.any((pi <= 0) & (counts > 0)):
        ratio = np.where((pi <= 0) & (counts > 0), math.inf, ratio)
    k = int(np.argmax(ratio))
    return WarmthReport(float(ratio[k]), scheme, k)


# --------------------------------------------------------- grid uniformity


def grid_bins(points, lower, upper, grid: int) -> np.ndarray:
    """Flat grid-cell index of each point (cells split the box evenly along every axis)."""
    X = np.atleast_2d(np.asarray(points, dtype=float))
    lower, upper = np.asarray(lower, float), np.asarray(upper, float)
    idx = np.floor((X - lower) / (upper - lower) * grid).astype(np.int64)
    idx = np.clip(idx, 0, grid - 1)
    return np.ravel_multi_index(idx.T, (grid,) * X.shape[1])


_VOLUME_CACHE: dict = {}


def grid_cell_fractions(body: ConvexBody, grid: int, probes: int = BIN_VOLUME_PROBES, seed: int = 0):
    """Monte Carlo fraction of each grid cell (over the bounding box) lying inside the body.

    Returns ``(fractions, stderr)``, cached per body, grid and probe count.
    """
    key = (id(body), grid, probes, seed)
    if key in _VOLUME_CACHE and _VOLUME_CACHE[key][0] is body:
        return _VOLUME_CACHE[key][1]
    lower, upper = body.bounding_box()
    n = body.dim
    rng = make_rng(seed)
    width = (upper - lower) / grid
    cells = np.array(list(np.ndindex(*(grid,) * n)))
    frac = np.empty(len(cells))
    for c, cell in enumerate(cells):
        lo = lower + cell * width
        P = lo + rng.random((probes, n)) * width
        frac[c] = body.contains_many(P).mean()
    se = np.sqrt(frac * (1 - frac) / probes)
    _VOLUME_CACHE[key] = (body, (frac, se))
    return frac, se


@dataclass
class ChiSquareResult:
    statistic: float
    p_value: float
    dof: int
    bins_used: int
    pooled: int
    volume_stderr: float

    def __iter__(self):
        yield self.statistic
        yield self.p_value


def chi_square_uniformity(points, body: ConvexBody, grid: int = 4, probes: int = BIN_VOLUME_PROBES) -> ChiSquareResult:
    """Pearson test of ``points`` against the uniform law on ``body`` over a grid of cells.

    Cells whose expected count is below five are pooled into one bin.
    ``volume_stderr`` is the largest Monte Carlo error of a cell fraction.
    """
    X = np.atleast_2d(np.asarray(points, dtype=float))
    N = len(X)
    if N == 0:
        raise ValueError("no points")
    frac, se = grid_cell_fractions(body, grid, probes)
    lower, upper = body.bounding_box()
    obs = np.bincount(grid_bins(X, lower, upper, grid), minlength=len(frac)).astype(float)
    weight = frac / frac.sum()
    exp = N * weight
    small = exp < MIN_EXPECTED
    o = list(obs[~small])
    e = list(exp[~small])
    pooled = int(small.sum())
    if pooled:
        o.append(obs[small].sum())
        e.append(exp[small].sum())
        if e[-1] < MIN_EXPECTED and len(e) > 1:
            o[-2] += o.pop()
            e[-2] += e.pop()
    o, e = np.array(o), np.array(e)
    if len(e) < 2 or np.any(e < MIN_EXPECTED):
        raise ValueError(f"{N} points are too few for a {grid}-per-axis grid")
    stat = float(((o - e) ** 2 / np.where(e > 0, e, 1.0)).sum())
    if np.any((e == 0) & (o > 0)):
        stat = math.inf
    dof = len(e) - 1
    return ChiSquareResult(stat, float(stats.chi2.sf(stat, dof)), dof, len(e), pooled, float(se.max()))


# ----------------------------------------------------------- mixing curves


@dataclass
class MixingCurve:
    steps: list[int]
    tv: list[float]
    stderr: list[float]
    replicas: int
    seed: object = None

    def rows(self):
        return list(zip(self.steps, self.tv, self.stderr))


def mixing_curve(step_many: Callable, start, checkpoints, replicas: int, binner: Callable, pi, rng,
                 bootstrap: int = 200) -> MixingCurve:
    """Binned TV of ``replicas`` independent chains at each checkpoint.

    ``start(replicas, rng)`` draws the initial batch, ``step_many(batch, rng)``
    advances it one step and ``binner(batch)`` maps it to bin indices.
    """
    checkpoints = sorted(int(c) for c in checkpoints)
    if not checkpoints or checkpoints[0] < 0:
        raise ValueError("checkpoints must be non-negative")
    seed = rng if isinstance(rng, (int, np.integer)) else None
    rng = make_rng(rng)
    pi = np.asarray(pi, dtype=float)
    state = start(replicas, rng)
    t = 0
    out = MixingCurve([], [], [], replicas, seed)
    for c in checkpoints:
        while t < c:
            state = step_many(state, rng)
            t += 1
        counts = np.bincount(binner(state), minlength=len(pi))
        est = tv_estimate(counts, pi, bootstrap=bootstrap, rng=rng)
        out.steps.append(c)
        out.tv.append(est.tv)
        out.stderr.append(est.stderr)
    return out


def mp_mixing_curve(ctx: WhitneyContext, start: DyadicCube, checkpoints, replicas: int, hist: WhitneyHistogram,
                    rng, bootstrap: int = 200) -> MixingCurve:
    """Mixing curve of the cube chain from a point mass, binned over ``hist``."""

    def init(m, _rng):
        return np.full(m, start.level, dtype=np.int64), np.tile(np.array(start.vertex, dtype=np.int64), (m, 1))

    def step(state, r):
        return mp_step_many(ctx, state[0], state[1], r)

    return mixing_curve(step, init, checkpoints, replicas, lambda s: hist.bin_of(s[0], s[1]), hist.pi, rng,
                        bootstrap=bootstrap)


def first_crossing(curve: MixingCurve, eps: float) -> int | None:
    for s, tv in zip(curve.steps, curve.tv):
        if tv < eps:
            return s
    return None
