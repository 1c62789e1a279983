"""The finite auxiliary chain: Whitney cubes up to a depth plus one fused state.

All cubes of level <= ``a`` are kept as individual states and everything
finer is fused into ``Q_inf``.  Rows of unfused states come straight from the
cube chain's transition law; the fused row is filled in by detailed balance
so the matrix is reversible with respect to ``pi(Q) = vol(Q) / vol(K)``.

The module also computes conductances of cuts, an exhaustive conductance
profile for tiny chains, exact distance-to-stationarity curves, and the
half-cube experiment on ``[-1/2, 1/2]^n`` (counted exactly with fractions).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb

import numpy as np
from scipy import sparse

from .body import AxisBox, format_p, parse_p
from .chains import mp_transition_law
from .errors import InconsistentVolume, SizeError, UnsupportedCapability
from .whitney import CubeIndex, WhitneyContext, enumerate_cubes

FUSED = "Q_inf"
PROFILE_MAX_STATES = 22


@dataclass
class FiniteChain:
    """Explicit reversible chain; the last ``len(fused)`` states are fused labels."""

    states: list
    pi: np.ndarray
    P: np.ndarray | sparse.csr_matrix
    depth: int
    fused_volume: float = 0.0
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.states)

    @property
    def is_sparse(self) -> bool:
        return sparse.issparse(self.P)

    def index_of(self, state) -> int:
        return self._lookup[state]

    @property
    def _lookup(self):
        if "_lookup" not in self.__dict__:
            self.__dict__["_lookup"] = {s: i for i, s in enumerate(self.states)}
        return self.__dict__["_lookup"]

    def dense(self) -> np.ndarray:
        return self.P.toarray() if self.is_sparse else np.asarray(self.P)

    def step(self, mu: np.ndarray) -> np.ndarray:
        """One step of the distribution: ``mu P``."""
        return np.asarray(self.P.T @ mu) if self.is_sparse else mu @ self.P

    def row_sum_error(self) -> float:
        return float(np.max(np.abs(np.asarray(self.P.sum(axis=1)).ravel() - 1.0)))

    def stationarity_error(self) -> float:
        return float(np.max(np.abs(self.step(self.pi) - self.pi)))

    def balance_error(self) -> float:
        """``max |pi_i P_ij - pi_j P_ji|`` over all pairs."""
        if self.is_sparse:
            F = sparse.diags(self.pi) @ self.P
            D = (F - F.T).tocoo()
            return float(np.max(np.abs(D.data), initial=0.0))
        F = self.pi[:, None] * self.P
        return float(np.max(np.abs(F - F.T)))

    def holding(self) -> np.ndarray:
        return np.asarray(self.P.diagonal()).ravel()


def build_aux_chain(ctx: WhitneyContext, a: int, vol_k: float, *, use_sparse: bool = False) -> FiniteChain:
    """The chain on Whitney cubes of level <= ``a`` with finer cubes fused.

    ``vol_k`` must be the exact volume of the body.
    """
    dec = enumerate_cubes(ctx, a + 1)
    unfused = [Q for Q in dec.complete if Q.level <= a]
    index = CubeIndex(dec.complete, dec.frontier)
    m = len(unfused) + 1
    vols = np.array([Q.volume for Q in unfused])
    covered = float(vols.sum())
    if not vol_k > covered:
        raise InconsistentVolume(f"vol(K) = {vol_k!r} does not exceed the unfused cube volume {covered!r}")
    pi = np.append(vols / vol_k, 0.0)
    pi[-1] = 1.0 - pi[:-1].sum()
    if pi[-1] <= 0.0:
        raise InconsistentVolume("fused state has non-positive mass")

    pos = {Q: i for i, Q in enumerate(unfused)}
    rows, cols, vals = [], [], []
    to_fused = np.zeros(m - 1)
    for i, Q in enumerate(unfused):
        hold, law = mp_transition_law(index, Q)
        rows.append(i)
        cols.append(i)
        vals.append(hold)
        for nb, prob in law.items():
            j = pos.get(nb)
            if j is None:
                to_fused[i] += prob
            else:
                rows.append(i)
                cols.append(j)
                vals.append(prob)
    f = m - 1
    back = pi[:-1] * to_fused / pi[-1]
    nz = np.nonzero(to_fused)[0]
    rows += nz.tolist() + [f] * len(nz)
    cols += [f] * len(nz) + nz.tolist()
    vals += to_fused[nz].tolist() + back[nz].tolist()
    rows.append(f)
    cols.append(f)
    vals.append(1.0 - back.sum())
    P = sparse.csr_matrix((vals, (rows, cols)), shape=(m, m))
    if not use_sparse:
        P = P.toarray()
    return FiniteChain(
        states=unfused + [FUSED],
        pi=pi,
        P=P,
        depth=a,
        fused_volume=vol_k - covered,
        meta={"p": format_p(ctx.p), "scale": ctx.scale, "vol_k": vol_k},
    )


@dataclass
class CutReport:
    subset: np.ndarray | None
    flow: float
    flow_complement: float
    pi_subset: float
    conductance: float

    def to_dict(self) -> dict:
        d = {k: v for k, v in self.__dict__.items() if k != "subset"}
        if self.subset is not None:
            d["subset"] = np.nonzero(self.subset)[0].tolist()
        return {k: (float(v) if isinstance(v, Fraction) else v) for k, v in d.items()}


def _subset_mask(chain: FiniteChain, S) -> np.ndarray:
    S = np.asarray(S)
    if S.dtype == bool:
        if S.shape != (len(chain),):
            raise ValueError("subset mask has the wrong length")
        mask = S.copy()
    else:
        mask = np.zeros(len(chain), dtype=bool)
        mask[S.astype(int)] = True
    if not mask.any() or mask.all():
        raise ValueError("subset must be nonempty and proper")
    return mask


def ergodic_flow(chain: FiniteChain, mask: np.ndarray) -> float:
    """``sum_{i in S, j not in S} pi_i P_ij``."""
    if chain.is_sparse:
        out = chain.P[mask][:, ~mask]
        return float(chain.pi[mask] @ np.asarray(out.sum(axis=1)).ravel())
    return float(chain.pi[mask] @ chain.P[np.ix_(mask, ~mask)].sum(axis=1))


def cut_conductance(chain: FiniteChain, S) -> CutReport:
    """Ergodic flow, mass and conductance of a subset of states (mask or index list)."""
    mask = _subset_mask(chain, S)
    flow = ergodic_flow(chain, mask)
    pi_s = float(chain.pi[mask].sum())
    return CutReport(mask, flow, ergodic_flow(chain, ~mask), pi_s, flow / pi_s)


def conductance_profile_bruteforce(chain: FiniteChain, alpha: float, *, return_subset: bool = False):
    """``min Phi(S)`` over all nonempty ``S`` with ``pi(S) <= alpha``, by exhaustive search."""
    m = len(chain)
    if m > PROFILE_MAX_STATES:
        raise SizeError(f"{m} states exceeds the exhaustive limit of {PROFILE_MAX_STATES}")
    if not 0.0 < alpha <= 0.5:
        raise ValueError("alpha must lie in (0, 1/2]")
    F = chain.pi[:, None] * chain.dense()
    bits = np.arange(m, dtype=np.int64)
    best, best_mask = math.inf, None
    total = 1 << m
    chunk = 1 << 15
    for start in range(1, total - 1, chunk):
        codes = np.arange(start, min(start + chunk, total - 1), dtype=np.int64)
        B = ((codes[:, None] >> bits[None, :]) & 1).astype(float)
        mass = B @ chain.pi
        flow = np.einsum("ki,ki->k", B @ F, 1.0 - B)
        ok = mass <= alpha * (1.0 + 1e-12)
        if not ok.any():
            continue
        phi = np.where(ok, flow / np.where(ok, mass, 1.0), math.inf)
        k = int(np.argmin(phi))
        if phi[k] < best:
            best, best_mask = float(phi[k]), B[k].astype(bool)
    if best_mask is None:
        raise ValueError(f"no subset has stationary mass <= {alpha}")
    return (best, best_mask) if return_subset else best


# --------------------------------------------------------------- mixing curves


def _as_distribution(chain: FiniteChain, start) -> np.ndarray:
    if isinstance(start, np.ndarray) and start.ndim == 1 and start.dtype.kind == "f":
        return start.astype(float)
    mu = np.zeros(len(chain))
    mu[start if isinstance(start, (int, np.integer)) else chain.index_of(start)] = 1.0
    return mu


def lump(vec: np.ndarray, labels: np.ndarray, n_bins: int) -> np.ndarray:
    return np.bincount(labels, weights=vec, minlength=n_bins)


def distribution_curve(chain: FiniteChain, start, steps: int, labels=None):
    """Exact TV and squared L2(pi) distances to ``pi`` after ``0..steps`` steps.

    With ``labels`` (one bin per state) the TV is taken between the binned
    laws; the L2 distance is always over states.
    """
    mu = _as_distribution(chain, start)
    if labels is not None:
        labels = np.asarray(labels)
        nb = int(labels.max()) + 1
        pi_b = lump(chain.pi, labels, nb)
    tv = np.empty(steps + 1)
    l2 = np.empty(steps + 1)
    for t in range(steps + 1):
        if t:
            mu = chain.step(mu)
        if labels is None:
            tv[t] = 0.5 * np.abs(mu - chain.pi).sum()
        else:
            tv[t] = 0.5 * np.abs(lump(mu, labels, nb) - pi_b).sum()
        l2[t] = float(((mu / chain.pi - 1.0) ** 2) @ chain.pi)
    return tv, l2


def predicted_mixing_step(chain: FiniteChain, start, eps: float, labels=None, max_steps: int = 10**6) -> int:
    """First step at which the (binned) TV distance from ``start`` is below ``eps``."""
    mu = _as_distribution(chain, start)
    if labels is not None:
        labels = np.asarray(labels)
        nb = int(labels.max()) + 1
        pi_b = lump(chain.pi, labels, nb)
    for t in range(max_steps + 1):
        if t:
            mu = chain.step(mu)
        d = np.abs(mu - chain.pi) if labels is None else np.abs(lump(mu, labels, nb) - pi_b)
        if 0.5 * d.sum() < eps:
            return t
    raise SizeError(f"TV did not drop below {eps} within {max_steps} steps")


# ------------------------------------------------------------ half-cube cut


def _whitney_offset(n: int, p: float) -> int:
    """``ceil(2 n^(1/p) + 1/2)``, computed exactly for integer p and p = inf."""
    if math.isinf(p):
        return 3
    if p != int(p) or p < 1:
        raise UnsupportedCapability("the half-cube count needs an integer p or p = inf")
    p = int(p)
    # smallest integer c with (2c - 1)^p >= 4^p n
    c = max(1, int(2 * n ** (1.0 / p)) - 1)
    while (2 * c - 1) ** p < 4**p * n:
        c += 1
    while c > 1 and (2 * c - 3) ** p >= 4**p * n:
        c -= 1
    return c


def _layer_counts(n: int, c: int, k: int) -> tuple[int, int]:
    """Whitney cubes of the centred unit cube at level k: (total, those with a facet on x_1 = 0 on one side)."""
    j1 = (1 << (k - 1)) - c
    j2 = (1 << (k - 2)) - c if k >= 2 else -1
    n1 = 2 * max(0, j1 + 1)
    n2 = 2 * max(0, min(j1, 2 * j2 + 1) + 1)
    a1 = n1 ** (n - 1) if j1 >= 0 else 0
    a2 = n2 ** (n - 1) if (j1 >= 0 and j2 >= 0) else 0
    return n1**n - n2**n, a1 - a2


def _layer_tail(n: int, c: int, k0: int) -> tuple[Fraction, Fraction]:
    """Exact ``sum_{k >= k0}`` of (volume, one-sided boundary-layer volume).

    Valid once ``2^(k0-2) >= c``: then the per-coordinate counts are the
    affine functions ``2(x - c + 1)`` and ``2(x - 2c + 2)`` of ``x = 2^(k-1)``
    and each sum is a finite combination of geometric series.
    """
    alpha, beta = 1 - c, 2 - 2 * c
    x0 = Fraction(1 << (k0 - 1))

    def series(d: int) -> Fraction:
        # sum over k >= k0 of (2^(k-1))^(j) * 2^(-k n) written as powers of x
        total = Fraction(0)
        for j in range(d + 1):
            coef = comb(d, j) * (Fraction(alpha) ** (d - j) - Fraction(beta) ** (d - j))
            if coef:
                r = Fraction(1, 2 ** (n - j))
                total += coef * x0 ** (j - n) / (1 - r)
        return total * Fraction(2**d, 2**n)

    return series(n), series(n - 1)


@dataclass
class HalfCubeReport(CutReport):
    n: int = 0
    p: str = "inf"
    depth: int = 0
    boundary_mass: Fraction = Fraction(0)
    flow_unfused: Fraction = Fraction(0)
    pi_unfused: Fraction = Fraction(0)
    level_counts: dict = field(default_factory=dict)


def half_cube_experiment(n: int, p, a: int) -> HalfCubeReport:
    """Conductance of ``S = {x_1 < 0}`` for the cube chain on ``[-1/2, 1/2]^n``.

    Counts are exact.  The hyperplane ``x_1 = 0`` never cuts a Whitney cube,
    and every cube touching it shares a full facet with its mirror image, so
    the flow is ``sum pi(Q) / (4n)`` over cubes on the negative side of the
    hyperplane.  Cubes above level ``a`` (the fused state) are split by the
    sign of their centre, and the flow between the two halves of the fused
    state is included; ``flow_unfused`` is the part carried by unfused cubes.
    """
    if n < 1 or a < 1:
        raise ValueError("need n >= 1 and a >= 1")
    p = parse_p(p)
    c = _whitney_offset(n, p)
    vol = Fraction(0)
    layer = Fraction(0)
    counts = {}
    k0 = max(a + 1, 2)
    while (1 << (k0 - 2)) < c:
        k0 += 1
    for k in range(1, k0):
        total, touch = _layer_counts(n, c, k)
        w = Fraction(1, 2 ** (k * n))
        vol += total * w
        layer += touch * w
        if k <= a:
            counts[k] = total
        if k == a:
            vol_unfused, layer_unfused = vol, layer
    tail_vol, tail_layer = _layer_tail(n, c, k0)
    vol += tail_vol
    layer += tail_layer
    if vol != 1:
        raise AssertionError(f"half-cube cubes do not tile the body: volume {vol}")
    pi_s = vol_unfused / 2 + (1 - vol_unfused) / 2
    flow = layer / (4 * n)
    return HalfCubeReport(
        subset=None,
        flow=flow,
        flow_complement=flow,
        pi_subset=pi_s,
        conductance=flow / pi_s,
        n=n,
        p=format_p(p),
        depth=a,
        boundary_mass=2 * layer,
        flow_unfused=layer_unfused / (4 * n),
        pi_unfused=vol_unfused,
        level_counts=counts,
    )


def half_cube_explicit(n: int, p, a: int) -> dict:
    """Direct enumeration of the half-cube cut restricted to unfused cubes.

    Returns the state count, the unfused volume (total and on the negative
    side) and the flow across ``x_1 = 0`` between unfused cubes.  Used to
    cross-check :func:`half_cube_experiment`.
    """
    body = AxisBox.cube(n, 0.5)
    ctx = WhitneyContext(body, parse_p(p))
    dec = enumerate_cubes(ctx, a + 1)
    index = CubeIndex(dec.complete, dec.frontier)
    unfused = [Q for Q in dec.complete if Q.level <= a]
    flow = 0.0
    vol_neg = 0.0
    for Q in unfused:
        if Q.center[0] < 0:
            vol_neg += Q.volume
            _, law = mp_transition_law(index, Q)
            flow += Q.volume * sum(pr for nb, pr in law.items() if nb.center[0] > 0)
    vol_unfused = sum(Q.volume for Q in unfused)
    return {
        "states": len(unfused),
        "vol_unfused": vol_unfused,
        "vol_neg": vol_neg,
        "flow_unfused": flow,
    }
