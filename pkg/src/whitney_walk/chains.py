"""Step kernels: the multiscale Metropolis chain on Whitney cubes and coordinate hit-and-run.

Both kernels are lazy (they hold with probability 1/2).  Scalar kernels take
and return a single state; the ``*_many`` variants advance a batch of
independent replicas with one vectorised call and follow the same law.

Randomness comes from :class:`numpy.random.Generator` (PCG64).  Runs are
seeded with an integer that is recorded in every :class:`Trajectory`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .body import ConvexBody
from .errors import DomainError, StepFailure, WhitneyWalkError
from .whitney import CubeIndex, DyadicCube, WhitneyContext, locate_cube, locate_many

MP_MAX_RETRIES = 16
CHR_TOL_EXPONENT = -40


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def _open_uniform(rng: np.random.Generator, size) -> np.ndarray:
    u = rng.random(size)
    while np.any(u == 0.0):
        zeros = u == 0.0
        u[zeros] = rng.random(int(np.count_nonzero(zeros)))
    return u


def sample_point_in_cube(Q: DyadicCube, rng) -> np.ndarray:
    """A uniform point of the open cube."""
    u = _open_uniform(rng, Q.dim)
    return np.ldexp(np.array(Q.vertex, dtype=float) + u, Q.side_exponent)


def sample_boundary_point(Q: DyadicCube, rng) -> tuple[np.ndarray, tuple[int, int]]:
    """A uniform point on ``∂Q`` and the facet ``(axis, sign)`` it lies on.

    All 2n facets have equal area, so the facet is chosen uniformly.
    """
    n = Q.dim
    f = int(rng.integers(2 * n))
    j, sgn = f // 2, (1 if f % 2 else -1)
    u = _open_uniform(rng, n)
    u[j] = 1.0 if sgn > 0 else 0.0
    x = np.ldexp(np.array(Q.vertex, dtype=float) + u, Q.side_exponent)
    return x, (j, sgn)


def mp_step(ctx: WhitneyContext, Q: DyadicCube, rng, max_retries: int = MP_MAX_RETRIES) -> DyadicCube:
    """One step of the lazy Metropolis chain on the Whitney cubes."""
    if rng.random() < 0.5:
        return Q
    for _ in range(max_retries + 1):
        x, (j, sgn) = sample_boundary_point(Q, rng)
        x[j] += sgn * Q.side / 4
        try:
            Q2 = locate_cube(ctx, x)
        except WhitneyWalkError:
            continue
        if Q2.level <= Q.level or rng.random() < math.ldexp(1.0, Q.level - Q2.level):
            return Q2
        return Q
    raise StepFailure(f"could not locate a neighbour of {Q} after {max_retries} retries")


def mp_step_many(ctx: WhitneyContext, levels, vertices, rng, max_retries: int = MP_MAX_RETRIES):
    """Advance a batch of cube states one step; returns new ``(levels, vertices)`` arrays."""
    levels = np.array(levels, dtype=np.int64)
    vertices = np.array(vertices, dtype=np.int64)
    N, n = vertices.shape
    move = np.nonzero(rng.random(N) < 0.5)[0]
    todo = move
    new_levels = np.empty(len(move), dtype=np.int64)
    new_vertices = np.empty((len(move), n), dtype=np.int64)
    slot = np.arange(len(move))
    for _ in range(max_retries + 1):
        if todo.size == 0:
            break
        m = todo.size
        e = ctx.scale - levels[todo]
        f = rng.integers(2 * n, size=m)
        j, up = f // 2, (f % 2).astype(bool)
        u = _open_uniform(rng, (m, n))
        rows = np.arange(m)
        u[rows, j] = np.where(up, 1.0 + 0.25, -0.25)
        X = np.ldexp(vertices[todo] + u, e[:, None])
        lv, vt, ok = locate_many(ctx, X)
        done = slot[ok]
        new_levels[done] = lv[ok]
        new_vertices[done] = vt[ok]
        todo, slot = todo[~ok], slot[~ok]
    if todo.size:
        raise StepFailure(f"{todo.size} replicas could not locate a neighbour after {max_retries} retries")
    finer = new_levels > levels[move]
    accept = ~finer | (rng.random(len(move)) < np.ldexp(1.0, levels[move] - new_levels))
    idx = move[accept]
    levels[idx] = new_levels[accept]
    vertices[idx] = new_vertices[accept]
    return levels, vertices


def mp_transition_law(index: CubeIndex, Q: DyadicCube) -> tuple[float, dict[DyadicCube, float]]:
    """Exact one-step law from ``Q``: ``(holding probability, {neighbour: probability})``.

    ``P(Q, Q') = 1/2 * area(∂Q ∩ ∂Q') / area(∂Q) * min(1, side(Q') / side(Q))``.
    """
    n = Q.dim
    full_boundary = 2 * n * math.ldexp(1.0, Q.side_exponent * (n - 1))
    law: dict[DyadicCube, float] = {}
    for nb, area in index.facet_neighbors(Q):
        ratio = min(1.0, math.ldexp(1.0, Q.level - nb.level))
        law[nb] = law.get(nb, 0.0) + 0.5 * area / full_boundary * ratio
    return 1.0 - sum(law.values()), law


def default_chr_tol(body: ConvexBody) -> float:
    return math.ldexp(body.outer_radius, CHR_TOL_EXPONENT)


def chr_step(body: ConvexBody, x, rng, tol: float | None = None) -> np.ndarray:
    """One lazy coordinate hit-and-run step."""
    x = np.array(x, dtype=float)
    if rng.random() < 0.5:
        return x
    if tol is None:
        tol = default_chr_tol(body)
    j = int(rng.integers(body.dim))
    try:
        tm, tp = body.chord_endpoints(x, j, tol)
    except DomainError as e:
        raise StepFailure(f"chord through {x.tolist()} failed: {e}") from e
    lo, hi = tm + tol, tp - tol
    if not lo < hi:
        raise StepFailure(f"chord through {x.tolist()} shorter than the tolerance")
    x[j] += lo + (hi - lo) * rng.random()
    return x


def chr_step_many(body: ConvexBody, X, rng, tol: float | None = None) -> np.ndarray:
    X = np.array(X, dtype=float)
    N, n = X.shape
    if tol is None:
        tol = default_chr_tol(body)
    move = np.nonzero(rng.random(N) < 0.5)[0]
    if move.size == 0:
        return X
    j = rng.integers(n, size=move.size)
    try:
        tm, tp = body.chord_endpoints_many(X[move], j)
    except DomainError as e:
        raise StepFailure(f"chord computation failed: {e}") from e
    lo, hi = tm + tol, tp - tol
    if not np.all(lo < hi):
        raise StepFailure("a chord is shorter than the tolerance")
    X[move, j] += lo + (hi - lo) * rng.random(move.size)
    return X


@dataclass
class Trajectory:
    states: list[Any]
    steps: int
    stride: int
    seed: Any = None
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.states)


def run_walk(kernel: Callable, start, steps: int, stride: int = 1, seed=None) -> Trajectory:
    """Run ``kernel(state, rng)`` for ``steps`` steps, recording every ``stride``-th state."""
    if steps < 0:
        raise ValueError("steps must be non-negative")
    if stride < 1:
        raise ValueError("stride must be positive")
    rng = make_rng(seed)
    state = start
    states = [state]
    for t in range(1, steps + 1):
        state = kernel(state, rng)
        if t % stride == 0:
            states.append(state)
    recorded_seed = None if isinstance(seed, np.random.Generator) else seed
    return Trajectory(states, steps, stride, recorded_seed)


def cube_trajectory_to_points(traj, rng) -> list[np.ndarray]:
    """Replace each recorded cube by a uniform point inside it."""
    states = traj.states if isinstance(traj, Trajectory) else list(traj)
    return [sample_point_in_cube(Q, rng) for Q in states]
