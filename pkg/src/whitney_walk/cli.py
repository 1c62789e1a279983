"""Command-line entry point: decompose, sample, finite, mixcurve, uniformity.

Exit codes: 0 success, 1 runtime failure, 2 usage error, 3 malformed body file.
Every output embeds the full configuration (including the seed) so a run
can be replayed byte for byte.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field
from decimal import Decimal
from fractions import Fraction

import numpy as np

from .body import ConvexBody, format_p, load_body, parse_p
from .chains import (
    chr_step_many,
    cube_trajectory_to_points,
    make_rng,
    mp_step,
    mp_step_many,
    chr_step,
    run_walk,
)
from .diagnostics import (
    WhitneyHistogram,
    chi_square_uniformity,
    chr_burn_in,
    grid_bins,
    grid_cell_fractions,
    mixing_curve,
    mp_burn_in,
)
from .errors import BodySpecError, WhitneyWalkError
from .finite import (
    FUSED,
    build_aux_chain,
    conductance_profile_bruteforce,
    cut_conductance,
    half_cube_experiment,
)
from .whitney import DyadicCube, WhitneyContext, enumerate_cubes, locate_cube

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_BODY = 0, 1, 2, 3
THREADS_ENV = "WHITNEY_WALK_THREADS"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


@dataclass
class RunConfig:
    command: str
    body: str | None = None
    walk: str | None = None
    p: str = "inf"
    steps: int | None = None
    stride: int = 1
    seed: int = 0
    depth: int | None = None
    out: str | None = None
    threads: int = 1
    options: dict = field(default_factory=dict)

    def to_json(self) -> str:
        d = asdict(self)
        d.pop("out")
        return json.dumps(d, sort_keys=True, separators=(",", ":"))


def _p_arg(text: str) -> float:
    try:
        return parse_p(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def _nonneg(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="whitney-walk", description="Sampling from convex bodies with Whitney-cube and coordinate walks")
    parser.add_argument(
        "--threads",
        type=_positive,
        default=int(os.getenv(THREADS_ENV, "1")),
        help=f"worker threads recorded in the config (CLI > env:{THREADS_ENV} > 1); kernels are vectorised in-process",
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, body_required=True):
        sp.add_argument("--body", required=body_required, help="body JSON file")
        sp.add_argument("--p", type=_p_arg, default=math.inf, help="norm index: 1, 2 or inf")
        sp.add_argument("--out", help="output file (default: stdout)")

    sp = sub.add_parser("decompose", help="dump the Whitney cubes up to a depth as JSON lines")
    common(sp)
    sp.add_argument("--depth", type=_positive, required=True)

    sp = sub.add_parser("sample", help="run a walk and write the recorded points as CSV")
    common(sp)
    sp.add_argument("--walk", choices=["mp", "chr"], required=True)
    sp.add_argument("--steps", type=_nonneg, required=True)
    sp.add_argument("--stride", type=_positive, default=1)
    sp.add_argument("--seed", type=_seed, default=0)
    sp.add_argument("--start", default="auto", help="auto | point:x1,x2,... | cube:level:v1,v2,...")

    sp = sub.add_parser("finite", help="exact auxiliary-chain reports as JSON")
    common(sp, body_required=False)
    sp.add_argument("--depth", type=_positive, required=True)
    sp.add_argument("--report", choices=["balance", "cut", "profile", "halfcube"], required=True)
    sp.add_argument("--volume", type=float, help="exact body volume (default: computed from the body)")
    sp.add_argument("--subset", help="comma-separated state indices for --report cut (default: centres with x_1 < 0)")
    sp.add_argument("--alpha", type=float, default=0.5)
    sp.add_argument("--n", type=_positive, help="dimension for --report halfcube")

    sp = sub.add_parser("mixcurve", help="empirical TV distance at checkpoints as CSV")
    common(sp)
    sp.add_argument("--walk", choices=["mp", "chr"], required=True)
    sp.add_argument("--checkpoints", required=True, help="comma-separated step counts")
    sp.add_argument("--replicas", type=_positive, default=10_000)
    sp.add_argument("--seed", type=_seed, default=0)
    sp.add_argument("--start", default="auto", help="auto | point:... | cube:level:... | box:radius")
    sp.add_argument("--depth", type=_positive, default=4, help="histogram depth for the cube walk")
    sp.add_argument("--grid", type=_positive, default=4, help="grid cells per axis for the point walk")
    sp.add_argument("--volume", type=float)

    sp = sub.add_parser("uniformity", help="chi-square uniformity test of walk endpoints as JSON")
    common(sp)
    sp.add_argument("--walk", choices=["mp", "chr"], default="chr")
    sp.add_argument("--steps", type=_nonneg, help="burn-in per replica (default: the configured formula)")
    sp.add_argument("--replicas", type=_positive, default=400)
    sp.add_argument("--seed", type=_seed, default=0)
    sp.add_argument("--start", default="auto", help="auto | point:... | cube:level:... | box:radius")
    sp.add_argument("--grid", type=_positive, default=4)
    sp.add_argument("--eps", type=float, default=0.01)
    return parser


# ------------------------------------------------------------------ helpers


def _floats(text: str) -> np.ndarray:
    try:
        return np.array([float(t) for t in text.split(",")], dtype=float)
    except ValueError:
        raise UsageError(f"not a comma-separated list of numbers: {text!r}") from None


def _parse_start(spec: str, body: ConvexBody, ctx: WhitneyContext | None):
    kind, _, rest = spec.partition(":")
    if kind == "auto":
        return ("auto", None)
    if kind == "point":
        x = _floats(rest)
        if x.size != body.dim:
            raise UsageError(f"start point has {x.size} coordinates, body has {body.dim}")
        return ("point", x)
    if kind == "cube":
        level, _, vert = rest.partition(":")
        try:
            Q = DyadicCube(int(level), tuple(int(v) for v in vert.split(",")), ctx.scale if ctx else 0)
        except ValueError:
            raise UsageError(f"bad cube start {spec!r}") from None
        if Q.dim != body.dim:
            raise UsageError("start cube has the wrong dimension")
        return ("cube", Q)
    if kind == "box":
        try:
            r = float(rest)
        except ValueError:
            raise UsageError(f"bad box start {spec!r}") from None
        if not r > 0:
            raise UsageError("box start radius must be positive")
        return ("box", r)
    raise UsageError(f"unknown start {spec!r}")


def _locate_near(ctx: WhitneyContext, x, rng) -> DyadicCube:
    """Cube containing ``x``; nudges the point if it sits on a dyadic boundary."""
    try:
        return locate_cube(ctx, x)
    except WhitneyWalkError:
        scale = 1e-9 * ctx.body.outer_radius
        for _ in range(64):
            try:
                return locate_cube(ctx, x + scale * (rng.random(len(x)) - 0.5))
            except WhitneyWalkError:
                continue
        raise


def _start_points(kind, value, body, m, rng) -> np.ndarray:
    if kind == "auto":
        return np.tile(body.interior_point(), (m, 1))
    if kind == "point":
        return np.tile(value, (m, 1))
    if kind == "box":
        c = body.interior_point()
        X = c + value * (2 * rng.random((m, body.dim)) - 1)
        if not body.contains_many(X).all():
            raise UsageError("start box is not contained in the body")
        return X
    cube = value
    return np.ldexp(np.array(cube.vertex) + rng.random((m, body.dim)), cube.side_exponent)


def _start_cubes(kind, value, ctx, m, rng):
    if kind == "cube":
        return np.full(m, value.level), np.tile(np.array(value.vertex), (m, 1))
    X = _start_points(kind, value, ctx.body, m, rng)
    cubes = [_locate_near(ctx, x, rng) for x in X]
    return np.array([Q.level for Q in cubes]), np.array([Q.vertex for Q in cubes])


def _volume(body: ConvexBody, given):
    if given is not None:
        return given
    v = body.volume
    if v is None:
        raise UsageError("body volume unknown; pass --volume")
    return v


def _jsonable(v):
    if isinstance(v, Fraction):
        return {"fraction": str(v), "value": float(v)}
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def _fmt(x: float) -> str:
    return repr(float(x))


# -------------------------------------------------------------- subcommands


def cmd_decompose(args, cfg: RunConfig, out) -> int:
    body = load_body(args.body)
    ctx = WhitneyContext(body, args.p)
    dec = enumerate_cubes(ctx, args.depth)
    total = 0.0
    for Q in dec.complete:
        total += Q.volume
        rec = {
            "level": Q.level,
            "vertex": list(Q.vertex),
            "side": format(Decimal(Q.side), "f"),
            "center": Q.center.tolist(),
        }
        out.write(json.dumps(rec) + "\n")
    summary = {
        "total_volume": total,
        "frontier_volume": sum(Q.volume for Q in dec.frontier),
        "cube_count": len(dec.complete),
        "frontier_count": len(dec.frontier),
        "scale_exponent": ctx.scale,
        "config": json.loads(cfg.to_json()),
    }
    out.write(json.dumps({"summary": summary}, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_sample(args, cfg: RunConfig, out) -> int:
    body = load_body(args.body)
    rng = make_rng(args.seed)
    ctx = WhitneyContext(body, args.p) if args.walk == "mp" else None
    kind, value = _parse_start(args.start, body, ctx)
    if args.walk == "chr":
        if kind == "cube":
            raise UsageError("a cube start needs --walk mp")
        x0 = _start_points(kind, value, body, 1, rng)[0]
        if not body.contains(x0):
            raise UsageError("start point is not in the body")
        traj = run_walk(lambda x, r: chr_step(body, x, r), x0, args.steps, args.stride, seed=rng)
        points = traj.states
    else:
        Q0 = value if kind == "cube" else _locate_near(ctx, _start_points(kind, value, body, 1, rng)[0], rng)
        traj = run_walk(lambda Q, r: mp_step(ctx, Q, r), Q0, args.steps, args.stride, seed=rng)
        points = cube_trajectory_to_points(traj, rng)
    out.write(f"# config: {cfg.to_json()}\n")
    out.write(",".join(f"x{i + 1}" for i in range(body.dim)) + "\n")
    for x in points:
        out.write(",".join(_fmt(v) for v in x) + "\n")
    return EXIT_OK


def cmd_finite(args, cfg: RunConfig, out) -> int:
    if args.report == "halfcube":
        if args.n is None:
            raise UsageError("--report halfcube needs --n")
        rep = half_cube_experiment(args.n, args.p, args.depth)
        d = _jsonable(rep.to_dict() | {k: getattr(rep, k) for k in ("flow", "pi_subset", "boundary_mass",
                                                                      "flow_unfused", "pi_unfused")})
        d["conductance"] = float(rep.conductance)
    else:
        if args.body is None:
            raise UsageError(f"--report {args.report} needs --body")
        body = load_body(args.body)
        ctx = WhitneyContext(body, args.p)
        chain = build_aux_chain(ctx, args.depth, _volume(body, args.volume))
        if args.report == "balance":
            d = {
                "states": len(chain),
                "row_sum_error": chain.row_sum_error(),
                "stationarity_error": chain.stationarity_error(),
                "balance_error": chain.balance_error(),
                "min_holding_unfused": float(chain.holding()[:-1].min()),
                "pi_fused": float(chain.pi[-1]),
            }
        elif args.report == "cut":
            if args.subset:
                S = [int(t) for t in args.subset.split(",")]
                if not all(0 <= i < len(chain) for i in S):
                    raise UsageError("subset index out of range")
            else:
                S = [i for i, Q in enumerate(chain.states) if Q != FUSED and Q.center[0] < 0]
            d = _jsonable(cut_conductance(chain, S).to_dict())
        else:
            value, mask = conductance_profile_bruteforce(chain, args.alpha, return_subset=True)
            d = {"alpha": args.alpha, "profile": value, "subset": np.nonzero(mask)[0].tolist(), "states": len(chain)}
    d["config"] = json.loads(cfg.to_json())
    out.write(json.dumps(d, sort_keys=True, indent=1) + "\n")
    return EXIT_OK


def cmd_mixcurve(args, cfg: RunConfig, out) -> int:
    body = load_body(args.body)
    try:
        checkpoints = sorted({int(t) for t in args.checkpoints.split(",")})
    except ValueError:
        raise UsageError("--checkpoints must be comma-separated integers") from None
    if checkpoints[0] < 0:
        raise UsageError("checkpoints must be non-negative")
    rng = make_rng(args.seed)
    if args.walk == "mp":
        ctx = WhitneyContext(body, args.p)
        kind, value = _parse_start(args.start, body, ctx)
        hist = WhitneyHistogram.for_context(ctx, args.depth, _volume(body, args.volume))
        lv, vt = _start_cubes(kind, value, ctx, args.replicas, rng)
        curve = mixing_curve(
            lambda s, r: mp_step_many(ctx, s[0], s[1], r), lambda m, r: (lv, vt), checkpoints,
            args.replicas, lambda s: hist.bin_of(s[0], s[1]), hist.pi, rng,
        )
    else:
        kind, value = _parse_start(args.start, body, None)
        frac, _ = grid_cell_fractions(body, args.grid)
        lower, upper = body.bounding_box()
        curve = mixing_curve(
            lambda X, r: chr_step_many(body, X, r), lambda m, r: _start_points(kind, value, body, m, r),
            checkpoints, args.replicas, lambda X: grid_bins(X, lower, upper, args.grid), frac / frac.sum(), rng,
        )
    out.write(f"# config: {cfg.to_json()}\n")
    out.write("step,tv,stderr\n")
    for s, tv, se in curve.rows():
        out.write(f"{s},{_fmt(tv)},{_fmt(se)}\n")
    return EXIT_OK


def cmd_uniformity(args, cfg: RunConfig, out) -> int:
    body = load_body(args.body)
    rng = make_rng(args.seed)
    n = body.dim
    r_in = body.inner_radius(math.inf)
    if not r_in > 0:
        # the origin is not inside; fall back to the gap at a stored interior point
        r_in = float(body.boundary_distance_many(body.interior_point()[None, :], math.inf)[0])
    aspect = body.outer_radius / r_in
    ctx = WhitneyContext(body, args.p) if args.walk == "mp" else None
    kind, value = _parse_start(args.start, body, ctx)
    if kind == "box":
        warm = (body.volume or 1.0) / (2 * value) ** n
    else:
        warm = math.exp(n)
    steps = args.steps
    if steps is None:
        steps = chr_burn_in(n, aspect, warm, args.eps) if args.walk == "chr" else mp_burn_in(n, args.p, aspect, warm, args.eps)
    if args.walk == "chr":
        X = _start_points(kind, value, body, args.replicas, rng)
        for _ in range(steps):
            X = chr_step_many(body, X, rng)
    else:
        lv, vt = _start_cubes(kind, value, ctx, args.replicas, rng)
        for _ in range(steps):
            lv, vt = mp_step_many(ctx, lv, vt, rng)
        X = np.ldexp(vt + rng.random(vt.shape), (ctx.scale - lv)[:, None])
    res = chi_square_uniformity(X, body, args.grid)
    d = {
        "statistic": res.statistic,
        "p_value": res.p_value,
        "dof": res.dof,
        "bins_used": res.bins_used,
        "pooled_cells": res.pooled,
        "volume_stderr": res.volume_stderr,
        "steps": steps,
        "replicas": args.replicas,
        "config": json.loads(cfg.to_json()),
    }
    out.write(json.dumps(d, sort_keys=True, indent=1) + "\n")
    return EXIT_OK


COMMANDS = {
    "decompose": cmd_decompose,
    "sample": cmd_sample,
    "finite": cmd_finite,
    "mixcurve": cmd_mixcurve,
    "uniformity": cmd_uniformity,
}


def _config(args) -> RunConfig:
    known = {"command", "body", "walk", "p", "steps", "stride", "seed", "depth", "out", "threads"}
    opts = {k: v for k, v in vars(args).items() if k not in known and v is not None}
    return RunConfig(
        command=args.command,
        body=args.body,
        walk=getattr(args, "walk", None),
        p=format_p(args.p),
        steps=getattr(args, "steps", None),
        stride=getattr(args, "stride", 1),
        seed=getattr(args, "seed", 0),
        depth=getattr(args, "depth", None),
        out=args.out,
        threads=args.threads,
        options=opts,
    )


def dispatch(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        cfg = _config(args)
        if args.out:
            with open(args.out, "w", newline="") as fh:
                return COMMANDS[args.command](args, cfg, fh)
        return COMMANDS[args.command](args, cfg, stdout)
    except UsageError as e:
        print(f"usage error: {e}", file=stderr)
        return EXIT_USAGE
    except BodySpecError as e:
        print(f"body error in field {e.field!r}: {e}", file=stderr)
        return EXIT_BODY
    except OSError as e:
        print(f"error: {e}", file=stderr)
        return EXIT_USAGE if isinstance(e, FileNotFoundError) else EXIT_FAIL
    except (WhitneyWalkError, ValueError) as e:
        print(f"error: {e}", file=stderr)
        return EXIT_FAIL


def main() -> None:
    sys.exit(dispatch())
