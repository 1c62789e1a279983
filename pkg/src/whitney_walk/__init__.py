"""Sampling from convex bodies with a multiscale Whitney-cube walk and coordinate hit-and-run."""

from .body import AxisBox, ConvexBody, HPolytope, LpBall, MembershipBody, body_from_dict, load_body, save_body
from .chains import (
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
from .diagnostics import (
    WarmthReport,
    WhitneyHistogram,
    chi_square_uniformity,
    mixing_curve,
    tv_estimate,
    warmth,
)
from .errors import (
    BodySpecError,
    BoundaryPointError,
    DomainError,
    InconsistentVolume,
    LocateError,
    MarginError,
    SizeError,
    StepFailure,
    UnsupportedCapability,
    WhitneyWalkError,
)
from .finite import (
    CutReport,
    FiniteChain,
    build_aux_chain,
    conductance_profile_bruteforce,
    cut_conductance,
    half_cube_experiment,
)
from .whitney import (
    CubeIndex,
    DyadicCube,
    WhitneyContext,
    enumerate_cubes,
    in_decomposition,
    in_root_mesh,
    is_subdivided,
    locate_cube,
)

__version__ = "0.1.0"

__all__ = [
    "AxisBox",
    "body_from_dict",
    "BodySpecError",
    "BoundaryPointError",
    "build_aux_chain",
    "chi_square_uniformity",
    "chr_step",
    "chr_step_many",
    "conductance_profile_bruteforce",
    "ConvexBody",
    "cube_trajectory_to_points",
    "CubeIndex",
    "cut_conductance",
    "CutReport",
    "DomainError",
    "DyadicCube",
    "enumerate_cubes",
    "FiniteChain",
    "half_cube_experiment",
    "HPolytope",
    "in_decomposition",
    "in_root_mesh",
    "InconsistentVolume",
    "is_subdivided",
    "load_body",
    "locate_cube",
    "LocateError",
    "LpBall",
    "make_rng",
    "MarginError",
    "MembershipBody",
    "mixing_curve",
    "mp_step",
    "mp_step_many",
    "mp_transition_law",
    "run_walk",
    "sample_boundary_point",
    "sample_point_in_cube",
    "save_body",
    "SizeError",
    "StepFailure",
    "Trajectory",
    "tv_estimate",
    "UnsupportedCapability",
    "warmth",
    "WarmthReport",
    "WhitneyContext",
    "WhitneyHistogram",
    "WhitneyWalkError",
]
