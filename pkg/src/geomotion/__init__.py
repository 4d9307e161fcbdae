"""Geodesic motion skills on Riemannian manifolds learned from demonstrations."""

from .datasets import Dataset, gen_pouring, gen_toy_jc
from .evaluation import EvalReport, evaluate
from .geodesic import (
    GeodesicGraph,
    SplinePath,
    apply_obstacles,
    build_graph,
    fit_spline,
    refine_spline,
    shortest_path,
)
from .metric import (
    AmbientMetricSpec,
    ambient_factor,
    curve_length,
    magnification_factor,
    pullback_metric,
)
from .motion import (
    PlanRecord,
    PlanRequest,
    ReplanScript,
    ScriptEntry,
    TimingReport,
    decode_trajectory,
    plan,
    replan_loop,
)
from .types import (
    Demonstration,
    LatentPoint,
    Obstacle,
    Pose,
    Trajectory,
    antipodal_double,
    normalize_orientation,
)
from .vae import ManifoldModel, TrainConfig, decode, elbo, encode, train
from .vmf import VmfParams, antipodal_vmf_log_density, vmf_log_density

__version__ = "0.1.0"

__all__ = [
    "AmbientMetricSpec",
    "Dataset",
    "Demonstration",
    "EvalReport",
    "GeodesicGraph",
    "LatentPoint",
    "ManifoldModel",
    "Obstacle",
    "PlanRecord",
    "PlanRequest",
    "Pose",
    "ReplanScript",
    "ScriptEntry",
    "SplinePath",
    "TimingReport",
    "TrainConfig",
    "Trajectory",
    "VmfParams",
    "ambient_factor",
    "antipodal_double",
    "antipodal_vmf_log_density",
    "apply_obstacles",
    "build_graph",
    "curve_length",
    "decode",
    "decode_trajectory",
    "elbo",
    "encode",
    "evaluate",
    "fit_spline",
    "gen_pouring",
    "gen_toy_jc",
    "magnification_factor",
    "normalize_orientation",
    "plan",
    "pullback_metric",
    "refine_spline",
    "replan_loop",
    "shortest_path",
    "train",
    "vmf_log_density",
]
