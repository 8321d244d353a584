"""Camera placement optimization for 3D reconstruction of noisy plant scenes.

Places N cameras in continuous space to maximize a geometric reconstruction
reward over a point cloud, using a Gaussian process surrogate with expected
improvement, and compares the regret against a circular-formation baseline.
"""

from .acquisition import EiState, ei_value, ei_values, maximize_ei
from .geometry import (
    CameraPose,
    Placement,
    Point3,
    PointCloud,
    SearchSpace,
    angle_cosine,
    decode,
    encode,
)
from .gp import (
    KERNEL_FAMILIES,
    FactorizationError,
    GpModel,
    KernelSpec,
    Posterior,
    kernel_eval,
    kernel_matrix,
)
from .planner import (
    BaselineResult,
    BoConfig,
    ExperimentReport,
    RegretTrace,
    circular_baseline,
    init_design,
    run_bo,
    run_experiment,
    simple_regret,
)
from .reward import (
    RewardParams,
    fov_condition,
    match_condition,
    noisy_reward,
    pair_quality,
    pair_visibility,
    reward,
)
from .scene import (
    DEFAULT_SIGMA,
    LAYOUTS,
    NoiseModel,
    NoiseRealization,
    SceneSpec,
    apply_noise,
    generate_scene,
    sample_realization,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "angle_cosine",
    "apply_noise",
    "BaselineResult",
    "BoConfig",
    "CameraPose",
    "circular_baseline",
    "decode",
    "DEFAULT_SIGMA",
    "ei_value",
    "ei_values",
    "EiState",
    "encode",
    "ExperimentReport",
    "FactorizationError",
    "fov_condition",
    "generate_scene",
    "GpModel",
    "init_design",
    "KERNEL_FAMILIES",
    "kernel_eval",
    "kernel_matrix",
    "KernelSpec",
    "LAYOUTS",
    "match_condition",
    "maximize_ei",
    "NoiseModel",
    "NoiseRealization",
    "noisy_reward",
    "pair_quality",
    "pair_visibility",
    "Placement",
    "Point3",
    "PointCloud",
    "Posterior",
    "RegretTrace",
    "reward",
    "RewardParams",
    "run_bo",
    "run_experiment",
    "sample_realization",
    "SceneSpec",
    "SearchSpace",
    "simple_regret",
]
