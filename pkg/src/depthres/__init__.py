"""Color-guided depth map restoration with robust energies and adaptive bandwidths."""

from .bandwidth import bandwidth_gradient, bandwidth_objective, bandwidth_step, laplacian
from .core import (
    LAMBDA_MIN,
    BandwidthMap,
    ConfigError,
    DepthMap,
    GuidanceImage,
    RestorationConfig,
    default_config,
    pixel_coords,
    pixel_index,
)
from .irls import (
    IrlsState,
    assemble_system,
    data_energy,
    energy_gradient,
    normal_residual,
    restore,
    smoothness_energy,
    total_energy,
)
from .pipeline import DegradationSpec, bicubic_upsample, degrade, rmse, run_experiment
from .sparse_linear import SparseSystem, pcg_solve, spmv

__all__ = [
    "LAMBDA_MIN", "BandwidthMap", "ConfigError", "DepthMap", "GuidanceImage", "RestorationConfig",
    "default_config", "pixel_coords", "pixel_index", "IrlsState", "assemble_system", "data_energy",
    "energy_gradient", "normal_residual", "restore", "smoothness_energy", "total_energy",
    "bandwidth_gradient", "bandwidth_objective", "bandwidth_step", "laplacian", "DegradationSpec",
    "bicubic_upsample", "degrade", "rmse", "run_experiment", "SparseSystem", "pcg_solve", "spmv",
]
