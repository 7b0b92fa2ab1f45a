"""Channel estimation and training-resource optimization for a full-duplex
multi-antenna backscatter reader, plus a seeded Monte Carlo study harness."""

from .channel import (
    ChannelRealization,
    PilotConfig,
    ReceivedSignal,
    SystemParams,
    backscatter,
    build_pilots,
    draw_channel,
    path_loss_beta,
    quantize_ce_time,
)
from .estimators import (
    LMMSE,
    LS,
    MatrixEstimate,
    PriorCovariance,
    VectorEstimate,
    lmmse_gain,
    lmmse_matrix,
    ls_matrix,
    mrc_combiner,
    mrt_precoder,
    prior_covariance,
    vector_estimate,
)
from .optimizer import (
    OptimizationOutcome,
    decide,
    joint_optimize,
    optimal_pc,
    optimal_ta,
    snr_threshold,
)
from .snr import (
    RicianMoments,
    SnrReport,
    approx_moments,
    ce_snr,
    effective_snr_sample,
    estimate_mse,
    mc_effective_snr,
    received_power_metrics,
    snr_approx,
    snr_isotropic,
    snr_perfect_csi,
)
from .transforms import RealifiedSystem, build_realified, phi, sym

__version__ = "0.1.0"

__all__ = [
    "ChannelRealization",
    "LMMSE",
    "LS",
    "MatrixEstimate",
    "OptimizationOutcome",
    "PilotConfig",
    "PriorCovariance",
    "RealifiedSystem",
    "ReceivedSignal",
    "RicianMoments",
    "SnrReport",
    "SystemParams",
    "VectorEstimate",
    "approx_moments",
    "backscatter",
    "build_pilots",
    "build_realified",
    "ce_snr",
    "decide",
    "draw_channel",
    "effective_snr_sample",
    "estimate_mse",
    "joint_optimize",
    "lmmse_gain",
    "lmmse_matrix",
    "ls_matrix",
    "mc_effective_snr",
    "mrc_combiner",
    "mrt_precoder",
    "optimal_pc",
    "optimal_ta",
    "path_loss_beta",
    "phi",
    "prior_covariance",
    "quantize_ce_time",
    "received_power_metrics",
    "snr_approx",
    "snr_isotropic",
    "snr_perfect_csi",
    "snr_threshold",
    "sym",
    "vector_estimate",
    "__version__",
]
