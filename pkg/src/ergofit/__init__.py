"""Fit parametrized dynamical-model families to noisy series and measure their complexity."""
__version__ = "0.1.0"

from .complexity import ComplexityReport, QuantizedProcess, cover_count, entropy_profile, packing_bound_check
from .distortion import DistortionBounds, distortion_bounds, quantize, signal_noise_identity_check
from .dynamics import orbit, pseudo_metric, sample_sequences
from .erm import LossSpec, ObservedSeries, auxiliary_loss, empirical_risk, estimator_sequence, fit, signal_plus_noise
from .families import (THUE_MORSE, ModelFamily, build_family, make_identity_vs_chaos, make_logistic, make_rotation,
                       make_substitution)
from .meanwidth import NoiseModel, OptimizerConfig, mean_width, sigma0, sudakov_check

__all__ = [
    "ComplexityReport", "QuantizedProcess", "cover_count", "entropy_profile", "packing_bound_check",
    "DistortionBounds", "distortion_bounds", "quantize", "signal_noise_identity_check",
    "orbit", "pseudo_metric", "sample_sequences",
    "LossSpec", "ObservedSeries", "auxiliary_loss", "empirical_risk", "estimator_sequence", "fit",
    "signal_plus_noise",
    "THUE_MORSE", "ModelFamily", "build_family", "make_identity_vs_chaos", "make_logistic", "make_rotation",
    "make_substitution",
    "NoiseModel", "OptimizerConfig", "mean_width", "sigma0", "sudakov_check",
]
