"""Photon-number statistics of a pulsed pair source through a lossy detector.

Simulation of the gated acquisition chain, pulse-area histogram fitting,
a provable classicality bound on the two-photon fraction, and reconstruction
of the pre-loss distribution by truncated inversion of the detector model.
"""

from .distributions import (
    PhotonDistribution,
    SourceSpec,
    TruncationLossError,
    make_distribution,
    mean_photon_number,
    parity_expectation,
)
from .channel import (
    ConditionNumberWarning,
    NegativityReport,
    TransferMatrix,
    apply_channel,
    binomial_loss_matrix,
    channel_leakage,
    compose,
    dark_convolution_matrix,
    detector_matrix,
    invert_channel,
    truncation_diagnostics,
)
from .nonclassical import (
    GammaReport,
    ParityReport,
    classical_gamma_bound,
    eta_from_ratio,
    gamma,
    gamma_significance,
    gamma_under_loss,
    parity_test,
    poisson_mixture_oracle,
)
from .acquisition import (
    AreaHistogram,
    DetectorModel,
    PumpModel,
    default_pairs_per_uw,
    pump_sweep,
    simulate_gate_counts,
    synthesize_histogram,
)
from .fitting import (
    FittedPeak,
    PeakFitResult,
    PeakOverlapWarning,
    areas_to_probabilities,
    detect_peaks,
    fit_peaks,
)
from .cli import RunConfig, ConfigError

__version__ = "0.1.0"

__all__ = [
    "AreaHistogram",
    "ConditionNumberWarning",
    "ConfigError",
    "DetectorModel",
    "FittedPeak",
    "GammaReport",
    "NegativityReport",
    "ParityReport",
    "PeakFitResult",
    "PeakOverlapWarning",
    "PhotonDistribution",
    "PumpModel",
    "RunConfig",
    "SourceSpec",
    "TransferMatrix",
    "TruncationLossError",
    "apply_channel",
    "areas_to_probabilities",
    "binomial_loss_matrix",
    "channel_leakage",
    "classical_gamma_bound",
    "compose",
    "dark_convolution_matrix",
    "default_pairs_per_uw",
    "detect_peaks",
    "detector_matrix",
    "eta_from_ratio",
    "fit_peaks",
    "gamma",
    "gamma_significance",
    "gamma_under_loss",
    "invert_channel",
    "make_distribution",
    "mean_photon_number",
    "parity_expectation",
    "parity_test",
    "poisson_mixture_oracle",
    "pump_sweep",
    "simulate_gate_counts",
    "synthesize_histogram",
    "truncation_diagnostics",
]
