"""beamcool: conditional-dynamics engines and a sweep CLI for feedback
cooling and squeezing of a nanomechanical beam monitored through a
transmission-line resonator."""

from .estimator import ControlGains, FilterState
from .operators import HilbertSpace
from .params import (DerivedParams, PhysicalParams, derive_params,
                     validate_regime)
from .reduced import (ReducedCoeffs, closed_form_prediction, compute_coeffs,
                      gaussian_moment_flow)

__version__ = "0.1.0"

__all__ = [
    "ControlGains", "FilterState", "HilbertSpace", "DerivedParams",
    "PhysicalParams", "derive_params", "validate_regime", "ReducedCoeffs",
    "closed_form_prediction", "compute_coeffs", "gaussian_moment_flow",
    "__version__",
]
