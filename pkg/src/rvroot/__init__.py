"""Real-valued root-MUSIC DOA estimation with first-order error prediction."""
from .array_model import Scenario, UlaConfig
from .errors import (ContractViolation, EstimationFailure, GratingLobeError, InconsistencyError,
                     NumericalError, RankDeficiency, RvRootError, TheoremViolation)
from .estimator import DoaEstimate, RootDiagnostics, estimate, estimate_from_covariance

__version__ = "0.1.0"

__all__ = [
    "Scenario", "UlaConfig", "DoaEstimate", "RootDiagnostics", "estimate", "estimate_from_covariance",
    "RvRootError", "ContractViolation", "NumericalError", "RankDeficiency", "InconsistencyError",
    "EstimationFailure", "GratingLobeError", "TheoremViolation", "__version__",
]
