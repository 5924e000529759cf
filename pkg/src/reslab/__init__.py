"""Resolution-ODE tools for min-max optimisation algorithms.

Discrete algorithms (TT-GDA, GEG, TT-PPM, DN, RDN, JM), their O(1) and O(s)
resolution vector fields, spectral stability classification at saddles,
explicit step-size bounds and batch studies that compare the two views.
"""

__version__ = "0.1.0"

from .algorithms import AlgorithmId, StopRule, iterate, step, step_map  # noqa: E402
from .fields import HyperParams, Objective, eval_F, eval_grad_F, eval_H  # noqa: E402
from .odes import ResolutionOrder, consistency_exponent, resolution_field, rk4_integrate  # noqa: E402
from .problems import builtin, random_quadratic  # noqa: E402
from .stability import Verdict, classify_equilibrium, is_saddle, step_bounds  # noqa: E402

__all__ = [
    "__version__", "AlgorithmId", "StopRule", "iterate", "step", "step_map", "HyperParams",
    "Objective", "eval_F", "eval_grad_F", "eval_H", "ResolutionOrder", "consistency_exponent",
    "resolution_field", "rk4_integrate", "builtin", "random_quadratic", "Verdict",
    "classify_equilibrium", "is_saddle", "step_bounds",
]
