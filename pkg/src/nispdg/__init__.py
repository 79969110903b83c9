"""RKDG solver for 1D random conservation laws with computable a posteriori error bounds.

The stochastic dimension is discretized by non-intrusive spectral projection
(Gauss quadrature + discrete orthogonal projection onto an orthonormal
polynomial basis), space and time by a Runge-Kutta discontinuous Galerkin
method. A Lipschitz space-time reconstruction of the numerical solution makes
the PDE residual computable; a relative-entropy stability estimate turns the
residual into an error bound that splits into deterministic, stochastic
quadrature, and stochastic cut-off parts.
"""

__version__ = "0.1.0"

from .config import RunConfig, parse_config, serialize_config
from .models import (
    Burgers,
    CompactBox,
    HessianBounds,
    LinearAdvection,
    ModelSystem,
    ShallowWater,
    compute_hessian_bounds,
    exact_solution_smooth_burgers,
    make_model,
)
from .profiles import make_profile
from .runner import deterministic_estimate, execute, run_single, run_sweep

__all__ = [
    "Burgers",
    "CompactBox",
    "HessianBounds",
    "LinearAdvection",
    "ModelSystem",
    "RunConfig",
    "ShallowWater",
    "compute_hessian_bounds",
    "deterministic_estimate",
    "exact_solution_smooth_burgers",
    "execute",
    "make_model",
    "make_profile",
    "parse_config",
    "run_single",
    "run_sweep",
    "serialize_config",
]
