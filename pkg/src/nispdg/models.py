"""Conservation-law systems: fluxes, entropy pairs, wave speeds, Hessian bounds.

All model callables are vectorized over leading axes: states have shape
``(..., m)``, Jacobians ``(..., m, m)``, Hessians ``(..., m, m, m)`` (first
matrix index pair per flux component). Scalar models use m = 1.

Model objects are immutable after construction and safe to share across
concurrent solver instances. Each bundled model carries a ``kernel_id`` so
the compiled DG core can dispatch on it; custom subclasses leave it ``None``
and run on the numpy kernels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AdmissibilityError, NumericalError, PreconditionError

# ids understood by the compiled kernel
KERNEL_ADVECTION = 0
KERNEL_BURGERS = 1
KERNEL_SHALLOW_WATER = 2


class ModelSystem:
    """Base class for strictly hyperbolic systems with a convex entropy pair."""

    m: int = 1
    name: str = "model"
    kernel_id: int | None = None
    kernel_param: float = 0.0

    # --- maps U -> R^m etc.; subclasses implement all of these -------------
    def flux(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def flux_jacobian(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def flux_hessian(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def entropy(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def entropy_gradient(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def entropy_hessian(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def entropy_flux(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def max_wave_speed(self, u: np.ndarray) -> np.ndarray:
        """Spectral radius of the flux Jacobian, shape ``u.shape[:-1]``."""
        raise NotImplementedError

    # --- admissibility ------------------------------------------------------
    def admissible_mask(self, u: np.ndarray) -> np.ndarray:
        """Boolean mask over ``u.shape[:-1]``; True where the state is in U."""
        u = np.asarray(u)
        return np.ones(u.shape[:-1], dtype=bool)

    def admissibility_constraint(self) -> str:
        return "state space is all of R^m"

    def check_admissible(self, u: np.ndarray) -> None:
        if not self.admissible_mask(np.asarray(u, dtype=float)).all():
            raise AdmissibilityError(
                f"{self.name}: inadmissible state ({self.admissibility_constraint()})"
            )

    # --- compact-set bounds -------------------------------------------------
    def hessian_bound_formulas(self, box: "CompactBox"):
        """Analytic (c_flux, eta_lower, eta_upper) on the box, or None."""
        return None


class Burgers(ModelSystem):
    """Scalar Burgers flux u^2/2 with the quadratic entropy."""

    m = 1
    name = "burgers"
    kernel_id = KERNEL_BURGERS

    def flux(self, u):
        u = np.asarray(u, dtype=float)
        return 0.5 * u * u

    def flux_jacobian(self, u):
        u = np.asarray(u, dtype=float)
        return u[..., None]

    def flux_hessian(self, u):
        u = np.asarray(u, dtype=float)
        return np.ones(u.shape + (1, 1))

    def entropy(self, u):
        u = np.asarray(u, dtype=float)
        return 0.5 * u[..., 0] ** 2

    def entropy_gradient(self, u):
        return np.asarray(u, dtype=float).copy()

    def entropy_hessian(self, u):
        u = np.asarray(u, dtype=float)
        return np.ones(u.shape + (1,))

    def entropy_flux(self, u):
        u = np.asarray(u, dtype=float)
        return u[..., 0] ** 3 / 3.0

    def max_wave_speed(self, u):
        u = np.asarray(u, dtype=float)
        return np.abs(u[..., 0])

    def hessian_bound_formulas(self, box):
        return 1.0, 1.0, 1.0


class LinearAdvection(ModelSystem):
    """Linear transport with constant speed; quadratic entropy."""

    m = 1
    name = "advection"
    kernel_id = KERNEL_ADVECTION

    def __init__(self, a: float = 1.0):
        self.a = float(a)
        self.kernel_param = self.a

    def flux(self, u):
        return self.a * np.asarray(u, dtype=float)

    def flux_jacobian(self, u):
        u = np.asarray(u, dtype=float)
        return np.full(u.shape + (1,), self.a)

    def flux_hessian(self, u):
        u = np.asarray(u, dtype=float)
        return np.zeros(u.shape + (1, 1))

    def entropy(self, u):
        u = np.asarray(u, dtype=float)
        return 0.5 * u[..., 0] ** 2

    def entropy_gradient(self, u):
        return np.asarray(u, dtype=float).copy()

    def entropy_hessian(self, u):
        u = np.asarray(u, dtype=float)
        return np.ones(u.shape + (1,))

    def entropy_flux(self, u):
        u = np.asarray(u, dtype=float)
        return 0.5 * self.a * u[..., 0] ** 2

    def max_wave_speed(self, u):
        u = np.asarray(u, dtype=float)
        return np.full(u.shape[:-1], abs(self.a))

    def hessian_bound_formulas(self, box):
        # the flux Hessian vanishes identically; zero is a valid upper bound
        return 0.0, 1.0, 1.0


class ShallowWater(ModelSystem):
    """1D shallow water equations in (h, hu) with total-energy entropy."""

    m = 2
    name = "shallow-water"
    kernel_id = KERNEL_SHALLOW_WATER

    def __init__(self, g: float = 1.0):
        if g <= 0:
            raise ValueError("gravity must be positive")
        self.g = float(g)
        self.kernel_param = self.g

    def admissible_mask(self, u):
        u = np.asarray(u)
        return u[..., 0] > 0.0

    def admissibility_constraint(self) -> str:
        return "water height h must be positive"

    def flux(self, u):
        u = np.asarray(u, dtype=float)
        h, q = u[..., 0], u[..., 1]
        return np.stack([q, q * q / h + 0.5 * self.g * h * h], axis=-1)

    def flux_jacobian(self, u):
        u = np.asarray(u, dtype=float)
        h, q = u[..., 0], u[..., 1]
        zeros = np.zeros_like(h)
        ones = np.ones_like(h)
        row0 = np.stack([zeros, ones], axis=-1)
        row1 = np.stack([-(q / h) ** 2 + self.g * h, 2.0 * q / h], axis=-1)
        return np.stack([row0, row1], axis=-2)

    def flux_hessian(self, u):
        u = np.asarray(u, dtype=float)
        h, q = u[..., 0], u[..., 1]
        hess = np.zeros(h.shape + (2, 2, 2))
        hess[..., 1, 0, 0] = 2.0 * q * q / h**3 + self.g
        hess[..., 1, 0, 1] = -2.0 * q / h**2
        hess[..., 1, 1, 0] = -2.0 * q / h**2
        hess[..., 1, 1, 1] = 2.0 / h
        return hess

    def entropy(self, u):
        u = np.asarray(u, dtype=float)
        h, q = u[..., 0], u[..., 1]
        return 0.5 * q * q / h + 0.5 * self.g * h * h

    def entropy_gradient(self, u):
        u = np.asarray(u, dtype=float)
        h, q = u[..., 0], u[..., 1]
        return np.stack([-0.5 * (q / h) ** 2 + self.g * h, q / h], axis=-1)

    def entropy_hessian(self, u):
        u = np.asarray(u, dtype=float)
        h, q = u[..., 0], u[..., 1]
        hess = np.empty(h.shape + (2, 2))
        hess[..., 0, 0] = q * q / h**3 + self.g
        hess[..., 0, 1] = -q / h**2
        hess[..., 1, 0] = -q / h**2
        hess[..., 1, 1] = 1.0 / h
        return hess

    def entropy_flux(self, u):
        u = np.asarray(u, dtype=float)
        h, q = u[..., 0], u[..., 1]
        return 0.5 * q**3 / h**2 + self.g * q * h

    def max_wave_speed(self, u):
        u = np.asarray(u, dtype=float)
        h, q = u[..., 0], u[..., 1]
        return np.abs(q / h) + np.sqrt(self.g * h)


def flux_eval(model: ModelSystem, u) -> np.ndarray:
    """Validated flux evaluation: rejects states outside the admissible set."""
    u = np.asarray(u, dtype=float)
    model.check_admissible(u)
    return model.flux(u)


MODELS = {
    "burgers": Burgers,
    "advection": LinearAdvection,
    "shallow-water": ShallowWater,
}


def make_model(name: str, **params) -> ModelSystem:
    try:
        cls = MODELS[name]
    except KeyError:
        raise AdmissibilityError(f"unknown model {name!r}") from None
    return cls(**params)


@dataclass(frozen=True)
class CompactBox:
    """Componentwise bounds of a convex compact subset of the state space."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        if lower.shape != upper.shape or np.any(lower > upper):
            raise AdmissibilityError("box requires lower <= upper componentwise")

    @property
    def m(self) -> int:
        return self.lower.shape[0]

    def contains(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return np.all((u >= self.lower) & (u <= self.upper), axis=-1)

    def grid(self, n_per_dim: int) -> np.ndarray:
        axes = [
            np.linspace(self.lower[i], self.upper[i], n_per_dim)
            for i in range(self.m)
        ]
        pts = np.meshgrid(*axes, indexing="ij")
        return np.stack([p.reshape(-1) for p in pts], axis=-1)


def box_from_samples(samples: np.ndarray, inflate: float = 0.1) -> CompactBox:
    """Componentwise hull of the samples, inflated by a fraction of its diameter."""
    samples = np.asarray(samples, dtype=float).reshape(-1, np.asarray(samples).shape[-1])
    lower = samples.min(axis=0)
    upper = samples.max(axis=0)
    pad = inflate * (upper - lower)
    tiny = 1e-8 * (1.0 + np.abs(0.5 * (lower + upper)))
    pad = np.where(pad > 0, pad, tiny)
    return CompactBox(lower - pad, upper + pad)


@dataclass(frozen=True)
class HessianBounds:
    """Constants bounding the flux and entropy Hessians on a compact box."""

    c_flux: float
    eta_lower: float
    eta_upper: float
    box: CompactBox
    method: str
    safety: float

    def __post_init__(self):
        if not (0.0 < self.eta_lower <= self.eta_upper < np.inf):
            raise NumericalError("entropy Hessian bounds must satisfy 0 < lower <= upper")
        if not (0.0 <= self.c_flux < np.inf):
            raise NumericalError("flux Hessian bound must be finite and nonnegative")


def _direction_sphere(m: int, n_dirs: int) -> np.ndarray:
    if m == 1:
        return np.ones((1, 1))
    theta = 2.0 * np.pi * np.arange(n_dirs) / n_dirs
    if m == 2:
        return np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    rng = np.random.default_rng(0)
    v = rng.standard_normal((n_dirs, m))
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def _grid_size(m: int) -> int:
    return {1: 4001, 2: 101}.get(m, 23)


def compute_hessian_bounds(
    model: ModelSystem,
    box: CompactBox,
    safety: float = 1.1,
    n_grid: int | None = None,
    n_dirs: int = 64,
) -> HessianBounds:
    """Bounds for |v^T HF v| and the eigenvalue range of the entropy Hessian.

    Uses the model's closed-form constants when available; otherwise samples a
    tensor grid of states (directions on the unit sphere for the flux part,
    exact eigenvalue extrema for the entropy part) and applies the safety
    factor to the sampled extrema.
    """
    if safety < 1.0:
        raise PreconditionError("safety factor must be >= 1")
    analytic = model.hessian_bound_formulas(box)
    if analytic is not None:
        c_flux, eta_lower, eta_upper = analytic
        return HessianBounds(c_flux, eta_lower, eta_upper, box, "analytic", safety)

    states = box.grid(_grid_size(model.m) if n_grid is None else n_grid)
    if not model.admissible_mask(states).all():
        raise AdmissibilityError(
            f"{model.name}: box leaves the admissible set ({model.admissibility_constraint()})"
        )
    dirs = _direction_sphere(model.m, n_dirs)

    hf = model.flux_hessian(states)  # (S, m, m, m)
    quad = np.einsum("di,srij,dj->sdr", dirs, hf, dirs)
    c_flux = float(np.linalg.norm(quad, axis=-1).max())

    heta = model.entropy_hessian(states)
    eigs = np.linalg.eigvalsh(heta)
    eta_lower = float(eigs[..., 0].min())
    eta_upper = float(eigs[..., -1].max())
    if eta_lower <= 0.0:
        raise NumericalError(
            f"{model.name}: sampled entropy Hessian is not positive definite on the box"
        )
    return HessianBounds(
        c_flux * safety, eta_lower / safety, eta_upper * safety, box, "sampled", safety
    )


def exact_solution_smooth_burgers(
    profile,
    t: float,
    x: np.ndarray,
    y: float,
    tol: float = 1e-12,
    max_iter: int = 60,
) -> np.ndarray:
    """Classical pre-shock Burgers solution by the method of characteristics.

    Solves ``x = s + t u0(s, y)`` for the foot point ``s`` with a safeguarded
    (bisection-protected) Newton iteration, then returns ``u0(s, y)``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    t = float(t)
    t_shock = profile.shock_time(y)
    if t < 0 or t >= t_shock:
        raise PreconditionError(
            f"t={t} is not before the shock-formation time {t_shock}"
        )
    if t == 0.0:
        return profile(x, y)

    # bracket the monotone increasing g(s) = s + t u0(s, y) - x
    umin, umax = profile.value_range(y)
    lo = x - t * (umax + 1.0)
    hi = x - t * (umin - 1.0)

    def g(s):
        return s + t * profile(s, y)[:, 0] - x

    def gp(s):
        return 1.0 + t * profile.x_derivative(s, y)[:, 0]

    if np.any(g(lo) > 0) or np.any(g(hi) < 0):
        raise NumericalError("failed to bracket the characteristic foot point")

    s = 0.5 * (lo + hi)
    for _ in range(max_iter):
        gs = g(s)
        if np.abs(gs).max() < tol:
            break
        lo = np.where(gs <= 0, s, lo)
        hi = np.where(gs > 0, s, hi)
        s_new = s - gs / gp(s)
        outside = (s_new <= lo) | (s_new >= hi)
        s = np.where(outside, 0.5 * (lo + hi), s_new)
    else:
        raise NumericalError("characteristic Newton iteration did not converge")
    return profile(s, y)
