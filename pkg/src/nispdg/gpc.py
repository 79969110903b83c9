"""Orthonormal polynomial bases and Gauss quadrature on the stochastic parameter domain.

Two Wiener-Askey families are supported:

* ``uniform``: Legendre polynomials, orthonormal for the density 1/2 on [-1, 1];
* ``normal``: probabilists' Hermite polynomials, orthonormal for the standard
  normal density on the real line.

Both densities integrate to one, so the degree-0 member of either family is
the constant 1, quadrature weights sum to one, and discrete projections of
constants return the constant in mode 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import numpy.polynomial.hermite_e as hermite_e
import numpy.polynomial.legendre as legendre

from .errors import ConfigError, ShapeError

FAMILIES = ("uniform", "normal")


def _recurrence_beta(family: str, count: int) -> np.ndarray:
    """Monic three-term recurrence coefficients beta_0..beta_{count-1}.

    Both families have alpha_k = 0 by symmetry; beta_0 is the total mass of
    the density (one for probability densities).
    """
    k = np.arange(count, dtype=float)
    if family == "uniform":
        beta = k * k / (4.0 * k * k - 1.0)
    elif family == "normal":
        beta = k.copy()
    else:
        raise ConfigError(f"unsupported stochastic family: {family!r}")
    beta[0] = 1.0
    return beta


@dataclass(frozen=True)
class GpcBasis:
    """Orthonormal polynomial family up to a fixed maximal degree."""

    family: str
    max_degree: int
    _sqrt_beta: np.ndarray = field(repr=False)

    def eval_all(self, y, degree: int | None = None) -> np.ndarray:
        """Evaluate members 0..degree at ``y``; returns shape ``y.shape + (degree+1,)``."""
        if degree is None:
            degree = self.max_degree
        if degree > self.max_degree:
            raise ShapeError(
                f"degree {degree} exceeds basis max_degree {self.max_degree}"
            )
        y = np.asarray(y, dtype=float)
        out = np.empty(y.shape + (degree + 1,))
        out[..., 0] = 1.0
        if degree >= 1:
            out[..., 1] = y / self._sqrt_beta[1]
        for k in range(1, degree):
            out[..., k + 1] = (
                y * out[..., k] - self._sqrt_beta[k] * out[..., k - 1]
            ) / self._sqrt_beta[k + 1]
        return out


@dataclass(frozen=True)
class StochasticQuadrature:
    """Gauss rule for the family density: ``order + 1`` nodes and weights."""

    family: str
    order: int
    nodes: np.ndarray
    weights: np.ndarray


def build_basis(family: str, max_degree: int) -> GpcBasis:
    if max_degree < 0:
        raise ConfigError("basis degree must be nonnegative")
    beta = _recurrence_beta(family, max_degree + 1)
    return GpcBasis(family=family, max_degree=max_degree, _sqrt_beta=np.sqrt(beta))


def build_quadrature(family: str, order: int) -> StochasticQuadrature:
    """(order+1)-point Gauss rule, weights normalized to the probability density."""
    if order < 0:
        raise ConfigError("quadrature order must be nonnegative")
    n = order + 1
    if family == "uniform":
        nodes, weights = legendre.leggauss(n)
        weights = weights / 2.0
    elif family == "normal":
        nodes, weights = hermite_e.hermegauss(n)
        weights = weights / np.sqrt(2.0 * np.pi)
    else:
        raise ConfigError(f"unsupported stochastic family: {family!r}")
    return StochasticQuadrature(family=family, order=order, nodes=nodes, weights=weights)


def dense_y_grid(family: str, n: int = 64) -> np.ndarray:
    """Dense sampling grid on the parameter domain for sup-norm estimates.

    Equispaced for the bounded uniform family; Gauss nodes of an n-point rule
    for the Gaussian family (their spread covers the relevant tail mass).
    """
    if family == "uniform":
        return np.linspace(-1.0, 1.0, n)
    if family == "normal":
        return hermite_e.hermegauss(n)[0]
    raise ConfigError(f"unsupported stochastic family: {family!r}")


def projection_matrix(basis: GpcBasis, quad: StochasticQuadrature, max_mode: int) -> np.ndarray:
    """Matrix ``P[i, l] = Psi_i(y_l) w_l`` realizing the discrete projection."""
    psi = basis.eval_all(quad.nodes, max_mode)  # (R+1, max_mode+1)
    return psi.T * quad.weights[np.newaxis, :]


def discrete_projection(samples, basis: GpcBasis, quad: StochasticQuadrature, max_mode: int):
    """Discrete orthogonal projection of per-node samples onto modes 0..max_mode.

    ``samples`` has shape ``(R+1, ...)``, one entry per quadrature node; the
    result has shape ``(max_mode+1, ...)`` with
    ``modes[i] = sum_l samples[l] Psi_i(y_l) w_l``.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.shape[0] != quad.nodes.shape[0]:
        raise ShapeError(
            f"got {samples.shape[0]} samples for {quad.nodes.shape[0]} quadrature nodes"
        )
    if max_mode > basis.max_degree:
        raise ShapeError(
            f"mode {max_mode} exceeds basis max_degree {basis.max_degree}"
        )
    proj = projection_matrix(basis, quad, max_mode)
    return np.einsum("il,l...->i...", proj, samples)


def expansion_eval(modes, basis: GpcBasis, y):
    """Evaluate a truncated expansion ``sum_i modes[i] Psi_i(y)``.

    ``modes`` has shape ``(M+1, ...)``; scalar ``y`` yields shape ``(...)``,
    array ``y`` of shape ``(K,)`` yields ``(K, ...)``.
    """
    modes = np.asarray(modes, dtype=float)
    n_modes = modes.shape[0]
    psi = basis.eval_all(y, n_modes - 1)
    if psi.ndim == 1:  # scalar y
        return np.einsum("i,i...->...", psi, modes)
    return np.einsum("ki,i...->k...", psi, modes)
