"""Periodic 1D meshes, broken Legendre polynomial spaces, and continuous lifts.

Cell-local bases live on the reference element [-1, 1]:

* ``DgFunction`` uses scaled Legendre polynomials ``phi_i = sqrt(2i+1) L_i``,
  orthonormal for the normalized measure ``d(xi)/2``, so the cell mass matrix
  is ``h * I`` and the first coefficient is the cell mean.
* ``ContinuousPiecewisePoly`` uses the endpoint hats ``(1 -+ xi)/2`` plus
  bubble functions ``B_k = L_k - (L_k(-1) hat_L + L_k(1) hat_R)`` that vanish
  at both endpoints. Interface values are stored once and shared by the two
  adjacent cells, so global continuity holds by construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import numpy.polynomial.legendre as npleg

from .errors import ShapeError


@lru_cache(maxsize=None)
def gauss_ref(n: int) -> tuple[np.ndarray, np.ndarray]:
    """n-point Gauss-Legendre rule on [-1, 1] (weights sum to 2)."""
    xi, w = npleg.leggauss(n)
    xi.setflags(write=False)
    w.setflags(write=False)
    return xi, w


def legendre_table(max_deg: int, xi) -> tuple[np.ndarray, np.ndarray]:
    """Values and xi-derivatives of L_0..L_max_deg at the points ``xi``."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    vals = np.empty((max_deg + 1, xi.size))
    ders = np.zeros((max_deg + 1, xi.size))
    vals[0] = 1.0
    if max_deg >= 1:
        vals[1] = xi
        ders[1] = 1.0
    for k in range(1, max_deg):
        vals[k + 1] = ((2 * k + 1) * xi * vals[k] - k * vals[k - 1]) / (k + 1)
        ders[k + 1] = ders[k - 1] + (2 * k + 1) * vals[k]
    return vals, ders


@dataclass(frozen=True)
class BasisTables:
    """Orthonormal Legendre basis sampled at a reference Gauss rule."""

    p: int
    n_q: int
    xi_q: np.ndarray
    w_q: np.ndarray
    phi_q: np.ndarray  # (p+1, n_q)
    dphi_q: np.ndarray  # (p+1, n_q), d/dxi
    phi_l: np.ndarray  # (p+1,) values at xi = -1
    phi_r: np.ndarray  # (p+1,) values at xi = +1


@lru_cache(maxsize=None)
def basis_tables(p: int, n_q: int) -> BasisTables:
    xi, w = gauss_ref(n_q)
    scale = np.sqrt(2.0 * np.arange(p + 1) + 1.0)
    vals, ders = legendre_table(p, xi)
    phi_q = scale[:, None] * vals
    dphi_q = scale[:, None] * ders
    signs = np.where(np.arange(p + 1) % 2 == 0, 1.0, -1.0)
    phi_l = scale * signs
    phi_r = scale.copy()
    for arr in (phi_q, dphi_q, phi_l, phi_r):
        arr.setflags(write=False)
    return BasisTables(p, n_q, xi, w, phi_q, dphi_q, phi_l, phi_r)


def hat_bubble_table(q: int, xi) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Hat and bubble basis values/derivatives for degree-q continuous cells.

    Returns ``(hat (2, n), dhat (2, n), bub (q-1, n), dbub (q-1, n))``;
    the bubble block is empty for q = 1.
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    hat = np.stack([(1.0 - xi) / 2.0, (1.0 + xi) / 2.0])
    dhat = np.stack([np.full(xi.size, -0.5), np.full(xi.size, 0.5)])
    vals, ders = legendre_table(max(q, 1), xi)
    bub = np.empty((max(q - 1, 0), xi.size))
    dbub = np.empty((max(q - 1, 0), xi.size))
    for idx, k in enumerate(range(2, q + 1)):
        lm, lp = (-1.0) ** k, 1.0
        bub[idx] = vals[k] - (lm * hat[0] + lp * hat[1])
        dbub[idx] = ders[k] - (lm * dhat[0] + lp * dhat[1])
    return hat, dhat, bub, dbub


@dataclass(frozen=True)
class Mesh1D:
    """Uniform periodic mesh on [x_min, x_max]."""

    x_min: float
    x_max: float
    n_cells: int

    def __post_init__(self):
        if not (self.x_max > self.x_min and self.n_cells >= 1):
            raise ShapeError("mesh requires x_max > x_min and n_cells >= 1")

    @property
    def h(self) -> float:
        return (self.x_max - self.x_min) / self.n_cells

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    def edges(self) -> np.ndarray:
        return self.x_min + self.h * np.arange(self.n_cells + 1)

    def centers(self) -> np.ndarray:
        return self.x_min + self.h * (np.arange(self.n_cells) + 0.5)

    def cell_points(self, xi) -> np.ndarray:
        """Physical points per cell for reference coordinates ``xi``: (n_cells, len(xi))."""
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        left = self.x_min + self.h * np.arange(self.n_cells)
        return left[:, None] + 0.5 * self.h * (xi[None, :] + 1.0)

    def locate(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Cell indices and reference coordinates for points ``x`` (periodic wrap)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        s = np.mod(x - self.x_min, self.length)
        j = np.minimum((s / self.h).astype(int), self.n_cells - 1)
        xi = 2.0 * (s - j * self.h) / self.h - 1.0
        return j, np.clip(xi, -1.0, 1.0)


def _as_components(values: np.ndarray, m: int | None) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.ndim == 1 or (m == 1 and values.shape[-1] != 1):
        values = values[..., None]
    return values


class DgFunction:
    """Piecewise polynomial of degree p on a periodic mesh, m components."""

    def __init__(self, mesh: Mesh1D, p: int, coeffs: np.ndarray):
        coeffs = np.ascontiguousarray(coeffs, dtype=float)
        if coeffs.ndim != 3 or coeffs.shape[:2] != (mesh.n_cells, p + 1):
            raise ShapeError(
                f"coefficient array must be (n_cells, p+1, m); got {coeffs.shape}"
            )
        self.mesh = mesh
        self.p = p
        self.coeffs = coeffs

    @property
    def m(self) -> int:
        return self.coeffs.shape[2]

    @property
    def cell_means(self) -> np.ndarray:
        return self.coeffs[:, 0, :]

    def copy(self) -> "DgFunction":
        return DgFunction(self.mesh, self.p, self.coeffs.copy())

    def eval_ref(self, xi) -> np.ndarray:
        """Values at reference points per cell: (n_cells, len(xi), m)."""
        scale = np.sqrt(2.0 * np.arange(self.p + 1) + 1.0)
        vals, _ = legendre_table(self.p, xi)
        phi = scale[:, None] * vals
        return np.einsum("jkm,kq->jqm", self.coeffs, phi)

    def traces(self) -> tuple[np.ndarray, np.ndarray]:
        """One-sided values at the cell endpoints: (left (N, m), right (N, m))."""
        tab = basis_tables(self.p, self.p + 2)
        u_l = np.einsum("jkm,k->jm", self.coeffs, tab.phi_l)
        u_r = np.einsum("jkm,k->jm", self.coeffs, tab.phi_r)
        return u_l, u_r

    def __call__(self, x) -> np.ndarray:
        j, xi = self.mesh.locate(x)
        scale = np.sqrt(2.0 * np.arange(self.p + 1) + 1.0)
        vals, _ = legendre_table(self.p, xi)  # (p+1, npts) at per-point xi
        phi = scale[:, None] * vals
        return np.einsum("pkm,kp->pm", self.coeffs[j], phi)


class ContinuousPiecewisePoly:
    """Globally continuous piecewise polynomial of degree q with shared interface values.

    ``iv[j]`` is the value at the left endpoint of cell j (equivalently the
    right endpoint of cell j-1); evaluation at interfaces returns the shared
    value exactly from either side.
    """

    def __init__(self, mesh: Mesh1D, q: int, iv: np.ndarray, bubbles: np.ndarray):
        iv = np.ascontiguousarray(iv, dtype=float)
        bubbles = np.ascontiguousarray(bubbles, dtype=float)
        if iv.ndim != 2 or iv.shape[0] != mesh.n_cells:
            raise ShapeError(f"interface values must be (n_cells, m); got {iv.shape}")
        if bubbles.shape != (mesh.n_cells, max(q - 1, 0), iv.shape[1]):
            raise ShapeError(
                f"bubble array must be (n_cells, q-1, m); got {bubbles.shape}"
            )
        self.mesh = mesh
        self.q = q
        self.iv = iv
        self.bubbles = bubbles

    @property
    def m(self) -> int:
        return self.iv.shape[1]

    def copy(self) -> "ContinuousPiecewisePoly":
        return ContinuousPiecewisePoly(self.mesh, self.q, self.iv.copy(), self.bubbles.copy())

    def endpoint_values(self) -> tuple[np.ndarray, np.ndarray]:
        return self.iv, np.roll(self.iv, -1, axis=0)

    def eval_ref(self, xi) -> np.ndarray:
        hat, _, bub, _ = hat_bubble_table(self.q, xi)
        left, right = self.endpoint_values()
        out = np.einsum("jm,q->jqm", left, hat[0]) + np.einsum(
            "jm,q->jqm", right, hat[1]
        )
        if self.bubbles.shape[1]:
            out += np.einsum("jkm,kq->jqm", self.bubbles, bub)
        return out

    def dx_ref(self, xi) -> np.ndarray:
        """x-derivative at reference points per cell: (n_cells, len(xi), m)."""
        _, dhat, _, dbub = hat_bubble_table(self.q, xi)
        left, right = self.endpoint_values()
        out = np.einsum("jm,q->jqm", left, dhat[0]) + np.einsum(
            "jm,q->jqm", right, dhat[1]
        )
        if self.bubbles.shape[1]:
            out += np.einsum("jkm,kq->jqm", self.bubbles, dbub)
        return out * (2.0 / self.mesh.h)

    def __call__(self, x) -> np.ndarray:
        j, xi = self.mesh.locate(x)
        hat, _, bub, _ = hat_bubble_table(self.q, xi)
        left, right = self.endpoint_values()
        out = left[j] * hat[0][:, None] + right[j] * hat[1][:, None]
        if self.bubbles.shape[1]:
            out += np.einsum("pkm,kp->pm", self.bubbles[j], bub)
        return out

    @staticmethod
    def lincomb(weights, polys: list["ContinuousPiecewisePoly"]) -> "ContinuousPiecewisePoly":
        ref = polys[0]
        iv = np.einsum("l,ljm->jm", np.asarray(weights, dtype=float), np.stack([p.iv for p in polys]))
        bub = np.einsum(
            "l,ljkm->jkm",
            np.asarray(weights, dtype=float),
            np.stack([p.bubbles for p in polys]),
        )
        return ContinuousPiecewisePoly(ref.mesh, ref.q, iv, bub)


def l2_project(g, mesh: Mesh1D, p: int, m: int = 1, n_quad: int | None = None) -> DgFunction:
    """Cellwise L2 projection of a callable ``g(x) -> (npts, m) or (npts,)``.

    Uses a (p+2)-point Gauss rule per cell by default, exact for polynomial
    data up to degree p.
    """
    n_quad = p + 2 if n_quad is None else n_quad
    tab = basis_tables(p, n_quad)
    pts = mesh.cell_points(tab.xi_q)
    vals = _as_components(g(pts.reshape(-1)), m).reshape(mesh.n_cells, n_quad, m)
    coeffs = 0.5 * np.einsum("jqm,kq,q->jkm", vals, tab.phi_q, tab.w_q)
    return DgFunction(mesh, p, coeffs)


def dg_norms(f) -> tuple[float, float]:
    """(L2 norm, sampled L-infinity estimate) of a DgFunction or continuous lift.

    The L2 norm integrates the squared Euclidean norm of the components with
    a per-cell Gauss rule exact for the squared polynomial; the sup estimate
    samples quadrature points and cell endpoints and is a lower estimate of
    the true sup.
    """
    deg = f.p if isinstance(f, DgFunction) else f.q
    xi, w = gauss_ref(deg + 2)
    vals = f.eval_ref(xi)
    sq = np.einsum("jqm->jq", vals * vals)
    l2 = np.sqrt(0.5 * f.mesh.h * np.sum(sq * w[None, :]))
    ends = f.eval_ref(np.array([-1.0, 1.0]))
    point_mag = np.sqrt(
        np.concatenate([sq.reshape(-1), np.einsum("jqm->jq", ends * ends).reshape(-1)])
    )
    return l2, float(point_mag.max(initial=0.0))
