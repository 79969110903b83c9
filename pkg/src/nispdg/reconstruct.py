"""Lipschitz space-time reconstruction of DG snapshots and its PDE residual.

Per snapshot, each cell gets the unique degree-(p+1) polynomial that
interpolates prescribed interface values at both endpoints and matches the
cell moments of the DG solution up to degree p-1. Interface values default to
the arithmetic mean of the two traces; a dissipative variant recovers the
value whose exact flux equals the numerical flux, which restores trace
superconvergence and sharper residuals.

In time, consecutive spatial reconstructions are joined per interval either
affinely or by a quadratic that additionally matches the natural initial slope
-P[d/dx F(R_n)], with P the L2 projection onto the continuous space. The
space-time residual of the reconstruction, d/dt u + d/dx F(u), is then
evaluated pointwise or on tensor quadrature grids.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigError, ShapeError
from .mesh import (
    ContinuousPiecewisePoly,
    DgFunction,
    Mesh1D,
    basis_tables,
    gauss_ref,
    hat_bubble_table,
)
from .rkdg import TimePartition

INTERFACE_MODES = ("mean", "flux-recovery")
TIME_RULES = ("linear", "hermite2")


@lru_cache(maxsize=None)
def _moment_system(p: int):
    """Reference inner products of the hat/bubble basis against phi_0..phi_{p-1}.

    Returns (G_hat (2, p), G_bub_inv (p, p)) with entries
    integral_{-1}^{1} basis * phi_i dxi; the bubble block is square and
    nonsingular for p in 0..3.
    """
    if p == 0:
        return np.zeros((2, 0)), np.zeros((0, 0))
    q = p + 1
    xi, w = gauss_ref(q + 2)
    tab = basis_tables(p - 1, q + 2)
    hat, _, bub, _ = hat_bubble_table(q, xi)
    g_hat = np.einsum("aq,iq,q->ai", hat, tab.phi_q, w)
    g_bub = np.einsum("kq,iq,q->ki", bub, tab.phi_q, w)
    if abs(np.linalg.det(g_bub)) < 1e-12:
        raise ConfigError(f"bubble moment matrix is singular for p={p}")
    # the moment conditions read sum_k b_k G[k, i] = r_i, i.e. G^T b = r
    return g_hat, np.linalg.inv(g_bub.T)


def interface_values(u_h: DgFunction, model=None, mode: str = "mean") -> np.ndarray:
    """Reconstruction value at each interface j (left endpoint of cell j).

    ``mean`` averages the two traces. ``flux-recovery`` solves
    F(w) = F_hat(u_-, u_+) for w near the mean (exact for linear flux, branch
    continuation for Burgers, Newton for systems) and falls back to the mean
    where the numerical flux has no nearby preimage.
    """
    trace_l, trace_r = u_h.traces()
    u_minus = np.roll(trace_r, 1, axis=0)  # trace from cell j-1 at interface j
    u_plus = trace_l
    mean = 0.5 * (u_minus + u_plus)
    if mode == "mean":
        return mean
    if mode != "flux-recovery":
        raise ConfigError(f"unknown interface mode {mode!r}")
    if model is None:
        raise ConfigError("flux-recovery interface values need the model")

    lam = np.maximum(model.max_wave_speed(u_minus), model.max_wave_speed(u_plus))
    fhat = 0.5 * (model.flux(u_minus) + model.flux(u_plus)) - 0.5 * lam[..., None] * (
        u_plus - u_minus
    )
    name = getattr(model, "name", "")
    if name == "advection" and model.a != 0.0:
        return fhat / model.a
    if name == "burgers":
        w = np.where(
            2.0 * fhat[:, 0] >= 0.0,
            np.sign(mean[:, 0]) * np.sqrt(np.maximum(2.0 * fhat[:, 0], 0.0)),
            mean[:, 0],
        )
        w = np.where(np.abs(mean[:, 0]) < 1e-12, mean[:, 0], w)
        return w[:, None]
    # generic system: a few Newton steps from the mean, fallback to the mean
    w = mean.copy()
    ok = np.ones(w.shape[0], dtype=bool)
    for _ in range(20):
        mask = model.admissible_mask(w)
        ok &= mask
        if not ok.any():
            break
        res = model.flux(np.where(ok[:, None], w, mean)) - fhat
        jac = model.flux_jacobian(np.where(ok[:, None], w, mean))
        try:
            step = np.linalg.solve(jac, res[..., None])[..., 0]
        except np.linalg.LinAlgError:
            ok[:] = False
            break
        w = np.where(ok[:, None], w - step, w)
        if np.abs(res[ok]).max(initial=0.0) < 1e-12:
            break
    converged = ok & model.admissible_mask(w)
    final = np.where(converged[:, None], w, mean)
    resid = model.flux(final) - fhat
    good = converged & (np.abs(resid).max(axis=-1) < 1e-8)
    return np.where(good[:, None], final, mean)


def space_reconstruct(u_h: DgFunction, model=None, mode: str = "mean") -> ContinuousPiecewisePoly:
    """Continuous degree-(p+1) lift: endpoint interpolation + moment matching."""
    p = u_h.p
    iv = interface_values(u_h, model, mode)
    iv_left = iv
    iv_right = np.roll(iv, -1, axis=0)
    if p == 0:
        bubbles = np.zeros((u_h.mesh.n_cells, 0, u_h.m))
    else:
        g_hat, g_bub_inv = _moment_system(p)
        rhs = (
            2.0 * u_h.coeffs[:, :p, :]
            - np.einsum("jm,i->jim", iv_left, g_hat[0])
            - np.einsum("jm,i->jim", iv_right, g_hat[1])
        )
        bubbles = np.einsum("ki,jim->jkm", g_bub_inv, rhs)
    return ContinuousPiecewisePoly(u_h.mesh, p + 1, iv, bubbles)


class ContinuousProjector:
    """L2 projection onto the continuous degree-q space on a periodic mesh."""

    def __init__(self, mesh: Mesh1D, q: int, n_quad: int | None = None):
        self.mesh = mesh
        self.q = q
        self.n_quad = q + 2 if n_quad is None else n_quad
        self.xi, self.w = gauss_ref(self.n_quad)
        hat, _, bub, _ = hat_bubble_table(q, self.xi)
        self._basis = np.vstack([hat, bub])  # (q+1, n_quad)
        n = mesh.n_cells
        n_loc = q + 1
        n_dof = n * q  # n interface values + n (q-1) bubbles
        local_mass = 0.5 * mesh.h * np.einsum(
            "aq,bq,q->ab", self._basis, self._basis, self.w
        )
        rows, cols, vals = [], [], []
        for j in range(n):
            dofs = self._cell_dofs(j)
            for a in range(n_loc):
                for b in range(n_loc):
                    rows.append(dofs[a])
                    cols.append(dofs[b])
                    vals.append(local_mass[a, b])
        mass = sp.csc_matrix((vals, (rows, cols)), shape=(n_dof, n_dof))
        self._solve = spla.splu(mass).solve

    def _cell_dofs(self, j: int) -> list[int]:
        n = self.mesh.n_cells
        hats = [j, (j + 1) % n]
        bubs = [n + j * (self.q - 1) + k for k in range(self.q - 1)]
        return hats + bubs

    def project_values(self, vals: np.ndarray) -> ContinuousPiecewisePoly:
        """Project data given at the projector's Gauss points: vals (n_cells, n_quad, m)."""
        n = self.mesh.n_cells
        m = vals.shape[-1]
        if vals.shape[:2] != (n, self.n_quad):
            raise ShapeError(f"expected values of shape ({n}, {self.n_quad}, m)")
        local_rhs = 0.5 * self.mesh.h * np.einsum("jqm,aq,q->jam", vals, self._basis, self.w)
        rhs = np.zeros((n * self.q, m))
        for j in range(n):
            for a, dof in enumerate(self._cell_dofs(j)):
                rhs[dof] += local_rhs[j, a]
        sol = self._solve(rhs)
        iv = sol[:n]
        bubbles = sol[n:].reshape(n, self.q - 1, m)
        return ContinuousPiecewisePoly(self.mesh, self.q, iv, bubbles)

    def project(self, g) -> ContinuousPiecewisePoly:
        pts = self.mesh.cell_points(self.xi)
        vals = np.asarray(g(pts.reshape(-1)), dtype=float)
        if vals.ndim == 1:
            vals = vals[:, None]
        return self.project_values(vals.reshape(self.mesh.n_cells, self.n_quad, -1))


def _cpp_arrays(cpp: ContinuousPiecewisePoly) -> tuple[np.ndarray, np.ndarray]:
    return cpp.iv, cpp.bubbles


def time_reconstruct(
    r_n: ContinuousPiecewisePoly,
    r_np1: ContinuousPiecewisePoly,
    dt: float,
    rule: str = "linear",
    model=None,
    projector: ContinuousProjector | None = None,
) -> list[ContinuousPiecewisePoly]:
    """Per-interval time polynomial in tau = t - t_n as continuous-poly coefficients.

    ``linear`` interpolates the two endpoint reconstructions; ``hermite2``
    additionally matches the initial slope -P[d/dx F(R_n)] and remains an
    endpoint interpolant.
    """
    if r_n.mesh is not r_np1.mesh and (
        r_n.mesh.n_cells != r_np1.mesh.n_cells or r_n.mesh.h != r_np1.mesh.h
    ):
        raise ShapeError("consecutive snapshots must share the mesh")
    if rule == "linear":
        slope = ContinuousPiecewisePoly(
            r_n.mesh, r_n.q, (r_np1.iv - r_n.iv) / dt, (r_np1.bubbles - r_n.bubbles) / dt
        )
        return [r_n, slope]
    if rule != "hermite2":
        raise ConfigError(f"unknown time rule {rule!r}")
    if model is None or projector is None:
        raise ConfigError("hermite2 time rule needs the model and a continuous projector")
    vals = r_n.eval_ref(projector.xi)
    dx = r_n.dx_ref(projector.xi)
    flux_div = np.einsum("jqrc,jqc->jqr", model.flux_jacobian(vals), dx)
    s_n = projector.project_values(-flux_div)
    a2_iv = ((r_np1.iv - r_n.iv) / dt - s_n.iv) / dt
    a2_bub = ((r_np1.bubbles - r_n.bubbles) / dt - s_n.bubbles) / dt
    return [r_n, s_n, ContinuousPiecewisePoly(r_n.mesh, r_n.q, a2_iv, a2_bub)]


@dataclass
class SpaceTimeReconstruction:
    """Piecewise polynomial in t with continuous-in-x coefficients.

    ``iv_poly`` has shape (n_intervals, deg_t+1, n_cells, m) and
    ``bub_poly`` (n_intervals, deg_t+1, n_cells, q-1, m); index d holds the
    coefficient of tau^d on each interval.
    """

    mesh: Mesh1D
    partition: TimePartition
    q: int
    rule: str
    iv_poly: np.ndarray
    bub_poly: np.ndarray
    node_index: int | None = None

    @property
    def m(self) -> int:
        return self.iv_poly.shape[-1]

    @property
    def deg_t(self) -> int:
        return self.iv_poly.shape[1] - 1

    def spatial(self, n: int) -> ContinuousPiecewisePoly:
        """The reconstruction at time node t_n (exact endpoint interpolant)."""
        if n == self.partition.n_intervals:
            return self._eval_cpp(n - 1, self.partition.dt(n - 1))
        return ContinuousPiecewisePoly(
            self.mesh, self.q, self.iv_poly[n, 0], self.bub_poly[n, 0]
        )

    def _eval_cpp(self, n: int, tau: float) -> ContinuousPiecewisePoly:
        powers = tau ** np.arange(self.deg_t + 1)
        iv = np.einsum("d,djm->jm", powers, self.iv_poly[n])
        bub = np.einsum("d,djkm->jkm", powers, self.bub_poly[n])
        return ContinuousPiecewisePoly(self.mesh, self.q, iv, bub)

    def interval_of(self, t: float) -> int:
        nodes = self.partition.nodes
        if t < nodes[0] or t > nodes[-1]:
            raise ShapeError(f"t={t} outside the partition range")
        n = int(np.searchsorted(nodes, t, side="right") - 1)
        return min(n, self.partition.n_intervals - 1)

    def eval_grid(self, n: int, taus: np.ndarray, xi: np.ndarray):
        """(value, d/dt, d/dx) arrays of shape (len(taus), n_cells, len(xi), m)."""
        taus = np.asarray(taus, dtype=float)
        powers = taus[:, None] ** np.arange(self.deg_t + 1)[None, :]  # (nt, d+1)
        dpowers = np.zeros_like(powers)
        for d in range(1, self.deg_t + 1):
            dpowers[:, d] = d * taus ** (d - 1)
        iv_t = np.einsum("td,djm->tjm", powers, self.iv_poly[n])
        bub_t = np.einsum("td,djkm->tjkm", powers, self.bub_poly[n])
        iv_dt = np.einsum("td,djm->tjm", dpowers, self.iv_poly[n])
        bub_dt = np.einsum("td,djkm->tjkm", dpowers, self.bub_poly[n])

        hat, dhat, bub, dbub = hat_bubble_table(self.q, xi)
        right = lambda a: np.roll(a, -1, axis=1)

        def combine(iv_arr, bub_arr, hat_tab, bub_tab):
            out = np.einsum("tjm,q->tjqm", iv_arr, hat_tab[0]) + np.einsum(
                "tjm,q->tjqm", right(iv_arr), hat_tab[1]
            )
            if bub_arr.shape[2]:
                out += np.einsum("tjkm,kq->tjqm", bub_arr, bub_tab)
            return out

        value = combine(iv_t, bub_t, hat, bub)
        ddt = combine(iv_dt, bub_dt, hat, bub)
        ddx = combine(iv_t, bub_t, dhat, dbub) * (2.0 / self.mesh.h)
        return value, ddt, ddx

    def __call__(self, t: float, x) -> np.ndarray:
        n = self.interval_of(t)
        cpp = self._eval_cpp(n, t - float(self.partition.nodes[n]))
        return cpp(np.atleast_1d(x))


def build_space_time(
    snapshots: list[DgFunction],
    partition: TimePartition,
    model=None,
    rule: str = "linear",
    interface_mode: str = "mean",
    node_index: int | None = None,
) -> SpaceTimeReconstruction:
    """Assemble the full space-time reconstruction from per-time-node snapshots."""
    if rule not in TIME_RULES:
        raise ConfigError(f"unknown time rule {rule!r}")
    if len(snapshots) != partition.n_intervals + 1:
        raise ShapeError(
            f"{len(snapshots)} snapshots for {partition.n_intervals} intervals"
        )
    mesh = snapshots[0].mesh
    p = snapshots[0].p
    q = p + 1
    spatials = [space_reconstruct(s, model, interface_mode) for s in snapshots]
    projector = ContinuousProjector(mesh, q) if rule == "hermite2" else None
    deg_t = 1 if rule == "linear" else 2
    n_int = partition.n_intervals
    iv_poly = np.zeros((n_int, deg_t + 1, mesh.n_cells, snapshots[0].m))
    bub_poly = np.zeros((n_int, deg_t + 1, mesh.n_cells, max(q - 1, 0), snapshots[0].m))
    for n in range(n_int):
        coeffs = time_reconstruct(
            spatials[n], spatials[n + 1], partition.dt(n), rule, model, projector
        )
        for d, cpp in enumerate(coeffs):
            iv_poly[n, d] = cpp.iv
            bub_poly[n, d] = cpp.bubbles
    return SpaceTimeReconstruction(
        mesh, partition, q, rule, iv_poly, bub_poly, node_index
    )


def st_residual_eval(recon: SpaceTimeReconstruction, model, t: float, x) -> np.ndarray:
    """Pointwise space-time residual d/dt u + DF(u) d/dx u at scattered points."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = recon.interval_of(t)
    tau = t - float(recon.partition.nodes[n])
    j, xi = recon.mesh.locate(x)
    out = np.empty((x.size, recon.m))
    for idx in range(x.size):
        value, ddt, ddx = recon.eval_grid(n, np.array([tau]), np.array([xi[idx]]))
        u = value[0, j[idx], 0]
        out[idx] = ddt[0, j[idx], 0] + model.flux_jacobian(u) @ ddx[0, j[idx], 0]
    return out


def residual_grid(recon: SpaceTimeReconstruction, model, n: int, taus, xi):
    """Residual values on a tensor grid of one interval: (len(taus), n_cells, len(xi), m)."""
    value, ddt, ddx = recon.eval_grid(n, taus, xi)
    return ddt + np.einsum("tjqrc,tjqc->tjqr", model.flux_jacobian(value), ddx)


def st_quadrature(recon: SpaceTimeReconstruction, n: int, nt: int = 3, nx: int | None = None):
    """Tensor Gauss rule of one space-time slab: (taus, t-weights, xi, x-weights)."""
    nx = recon.q + 2 if nx is None else nx
    xi_t, w_t = gauss_ref(nt)
    xi_x, w_x = gauss_ref(nx)
    dt = recon.partition.dt(n)
    taus = 0.5 * dt * (xi_t + 1.0)
    return taus, 0.5 * dt * w_t, xi_x, 0.5 * recon.mesh.h * w_x


def st_residual_sq_by_interval(
    recon: SpaceTimeReconstruction, model, nt: int = 3, nx: int | None = None
) -> np.ndarray:
    """Squared L2 norm of the residual over each space-time slab."""
    out = np.empty(recon.partition.n_intervals)
    for n in range(recon.partition.n_intervals):
        taus, wt, xi, wx = st_quadrature(recon, n, nt, nx)
        res = residual_grid(recon, model, n, taus, xi)
        out[n] = np.einsum("tjqm,t,q->", res * res, wt, wx)
    return out
