"""Space-time-stochastic reconstruction, residual decomposition, and error bounds.

The per-node space-time reconstructions are projected onto the stochastic
basis (reconstructed modes); their expansion is the space-time-stochastic
reconstruction whose conservation-law residual splits orthogonally into

* deterministic modes: discrete projections of the per-node residuals,
* quadrature modes: exact-minus-discrete projection of the flux divergence,
* cut-off modes: flux-divergence energy beyond the truncation degree.

"Exact" stochastic integrals are realized by a reference Gauss rule of order
R_ref with modes up to M_ref; the residual decomposition, the initial-data
mismatch, and a sampled sup of the spatial gradient feed a Gronwall-type
relative-entropy bound on the squared error, plus its split variant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError, PreconditionError, ShapeError
from .gpc import (
    GpcBasis,
    StochasticQuadrature,
    dense_y_grid,
    discrete_projection,
    expansion_eval,
    projection_matrix,
)
from .mesh import DgFunction, basis_tables, gauss_ref
from .models import CompactBox, HessianBounds, box_from_samples, compute_hessian_bounds
from .reconstruct import (
    SpaceTimeReconstruction,
    residual_grid,
    st_quadrature,
)

GRAD_SUP_SAFETY = 1.05
FLAGGED_SAMPLE_LIMIT = 1e-3


@dataclass
class StsReconstruction:
    """Reconstructed modes plus the rules that define their expansion."""

    basis: GpcBasis
    quad: StochasticQuadrature
    max_mode: int
    modes: list[SpaceTimeReconstruction]
    node_recons: list[SpaceTimeReconstruction] = field(repr=False, default_factory=list)

    @property
    def mesh(self):
        return self.modes[0].mesh

    @property
    def partition(self):
        return self.modes[0].partition

    @property
    def m(self) -> int:
        return self.modes[0].m

    def modes_grid(self, n: int, taus, xi):
        """Stacked (value, d/dt, d/dx) of all modes: (M+1, nt, n_cells, nx, m)."""
        vals, dts, dxs = [], [], []
        for mode in self.modes:
            v, dt_, dx_ = mode.eval_grid(n, taus, xi)
            vals.append(v)
            dts.append(dt_)
            dxs.append(dx_)
        return np.stack(vals), np.stack(dts), np.stack(dxs)

    def eval(self, t: float, x, y: float) -> np.ndarray:
        """Pointwise expansion value u(t, x, y) = sum_j mode_j(t, x) Psi_j(y)."""
        samples = np.stack([mode(t, x) for mode in self.modes])
        return expansion_eval(samples, self.basis, float(y))


def reconstructed_modes(
    recons: list[SpaceTimeReconstruction],
    basis: GpcBasis,
    quad: StochasticQuadrature,
    max_mode: int,
) -> StsReconstruction:
    """Discrete projection of the per-node reconstructions onto modes 0..max_mode."""
    if len(recons) != quad.nodes.size:
        raise ShapeError(
            f"{len(recons)} reconstructions for {quad.nodes.size} quadrature nodes"
        )
    ref = recons[0]
    for r in recons[1:]:
        if r.iv_poly.shape != ref.iv_poly.shape:
            raise ShapeError("per-node reconstructions must share mesh and partition")
    proj = projection_matrix(basis, quad, max_mode)
    iv_stack = np.stack([r.iv_poly for r in recons])
    bub_stack = np.stack([r.bub_poly for r in recons])
    mode_iv = np.einsum("jl,l...->j...", proj, iv_stack)
    mode_bub = np.einsum("jl,l...->j...", proj, bub_stack)
    modes = [
        SpaceTimeReconstruction(
            ref.mesh, ref.partition, ref.q, ref.rule, mode_iv[j], mode_bub[j], None
        )
        for j in range(max_mode + 1)
    ]
    return StsReconstruction(basis, quad, max_mode, modes, list(recons))


def assemble_numerical_solution(
    snapshots_per_node: list[list[DgFunction]],
    basis: GpcBasis,
    quad: StochasticQuadrature,
    max_mode: int,
    n: int,
    x,
    y: float,
) -> np.ndarray:
    """Pointwise NISP solution at time node n: discrete projection + expansion."""
    if len(snapshots_per_node) != quad.nodes.size:
        raise ShapeError(
            f"{len(snapshots_per_node)} node solutions for {quad.nodes.size} nodes"
        )
    samples = np.stack([snaps[n](x) for snaps in snapshots_per_node])
    modes = discrete_projection(samples, basis, quad, max_mode)
    return expansion_eval(modes, basis, float(y))


def sts_eval(sts: StsReconstruction, t: float, x, y: float) -> np.ndarray:
    return sts.eval(t, x, y)


def sts_residual_eval(sts: StsReconstruction, model, t: float, x, y: float) -> np.ndarray:
    """Pointwise space-time-stochastic residual d/dt u + d/dx F(u) at (t, x, y)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = sts.modes[0].interval_of(t)
    tau = t - float(sts.partition.nodes[n])
    j, xi = sts.mesh.locate(x)
    psi = sts.basis.eval_all(float(y), sts.max_mode)
    out = np.empty((x.size, sts.m))
    for idx in range(x.size):
        vals, dts, dxs = sts.modes_grid(n, np.array([tau]), np.array([xi[idx]]))
        u = np.einsum("i,im->m", psi, vals[:, 0, j[idx], 0])
        ut = np.einsum("i,im->m", psi, dts[:, 0, j[idx], 0])
        ux = np.einsum("i,im->m", psi, dxs[:, 0, j[idx], 0])
        if not model.admissible_mask(u):
            raise NumericalError(
                f"assembled state inadmissible at t={t}, x={x[idx]}, y={y}"
            )
        out[idx] = ut + model.flux_jacobian(u) @ ux
    return out


@dataclass
class ResidualDecomposition:
    """Cumulative residual split at one time: all norms are squared L2 quantities."""

    t: float
    det_sq: np.ndarray  # (M+1,) per-mode ||R^det_j||^2 over (0, t) x domain
    sq_sq: np.ndarray  # (M+1,)
    combined_sq: np.ndarray  # (M+1,) ||R^det_j + R^sq_j||^2
    sc_sq: np.ndarray  # (M_ref - M,) for modes M+1..M_ref
    rsts_ref_sq: float  # independently sampled ||R^sts||^2 at the reference rule
    flagged_samples: int
    total_samples: int

    @property
    def E_det(self) -> float:
        return float(self.det_sq.sum())

    @property
    def E_sq(self) -> float:
        return float(self.sq_sq.sum())

    @property
    def E_sc(self) -> float:
        return float(self.sc_sq.sum())

    @property
    def E_st(self) -> float:
        """First equality of the norm splitting, truncated at M_ref."""
        return float(self.combined_sq.sum() + self.sc_sq.sum())

    @property
    def last_cutoff_mode_sq(self) -> float:
        """Norm of the last retained cut-off mode (truncation-decay diagnostic)."""
        return float(self.sc_sq[-1]) if self.sc_sq.size else 0.0


@dataclass
class ErrorBoundReport:
    t: float
    gap_sq: float
    E_st: float
    E_det: float
    E_sq: float
    E_sc: float
    E0: float
    c_flux: float
    eta_lower: float
    eta_upper: float
    grad_integral: float  # integral of ||d/dx u^sts||_inf over (0, t)
    exponent: float
    exp_factor: float
    bound: float
    split_bound: float
    true_error_sq: float | None = None
    effectivity: float | None = None

    def validate(self):
        terms = [
            self.gap_sq, self.E_st, self.E_det, self.E_sq, self.E_sc,
            self.E0, self.grad_integral, self.bound, self.split_bound,
        ]
        if any(v < 0 for v in terms):
            raise NumericalError("error-bound terms must be nonnegative")


def bound_value(
    gap_sq: float,
    residual_term: float,
    e0: float,
    bounds: HessianBounds,
    grad_integral: float,
    t: float,
) -> tuple[float, float, float]:
    """Closed Gronwall formula; returns (bound, exponent, exp_factor)."""
    exponent = (
        bounds.eta_upper * bounds.c_flux * grad_integral + bounds.eta_upper**2 * t
    ) / bounds.eta_lower
    factor = math.exp(exponent) if exponent < 709.0 else math.inf
    value = 2.0 * gap_sq + 2.0 / bounds.eta_lower * (
        residual_term + bounds.eta_upper * e0
    ) * factor
    return value, exponent, factor


class ResidualAssembler:
    """One pass over the time slabs accumulating every estimator ingredient.

    Works on tensor Gauss grids per slab (3 time points, q+2 spatial points by
    default, per the residual-norm rule); tracks per-mode squared norms, the
    independently sampled reference residual norm, the per-interval gradient
    sup trace, the state hull for the compact box, and flagged inadmissible
    samples.
    """

    def __init__(
        self,
        sts: StsReconstruction,
        model,
        basis_ref: GpcBasis,
        quad_ref: StochasticQuadrature,
        max_mode_ref: int,
        nt_quad: int = 3,
        nx_quad: int | None = None,
        dense_y: int = 64,
    ):
        if max_mode_ref <= sts.max_mode:
            raise PreconditionError("reference mode count must exceed the truncation")
        if quad_ref.order < sts.quad.order:
            raise PreconditionError("reference rule must be at least as fine as the primary")
        self.sts = sts
        self.model = model
        self.basis_ref = basis_ref
        self.quad_ref = quad_ref
        self.M = sts.max_mode
        self.M_ref = max_mode_ref
        self.nt_quad = nt_quad
        self.nx_quad = sts.modes[0].q + 2 if nx_quad is None else nx_quad
        self.proj_primary = projection_matrix(sts.basis, sts.quad, self.M)
        self.proj_ref = projection_matrix(basis_ref, quad_ref, max_mode_ref)
        self.psi_ref = basis_ref.eval_all(quad_ref.nodes, self.M)  # (R_ref+1, M+1)
        self.y_dense = dense_y_grid(sts.basis.family, dense_y)
        self.psi_dense = basis_ref.eval_all(self.y_dense, self.M)
        n_int = sts.partition.n_intervals
        self.det_sq = np.zeros((n_int, self.M + 1))
        self.sq_sq = np.zeros((n_int, self.M + 1))
        self.combined_sq = np.zeros((n_int, self.M + 1))
        self.sc_sq = np.zeros((n_int, self.M_ref - self.M))
        self.rsts_ref_sq = np.zeros(n_int)
        self.grad_sup = np.zeros(n_int)
        self.flagged = np.zeros(n_int, dtype=int)
        self.totals = np.zeros(n_int, dtype=int)
        self.state_min = np.full(sts.m, np.inf)
        self.state_max = np.full(sts.m, -np.inf)
        self.quad_oracle_rel_diff = 0.0
        self._run()

    def _slab_norm_sq(self, res: np.ndarray, wt: np.ndarray, wx: np.ndarray) -> float:
        return float(np.einsum("tjqm,t,q->", res * res, wt, wx))

    def _track_states(self, u: np.ndarray):
        flat = u.reshape(-1, u.shape[-1])
        self.state_min = np.minimum(self.state_min, flat.min(axis=0))
        self.state_max = np.maximum(self.state_max, flat.max(axis=0))

    def _flux_div(self, u: np.ndarray, ux: np.ndarray, mask: np.ndarray) -> np.ndarray:
        """DF(u) u_x with inadmissible samples zeroed (mask True = admissible)."""
        safe = np.where(mask[..., None], u, 1.0)
        out = np.einsum("...rc,...c->...r", self.model.flux_jacobian(safe), ux)
        return np.where(mask[..., None], out, 0.0)

    def _run(self):
        sts, model = self.sts, self.model
        recon0 = sts.modes[0]
        for n in range(sts.partition.n_intervals):
            taus, wt, xi, wx = st_quadrature(recon0, n, self.nt_quad, self.nx_quad)
            # per-node residual grids and flux divergences
            node_res = []
            node_dxf = []
            for rec in sts.node_recons:
                v, dt_, dx_ = rec.eval_grid(n, taus, xi)
                dxf = np.einsum("...rc,...c->...r", model.flux_jacobian(v), dx_)
                node_res.append(dt_ + dxf)
                node_dxf.append(dxf)
            node_res = np.stack(node_res)
            node_dxf = np.stack(node_dxf)

            # mode grids of the reconstruction (same projection as the modes)
            m_val, m_dt, m_dx = sts.modes_grid(n, taus, xi)

            # assembled states at the reference nodes
            u_ref = np.einsum("li,i...->l...", self.psi_ref, m_val)
            ux_ref = np.einsum("li,i...->l...", self.psi_ref, m_dx)
            ut_ref = np.einsum("li,i...->l...", self.psi_ref, m_dt)
            mask = model.admissible_mask(u_ref)
            self.totals[n] = mask.size
            self.flagged[n] = int(mask.size - mask.sum())
            if mask.any():
                self._track_states(u_ref if mask.all() else u_ref[mask])
            dxf_ref = self._flux_div(u_ref, ux_ref, mask)

            # mode projections of the flux divergence: reference vs primary rule
            ref_modes = np.einsum("jl,l...->j...", self.proj_ref, dxf_ref)
            disc_modes = np.einsum("jl,l...->j...", self.proj_primary, node_dxf)

            det = np.einsum("jl,l...->j...", self.proj_primary, node_res)
            sq = ref_modes[: self.M + 1] - disc_modes
            for j in range(self.M + 1):
                self.det_sq[n, j] = self._slab_norm_sq(det[j], wt, wx)
                self.sq_sq[n, j] = self._slab_norm_sq(sq[j], wt, wx)
                self.combined_sq[n, j] = self._slab_norm_sq(det[j] + sq[j], wt, wx)
            for idx, j in enumerate(range(self.M + 1, self.M_ref + 1)):
                self.sc_sq[n, idx] = self._slab_norm_sq(ref_modes[j], wt, wx)

            # independent sampling of the space-time-stochastic residual
            rsts = ut_ref + dxf_ref
            sq_l = np.einsum("ltjqm,t,q->l", rsts * rsts, wt, wx)
            self.rsts_ref_sq[n] = float(np.dot(self.quad_ref.weights, sq_l))

            # sampled sup of |d/dx u^sts| on the slab (gauss points + endpoints)
            xi_sup = np.concatenate([[-1.0], xi, [1.0]])
            m_val_sup, _, m_dx_sup = sts.modes_grid(n, taus, xi_sup)
            dx_dense = np.einsum("di,i...->d...", self.psi_dense, m_dx_sup)
            mag = np.sqrt(np.einsum("...m,...m->...", dx_dense, dx_dense))
            self.grad_sup[n] = float(mag.max()) * GRAD_SUP_SAFETY
            u_dense = np.einsum("di,i...->d...", self.psi_dense, m_val_sup)
            mask_d = model.admissible_mask(u_dense)
            if mask_d.any():
                self._track_states(u_dense if mask_d.all() else u_dense[mask_d])

        total_flagged = int(self.flagged.sum())
        total = int(self.totals.sum())
        if total and total_flagged / total > FLAGGED_SAMPLE_LIMIT:
            raise NumericalError(
                f"{total_flagged}/{total} assembled samples inadmissible "
                f"(> {FLAGGED_SAMPLE_LIMIT:.1%})"
            )
        self._record_quad_oracle_diagnostic()

    def _record_quad_oracle_diagnostic(self):
        """Cut-off modes of the last slab at R_ref vs a doubled rule."""
        from .gpc import build_quadrature

        sts, model = self.sts, self.model
        n = sts.partition.n_intervals - 1
        taus, wt, xi, wx = st_quadrature(sts.modes[0], n, self.nt_quad, self.nx_quad)
        m_val, _, m_dx = sts.modes_grid(n, taus, xi)
        quad2 = build_quadrature(self.quad_ref.family, 2 * self.quad_ref.order + 1)
        psi2 = self.basis_ref.eval_all(quad2.nodes, self.M)
        proj2 = projection_matrix(self.basis_ref, quad2, self.M_ref)
        u2 = np.einsum("li,i...->l...", psi2, m_val)
        ux2 = np.einsum("li,i...->l...", psi2, m_dx)
        mask = model.admissible_mask(u2)
        dxf2 = self._flux_div(u2, ux2, mask)
        modes2 = np.einsum("jl,l...->j...", proj2, dxf2)
        norms_fine = np.array(
            [self._slab_norm_sq(modes2[j], wt, wx) for j in range(self.M + 1, self.M_ref + 1)]
        )
        norms_base = self.sc_sq[n]
        scale = max(norms_fine.max(initial=0.0), norms_base.max(initial=0.0), 1e-300)
        self.quad_oracle_rel_diff = float(np.abs(norms_fine - norms_base).max() / scale)

    def decomposition_at(self, index: int) -> ResidualDecomposition:
        """Cumulative decomposition over intervals 0..index-1 (time node index)."""
        s = slice(0, index)
        return ResidualDecomposition(
            t=float(self.sts.partition.nodes[index]),
            det_sq=self.det_sq[s].sum(axis=0),
            sq_sq=self.sq_sq[s].sum(axis=0),
            combined_sq=self.combined_sq[s].sum(axis=0),
            sc_sq=self.sc_sq[s].sum(axis=0),
            rsts_ref_sq=float(self.rsts_ref_sq[s].sum()),
            flagged_samples=int(self.flagged[s].sum()),
            total_samples=int(self.totals[s].sum()),
        )

    def grad_integral_at(self, index: int) -> float:
        dts = np.diff(self.sts.partition.nodes[: index + 1])
        return float(np.dot(dts, self.grad_sup[:index]))


def decompose_residual(
    sts: StsReconstruction,
    model,
    basis_ref: GpcBasis,
    quad_ref: StochasticQuadrature,
    max_mode_ref: int,
    index: int | None = None,
) -> ResidualDecomposition:
    """Residual decomposition cumulative to a time node (default: final time)."""
    asm = ResidualAssembler(sts, model, basis_ref, quad_ref, max_mode_ref)
    if index is None:
        index = sts.partition.n_intervals
    return asm.decomposition_at(index)


def initial_error(
    sts: StsReconstruction,
    u0_xy,
    quad_ref: StochasticQuadrature,
    basis_ref: GpcBasis | None = None,
    n_quad_x: int | None = None,
) -> float:
    """Squared weighted-L2 mismatch between the data and the reconstruction at t=0.

    ``u0_xy(x, y)`` returns (len(x), m); the stochastic integral uses the
    reference rule, the spatial one a per-cell Gauss rule.
    """
    basis = basis_ref or sts.basis
    mesh = sts.mesh
    q = sts.modes[0].q
    nx = q + 4 if n_quad_x is None else n_quad_x
    xi, wx = gauss_ref(nx)
    pts = mesh.cell_points(xi)
    m_val, _, _ = sts.modes_grid(0, np.array([0.0]), xi)  # (M+1, 1, N, nx, m)
    psi = basis.eval_all(quad_ref.nodes, sts.max_mode)
    total = 0.0
    for l, (y, w) in enumerate(zip(quad_ref.nodes, quad_ref.weights)):
        recon0 = np.einsum("i,ijqm->jqm", psi[l], m_val[:, 0])
        data = np.asarray(u0_xy(pts.reshape(-1), y), dtype=float).reshape(
            mesh.n_cells, nx, -1
        )
        diff = data - recon0
        total += w * float(np.einsum("jqm,q->", diff * diff, 0.5 * mesh.h * wx))
    return total


def grad_sup_norm(
    sts: StsReconstruction,
    interval: int,
    dense_y: int = 64,
    nt: int = 3,
    nx: int | None = None,
) -> float:
    """Sampled sup of |d/dx u^sts| over one slab, times the safety factor.

    Samples the spatial Gauss points plus cell endpoints, ``nt`` times per
    interval, and a dense parameter grid; a documented lower estimate of the
    true sup compensated by the safety factor.
    """
    recon0 = sts.modes[0]
    taus, _, xi, _ = st_quadrature(recon0, interval, nt, nx)
    xi_sup = np.concatenate([[-1.0], xi, [1.0]])
    _, _, m_dx = sts.modes_grid(interval, taus, xi_sup)
    psi = sts.basis.eval_all(dense_y_grid(sts.basis.family, dense_y), sts.max_mode)
    dx_dense = np.einsum("di,i...->d...", psi, m_dx)
    mag = np.sqrt(np.einsum("...m,...m->...", dx_dense, dx_dense))
    return float(mag.max()) * GRAD_SUP_SAFETY


def solution_gap_sq(
    sts: StsReconstruction, snapshots_per_node: list[list[DgFunction]], index: int
) -> float:
    """Squared weighted-L2 distance between u^sts(t_n) and the NISP solution.

    Both fields have exact expansions in modes 0..M, so the stochastic norm is
    the sum of spatial mode-difference norms (Parseval for the true measure).
    """
    recon0 = sts.modes[0]
    q = recon0.q
    xi, wx = gauss_ref(q + 2)
    n_int = sts.partition.n_intervals
    if index < n_int:
        m_val, _, _ = sts.modes_grid(index, np.array([0.0]), xi)
    else:
        m_val, _, _ = sts.modes_grid(n_int - 1, np.array([sts.partition.dt(n_int - 1)]), xi)
    coeff_stack = np.stack([snaps[index].coeffs for snaps in snapshots_per_node])
    uh_modes = np.einsum(
        "jl,lnkm->jnkm", projection_matrix(sts.basis, sts.quad, sts.max_mode), coeff_stack
    )
    p = coeff_stack.shape[2] - 1
    tab = basis_tables(p, xi.size)  # its rule is gauss_ref(q+2), matching xi
    uh_vals = np.einsum("jnkm,kq->jnqm", uh_modes, tab.phi_q)
    diff = m_val[:, 0] - uh_vals
    return float(np.einsum("jnqm,q->", diff * diff, 0.5 * recon0.mesh.h * wx))


def ensure_hessian_bounds(
    model,
    state_lower: np.ndarray,
    state_upper: np.ndarray,
    bounds: HessianBounds | None = None,
    safety: float = 1.1,
    inflate: float = 0.1,
) -> tuple[HessianBounds, bool]:
    """Bounds valid on the sampled state hull; rebuilds the box if violated."""
    hull = np.stack([state_lower, state_upper])
    if bounds is not None and bool(bounds.box.contains(hull).all()):
        return bounds, False
    box = box_from_samples(hull, inflate=inflate)
    rebuilt = compute_hessian_bounds(model, box, safety=safety)
    if not rebuilt.box.contains(hull).all():
        raise NumericalError("state hull escapes the rebuilt compact box")
    return rebuilt, bounds is not None


def error_bound(
    decomp: ResidualDecomposition,
    gap_sq: float,
    e0: float,
    bounds: HessianBounds,
    grad_integral: float,
    true_error_sq: float | None = None,
) -> ErrorBoundReport:
    """Gronwall bound with the unsplit residual term E^st."""
    return _report(decomp, gap_sq, e0, bounds, grad_integral, split=False,
                   true_error_sq=true_error_sq)


def error_bound_split(
    decomp: ResidualDecomposition,
    gap_sq: float,
    e0: float,
    bounds: HessianBounds,
    grad_integral: float,
    true_error_sq: float | None = None,
) -> ErrorBoundReport:
    """Gronwall bound with E^st replaced by 2 E^det + 2 E^sq + E^sc."""
    return _report(decomp, gap_sq, e0, bounds, grad_integral, split=True,
                   true_error_sq=true_error_sq)


def _report(decomp, gap_sq, e0, bounds, grad_integral, split, true_error_sq):
    unsplit, exponent, factor = bound_value(
        gap_sq, decomp.E_st, e0, bounds, grad_integral, decomp.t
    )
    split_term = 2.0 * decomp.E_det + 2.0 * decomp.E_sq + decomp.E_sc
    split_val, _, _ = bound_value(gap_sq, split_term, e0, bounds, grad_integral, decomp.t)
    main = split_val if split else unsplit
    eff = None
    if true_error_sq is not None:
        eff = math.inf if true_error_sq == 0.0 else main / true_error_sq
    report = ErrorBoundReport(
        t=decomp.t,
        gap_sq=gap_sq,
        E_st=decomp.E_st,
        E_det=decomp.E_det,
        E_sq=decomp.E_sq,
        E_sc=decomp.E_sc,
        E0=e0,
        c_flux=bounds.c_flux,
        eta_lower=bounds.eta_lower,
        eta_upper=bounds.eta_upper,
        grad_integral=grad_integral,
        exponent=exponent,
        exp_factor=factor,
        bound=unsplit,
        split_bound=split_val,
        true_error_sq=true_error_sq,
        effectivity=eff,
    )
    report.validate()
    return report
