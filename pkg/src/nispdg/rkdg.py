"""Runge-Kutta discontinuous Galerkin solver for the per-node deterministic problems.

All quadrature nodes of the stochastic rule share one time partition: a first
pass evolves every node in lockstep, choosing each step from the most
restrictive CFL constraint across nodes; the recorded partition is then
replayed per node (``solve_divp``), which reproduces the lockstep states
bit-for-bit and may run concurrently across nodes.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import _kernels
from .errors import CflViolation, ConfigError, SolverFailure
from .mesh import DgFunction, Mesh1D, basis_tables, l2_project
from .models import ModelSystem

_CFL_SLACK = 1.0 + 1e-9


@dataclass(frozen=True)
class RkdgConfig:
    p: int = 1
    cfl: float | None = None  # default 0.3 / (2p + 1)
    flux_type: str = "llf"
    rk_order: int | None = None  # default min(p + 1, 3)
    limiter: str = "none"  # "none" or "tvb"
    m_tvb: float = 10.0
    n_quad: int | None = None  # volume rule, default p + 2
    # "l2" is the standard choice; "radau" matches the downwind trace instead
    # of the top Legendre moment (scalar, sign-definite wave direction only)
    # and removes the initial relaxation transient from the residual.
    initial_projection: str = "l2"

    def resolved(self) -> "RkdgConfig":
        cfg = replace(
            self,
            cfl=0.3 / (2 * self.p + 1) if self.cfl is None else self.cfl,
            rk_order=min(self.p + 1, 3) if self.rk_order is None else self.rk_order,
            n_quad=self.p + 2 if self.n_quad is None else self.n_quad,
        )
        if cfg.p < 0 or cfg.p > 3:
            raise ConfigError("polynomial degree p must be in 0..3")
        if cfg.cfl <= 0:
            raise ConfigError("cfl must be positive")
        if cfg.flux_type != "llf":
            raise ConfigError(f"unsupported flux type {cfg.flux_type!r}")
        if cfg.rk_order not in (1, 2, 3):
            raise ConfigError("rk_order must be 1, 2, or 3 (tabulated SSP schemes)")
        if cfg.limiter not in ("none", "tvb"):
            raise ConfigError(f"unsupported limiter {cfg.limiter!r}")
        if cfg.initial_projection not in ("l2", "radau"):
            raise ConfigError(f"unknown initial projection {cfg.initial_projection!r}")
        return cfg


@dataclass(frozen=True)
class TimePartition:
    """Strictly increasing time nodes t_0 = 0 < ... < t_N = T, shared by all nodes."""

    nodes: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        if nodes.ndim != 1 or nodes.size < 1 or np.any(np.diff(nodes) <= 0):
            raise ConfigError("time partition must be strictly increasing")

    @property
    def n_intervals(self) -> int:
        return self.nodes.size - 1

    @property
    def final_time(self) -> float:
        return float(self.nodes[-1])

    def dt(self, n: int) -> float:
        return float(self.nodes[n + 1] - self.nodes[n])


def project_initial(u0_func, mesh: Mesh1D, model: ModelSystem, cfg: RkdgConfig) -> DgFunction:
    """Initial DG state: cellwise L2 projection, or the downwind-matching variant.

    The ``radau`` option replaces the top Legendre coefficient so the trace on
    the outflow side of each cell interpolates the data (lower moments are
    untouched); it requires a scalar model with a nowhere-vanishing
    characteristic speed at the cell means.
    """
    f = l2_project(lambda x: u0_func(x), mesh, cfg.p, m=model.m)
    if cfg.initial_projection == "l2" or cfg.p == 0:
        return f
    if model.m != 1:
        raise ConfigError("radau initial projection supports scalar models only")
    signs = np.sign(model.flux_jacobian(f.cell_means)[:, 0, 0])
    if np.any(signs == 0.0):
        raise ConfigError(
            "radau initial projection needs a sign-definite characteristic speed"
        )
    tables = basis_tables(cfg.p, cfg.p + 2)
    edges = mesh.edges()
    down = np.where(signs > 0, edges[1:], edges[:-1])
    target = np.asarray(u0_func(down), dtype=float)
    if target.ndim == 1:
        target = target[:, None]
    phi_down = np.where(
        signs[:, None] > 0, tables.phi_r[None, :], tables.phi_l[None, :]
    )
    trace = np.einsum("jkm,jk->jm", f.coeffs, phi_down)
    f.coeffs[:, cfg.p, :] += (target - trace) / phi_down[:, cfg.p][:, None]
    return f


def numerical_flux(model: ModelSystem, u_left, u_right) -> np.ndarray:
    """Local Lax-Friedrichs flux; consistent (F_hat(u, u) = F(u)) exactly."""
    u_left = np.asarray(u_left, dtype=float)
    u_right = np.asarray(u_right, dtype=float)
    model.check_admissible(u_left)
    model.check_admissible(u_right)
    lam = np.maximum(model.max_wave_speed(u_left), model.max_wave_speed(u_right))
    return 0.5 * (model.flux(u_left) + model.flux(u_right)) - 0.5 * lam[..., None] * (
        u_right - u_left
    )


def _raise_solver_failure(model, status: int, t: float):
    raise SolverFailure(
        f"{model.name}: state left the admissible set in cell {status - 1} at t={t:.6g}",
        t=t,
        cell=status - 1,
    )


def semidiscrete_rhs(model: ModelSystem, u_h: DgFunction, config: RkdgConfig | None = None) -> DgFunction:
    """Spatial DG operator L(u_h): volume flux term minus interface fluxes, mass-inverted."""
    cfg = (config or RkdgConfig(p=u_h.p)).resolved()
    tables = basis_tables(u_h.p, cfg.n_quad)
    out = np.empty_like(u_h.coeffs)
    status = _kernels.dg_rhs(model, u_h.coeffs, tables, u_h.mesh.h, out)
    if status:
        _raise_solver_failure(model, status, t=np.nan)
    return DgFunction(u_h.mesh, u_h.p, out)


def _apply_tvb_limiter(coeffs: np.ndarray, tables, h: float, m_tvb: float) -> None:
    p = coeffs.shape[1] - 1
    if p == 0:
        return
    mean = coeffs[:, 0, :]
    d_plus = np.roll(mean, -1, axis=0) - mean
    d_minus = mean - np.roll(mean, 1, axis=0)
    trace_r = np.einsum("jkm,k->jm", coeffs, tables.phi_r)
    trace_l = np.einsum("jkm,k->jm", coeffs, tables.phi_l)
    dev_r = trace_r - mean
    dev_l = mean - trace_l

    def minmod(a, b, c):
        signs = np.sign(a)
        agree = (signs == np.sign(b)) & (signs == np.sign(c))
        return np.where(agree, signs * np.minimum(np.abs(a), np.minimum(np.abs(b), np.abs(c))), 0.0)

    tvb = m_tvb * h * h
    lim_r = np.where(np.abs(dev_r) <= tvb, dev_r, minmod(dev_r, d_plus, d_minus))
    lim_l = np.where(np.abs(dev_l) <= tvb, dev_l, minmod(dev_l, d_plus, d_minus))
    touched = (lim_r != dev_r) | (lim_l != dev_l)
    if not touched.any():
        return
    slope = lim_r / np.sqrt(3.0)  # linear part with the limited right deviation
    for k in range(1, p + 1):
        coeffs[:, k, :] = np.where(touched, slope if k == 1 else 0.0, coeffs[:, k, :])


def _ssp_step(model, coeffs, dt, tables, h, cfg) -> tuple[int, np.ndarray]:
    """One SSP-RK step; returns (status, new coefficients)."""

    def stage(c):
        rate = np.empty_like(c)
        status = _kernels.dg_rhs(model, c, tables, h, rate)
        return status, rate

    def limited(c):
        if cfg.limiter == "tvb":
            _apply_tvb_limiter(c, tables, h, cfg.m_tvb)
        return c

    status, k1 = stage(coeffs)
    if status:
        return status, coeffs
    u1 = limited(coeffs + dt * k1)
    if cfg.rk_order == 1:
        return 0, u1
    status, k2 = stage(u1)
    if status:
        return status, coeffs
    if cfg.rk_order == 2:
        return 0, limited(0.5 * coeffs + 0.5 * (u1 + dt * k2))
    u2 = limited(0.75 * coeffs + 0.25 * (u1 + dt * k2))
    status, k3 = stage(u2)
    if status:
        return status, coeffs
    return 0, limited(coeffs / 3.0 + (2.0 / 3.0) * (u2 + dt * k3))


def _node_max_speed(model, coeffs, tables, t: float) -> float:
    status, speed = _kernels.max_speed(model, coeffs, tables)
    if status:
        _raise_solver_failure(model, status, t)
    return speed


def sync_time_partition(
    model: ModelSystem,
    u0_funcs: list,
    mesh: Mesh1D,
    config: RkdgConfig,
    final_time: float,
) -> TimePartition:
    """Shared partition: each step takes the global CFL minimum over all nodes.

    The last step is clipped to land on the final time exactly; with no wave
    motion anywhere the step falls back to cfl * h.
    """
    cfg = config.resolved()
    if final_time <= 0:
        raise ConfigError("final time must be positive")
    tables = basis_tables(cfg.p, cfg.n_quad)
    states = [project_initial(f, mesh, model, cfg).coeffs for f in u0_funcs]
    nodes = [0.0]
    t = 0.0
    while t < final_time * (1.0 - 1e-14):
        speed = max(_node_max_speed(model, c, tables, t) for c in states)
        dt = cfg.cfl * mesh.h / speed if speed > 0 else cfg.cfl * mesh.h
        if t + dt >= final_time:
            dt = final_time - t
        new_states = []
        for c in states:
            status, c_new = _ssp_step(model, c, dt, tables, mesh.h, cfg)
            if status:
                _raise_solver_failure(model, status, t)
            new_states.append(c_new)
        states = new_states
        t += dt
        nodes.append(t)
    nodes[-1] = final_time
    return TimePartition(np.array(nodes))


def solve_divp(
    model: ModelSystem,
    u0_func,
    mesh: Mesh1D,
    config: RkdgConfig,
    partition: TimePartition,
) -> list[DgFunction]:
    """Evolve one node along a frozen partition; returns a snapshot per time node."""
    cfg = config.resolved()
    tables = basis_tables(cfg.p, cfg.n_quad)
    coeffs = project_initial(u0_func, mesh, model, cfg).coeffs
    snapshots = [DgFunction(mesh, cfg.p, coeffs.copy())]
    for n in range(partition.n_intervals):
        t = float(partition.nodes[n])
        dt = partition.dt(n)
        speed = _node_max_speed(model, coeffs, tables, t)
        if speed > 0 and dt > cfg.cfl * mesh.h / speed * _CFL_SLACK:
            raise CflViolation(
                f"step {n}: dt={dt:.3e} exceeds the CFL bound "
                f"{cfg.cfl * mesh.h / speed:.3e} for this node"
            )
        status, coeffs = _ssp_step(model, coeffs, dt, tables, mesh.h, cfg)
        if status:
            _raise_solver_failure(model, status, t)
        snapshots.append(DgFunction(mesh, cfg.p, coeffs.copy()))
    return snapshots
