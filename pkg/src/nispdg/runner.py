"""Experiment runner: single runs, sweeps, CSV tables, and per-run reports."""

from __future__ import annotations

import concurrent.futures
import os
import time
from dataclasses import dataclass, replace

import numpy as np

from .config import RunConfig, serialize_config
from .errors import CflViolation, NispDgError, SolverFailure
from .estimator import (
    ErrorBoundReport,
    ResidualAssembler,
    ResidualDecomposition,
    StsReconstruction,
    ensure_hessian_bounds,
    error_bound,
    error_bound_split,
    initial_error,
    reconstructed_modes,
    solution_gap_sq,
)
from .gpc import build_basis, build_quadrature, projection_matrix
from .mesh import Mesh1D, basis_tables, gauss_ref
from .models import exact_solution_smooth_burgers, make_model
from .profiles import make_profile
from .reconstruct import build_space_time
from .rkdg import RkdgConfig, solve_divp, sync_time_partition

CSV_HEADER = "run_id,t,E_det,E_sq,E_sc,E_st,E0,bound,split_bound,true_error,effectivity,wall_ms"

EXIT_OK = 0
EXIT_SOLVER_FAILURE = 2
EXIT_VALIDATION_FAILURE = 3


@dataclass
class ResultRow:
    run_id: str
    t: float
    E_det: float
    E_sq: float
    E_sc: float
    E_st: float
    E0: float
    bound: float
    split_bound: float
    true_error: float | None
    effectivity: float | None
    wall_ms: int

    def to_csv(self) -> str:
        def num(v):
            return "" if v is None else format(v, ".17g")

        return ",".join(
            [
                self.run_id,
                num(self.t),
                num(self.E_det),
                num(self.E_sq),
                num(self.E_sc),
                num(self.E_st),
                num(self.E0),
                num(self.bound),
                num(self.split_bound),
                num(self.true_error),
                num(self.effectivity),
                str(self.wall_ms),
            ]
        )


@dataclass
class RunResult:
    config: RunConfig
    exit_code: int
    rows: list[ResultRow]
    reports: list[ErrorBoundReport]
    decompositions: list[ResidualDecomposition]
    report_indices: list[int]
    sts: StsReconstruction | None
    snapshots_per_node: list | None
    grad_sup_trace: np.ndarray | None
    quad_oracle_rel_diff: float | None
    e0: float | None
    error: str | None = None


def report_indices(nodes: np.ndarray, final_time: float, fractions) -> list[int]:
    """Reporting times snapped to the nearest partition node, deduplicated."""
    idx = sorted(
        {int(np.argmin(np.abs(nodes - f * final_time))) for f in fractions}
    )
    return [i for i in idx if i > 0] or [len(nodes) - 1]


def oracle_available(cfg: RunConfig, profile, quad_ref) -> bool:
    if cfg.model != "burgers" or not profile.supports_characteristics:
        return False
    t_shock = min(profile.shock_time(y) for y in quad_ref.nodes)
    return cfg.final_time < 0.999 * t_shock


def true_error_sq(
    profile, snapshots_per_node, sts, quad_ref, index: int, n_quad_x: int | None = None
) -> float:
    """Reference-rule squared error of the NISP solution against characteristics."""
    mesh = sts.mesh
    t = float(sts.partition.nodes[index])
    p = snapshots_per_node[0][0].p
    nx = p + 5 if n_quad_x is None else n_quad_x
    xi, wx = gauss_ref(nx)
    pts = mesh.cell_points(xi)
    tab = basis_tables(p, nx)
    coeff_stack = np.stack([snaps[index].coeffs for snaps in snapshots_per_node])
    proj = projection_matrix(sts.basis, sts.quad, sts.max_mode)
    uh_modes = np.einsum("jl,lnkm->jnkm", proj, coeff_stack)
    uh_vals = np.einsum("jnkm,kq->jnqm", uh_modes, tab.phi_q)
    psi_ref = sts.basis.eval_all(quad_ref.nodes, sts.max_mode)
    total = 0.0
    for l, (y, w) in enumerate(zip(quad_ref.nodes, quad_ref.weights)):
        u_ex = exact_solution_smooth_burgers(profile, t, pts.reshape(-1), y).reshape(
            mesh.n_cells, nx, 1
        )
        u_h = np.einsum("j,jnqm->nqm", psi_ref[l], uh_vals)
        diff = u_ex - u_h
        total += w * float(np.einsum("nqm,q->", diff * diff, 0.5 * mesh.h * wx))
    return total


def execute(config: RunConfig) -> RunResult:
    """Full pipeline: solve all nodes, reconstruct, decompose, bound, report."""
    cfg = config.resolved()
    t_start = time.perf_counter()
    model = make_model(cfg.model, **cfg.model_params)
    profile = make_profile(cfg.profile, **cfg.profile_params)
    mesh = Mesh1D(cfg.x_min, cfg.x_max, cfg.n_cells)
    solver_cfg = RkdgConfig(
        p=cfg.p,
        cfl=cfg.cfl,
        rk_order=cfg.rk_order,
        limiter=cfg.limiter,
        m_tvb=cfg.m_tvb,
        initial_projection=cfg.initial_projection,
    )
    basis = build_basis(cfg.family, max(cfg.M, cfg.M_ref))
    quad = build_quadrature(cfg.family, cfg.R)
    quad_ref = build_quadrature(cfg.family, cfg.R_ref)

    u0_funcs = [lambda x, y=y: profile(x, y) for y in quad.nodes]
    partition = sync_time_partition(model, u0_funcs, mesh, solver_cfg, cfg.final_time)
    snapshots_per_node = [
        solve_divp(model, f, mesh, solver_cfg, partition) for f in u0_funcs
    ]
    recons = [
        build_space_time(
            snaps,
            partition,
            model,
            rule=cfg.time_rule,
            interface_mode=cfg.interface_mode,
            node_index=l,
        )
        for l, snaps in enumerate(snapshots_per_node)
    ]
    sts = reconstructed_modes(recons, basis, quad, cfg.M)
    asm = ResidualAssembler(sts, model, basis, quad_ref, cfg.M_ref)
    e0 = initial_error(sts, lambda x, y: profile(x, y), quad_ref, basis)

    # compact box: reconstruction states (tracked by the assembler) + data
    xi0, _ = gauss_ref(cfg.p + 3)
    data_samples = np.concatenate(
        [profile(mesh.cell_points(xi0).reshape(-1), y) for y in quad_ref.nodes]
    )
    lower = np.minimum(asm.state_min, data_samples.min(axis=0))
    upper = np.maximum(asm.state_max, data_samples.max(axis=0))
    bounds, _ = ensure_hessian_bounds(
        model, lower, upper, safety=cfg.safety, inflate=cfg.box_inflate
    )

    indices = report_indices(partition.nodes, cfg.final_time, cfg.report_fractions)
    use_oracle = oracle_available(cfg, profile, quad_ref)

    rows, reports, decomps = [], [], []
    exit_code = EXIT_OK
    for idx in indices:
        decomp = asm.decomposition_at(idx)
        gap = solution_gap_sq(sts, snapshots_per_node, idx)
        grad_int = asm.grad_integral_at(idx)
        t_err = (
            true_error_sq(profile, snapshots_per_node, sts, quad_ref, idx)
            if use_oracle
            else None
        )
        rep = error_bound(decomp, gap, e0, bounds, grad_int, true_error_sq=t_err)
        rep_split = error_bound_split(decomp, gap, e0, bounds, grad_int, true_error_sq=t_err)
        assert rep.split_bound == rep_split.split_bound
        reports.append(rep)
        decomps.append(decomp)
        if t_err is not None and rep.effectivity is not None and rep.effectivity < 1.0:
            exit_code = EXIT_VALIDATION_FAILURE
        wall_ms = int(1000 * (time.perf_counter() - t_start))
        rows.append(
            ResultRow(
                run_id=cfg.run_id,
                t=float(partition.nodes[idx]),
                E_det=decomp.E_det,
                E_sq=decomp.E_sq,
                E_sc=decomp.E_sc,
                E_st=decomp.E_st,
                E0=e0,
                bound=rep.bound,
                split_bound=rep.split_bound,
                true_error=t_err,
                effectivity=rep.effectivity,
                wall_ms=wall_ms,
            )
        )
    return RunResult(
        config=cfg,
        exit_code=exit_code,
        rows=rows,
        reports=reports,
        decompositions=decomps,
        report_indices=indices,
        sts=sts,
        snapshots_per_node=snapshots_per_node,
        grad_sup_trace=asm.grad_sup.copy(),
        quad_oracle_rel_diff=asm.quad_oracle_rel_diff,
        e0=e0,
    )


def dry_run_checks(config: RunConfig) -> list[str]:
    """Cheap seeded self-checks for the validate subcommand.

    Builds every ingredient without time stepping: admissibility of the
    initial data on a random sample of (x, y) points, discrete orthonormality
    of the basis under the primary rule, and positivity of the reference-rule
    weights. Returns a list of human-readable check lines; raises on failure.
    """
    cfg = config.resolved()
    rng = np.random.default_rng(cfg.seed)
    model = make_model(cfg.model, **cfg.model_params)
    profile = make_profile(cfg.profile, **cfg.profile_params)
    mesh = Mesh1D(cfg.x_min, cfg.x_max, cfg.n_cells)
    RkdgConfig(p=cfg.p, cfl=cfg.cfl, rk_order=cfg.rk_order, limiter=cfg.limiter,
               initial_projection=cfg.initial_projection).resolved()
    basis = build_basis(cfg.family, max(cfg.M, cfg.M_ref))
    quad = build_quadrature(cfg.family, cfg.R)
    quad_ref = build_quadrature(cfg.family, cfg.R_ref)

    xs = rng.uniform(cfg.x_min, cfg.x_max, 64)
    ys = rng.choice(quad_ref.nodes, 16)
    for y in ys:
        model.check_admissible(profile(xs, float(y)))
    psi = basis.eval_all(quad.nodes, cfg.M)
    gram = np.einsum("li,lj,l->ij", psi, psi, quad.weights)
    ortho = float(np.abs(gram - np.eye(cfg.M + 1)).max())
    if ortho > 1e-10:
        raise NispDgError(f"discrete orthonormality violated: {ortho:.2e}")
    if quad_ref.weights.min() <= 0:
        raise NispDgError("reference rule has nonpositive weights")
    return [
        f"model {cfg.model} (m={model.m}) with profile {cfg.profile}: "
        f"initial data admissible on {xs.size} x {ys.size} seeded samples",
        f"discrete orthonormality defect {ortho:.2e} (modes 0..{cfg.M}, rule R={cfg.R})",
        f"reference rule R_ref={cfg.R_ref}: weights positive, "
        f"sum-1 = {abs(quad_ref.weights.sum() - 1.0):.1e}",
        f"mesh h = {mesh.h:.6g}, {mesh.n_cells} cells on "
        f"[{cfg.x_min:.6g}, {cfg.x_max:.6g}]",
    ]


def deterministic_estimate(config: RunConfig) -> RunResult:
    """Single-node deterministic estimator: the pipeline collapsed to R = M = 0.

    The one-point rule has node weight exactly one and a constant basis, so
    mode 0 coincides bitwise with the single node's reconstruction; E_det is
    the plain deterministic residual norm and the bound is the deterministic
    relative-entropy bound.
    """
    cfg = config.resolved()
    return execute(replace(cfg, M=0, R=0))


def rows_to_csv(rows: list[ResultRow]) -> str:
    return "\n".join([CSV_HEADER] + [r.to_csv() for r in rows]) + "\n"


def render_report(result: RunResult) -> str:
    """Structured-text report: one document per run."""
    cfg = result.config
    lines = [
        f"run_id: {cfg.run_id}",
        f"exit_code: {result.exit_code}",
        "",
        "[config]",
    ]
    lines += serialize_config(cfg).strip().splitlines()
    if result.error is not None:
        lines += ["", "[error]", result.error]
        return "\n".join(lines) + "\n"
    lines += [
        "",
        "[diagnostics]",
        f"initial_error_sq: {result.e0!r}",
        f"quad_oracle_rel_diff: {result.quad_oracle_rel_diff!r}",
        f"n_intervals: {len(result.grad_sup_trace)}",
        "grad_sup_per_interval: " + ",".join(format(v, ".8g") for v in result.grad_sup_trace),
    ]
    for rep, dec in zip(result.reports, result.decompositions):
        lines += [
            "",
            f"[report t={rep.t!r}]",
            f"gap_sq: {rep.gap_sq!r}",
            f"E_det: {rep.E_det!r}",
            f"E_sq: {rep.E_sq!r}",
            f"E_sc: {rep.E_sc!r}",
            f"E_st: {rep.E_st!r}",
            f"E0: {rep.E0!r}",
            f"rsts_ref_sq: {dec.rsts_ref_sq!r}",
            f"last_cutoff_mode_sq: {dec.last_cutoff_mode_sq!r}",
            f"flagged_samples: {dec.flagged_samples}/{dec.total_samples}",
            f"c_flux: {rep.c_flux!r}",
            f"eta_lower: {rep.eta_lower!r}",
            f"eta_upper: {rep.eta_upper!r}",
            f"grad_integral: {rep.grad_integral!r}",
            f"exponent: {rep.exponent!r}",
            f"exp_factor: {rep.exp_factor!r}",
            f"bound: {rep.bound!r}",
            f"split_bound: {rep.split_bound!r}",
            f"true_error_sq: {rep.true_error_sq!r}",
            f"effectivity: {rep.effectivity!r}",
        ]
    return "\n".join(lines) + "\n"


def run_single(config: RunConfig, out_dir: str | None = None, quiet: bool = False) -> RunResult:
    """Execute one configuration and write its CSV table and report."""
    cfg = config.resolved()
    try:
        result = execute(cfg)
    except (SolverFailure, CflViolation) as exc:
        result = RunResult(
            config=cfg, exit_code=EXIT_SOLVER_FAILURE, rows=[], reports=[],
            decompositions=[], report_indices=[], sts=None, snapshots_per_node=None,
            grad_sup_trace=np.zeros(0), quad_oracle_rel_diff=None, e0=None,
            error=f"{type(exc).__name__}: {exc}",
        )
    target = out_dir or cfg.out_dir or os.environ.get("NISPDG_OUT_DIR", ".")
    os.makedirs(target, exist_ok=True)
    csv_path = os.path.join(target, f"{cfg.run_id}.csv")
    with open(csv_path, "w") as fh:
        fh.write(rows_to_csv(result.rows))
    with open(os.path.join(target, f"{cfg.run_id}_report.txt"), "w") as fh:
        fh.write(render_report(result))
    if cfg.dump_snapshots and result.snapshots_per_node is not None:
        arrays = {
            "time_nodes": result.sts.partition.nodes,
            "quad_nodes": result.sts.quad.nodes,
            "mesh": np.array([cfg.x_min, cfg.x_max, cfg.n_cells]),
        }
        for l, snaps in enumerate(result.snapshots_per_node):
            arrays[f"node{l}"] = np.stack([s.coeffs for s in snaps])
        np.savez(os.path.join(target, f"{cfg.run_id}_snapshots.npz"), **arrays)
    if not quiet:
        for row in result.rows:
            print(row.to_csv())
        if result.error:
            print(f"run failed: {result.error}")
    return result


SWEEP_AXES = {"N_x": "n_cells", "M": "M", "R": "R"}


def sweep_configs(base: RunConfig, axis: str, values) -> list[RunConfig]:
    if axis not in SWEEP_AXES:
        raise NispDgError(f"unknown sweep axis {axis!r} (use N_x, M, or R)")
    if list(values) != sorted(set(values)) or len(values) < 2:
        raise NispDgError("sweep values must be strictly increasing, at least two")
    cfgs = []
    for v in values:
        updates = {SWEEP_AXES[axis]: int(v), "run_id": f"{base.run_id}_{axis}{int(v)}"}
        if axis in ("M", "R"):
            # keep reference rules consistent with the swept truncation
            updates["M_ref"] = None
            updates["R_ref"] = None
        cfgs.append(replace(base, **updates).resolved())
    return cfgs


def observed_orders(values, finals: dict[str, list[float]]) -> dict[str, list[float]]:
    """log2 decay rates of indicator norms (sqrt of squared aggregates).

    For the N_x axis the rate is normalized by the mesh ratio so it reads as a
    convergence order; for M and R sweeps it is the plain log2 ratio between
    consecutive values.
    """
    orders = {}
    for name, series in finals.items():
        o = []
        for k in range(len(series) - 1):
            a, b = series[k], series[k + 1]
            if a <= 0 or b <= 0:
                o.append(float("nan"))
            else:
                o.append(float(np.log2(np.sqrt(a) / np.sqrt(b))))
        orders[name] = o
    return orders


def run_sweep(
    base: RunConfig,
    axis: str,
    values,
    out_dir: str | None = None,
    workers: int = 1,
    quiet: bool = True,
) -> dict:
    """Run one config per value; aggregate final-time rows and decay orders.

    A failing run aborts the sweep after flushing the partial aggregate.
    """
    cfgs = sweep_configs(base, axis, values)
    target = out_dir or base.out_dir or os.environ.get("NISPDG_OUT_DIR", ".")
    os.makedirs(target, exist_ok=True)
    results: list[RunResult] = []
    failed = None
    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            futs = [pool.submit(run_single, c, target, True) for c in cfgs]
            for fut, cfg in zip(futs, cfgs):
                res = fut.result()
                results.append(res)
                if res.exit_code == EXIT_SOLVER_FAILURE:
                    failed = cfg.run_id
                    break
    else:
        for cfg in cfgs:
            res = run_single(cfg, target, quiet=True)
            results.append(res)
            if res.exit_code == EXIT_SOLVER_FAILURE:
                failed = cfg.run_id
                break

    rows = [r.rows[-1] for r in results if r.rows]
    finals = {
        "E_det": [row.E_det for row in rows],
        "E_sq": [row.E_sq for row in rows],
        "E_sc": [row.E_sc for row in rows],
    }
    used_values = list(values)[: len(rows)]
    orders = observed_orders(used_values, finals)

    agg_path = os.path.join(target, f"{base.run_id}_{axis}_sweep.csv")
    with open(agg_path, "w") as fh:
        fh.write(f"{axis}," + CSV_HEADER + "\n")
        for v, row in zip(used_values, rows):
            fh.write(f"{int(v)}," + row.to_csv() + "\n")
        for name, series in orders.items():
            fh.write(f"# order_{name}," + ",".join(format(o, ".4g") for o in series) + "\n")
    if not quiet:
        for v, row in zip(used_values, rows):
            print(f"{axis}={v}: " + row.to_csv())
        print("orders:", orders)
    out = {
        "results": results,
        "rows": rows,
        "orders": orders,
        "values": used_values,
        "aggregate_path": agg_path,
        "failed": failed,
    }
    return out
