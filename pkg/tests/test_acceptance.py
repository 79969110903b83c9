"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the criterion lines
and the recorded effectivities. Criteria that apply to "every run" (splitting
inequality, split-bound dominance) are checked against every pipeline run
executed by this module.
"""

import time
from dataclasses import replace

import numpy as np
import pytest

from nispdg.config import RunConfig
from nispdg.gpc import build_basis, build_quadrature
from nispdg.mesh import Mesh1D, gauss_ref
from nispdg.models import Burgers, LinearAdvection, exact_solution_smooth_burgers
from nispdg.profiles import SineProfile
from nispdg.reconstruct import build_space_time, st_residual_sq_by_interval
from nispdg.rkdg import RkdgConfig, solve_divp, sync_time_partition
from nispdg.runner import deterministic_estimate, execute, run_single

BENCH = RunConfig(
    model="burgers",
    profile="sine",
    profile_params={"amp": 0.5, "amp_y": 0.1, "offset": 1.0},
    n_cells=64,
    p=1,
    final_time=0.5,
    M=3,
    R=5,
    M_ref=13,
    R_ref=28,
    time_rule="hermite2",
    interface_mode="flux-recovery",
    initial_projection="radau",
    run_id="bench",
)

# every pipeline run executed by this module lands here; criteria 5 and 7
# assert over all of them
ALL_RUNS: list = []


def tracked_execute(cfg):
    res = execute(cfg)
    ALL_RUNS.append(res)
    return res


@pytest.fixture(scope="module")
def bench_run():
    return tracked_execute(BENCH)


def report(criterion, ok, detail):
    print(f"ACCEPTANCE {criterion} [{'PASS' if ok else 'FAIL'}] {detail}", flush=True)


def test_criterion_01_orthonormality_and_quadrature():
    t0 = time.perf_counter()
    worst = 0.0
    worst_w = 0.0
    for family in ("uniform", "normal"):
        basis = build_basis(family, 10)
        quad = build_quadrature(family, 10)  # exact for degree 21 >= i + j
        psi = basis.eval_all(quad.nodes, 10)
        gram = np.einsum("li,lj,l->ij", psi, psi, quad.weights)
        worst = max(worst, np.abs(gram - np.eye(11)).max())
        worst_w = max(worst_w, abs(quad.weights.sum() - 1.0))
    runtime = time.perf_counter() - t0
    ok = worst < 1e-12 and worst_w < 1e-13 and runtime < 1.0
    report(1, ok, f"max |gram - I| = {worst:.2e} (tol 1e-12), "
                  f"|sum w - 1| = {worst_w:.2e} (tol 1e-13), runtime {runtime:.2f}s < 1s")
    assert worst < 1e-12
    assert worst_w < 1e-13
    assert runtime < 1.0


def _solution_l2_error(model, u0, exact_vals, n_cells, p, T):
    mesh = Mesh1D(0.0, 2 * np.pi, n_cells)
    cfg = RkdgConfig(p=p)
    part = sync_time_partition(model, [u0], mesh, cfg, T)
    snaps = solve_divp(model, u0, mesh, cfg, part)
    xi, w = gauss_ref(p + 4)
    pts = mesh.cell_points(xi)
    diff = snaps[-1].eval_ref(xi)[:, :, 0] - exact_vals(pts.reshape(-1), T).reshape(
        n_cells, xi.size
    )
    return np.sqrt(0.5 * mesh.h * np.sum(diff**2 * w))


def test_criterion_02_rkdg_convergence():
    t0 = time.perf_counter()
    lines = []
    ok = True
    profile = SineProfile(amp=0.25, offset=0.5)
    cases = {
        "advection": (
            LinearAdvection(1.0),
            lambda x: np.sin(x),
            lambda x, t: np.sin(x - t),
            1.0,
        ),
        "burgers": (
            Burgers(),
            lambda x: profile(x, 0.0)[:, 0],
            lambda x, t: exact_solution_smooth_burgers(profile, t, x, 0.0)[:, 0],
            0.5,
        ),
    }
    for name, (model, u0, exact, T) in cases.items():
        for p in (1, 2):
            errs = [
                _solution_l2_error(model, u0, exact, n, p, T) for n in (32, 64, 128)
            ]
            orders = [np.log2(errs[i] / errs[i + 1]) for i in range(2)]
            ok &= min(orders) >= p + 0.8
            lines.append(f"{name} p={p}: orders {orders[0]:.2f}, {orders[1]:.2f}")
    runtime = time.perf_counter() - t0
    ok &= runtime < 30.0
    report(2, ok, "; ".join(lines) + f"; runtime {runtime:.1f}s < 30s")
    assert ok


def test_criterion_03_reconstruction_contract():
    t0 = time.perf_counter()
    model = Burgers()
    profile = SineProfile(amp=0.25, offset=0.5)
    u0 = lambda x: profile(x, 0.0)[:, 0]
    p, T = 1, 0.5

    endpoint_worst = 0.0
    jump_worst = 0.0
    moment_worst = 0.0
    norms = []
    for n in (32, 64, 128):
        mesh = Mesh1D(0.0, 2 * np.pi, n)
        cfg = RkdgConfig(p=p, initial_projection="radau")
        part = sync_time_partition(model, [u0], mesh, cfg, T)
        snaps = solve_divp(model, u0, mesh, cfg, part)
        recon = build_space_time(
            snaps, part, model, rule="hermite2", interface_mode="flux-recovery"
        )
        norms.append(np.sqrt(st_residual_sq_by_interval(recon, model).sum()))

        from nispdg.mesh import basis_tables
        from nispdg.reconstruct import space_reconstruct

        xi, w = gauss_ref(p + 3)
        for k in (0, part.n_intervals // 2, part.n_intervals - 1):
            spatial = space_reconstruct(snaps[k], model, "flux-recovery")
            vals, _, _ = recon.eval_grid(k, np.array([0.0]), xi)
            endpoint_worst = max(
                endpoint_worst, np.abs(vals[0] - spatial.eval_ref(xi)).max()
            )
            # interface continuity: left and right limits share storage
            ends, _, _ = recon.eval_grid(k, np.array([0.3 * part.dt(k)]), np.array([-1.0, 1.0]))
            jump = ends[0, :, 0, :] - np.roll(ends[0, :, 1, :], 1, axis=0)
            jump_worst = max(jump_worst, np.abs(jump).max())
            # moment preservation against the DG snapshot
            tab = basis_tables(max(p - 1, 0), p + 3)
            mom_r = 0.5 * mesh.h * np.einsum(
                "jqm,iq,q->jim", spatial.eval_ref(xi), tab.phi_q, w
            )
            mom_u = 0.5 * mesh.h * np.einsum(
                "jqm,iq,q->jim", snaps[k].eval_ref(xi), tab.phi_q, w
            )
            moment_worst = max(moment_worst, np.abs(mom_r[:, :p] - mom_u[:, :p]).max())

    orders = [np.log2(norms[i] / norms[i + 1]) for i in range(2)]
    runtime = time.perf_counter() - t0
    ok = (
        endpoint_worst < 1e-13
        and jump_worst == 0.0
        and moment_worst < 1e-12
        and min(orders) >= p + 0.8
        and runtime < 30.0
    )
    report(
        3,
        ok,
        f"endpoint {endpoint_worst:.1e} < 1e-13, jump {jump_worst:.1e} (exact), "
        f"moments {moment_worst:.1e} < 1e-12, residual orders "
        f"{orders[0]:.2f}/{orders[1]:.2f} >= {p + 0.8}; runtime {runtime:.1f}s < 30s",
    )
    assert ok


def test_criterion_04_pythagoras_and_linear_flux(bench_run):
    t0 = time.perf_counter()
    decomp = bench_run.decompositions[-1]
    rel = abs(decomp.rsts_ref_sq - decomp.E_st) / decomp.rsts_ref_sq

    linear_cfg = replace(BENCH, model="advection", model_params={"a": 1.0},
                         initial_projection="radau", run_id="bench_linear")
    lin = tracked_execute(linear_cfg)
    ld = lin.decompositions[-1]
    lin_ok = ld.E_sq <= 1e-10 * ld.E_det and ld.E_sc <= 1e-10 * ld.E_det
    runtime = time.perf_counter() - t0
    ok = rel < 0.02 and lin_ok and runtime < 60.0
    report(
        4,
        ok,
        f"pythagoras rel dev {rel:.2e} < 2e-2; linear flux E_sq/E_det = "
        f"{ld.E_sq / ld.E_det:.1e}, E_sc/E_det = {ld.E_sc / ld.E_det:.1e} "
        f"(tol 1e-10); runtime {runtime:.1f}s < 60s",
    )
    assert ok


def test_criterion_06_bound_validity(bench_run):
    t0 = time.perf_counter()
    ok = True
    effs = []
    prev_bound = 0.0
    for rep in bench_run.reports:
        assert rep.true_error_sq is not None
        ok &= rep.bound >= rep.true_error_sq
        ok &= np.isfinite(rep.effectivity)
        ok &= rep.bound >= prev_bound  # monotone nondecreasing in t_n
        prev_bound = rep.bound
        effs.append(rep.effectivity)
    runtime = time.perf_counter() - t0
    ok &= runtime < 120.0
    report(
        6,
        ok,
        "bound >= true squared error at all reporting times; effectivities "
        + ", ".join(f"{e:.2f}" for e in effs)
        + f"; runtime {runtime:.1f}s < 120s",
    )
    assert ok


def test_criterion_08a_quadrature_indicator_decay():
    """R-sweep {3,5,7,11} at M=3: E_sq monotone decrease within 5%.

    Known-red: with the orthogonal-decomposition definition, E_sq saturates
    at the M-truncation mismatch between the per-node reconstructions and
    their truncated re-expansion as soon as R exceeds M; at R = M the
    discrete projection interpolates, so the sampled mismatch is smallest
    there and the sweep rises to the plateau instead of decaying. See the
    decisions ledger for the full analysis and measurements.
    """
    t0 = time.perf_counter()
    values = []
    for R in (3, 5, 7, 11):
        cfg = replace(BENCH, n_cells=32, R=R, M_ref=None, R_ref=None,
                      run_id=f"sweepR{R}").resolved()
        res = tracked_execute(cfg)
        values.append(res.rows[-1].E_sq)
    runtime = time.perf_counter() - t0
    monotone = all(values[i + 1] <= values[i] * 1.05 for i in range(len(values) - 1))
    ok = monotone and runtime < 300.0
    report(
        "8a",
        ok,
        "E_sq over R in {3,5,7,11}: "
        + ", ".join(f"{v:.3e}" for v in values)
        + f"; monotone(5%)={monotone}; runtime {runtime:.1f}s",
    )
    assert ok


def test_criterion_08b_cutoff_indicator_decay():
    t0 = time.perf_counter()
    values = []
    for M in (1, 2, 3, 4):
        cfg = replace(BENCH, n_cells=32, M=M, R=12, M_ref=None, R_ref=None,
                      run_id=f"sweepM{M}").resolved()
        res = tracked_execute(cfg)
        values.append(res.rows[-1].E_sc)
    runtime = time.perf_counter() - t0
    monotone = all(values[i + 1] <= values[i] * 1.05 for i in range(len(values) - 1))
    ok = monotone and runtime < 300.0
    report(
        "8b",
        ok,
        "E_sc over M in {1,2,3,4}: "
        + ", ".join(f"{v:.3e}" for v in values)
        + f"; monotone={monotone}; runtime {runtime:.1f}s",
    )
    assert ok


def test_criterion_08c_deterministic_indicator_order():
    t0 = time.perf_counter()
    values = []
    for n in (32, 64, 128):
        cfg = replace(BENCH, n_cells=n, run_id=f"sweepN{n}")
        res = tracked_execute(cfg)
        values.append(res.rows[-1].E_det)
    orders = [
        float(np.log2(np.sqrt(values[i] / values[i + 1]))) for i in range(2)
    ]
    runtime = time.perf_counter() - t0
    ok = min(orders) >= BENCH.p + 0.8 and runtime < 300.0
    report(
        "8c",
        ok,
        f"sqrt(E_det) orders over N_x {{32,64,128}}: {orders[0]:.2f}, {orders[1]:.2f} "
        f">= {BENCH.p + 0.8}; runtime {runtime:.1f}s",
    )
    assert ok


def test_criterion_09_degenerate_collapse(tmp_path):
    cfg = replace(
        BENCH, n_cells=32, M=0, R=0, M_ref=10, R_ref=8, run_id="collapse"
    )
    cli_result = run_single(cfg, out_dir=str(tmp_path), quiet=True)
    ALL_RUNS.append(cli_result)
    det_result = deterministic_estimate(replace(cfg, run_id="collapse_det"))
    ALL_RUNS.append(det_result)

    csv_lines = (tmp_path / "collapse.csv").read_text().splitlines()[1:]
    ok = True
    for line, det_row in zip(csv_lines, det_result.rows):
        parts = line.split(",")
        ok &= float(parts[2]) == det_row.E_det  # E_det bit-for-bit
        ok &= float(parts[7]) == det_row.bound  # bound bit-for-bit

    # collapse content: E_det is exactly the single node's residual norm
    model = Burgers()
    profile = SineProfile(**cfg.profile_params)
    mesh = Mesh1D(cfg.x_min, cfg.x_max, cfg.n_cells)
    rcfg = RkdgConfig(p=cfg.p, initial_projection=cfg.initial_projection)
    u0 = lambda x: profile(x, 0.0)
    part = sync_time_partition(model, [u0], mesh, rcfg, cfg.final_time)
    snaps = solve_divp(model, u0, mesh, rcfg, part)
    recon = build_space_time(snaps, part, model, rule=cfg.time_rule,
                             interface_mode=cfg.interface_mode)
    single_norm = st_residual_sq_by_interval(recon, model).sum()
    ok &= det_result.rows[-1].E_det == single_norm
    report(9, ok, "CSV run and deterministic path agree bit-for-bit in E_det and "
                  "bound; E_det equals the single-node residual norm exactly")
    assert ok


def test_criterion_05_splitting_inequality_every_run():
    assert ALL_RUNS, "no runs collected"
    worst = -np.inf
    for res in ALL_RUNS:
        for d in res.decompositions:
            worst = max(worst, d.E_st - (2 * d.E_det + 2 * d.E_sq + d.E_sc))
    ok = worst <= 1e-12
    report(5, ok, f"max E_st - (2E_det + 2E_sq + E_sc) = {worst:.2e} <= 1e-12 "
                  f"over {len(ALL_RUNS)} runs")
    assert ok


def test_criterion_07_split_bound_dominates_every_run():
    assert ALL_RUNS, "no runs collected"
    worst = -np.inf
    for res in ALL_RUNS:
        for rep in res.reports:
            worst = max(worst, rep.bound - rep.split_bound)
    ok = worst <= 1e-12
    report(7, ok, f"max unsplit - split = {worst:.2e} <= 1e-12 over "
                  f"{len(ALL_RUNS)} runs")
    assert ok
