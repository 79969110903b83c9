import numpy as np
import pytest

from nispdg.errors import NumericalError, PreconditionError
from nispdg.estimator import (
    ResidualAssembler,
    assemble_numerical_solution,
    bound_value,
    decompose_residual,
    ensure_hessian_bounds,
    error_bound,
    error_bound_split,
    grad_sup_norm,
    initial_error,
    reconstructed_modes,
    solution_gap_sq,
    sts_eval,
    sts_residual_eval,
)
from nispdg.gpc import build_basis, build_quadrature
from nispdg.mesh import ContinuousPiecewisePoly, Mesh1D
from nispdg.models import Burgers, CompactBox, HessianBounds, LinearAdvection
from nispdg.profiles import SineProfile
from nispdg.reconstruct import build_space_time, st_residual_sq_by_interval
from nispdg.rkdg import RkdgConfig, solve_divp, sync_time_partition


def stochastic_run(
    model=None,
    profile=None,
    n_cells=16,
    p=1,
    T=0.25,
    M=2,
    R=3,
    rule="linear",
    mode="mean",
    family="uniform",
):
    model = model or Burgers()
    profile = profile or SineProfile(amp=0.5, amp_y=0.1, offset=1.0)
    mesh = Mesh1D(0.0, 2 * np.pi, n_cells)
    cfg = RkdgConfig(p=p)
    basis = build_basis(family, M + 10)
    quad = build_quadrature(family, R)
    u0s = [lambda x, y=y: profile(x, y) for y in quad.nodes]
    part = sync_time_partition(model, u0s, mesh, cfg, T)
    snaps = [solve_divp(model, f, mesh, cfg, part) for f in u0s]
    recons = [
        build_space_time(s, part, model, rule=rule, interface_mode=mode, node_index=l)
        for l, s in enumerate(snaps)
    ]
    sts = reconstructed_modes(recons, basis, quad, M)
    return model, profile, mesh, part, snaps, recons, sts, basis, quad


def test_assemble_numerical_solution_degenerate_and_constant():
    model, profile, mesh, part, snaps, recons, sts, basis, quad = stochastic_run(M=0, R=0)
    x = np.linspace(0, 2 * np.pi, 7)
    n = part.n_intervals
    for y in (-0.8, 0.0, 0.5):
        vals = assemble_numerical_solution(snaps, basis, quad, 0, n, x, y)
        np.testing.assert_array_equal(vals, snaps[0][n](x))

    # identical data at every node: output constant in y, equal to the data
    model, profile, mesh, part, snaps, recons, sts, basis, quad = stochastic_run(
        profile=SineProfile(amp=0.3, amp_y=0.0, offset=1.0), M=2, R=3
    )
    n = part.n_intervals
    va = assemble_numerical_solution(snaps, basis, quad, 2, n, x, 0.7)
    vb = assemble_numerical_solution(snaps, basis, quad, 2, n, x, -0.2)
    np.testing.assert_allclose(va, vb, rtol=0, atol=1e-12)
    np.testing.assert_allclose(va, snaps[0][n](x), rtol=0, atol=1e-12)


def test_assemble_numerical_solution_linear_in_y_data():
    # node data u(x, y_l) = y_l projects onto modes (0, 1/sqrt(3)) and
    # evaluates back to y
    basis = build_basis("uniform", 3)
    quad = build_quadrature("uniform", 2)
    mesh = Mesh1D(0.0, 1.0, 4)
    from nispdg.mesh import l2_project

    snaps_per_node = [
        [l2_project(lambda x, y=y: np.full_like(x, y), mesh, p=1)] for y in quad.nodes
    ]
    x = np.linspace(0, 1, 5)
    for y in (-1.0, 0.3, 1.0):
        vals = assemble_numerical_solution(snaps_per_node, basis, quad, 1, 0, x, y)
        np.testing.assert_allclose(vals[:, 0], y, rtol=0, atol=1e-14)


def test_reconstructed_modes_degenerate_and_orthogonality():
    model, profile, mesh, part, snaps, recons, sts, basis, quad = stochastic_run(M=0, R=0)
    np.testing.assert_array_equal(sts.modes[0].iv_poly, recons[0].iv_poly)
    np.testing.assert_array_equal(sts.modes[0].bub_poly, recons[0].bub_poly)

    # identical reconstructions: mode 0 equals the common one, higher vanish
    model, profile, mesh, part, snaps, recons, sts, basis, quad = stochastic_run(
        profile=SineProfile(amp=0.3, amp_y=0.0, offset=1.0), M=2, R=4
    )
    np.testing.assert_allclose(sts.modes[0].iv_poly, recons[0].iv_poly, atol=1e-13)
    for j in (1, 2):
        assert np.abs(sts.modes[j].iv_poly).max() < 1e-13
        assert np.abs(sts.modes[j].bub_poly).max() < 1e-13


def test_reconstructed_modes_linearity_machine_precision():
    model, profile, mesh, part, snaps, recons, sts, basis, quad = stochastic_run(M=1, R=2)
    import copy

    doubled = []
    for r in recons:
        d = copy.copy(r)
        d.iv_poly = 2.0 * r.iv_poly
        d.bub_poly = 2.0 * r.bub_poly
        doubled.append(d)
    sum_modes = reconstructed_modes(doubled, basis, quad, 1)
    for j in range(2):
        np.testing.assert_allclose(
            sum_modes.modes[j].iv_poly, 2.0 * sts.modes[j].iv_poly, rtol=0, atol=1e-13
        )


def test_sts_definition_consistency():
    # evaluation through the modes equals the double sum of eq-by-definition
    model, profile, mesh, part, snaps, recons, sts, basis, quad = stochastic_run(M=2, R=4)
    x = np.linspace(0.3, 5.9, 6)
    t = float(part.nodes[part.n_intervals // 2])
    psi = basis.eval_all(quad.nodes, 2)
    for y in quad.nodes:
        via_modes = sts_eval(sts, t, x, y)
        node_vals = np.stack([r(t, x) for r in recons])  # (L, npts, m)
        psi_y = basis.eval_all(float(y), 2)
        direct = np.zeros_like(via_modes)
        for i in range(3):
            mode_i = np.einsum("l,lpm->pm", psi[:, i] * quad.weights, node_vals)
            direct += mode_i * psi_y[i]
        np.testing.assert_allclose(via_modes, direct, rtol=0, atol=1e-12)


def test_sts_residual_constant_and_degenerate_collapse():
    model, profile, mesh, part, snaps, recons, sts, basis, quad = stochastic_run(
        profile=SineProfile(amp=0.0, amp_y=0.0, offset=0.9), M=2, R=3
    )
    x = np.linspace(0, 2 * np.pi, 5)
    res = sts_residual_eval(sts, model, 0.1, x, 0.4)
    np.testing.assert_allclose(res, 0.0, atol=1e-12)

    from nispdg.reconstruct import st_residual_eval

    model, profile, mesh, part, snaps, recons, sts, basis, quad = stochastic_run(M=0, R=0)
    t = 0.6 * part.final_time
    for y in (-0.7, 0.2, 0.9):
        r_sts = sts_residual_eval(sts, model, t, x, y)
        r_st = st_residual_eval(recons[0], model, t, x)
        np.testing.assert_allclose(r_sts, r_st, rtol=0, atol=1e-15)


def test_degenerate_e_det_equals_single_node_residual_norm_bitwise():
    model, profile, mesh, part, snaps, recons, sts, basis, quad = stochastic_run(M=0, R=0)
    quad_ref = build_quadrature("uniform", 8)
    decomp = decompose_residual(sts, model, basis, quad_ref, max_mode_ref=10)
    single = st_residual_sq_by_interval(recons[0], model).sum()
    assert decomp.E_det == single


def test_linear_flux_kills_quadrature_and_cutoff_residuals():
    model = LinearAdvection(1.0)
    model, profile, mesh, part, snaps, recons, sts, basis, quad = stochastic_run(
        model=model, M=2, R=3
    )
    quad_ref = build_quadrature("uniform", 20)
    decomp = decompose_residual(sts, model, basis, quad_ref, max_mode_ref=12)
    assert decomp.E_det > 0
    assert decomp.E_sq <= 1e-10 * decomp.E_det
    assert decomp.E_sc <= 1e-10 * decomp.E_det


def test_single_node_burgers_has_positive_aliasing_and_cutoff():
    profile = SineProfile(amp=0.5, amp_y=0.2, offset=1.0)
    model, profile, mesh, part, snaps, recons, sts, basis, quad = stochastic_run(
        profile=profile, M=0, R=0
    )
    quad_ref = build_quadrature("uniform", 16)
    decomp = decompose_residual(sts, model, basis, quad_ref, max_mode_ref=8)
    assert decomp.E_sq > 0
    assert decomp.E_sc > 0
    # Pythagoras against the independently sampled reference residual norm
    rel = abs(decomp.rsts_ref_sq - decomp.E_st) / decomp.rsts_ref_sq
    assert rel < 0.01


def test_pythagoras_identity_on_uncertain_burgers():
    model, profile, mesh, part, snaps, recons, sts, basis, quad = stochastic_run(
        M=3, R=5, rule="hermite2", mode="flux-recovery"
    )
    quad_ref = build_quadrature("uniform", 28)
    decomp = decompose_residual(sts, model, basis, quad_ref, max_mode_ref=13)
    rel = abs(decomp.rsts_ref_sq - decomp.E_st) / decomp.rsts_ref_sq
    assert rel < 0.02
    # splitting inequality with the Pythagoras tolerance accounted for
    assert decomp.E_st <= 2 * decomp.E_det + 2 * decomp.E_sq + decomp.E_sc + 1e-12


def test_initial_error_exact_cases():
    # continuous piecewise-linear data at p=2 reconstructs exactly at t=0
    mesh = Mesh1D(0.0, 1.0, 8)
    rng = np.random.default_rng(8)
    hat = ContinuousPiecewisePoly(mesh, 1, rng.standard_normal((8, 1)), np.zeros((8, 0, 1)))

    def u0_xy(x, y):
        return (1.0 + 0.2 * y) * hat(x)

    model = Burgers()
    cfg = RkdgConfig(p=2)
    basis = build_basis("uniform", 6)
    quad = build_quadrature("uniform", 2)
    u0s = [lambda x, y=y: u0_xy(x, y) for y in quad.nodes]
    part = sync_time_partition(model, u0s, mesh, cfg, 0.05)
    snaps = [solve_divp(model, f, mesh, cfg, part) for f in u0s]
    recons = [build_space_time(s, part, model) for s in snaps]
    sts = reconstructed_modes(recons, basis, quad, 1)
    quad_ref = build_quadrature("uniform", 12)
    e0 = initial_error(sts, u0_xy, quad_ref, basis)
    assert e0 < 1e-12

    # constant shift: E0 = c^2 * |domain|
    shifted = lambda x, y: u0_xy(x, y) + 0.3
    e0_shift = initial_error(sts, shifted, quad_ref, basis)
    assert e0_shift == pytest.approx(0.09 * 1.0, rel=1e-10)


def test_initial_error_convergence_order():
    model = Burgers()
    profile = SineProfile(amp=0.5, amp_y=0.1, offset=1.0)
    vals = []
    for n in (16, 32):
        _, _, _, _, _, _, sts, basis, quad = stochastic_run(
            profile=profile, n_cells=n, p=1, T=0.05, M=2, R=3
        )
        quad_ref = build_quadrature("uniform", 14)
        vals.append(initial_error(sts, lambda x, y: profile(x, y), quad_ref, basis))
    order = np.log2(vals[0] / vals[1])
    assert order >= 2 * (1 + 1) - 0.4


def test_grad_sup_norm_cases():
    # constant reconstruction: zero
    model, profile, mesh, part, snaps, recons, sts, basis, quad = stochastic_run(
        profile=SineProfile(amp=0.0, amp_y=0.0, offset=1.2), M=1, R=2
    )
    assert grad_sup_norm(sts, 0) < 1e-13  # zero up to stochastic projection rounding

    # tent profile with |slope| = 1 gives exactly the safety factor
    mesh = Mesh1D(0.0, 1.0, 8)
    xs = mesh.edges()[:-1]
    tent = np.minimum(xs, 1.0 - xs)[:, None]
    from nispdg.reconstruct import SpaceTimeReconstruction
    from nispdg.rkdg import TimePartition

    rec = SpaceTimeReconstruction(
        mesh,
        TimePartition(np.array([0.0, 1.0])),
        1,
        "linear",
        np.stack([tent, np.zeros_like(tent)])[None, ...],
        np.zeros((1, 2, 8, 0, 1)),
    )
    from nispdg.estimator import StsReconstruction

    basis = build_basis("uniform", 1)
    quad = build_quadrature("uniform", 0)
    sts_tent = StsReconstruction(basis, quad, 0, [rec], [rec])
    assert grad_sup_norm(sts_tent, 0) == pytest.approx(1.05, rel=1e-13)


def test_grad_sup_grid_refinement_stability():
    model, profile, mesh, part, snaps, recons, sts, basis, quad = stochastic_run(M=2, R=3)
    a = grad_sup_norm(sts, 1, dense_y=64)
    b = grad_sup_norm(sts, 1, dense_y=128)
    assert abs(a - b) / b < 0.02
    # doubling the space-time sampling of the slab moves the value < 2% too
    c = grad_sup_norm(sts, 1, dense_y=64, nt=6, nx=10)
    assert abs(a - c) / c < 0.02


def test_sts_residual_linear_flux_reduces_to_det_modes():
    # for linear flux, the residual at a primary node equals the truncated
    # re-expansion of the deterministic residual modes there
    from nispdg.reconstruct import st_residual_eval

    model = LinearAdvection(1.0)
    model, profile, mesh, part, snaps, recons, sts, basis, quad = stochastic_run(
        model=model, M=2, R=2  # R = M: the discrete projection interpolates
    )
    x = np.linspace(0.2, 6.0, 5)
    t = 0.4 * part.final_time
    psi = basis.eval_all(quad.nodes, 2)
    node_res = np.stack([st_residual_eval(r, model, t, x) for r in recons])
    det_modes = np.einsum("jl,lpm->jpm", psi.T * quad.weights[None, :], node_res)
    for l, y in enumerate(quad.nodes):
        direct = sts_residual_eval(sts, model, t, x, y)
        reexpanded = np.einsum("j,jpm->pm", psi[l], det_modes)
        np.testing.assert_allclose(direct, reexpanded, rtol=0, atol=1e-12)


def test_bound_value_closed_formula():
    bounds = HessianBounds(1.0, 1.0, 1.0, CompactBox([-1.0], [1.0]), "analytic", 1.0)
    val, exponent, factor = bound_value(
        gap_sq=0.25, residual_term=1.0, e0=0.0, bounds=bounds, grad_integral=0.0, t=1.0
    )
    assert exponent == pytest.approx(1.0, abs=0)
    assert val == pytest.approx(2 * 0.25 + 2 * np.e, rel=1e-15)


def test_bound_zero_for_trivial_run():
    model, profile, mesh, part, snaps, recons, sts, basis, quad = stochastic_run(
        profile=SineProfile(amp=0.0, amp_y=0.0, offset=0.8), M=1, R=2
    )
    quad_ref = build_quadrature("uniform", 12)
    asm = ResidualAssembler(sts, model, basis, quad_ref, 6)
    decomp = asm.decomposition_at(part.n_intervals)
    e0 = initial_error(sts, lambda x, y: profile(x, y), quad_ref, basis)
    gap = solution_gap_sq(sts, snaps, part.n_intervals)
    bounds, _ = ensure_hessian_bounds(model, sts.modes[0].iv_poly.min() * np.ones(1),
                                      sts.modes[0].iv_poly.max() * np.ones(1))
    rep = error_bound(decomp, gap, e0, bounds, asm.grad_integral_at(part.n_intervals))
    assert rep.bound < 1e-24


def test_error_bound_monotone_in_time_and_split_dominates():
    model, profile, mesh, part, snaps, recons, sts, basis, quad = stochastic_run(
        M=2, R=4, rule="hermite2", mode="flux-recovery", T=0.4
    )
    quad_ref = build_quadrature("uniform", 24)
    asm = ResidualAssembler(sts, model, basis, quad_ref, 12)
    e0 = initial_error(sts, lambda x, y: profile(x, y), quad_ref, basis)
    bounds, _ = ensure_hessian_bounds(model, asm.state_min, asm.state_max)
    prev = -np.inf
    for idx in (1, part.n_intervals // 3, 2 * part.n_intervals // 3, part.n_intervals):
        decomp = asm.decomposition_at(idx)
        gap = solution_gap_sq(sts, snaps, idx)
        rep = error_bound(decomp, gap, e0, bounds, asm.grad_integral_at(idx))
        rep_split = error_bound_split(decomp, gap, e0, bounds, asm.grad_integral_at(idx))
        assert rep_split.split_bound >= rep.bound - 1e-12
        # residual and Gronwall terms grow with t; the gap term may wiggle,
        # so monotonicity is asserted on the dominated residual part
        resid_part = rep.bound - 2 * rep.gap_sq
        assert resid_part >= prev - 1e-15
        prev = resid_part


def test_ensure_hessian_bounds_rebuilds_stale_box():
    model = Burgers()
    lower, upper = np.array([-2.0]), np.array([3.0])
    stale = HessianBounds(1.0, 1.0, 1.0, CompactBox([0.0], [1.0]), "analytic", 1.1)
    rebuilt, was_rebuilt = ensure_hessian_bounds(model, lower, upper, bounds=stale)
    assert was_rebuilt
    assert rebuilt.box.contains(np.array([[-2.0], [3.0]])).all()
    kept, was_rebuilt = ensure_hessian_bounds(model, lower, upper, bounds=rebuilt)
    assert not was_rebuilt and kept is rebuilt


def test_flagged_samples_abort():
    class PickyBurgers(Burgers):
        name = "picky"
        kernel_id = None

        def admissible_mask(self, u):
            u = np.asarray(u)
            return u[..., 0] > 1.05  # flags a large share of assembled states

    model, profile, mesh, part, snaps, recons, sts, basis, quad = stochastic_run()
    quad_ref = build_quadrature("uniform", 12)
    with pytest.raises(NumericalError, match="inadmissible"):
        ResidualAssembler(sts, PickyBurgers(), basis, quad_ref, 8)


def test_reference_rule_preconditions():
    model, profile, mesh, part, snaps, recons, sts, basis, quad = stochastic_run(M=2, R=3)
    with pytest.raises(PreconditionError):
        decompose_residual(sts, model, basis, build_quadrature("uniform", 12), max_mode_ref=2)
    with pytest.raises(PreconditionError):
        decompose_residual(sts, model, basis, build_quadrature("uniform", 1), max_mode_ref=8)
