import numpy as np
import pytest

from nispdg.errors import ConfigError, ShapeError
from nispdg.gpc import (
    build_basis,
    build_quadrature,
    discrete_projection,
    expansion_eval,
)

FAMILIES = ("uniform", "normal")


def analytic_moment(family, k):
    """k-th moment of the family density (uniform on [-1,1] with w=1/2, std normal)."""
    if k % 2 == 1:
        return 0.0
    if family == "uniform":
        return 1.0 / (k + 1)
    # double factorial (k-1)!! for the standard normal
    val = 1.0
    for j in range(k - 1, 0, -2):
        val *= j
    return val


def gram_schmidt_coeffs(family, degree):
    """Oracle: monomial coefficients of the orthonormal family via Gram-Schmidt.

    Built solely from analytic moments; independent of the recurrence used by
    the implementation.
    """
    n = degree + 1
    gram = np.array(
        [[analytic_moment(family, i + j) for j in range(n)] for i in range(n)]
    )
    basis = []
    for i in range(n):
        coef = np.zeros(n)
        coef[i] = 1.0
        for prev in basis:
            coef -= (prev @ gram @ coef) * prev
        coef /= np.sqrt(coef @ gram @ coef)
        basis.append(coef)
    return np.array(basis)  # (n, n): row i = monomial coeffs of Psi_i


def eval_monomial(coeffs, y):
    return sum(c * y**j for j, c in enumerate(coeffs))


@pytest.mark.parametrize("family", FAMILIES)
def test_mode_zero_is_one(family):
    basis = build_basis(family, 6)
    y = np.linspace(-3, 3, 17)
    vals = basis.eval_all(y)
    assert np.all(vals[:, 0] == 1.0)


def test_uniform_low_degree_members_match_gram_schmidt_oracle():
    basis = build_basis("uniform", 2)
    y = np.linspace(-1, 1, 9)
    vals = basis.eval_all(y)
    # frozen from the oracle: Psi_1 = sqrt(3) y, Psi_2 = sqrt(5)/2 (3 y^2 - 1)
    np.testing.assert_allclose(vals[:, 1], np.sqrt(3.0) * y, rtol=0, atol=1e-14)
    np.testing.assert_allclose(
        vals[:, 2], np.sqrt(5.0) / 2.0 * (3.0 * y**2 - 1.0), rtol=0, atol=1e-13
    )
    oracle = gram_schmidt_coeffs("uniform", 2)
    for i in range(3):
        np.testing.assert_allclose(
            vals[:, i], eval_monomial(oracle[i], y), rtol=0, atol=1e-12
        )


def test_normal_degree_two_is_normalized_probabilists_hermite():
    basis = build_basis("normal", 2)
    y = np.linspace(-2.5, 2.5, 11)
    vals = basis.eval_all(y)
    # He_2(y) = y^2 - 1 normalized by sqrt(2!)
    np.testing.assert_allclose(
        vals[:, 2], (y**2 - 1.0) / np.sqrt(2.0), rtol=0, atol=1e-13
    )
    oracle = gram_schmidt_coeffs("normal", 4)
    for i in range(5):
        basis4 = build_basis("normal", 4)
        np.testing.assert_allclose(
            basis4.eval_all(y)[:, i], eval_monomial(oracle[i], y), rtol=0, atol=1e-11
        )


@pytest.mark.parametrize("family", FAMILIES)
def test_weights_sum_to_one(family):
    for order in range(0, 12):
        quad = build_quadrature(family, order)
        assert abs(quad.weights.sum() - 1.0) < 1e-13


@pytest.mark.parametrize("family", FAMILIES)
def test_gauss_exactness_against_analytic_moments(family):
    # tolerance is relative to the absolute moment E|y|^k: the signed moments
    # of the unbounded density cancel large summands, so an absolute 1e-12
    # would be unattainable for high odd k.
    for order in range(0, 9):
        quad = build_quadrature(family, order)
        for k in range(0, 2 * order + 2):
            num = np.sum(quad.weights * quad.nodes**k)
            scale = max(1.0, np.sum(quad.weights * np.abs(quad.nodes) ** k))
            assert abs(num - analytic_moment(family, k)) < 1e-12 * scale


def test_uniform_small_rules():
    q0 = build_quadrature("uniform", 0)
    np.testing.assert_allclose(q0.nodes, [0.0], atol=1e-15)
    np.testing.assert_allclose(q0.weights, [1.0], atol=1e-15)
    # two-point rule frozen from the exactness conditions for monomials <= 3
    q1 = build_quadrature("uniform", 1)
    np.testing.assert_allclose(
        np.sort(q1.nodes), [-1.0 / np.sqrt(3.0), 1.0 / np.sqrt(3.0)], atol=1e-15
    )
    np.testing.assert_allclose(q1.weights, [0.5, 0.5], atol=1e-15)


def test_normal_two_point_rule_is_hermite_roots():
    # roots of He_2(y) = y^2 - 1 with symmetric weights
    q1 = build_quadrature("normal", 1)
    np.testing.assert_allclose(np.sort(q1.nodes), [-1.0, 1.0], atol=1e-14)
    np.testing.assert_allclose(q1.weights, [0.5, 0.5], atol=1e-14)


@pytest.mark.parametrize("family", FAMILIES)
def test_discrete_orthonormality(family):
    M, R = 6, 7
    basis = build_basis(family, M)
    quad = build_quadrature(family, R)
    psi = basis.eval_all(quad.nodes)
    for i in range(M + 1):
        for j in range(M + 1):
            if i + j <= 2 * R + 1:
                val = np.sum(psi[:, i] * psi[:, j] * quad.weights)
                assert abs(val - (1.0 if i == j else 0.0)) < 1e-12


def test_projection_of_constant():
    basis = build_basis("uniform", 4)
    quad = build_quadrature("uniform", 4)
    samples = np.full((5, 2), 3.25)  # m = 2 components
    modes = discrete_projection(samples, basis, quad, 4)
    np.testing.assert_allclose(modes[0], 3.25, atol=1e-14)
    np.testing.assert_allclose(modes[1:], 0.0, atol=1e-13)


def test_projection_of_identity_mode():
    basis = build_basis("uniform", 2)
    quad = build_quadrature("uniform", 2)
    modes = discrete_projection(quad.nodes.copy(), basis, quad, 2)
    # exact integral of y * sqrt(3) y * 1/2 over [-1, 1] is 1/sqrt(3)
    assert abs(modes[1] - 1.0 / np.sqrt(3.0)) < 1e-14
    assert abs(modes[0]) < 1e-14
    assert abs(modes[2]) < 1e-14


def test_single_node_aliasing_of_square():
    # one-point rule at y=0 sees v(y) = y^2 as zero; the exact mode is 1/3
    basis = build_basis("uniform", 0)
    quad = build_quadrature("uniform", 0)
    modes = discrete_projection(quad.nodes**2, basis, quad, 0)
    assert modes[0] == 0.0
    exact_mode0 = analytic_moment("uniform", 2)
    assert abs(exact_mode0 - 1.0 / 3.0) < 1e-15


def test_expansion_eval_constant_and_single_mode():
    basis = build_basis("uniform", 3)
    modes = np.array([2.5, 0.0, 0.0, 0.0])
    y = np.linspace(-1, 1, 7)
    np.testing.assert_allclose(expansion_eval(modes, basis, y), 2.5, atol=0)
    assert expansion_eval(np.array([4.0]), basis, 0.3) == 4.0
    # modes (0, 1/sqrt(3)) at y = 1 recovers v(y) = y
    val = expansion_eval(np.array([0.0, 1.0 / np.sqrt(3.0)]), basis, 1.0)
    assert abs(val - 1.0) < 1e-15


@pytest.mark.parametrize("family", FAMILIES)
def test_round_trip_reproduces_polynomials(family):
    rng = np.random.default_rng(42)
    for d in (0, 2, 5):
        coeffs = rng.standard_normal(d + 1)
        basis = build_basis(family, d)
        quad = build_quadrature(family, d + 1)
        samples = eval_monomial(coeffs, quad.nodes)
        modes = discrete_projection(samples, basis, quad, d)
        pts = rng.uniform(-1, 1, 50)
        recon = expansion_eval(modes, basis, pts)
        np.testing.assert_allclose(
            recon, eval_monomial(coeffs, pts), rtol=0, atol=1e-11
        )


def test_projection_is_linear_to_machine_precision():
    rng = np.random.default_rng(7)
    basis = build_basis("uniform", 3)
    quad = build_quadrature("uniform", 5)
    v = rng.standard_normal((6, 4))
    w = rng.standard_normal((6, 4))
    a, b = 1.7, -0.3
    lhs = discrete_projection(a * v + b * w, basis, quad, 3)
    rhs = a * discrete_projection(v, basis, quad, 3) + b * discrete_projection(
        w, basis, quad, 3
    )
    np.testing.assert_allclose(lhs, rhs, rtol=0, atol=1e-14)


def test_sample_count_mismatch_raises():
    basis = build_basis("uniform", 2)
    quad = build_quadrature("uniform", 3)
    with pytest.raises(ShapeError):
        discrete_projection(np.zeros(3), basis, quad, 2)
    with pytest.raises(ShapeError):
        discrete_projection(np.zeros(4), basis, quad, 5)


def test_unsupported_family_rejected():
    with pytest.raises(ConfigError):
        build_basis("beta", 3)
    with pytest.raises(ConfigError):
        build_quadrature("lognormal", 2)
