import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.polynomial import Polynomial, legendre as npleg

from dgtime.legendre import (
    SlabBasis,
    eval_legendre,
    gauss_rule,
    legendre_table,
    slab_basis_eval,
)

# shifted basis in s = (t - t0)/k, coefficients copied from the printed list
PRINTED_PHI = [
    [1],
    [-1, 2],
    [1, -6, 6],
    [-1, 12, -30, 20],
    [1, -20, 90, -140, 70],
    [-1, 30, -210, 560, -630, 252],
]


def test_eval_legendre_examples():
    assert eval_legendre(0, 0.3) == 1.0
    assert eval_legendre(7, 1.0) == pytest.approx(1.0, abs=1e-15)
    assert eval_legendre(2, 0.5) == pytest.approx(-0.125, abs=1e-15)


def test_eval_legendre_rejects_negative_degree():
    with pytest.raises(ValueError):
        eval_legendre(-1, 0.0)


@pytest.mark.parametrize("i", range(0, 15))
def test_eval_legendre_matches_numpy(i):
    t = np.linspace(-1, 1, 41)
    ref = npleg.legval(t, np.eye(i + 1)[i])
    np.testing.assert_allclose(eval_legendre(i, t), ref, atol=1e-13)


@pytest.mark.parametrize("order", [1, 2])
def test_table_derivatives_match_numpy(order):
    t = np.linspace(-1, 1, 23)
    table = legendre_table(10, t, order)
    for i in range(11):
        ref = npleg.legval(t, npleg.legder(np.eye(11)[i], order))
        np.testing.assert_allclose(table[i], ref, atol=1e-10)


def test_table_rejects_third_derivative():
    with pytest.raises(ValueError):
        legendre_table(3, [0.0], order=3)


def test_gauss_small_rules():
    r1 = gauss_rule(1)
    np.testing.assert_allclose(r1.nodes, [0.0], atol=1e-16)
    np.testing.assert_allclose(r1.weights, [2.0])
    r2 = gauss_rule(2)
    np.testing.assert_allclose(r2.nodes, [-1 / np.sqrt(3), 1 / np.sqrt(3)], atol=1e-15)
    np.testing.assert_allclose(r2.weights, [1.0, 1.0], atol=1e-15)


@pytest.mark.parametrize("n", [1, 2, 3, 5, 8, 13, 21, 40])
def test_gauss_matches_numpy(n):
    x, w = npleg.leggauss(n)
    rule = gauss_rule(n)
    np.testing.assert_allclose(rule.nodes, x, atol=1e-14)
    np.testing.assert_allclose(rule.weights, w, atol=1e-14)
    assert rule.weights.sum() == pytest.approx(2.0, abs=1e-13)
    assert np.all(rule.weights > 0)


def test_gauss_rejects_zero_points():
    with pytest.raises(ValueError):
        gauss_rule(0)


@given(st.integers(1, 12), st.data())
@settings(max_examples=40, deadline=None)
def test_gauss_exactness(n, data):
    deg = data.draw(st.integers(0, 2 * n - 1))
    rule = gauss_rule(n)
    # integral of t^deg over (-1, 1)
    exact = 0.0 if deg % 2 else 2.0 / (deg + 1)
    assert np.sum(rule.weights * rule.nodes ** deg) == pytest.approx(exact, abs=1e-13)


def test_orthogonality_and_norms():
    for i in range(13):
        for j in range(13):
            rule = gauss_rule(i + j + 2)
            val = np.sum(rule.weights * eval_legendre(i, rule.nodes) * eval_legendre(j, rule.nodes))
            if i == j:
                assert val == pytest.approx(2 / (2 * i + 1), abs=1e-12)
            else:
                assert abs(val) < 1e-12


@pytest.mark.parametrize("i", range(1, 11))
def test_antiderivative_identity(i):
    t = np.linspace(-1, 1, 17)
    anti = npleg.legint(np.eye(i + 1)[i], lbnd=-1)
    lhs = npleg.legval(t, anti)
    rhs = (eval_legendre(i + 1, t) - eval_legendre(i - 1, t)) / (2 * i + 1)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_slab_basis_examples():
    b = SlabBasis(2, 0.0, 1.0)
    assert slab_basis_eval(b, 2, 0.0) == pytest.approx(-1.0)
    assert slab_basis_eval(b, 2, 1.0) == pytest.approx(1.0)
    assert slab_basis_eval(b, 3, 0.0, order=1) == pytest.approx(-6.0)
    np.testing.assert_allclose(b.end_values(), 1.0)
    np.testing.assert_allclose(b.start_values(), [1, -1, 1])


def test_slab_basis_index_and_domain_errors():
    b = SlabBasis(3, 0.5, 0.25)
    with pytest.raises(IndexError):
        slab_basis_eval(b, 0, 0.6)
    with pytest.raises(IndexError):
        slab_basis_eval(b, 5, 0.6)
    with pytest.raises(ValueError):
        slab_basis_eval(b, 1, 0.9)
    with pytest.raises(ValueError):
        SlabBasis(2, 0.0, 0.0)


@pytest.mark.parametrize("q", [2, 3, 4, 5])
@pytest.mark.parametrize("order", [0, 1, 2])
def test_slab_basis_matches_printed_formulas(q, order):
    rng = np.random.default_rng(q * 10 + order)
    t0, k = 0.3, 0.17
    basis = SlabBasis(q, t0, k)
    t = t0 + k * rng.random(20)
    s = (t - t0) / k
    for j in range(1, q + 2):
        poly = Polynomial(PRINTED_PHI[j - 1]).deriv(order)
        expected = poly(s) / k ** order
        got = slab_basis_eval(basis, j, t, order)
        np.testing.assert_allclose(got, expected, rtol=1e-12, atol=1e-12 * k ** -order)


@given(st.integers(0, 10), st.floats(-5, 5), st.floats(1e-3, 10))
@settings(max_examples=50, deadline=None)
def test_slab_endpoint_values(q, t0, k):
    b = SlabBasis(q, t0, k)
    np.testing.assert_allclose(b.end_values(), 1.0, atol=1e-12)
    np.testing.assert_allclose(b.start_values(), (-1.0) ** np.arange(q + 1), atol=1e-12)
