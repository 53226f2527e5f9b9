"""
测试Riccati递推与解析债券价格
"""

import numpy as np
import pytest

from atsm.core.model_core import DELTA, short_rate, to_risk_neutral
from atsm.core.riccati import (
    analytic_price, analytic_yield, log_price_loadings, riccati_p, riccati_q, yield_curve
)
from atsm.models.errors import MaturityRangeError

from conftest import FIXTURE_NAMES, load_fixture, random_params, zero_vol_params


def _assert_tables_equal(t1, t2, tol=1e-12):
    np.testing.assert_allclose(t1.A, t2.A, rtol=0, atol=tol)
    np.testing.assert_allclose(t1.B, t2.B, rtol=0, atol=tol)


@pytest.mark.parametrize("name", FIXTURE_NAMES)
def test_physical_and_risk_neutral_recursions_agree(name):
    p = load_fixture(name)
    _assert_tables_equal(riccati_p(p, 200), riccati_q(to_risk_neutral(p), N=200))


def test_recursions_agree_on_random_draws():
    rng = np.random.default_rng(11)
    for _ in range(100):
        p = random_params(rng)
        _assert_tables_equal(riccati_p(p, 200), riccati_q(to_risk_neutral(p), N=200))


def test_initial_coefficients(table1_prop):
    table = riccati_p(table1_prop, 5)
    assert table.A[0] == 0.0
    np.testing.assert_array_equal(table.B[0], [0.0, 0.0])
    assert table.A[1] == 0.0
    np.testing.assert_allclose(table.B[1], -DELTA)


def test_one_quarter_yield_is_short_rate(table_params):
    table = riccati_p(table_params, 1)
    x = np.array([2.0, 3.5])
    assert analytic_yield(table, x, 1) == pytest.approx(short_rate(x), rel=1e-14)
    assert analytic_price(table, x, 0) == 1.0


def test_deterministic_rates_price():
    p = zero_vol_params(lam=(0.1, -0.1))
    rn = to_risk_neutral(p)
    table = riccati_p(p, 12)
    x = np.array([1.5, 4.0])
    log_disc = 0.0
    for n in range(1, 13):
        log_disc -= short_rate(x)
        x = (np.eye(2) + rn.a) @ x + rn.b
        assert analytic_price(table, [1.5, 4.0], n) == pytest.approx(np.exp(log_disc), rel=1e-12)


def test_yield_curve_matches_pointwise(table1_dep):
    table = riccati_p(table1_dep, 120)
    x = [2.0, 3.0]
    mats = [1, 4, 40, 120]
    curve = yield_curve(table, x, mats)
    expected = [analytic_yield(table, x, n) for n in mats]
    np.testing.assert_allclose(curve, expected, rtol=1e-14)

    d, loadings = log_price_loadings(table, mats)
    np.testing.assert_allclose(d + loadings @ np.asarray(x), curve, rtol=1e-14)


def test_maturity_out_of_range(table1_prop):
    table = riccati_p(table1_prop, 10)
    with pytest.raises(MaturityRangeError):
        analytic_price(table, [2.0, 3.0], 11)
    with pytest.raises(MaturityRangeError):
        analytic_yield(table, [2.0, 3.0], 0)
    with pytest.raises(MaturityRangeError):
        yield_curve(table, [2.0, 3.0], [5, 20])
    with pytest.raises(MaturityRangeError):
        riccati_p(table1_prop, -1)


def test_long_yields_are_finite(table_params):
    table = riccati_p(table_params, 120)
    assert np.all(np.isfinite(table.A))
    assert np.all(np.isfinite(table.B))


def test_constant_volatility_free_coefficients_are_geometric_series():
    p = zero_vol_params()
    rn = to_risk_neutral(p)
    N = 60
    table = riccati_q(rn, N=N)
    transition = (np.eye(2) + rn.a).T
    a_inv_t = np.linalg.inv(rn.a.T)
    for n in range(N + 1):
        # B_n = −Σ_{k<n} Tᵏ δ = (aᵀ)⁻¹ (I − Tⁿ) δ
        expected_b = a_inv_t @ (np.eye(2) - np.linalg.matrix_power(transition, n)) @ DELTA
        np.testing.assert_allclose(table.B[n], expected_b, rtol=1e-10, atol=1e-15)
    expected_a = np.concatenate([[0.0], np.cumsum(table.B[:-1] @ rn.b)])
    np.testing.assert_allclose(table.A, expected_a, rtol=1e-10, atol=1e-15)


def test_beta_perturbation_moves_loadings_by_first_order_term():
    p = zero_vol_params().with_updates(alpha=np.array([0.4, 0.6]))
    rn = to_risk_neutral(p)
    direction = np.array([[0.2, -0.1], [0.05, 0.3]])
    N, eps = 40, 1e-4
    base = riccati_q(rn, beta=np.zeros((2, 2)), N=N)
    up = riccati_q(rn, beta=eps * direction, N=N)
    down = riccati_q(rn, beta=-eps * direction, N=N)

    transition = (np.eye(2) + rn.a).T
    expected = np.zeros((N + 1, 2))
    for n in range(N):
        quad = (rn.sigma.T @ base.B[n]) ** 2
        expected[n + 1] = transition @ expected[n] + 0.5 * direction.T @ quad
    np.testing.assert_allclose((up.B - down.B) / (2 * eps), expected, rtol=1e-6, atol=1e-14)
    assert np.abs(expected[N]).max() > 0
