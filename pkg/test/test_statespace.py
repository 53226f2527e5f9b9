"""
测试状态空间构造、扩展卡尔曼滤波与合成面板
"""

import numpy as np
import pytest

from atsm.core.riccati import riccati_p, yield_curve
from atsm.core.statespace import (
    SEASONAL_COMPANION, FilterOptions, build_state_space, default_schedule, ekf_loglik,
    observation_matrix, simulate_panel
)
from atsm.models.errors import FilterDivergenceError, ValidationError

from conftest import load_fixture

EXACT = FilterOptions(short_rate_var=1e-20, var_floor=1e-20)


def _noise_free(p):
    return p.with_updates(omega_pi=0.0, omega_s=0.0, nu0=0.0, nu1=0.0, nu2=0.0)


def test_measurement_dimensions(table1_prop):
    spec1 = build_state_space(table1_prop, 1)
    assert spec1.transition.shape == (5, 5)
    assert spec1.n_measurements == 2
    H, d, R = spec1.measurement(np.array([0.5, 0.5]))
    assert H.shape == (2, 5) and d.shape == (2,) and R.shape == (2,)

    table = riccati_p(table1_prop, 120)
    spec2 = build_state_space(table1_prop, 2, table, [4, 8, 40])
    assert spec2.n_measurements == 5
    H, d, R = spec2.measurement(np.array([0.5, 0.5]))
    assert H.shape == (5, 5)
    assert np.all(R[2:] == R[2])


def test_stage2_requires_table(table1_prop):
    with pytest.raises(ValidationError):
        build_state_space(table1_prop, 2, None, [4])
    with pytest.raises(ValidationError):
        build_state_space(table1_prop, 3)


def test_degenerate_noise_flag(table1_prop):
    assert build_state_space(_noise_free(table1_prop), 1).degenerate_noise
    assert not build_state_space(table1_prop, 1).degenerate_noise


def test_seasonal_identity_without_noise(table1_prop):
    p = _noise_free(table1_prop)
    panel = simulate_panel(p, 40, seed=3, seasonal_init=(1.0, -0.5, 0.2))
    S = np.concatenate([[0.2, -0.5], panel.truth["S"]])  # S_{-2}, S_{-1}, S_0, ...
    sums = S[3:] + S[2:-1] + S[1:-2] + S[:-3]
    np.testing.assert_allclose(sums, 0.0, atol=1e-12)
    lagged = np.array([S[4], S[3], S[2]])
    np.testing.assert_allclose(SEASONAL_COMPANION @ lagged, [S[5], S[4], S[3]], atol=1e-12)


def test_observation_pairing(table1_prop):
    panel = simulate_panel(table1_prop, 10, seed=1, maturities=())
    spec = build_state_space(table1_prop, 1)
    obs = observation_matrix(panel, spec)
    np.testing.assert_array_equal(obs[:, 0], panel.short_rate)
    np.testing.assert_array_equal(obs[:-1, 1], panel.inflation[1:])
    assert np.isnan(obs[-1, 1])


@pytest.mark.parametrize("name", ["table1_prop", "table1_indep", "table2_dep"])
def test_noise_free_state_recovery(name):
    p = _noise_free(load_fixture(name))
    panel = simulate_panel(p, 120, seed=11, maturities=())
    result = ekf_loglik(p, panel, 1, EXACT)
    np.testing.assert_allclose(result.filtered_states()[:-1], panel.truth["x"][:-1],
                               rtol=0, atol=1e-6)
    recovered = result.filtered_state(10)
    assert recovered.state.x1 == pytest.approx(panel.truth["x"][10, 0], abs=1e-6)
    assert recovered.s0 == pytest.approx(panel.truth["S"][11], abs=1e-6)


def test_padding_quarter_leaves_likelihood_unchanged(table1_indep):
    panel = simulate_panel(table1_indep, 80, seed=5)
    padded = panel.with_missing_quarter("2099Q4")
    for stage in (1, 2):
        base = ekf_loglik(table1_indep, panel, stage)
        assert ekf_loglik(table1_indep, padded, stage).loglik == base.loglik


def test_empty_yields_reduce_to_stage1(table1_prop):
    panel = simulate_panel(table1_prop, 60, seed=9)
    stage1 = ekf_loglik(table1_prop, panel, 1).loglik
    assert ekf_loglik(table1_prop, panel.without_yields(), 2).loglik == stage1


def test_covariance_stays_psd(table_params):
    panel = simulate_panel(table_params, 100, seed=21)
    result = ekf_loglik(table_params, panel, 2)
    assert result.min_eigenvalue >= -1e-10
    for cov in result.filtered_covs:
        np.testing.assert_allclose(cov, cov.T, atol=0)
        assert np.linalg.eigvalsh(cov).min() >= -1e-12
    assert np.isfinite(result.loglik)
    assert result.loglik_terms.shape == (100,)


def _dominance_rate(p, seeds, T):
    wins = 0
    perturbed = p.with_updates(a_hat=p.a_hat + 0.05 * np.eye(2))
    for seed in seeds:
        panel = simulate_panel(p, T, seed=seed, maturities=())
        wins += ekf_loglik(p, panel, 1).loglik >= ekf_loglik(perturbed, panel, 1).loglik
    return wins / len(seeds)


def test_generating_params_dominate(table1_prop):
    assert _dominance_rate(table1_prop, range(5), 300) == 1.0


@pytest.mark.slow
def test_generating_params_dominate_long_panels(table1_prop):
    assert _dominance_rate(table1_prop, range(20), 2000) >= 0.95


def test_divergence_reports_quarter(table1_prop):
    panel = simulate_panel(table1_prop, 20, seed=2, maturities=())
    panel.short_rate[5] = 1e300
    with pytest.raises(FilterDivergenceError) as exc:
        ekf_loglik(table1_prop, panel, 1)
    assert exc.value.quarter == 5


def test_zero_noise_panel_reproduces_analytic_yields(table1_dep):
    p = _noise_free(table1_dep)
    panel = simulate_panel(p, 50, seed=4, schedule={})
    table = riccati_p(p, 120)
    for t in (0, 17, 49):
        expected = yield_curve(table, panel.truth["x"][t], panel.maturities)
        observed = [panel.yields[n][t] for n in panel.maturities]
        np.testing.assert_allclose(observed, expected, rtol=0, atol=1e-13)


def test_schedule_controls_observation_count(table1_prop):
    T = 200
    panel = simulate_panel(table1_prop, T, seed=6, schedule={120: T - 40, 4: 0})
    assert panel.observation_count(120) == 40
    assert panel.observation_count(4) == T
    assert panel.observation_count(60) == T


def test_default_schedule_shape():
    starts = default_schedule(100)
    assert starts[4] == starts[40] == 27
    assert starts[60] == 56
    assert starts[120] == 76


def test_panel_seed_determinism(table1_prop):
    a = simulate_panel(table1_prop, 30, seed=12)
    b = simulate_panel(table1_prop, 30, seed=12)
    c = simulate_panel(table1_prop, 30, seed=13)
    np.testing.assert_array_equal(a.inflation, b.inflation)
    np.testing.assert_array_equal(a.yield_matrix(), b.yield_matrix())
    assert not np.array_equal(a.inflation, c.inflation)
    assert a.quarters[0] == "1960Q1" and a.quarters[4] == "1961Q1"


def test_unknown_schedule_maturity(table1_prop):
    with pytest.raises(ValidationError):
        simulate_panel(table1_prop, 10, seed=1, maturities=(4,), schedule={8: 2})
