"""
测试两步极大似然估计
"""

import numpy as np
import pytest

from atsm.core.estimation import (
    STAGE1_FIELDS, STAGE2_FIELDS, EstimationOptions, ParamField, _maximize,
    assemble_stage1, estimate_stage1, estimate_stage2, stage1_values
)
from atsm.core.model_core import equilibrium_state
from atsm.core.statespace import ekf_loglik, simulate_panel
from atsm.models.data_models import FellerReport, ModelKind
from atsm.models.errors import AtsmError, EstimationError, FilterDivergenceError, ValidationError

STAGE1_NAMES = {kind: [f.name for f in fields] for kind, fields in STAGE1_FIELDS.items()}
RECOVERY_SEEDS = list(range(77, 87))


def _fix_all_but(kind, *free):
    return [name for name in STAGE1_NAMES[kind] if name not in free]


def _quick(**kwargs) -> EstimationOptions:
    defaults = dict(restarts=1, max_iter=200)
    defaults.update(kwargs)
    return EstimationOptions(**defaults)


@pytest.mark.parametrize("transform,scale,value", [
    ("identity", 1.0, -0.37),
    ("log", 1.0, 0.42),
    ("softplus", 1.0, 0.5),
    ("softplus", 1e-4, 7e-5),
])
def test_param_transforms_invert(transform, scale, value):
    f = ParamField("x", 0.1, transform, scale)
    assert f.to_natural(f.to_free(value)) == pytest.approx(value, rel=1e-10)


def test_stage1_assembly_reproduces_params(table_params):
    rebuilt = assemble_stage1(stage1_values(table_params), table_params)
    assert rebuilt.is_close(table_params, atol=1e-12)


def test_stage1_improves_on_start(table1_prop):
    panel = simulate_panel(table1_prop, 80, seed=31, maturities=())
    start = table1_prop.with_updates(omega_pi=1.5, omega_s=0.9)
    start_ll = ekf_loglik(start, panel, 1).loglik

    fixed = _fix_all_but(ModelKind.PROPORTIONAL, "omega_pi", "omega_s")
    result = estimate_stage1(panel, start, _quick(fixed=fixed))
    assert result.stage == 1
    assert result.loglik > start_ll + 1.0
    assert result.params.omega_pi < 1.5
    assert isinstance(result.feller, FellerReport)


def test_fixed_parameters_stay_exact(table1_dep):
    panel = simulate_panel(table1_dep, 60, seed=8, maturities=())
    fixed = _fix_all_but(ModelKind.DEPENDENT, "omega_pi", "a_hat11")
    result = estimate_stage1(panel, table1_dep, _quick(fixed=fixed, max_iter=100))
    p = result.params
    assert p.a_hat[0, 1] == table1_dep.a_hat[0, 1]
    assert p.a_hat[1, 0] == table1_dep.a_hat[1, 0]
    assert p.a_hat[1, 1] == table1_dep.a_hat[1, 1]
    np.testing.assert_array_equal(p.sigma, table1_dep.sigma)
    np.testing.assert_array_equal(p.beta, table1_dep.beta)
    assert p.omega_s == table1_dep.omega_s


def test_all_fixed_evaluates_once(table1_indep):
    panel = simulate_panel(table1_indep, 40, seed=2, maturities=())
    result = estimate_stage1(panel, table1_indep,
                             _quick(fixed=STAGE1_NAMES[ModelKind.INDEPENDENT]))
    assert result.converged
    assert result.n_evaluations == 1
    expected = ekf_loglik(result.params, panel, 1).loglik
    assert result.loglik == pytest.approx(expected, rel=1e-12)


def test_unknown_fixed_name_rejected(table1_prop):
    panel = simulate_panel(table1_prop, 20, seed=1, maturities=())
    with pytest.raises(ValidationError):
        estimate_stage1(panel, table1_prop, _quick(fixed=["sigma11"]))
    with pytest.raises(ValidationError):
        estimate_stage1(panel, table1_prop, _quick(fixed=["gamma"]))


def test_stage1_ignores_yields(table1_prop):
    panel = simulate_panel(table1_prop, 50, seed=4)
    fixed = STAGE1_NAMES[ModelKind.PROPORTIONAL]
    with_yields = estimate_stage1(panel, table1_prop, _quick(fixed=fixed))
    without = estimate_stage1(panel.without_yields(), table1_prop, _quick(fixed=fixed))
    assert with_yields.loglik == without.loglik


def test_stage2_keeps_stage1_params(table1_dep):
    panel = simulate_panel(table1_dep, 80, seed=13, maturities=(4, 40, 120))
    stage1 = table1_dep
    start_ll = ekf_loglik(stage1.with_updates(lam=[0.0, 0.0]), panel, 2).loglik

    result = estimate_stage2(panel, stage1, None, _quick(fixed=["nu1", "nu2"], max_iter=150))
    p = result.params
    assert result.stage == 2
    for name in ("a_hat", "b_hat", "alpha", "beta", "sigma"):
        np.testing.assert_array_equal(getattr(p, name), getattr(stage1, name))
    assert p.omega_pi == stage1.omega_pi and p.omega_s == stage1.omega_s
    assert p.nu1 == stage1.nu1 and p.nu2 == stage1.nu2
    assert result.loglik >= start_ll - 1e-6


def test_stage1_fixed_names_do_not_block_stage2(table1_prop):
    panel = simulate_panel(table1_prop, 30, seed=7, maturities=(4, 40))
    fixed = STAGE1_NAMES[ModelKind.PROPORTIONAL] + ["nu0", "nu1", "nu2"]
    result = estimate_stage2(panel, table1_prop, None, _quick(fixed=fixed, max_iter=40))
    assert result.params.nu0 == pytest.approx(table1_prop.nu0, rel=1e-9)


def test_stage2_needs_yields(table1_prop):
    panel = simulate_panel(table1_prop, 20, seed=1, maturities=())
    with pytest.raises(ValidationError):
        estimate_stage2(panel, table1_prop)


def test_stage2_field_names():
    assert [f.name for f in STAGE2_FIELDS] == ["lambda1", "lambda2", "nu0", "nu1", "nu2"]


def test_feller_penalty_runs(table1_prop):
    panel = simulate_panel(table1_prop, 40, seed=3, maturities=())
    fixed = _fix_all_but(ModelKind.PROPORTIONAL, "alpha", "omega_pi")
    opts = _quick(fixed=fixed, restarts=2, max_iter=60, impose_feller=True,
                  penalty_weight=10.0)
    result = estimate_stage1(panel, table1_prop, opts)
    assert len(result.history) == 2
    assert result.penalty_weight >= 10.0
    assert result.feller is not None


def test_no_evaluable_point_raises(table1_prop):
    def failing(p):
        raise FilterDivergenceError("发散", 0)

    fields = STAGE1_FIELDS[ModelKind.PROPORTIONAL]
    with pytest.raises(EstimationError) as exc:
        _maximize(failing, fields, stage1_values(table1_prop),
                  lambda values: assemble_stage1(values, table1_prop),
                  _quick(restarts=2, max_iter=20), stage=1, penalize=False)
    assert exc.value.report["stage"] == 1
    assert len(exc.value.report["history"]) == 2


def test_restarts_are_seeded(table1_prop):
    panel = simulate_panel(table1_prop, 40, seed=5, maturities=())
    fixed = _fix_all_but(ModelKind.PROPORTIONAL, "omega_pi", "omega_s")
    a = estimate_stage1(panel, table1_prop, _quick(fixed=fixed, restarts=2, max_iter=40, seed=4))
    b = estimate_stage1(panel, table1_prop, _quick(fixed=fixed, restarts=2, max_iter=40, seed=4))
    assert a.loglik == b.loglik
    assert a.params.is_close(b.params, atol=0.0)


def _stage1_recovered(truth, seed) -> bool:
    panel = simulate_panel(truth, 2000, seed=seed, maturities=())
    result = estimate_stage1(panel, truth, EstimationOptions(restarts=2, max_iter=3000))
    diag_ok = np.all(np.abs(np.diag(result.params.a_hat) - np.diag(truth.a_hat)) <= 0.05)
    try:
        fitted_eq = equilibrium_state(result.params).as_array()
    except AtsmError:
        return False
    eq_ok = np.all(np.abs(fitted_eq - equilibrium_state(truth).as_array()) <= 0.5)
    return bool(diag_ok and eq_ok)


@pytest.mark.slow
def test_stage1_recovers_long_panels(table1_prop):
    recovered = [_stage1_recovered(table1_prop, seed) for seed in RECOVERY_SEEDS]
    assert sum(recovered) >= 8, recovered


@pytest.mark.slow
def test_stage2_recovers_lambda(table1_prop):
    recovered = []
    for seed in RECOVERY_SEEDS:
        panel = simulate_panel(table1_prop, 2000, seed=seed + 100)
        result = estimate_stage2(panel, table1_prop, None, EstimationOptions(restarts=2))
        recovered.append(bool(np.all(np.abs(result.params.lam - table1_prop.lam) <= 0.1)))
    assert sum(recovered) >= 8, recovered
