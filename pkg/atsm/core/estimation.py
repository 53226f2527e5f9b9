"""
两步极大似然估计

第一步只用短期利率与通胀估计状态动态与波动率参数；
第二步固定第一步结果，加入收益率方程估计风险价格 λ 与测量误差尺度 ν。
优化器为带随机重启的Nelder-Mead单纯形，可选以外罚函数施加Feller条件。
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import LinAlgError
from scipy.optimize import minimize
from tqdm import tqdm

from atsm.core.feller import check_feller, feller_violation
from atsm.core.model_core import equilibrium_state
from atsm.core.statespace import FilterOptions, ekf_loglik
from atsm.models.data_models import (
    EstimationResult, FellerReport, Measure, ModelKind, PanelData, PhysicalParams
)
from atsm.models.errors import AtsmError, EstimationError, StructuralError, ValidationError
from atsm.models.validators import validate_panel

logger = logging.getLogger(__name__)

# 不可求值参数点的目标函数值
INVALID_OBJECTIVE = 1e12


@dataclass(frozen=True)
class ParamField:
    """一个自由参数：名称、变换与初始单纯形步长 (在变换后的尺度上)"""
    name: str
    step: float
    transform: str = "identity"   # identity | log | softplus
    scale: float = 1.0

    def to_free(self, value: float) -> float:
        if self.transform == "log":
            return math.log(max(value, 1e-12))
        if self.transform == "softplus":
            v = max(value / self.scale, 1e-10)
            return v + math.log(-math.expm1(-v))
        return float(value)

    def to_natural(self, u: float) -> float:
        if self.transform == "log":
            return math.exp(u)
        if self.transform == "softplus":
            return self.scale * float(np.logaddexp(0.0, u))
        return float(u)


_COMMON_STAGE1 = (
    ParamField("x1_star", 0.25),
    ParamField("x2_star", 0.25),
    ParamField("a_hat11", 0.02),
    ParamField("a_hat12", 0.02),
    ParamField("a_hat21", 0.02),
    ParamField("a_hat22", 0.02),
    ParamField("omega_pi", 0.5, "softplus"),
    ParamField("omega_s", 0.5, "softplus"),
)

STAGE1_FIELDS: Dict[ModelKind, Tuple[ParamField, ...]] = {
    ModelKind.PROPORTIONAL: _COMMON_STAGE1 + (
        ParamField("beta1", 0.02),
        ParamField("beta2", 0.02),
        ParamField("alpha", 0.05),
        ParamField("sigma21", 0.05),
        ParamField("sigma22", 0.05),
    ),
    ModelKind.DEPENDENT: _COMMON_STAGE1 + (
        ParamField("beta1", 0.02),
        ParamField("beta2", 0.02),
        ParamField("alpha1", 0.05),
        ParamField("c", 0.3, "log"),
        ParamField("sigma12", 0.05),
        ParamField("sigma21", 0.05),
        ParamField("sigma22", 0.05),
    ),
    ModelKind.INDEPENDENT: _COMMON_STAGE1 + (
        ParamField("beta11", 0.02),
        ParamField("beta12", 0.02),
        ParamField("beta21", 0.02),
        ParamField("beta22", 0.02),
        ParamField("alpha1", 0.05),
        ParamField("alpha2", 0.05),
        ParamField("sigma12", 0.05),
        ParamField("sigma21", 0.05),
    ),
}

# ν 以每季度小数计，量级约为1e-4
NU_SCALE = 1e-4

STAGE2_FIELDS: Tuple[ParamField, ...] = (
    ParamField("lambda1", 0.05),
    ParamField("lambda2", 0.05),
    ParamField("nu0", 0.5, "softplus", NU_SCALE),
    ParamField("nu1", 0.5, "softplus", NU_SCALE),
    ParamField("nu2", 0.5, "softplus", NU_SCALE),
)

# 两步共用一个 fixed 列表，只作用于本步的参数
KNOWN_FIELD_NAMES = frozenset(
    [f.name for fields in STAGE1_FIELDS.values() for f in fields] + [f.name for f in STAGE2_FIELDS]
)


def stage1_values(p: PhysicalParams) -> Dict[str, float]:
    """第一步参数的自然取值"""
    x_star = equilibrium_state(p)
    a, beta, sigma, alpha = p.a_hat, p.beta, p.sigma, p.alpha
    values = {
        "x1_star": x_star.x1, "x2_star": x_star.x2,
        "a_hat11": a[0, 0], "a_hat12": a[0, 1], "a_hat21": a[1, 0], "a_hat22": a[1, 1],
        "omega_pi": p.omega_pi, "omega_s": p.omega_s,
    }
    if p.kind == ModelKind.PROPORTIONAL:
        values.update(beta1=beta[0, 0], beta2=beta[0, 1], alpha=alpha[0],
                      sigma21=sigma[1, 0], sigma22=sigma[1, 1])
    elif p.kind == ModelKind.DEPENDENT:
        values.update(beta1=beta[0, 0], beta2=beta[0, 1], alpha1=alpha[0],
                      c=p.dependent_offset, sigma12=sigma[0, 1],
                      sigma21=sigma[1, 0], sigma22=sigma[1, 1])
    else:
        values.update(beta11=beta[0, 0], beta12=beta[0, 1], beta21=beta[1, 0],
                      beta22=beta[1, 1], alpha1=alpha[0], alpha2=alpha[1],
                      sigma12=sigma[0, 1], sigma21=sigma[1, 0])
    return {k: float(v) for k, v in values.items()}


def assemble_stage1(values: Dict[str, float], template: PhysicalParams) -> PhysicalParams:
    """由第一步自然取值构造参数，b̂ = −â x*"""
    v = values
    a_hat = np.array([[v["a_hat11"], v["a_hat12"]], [v["a_hat21"], v["a_hat22"]]])
    b_hat = -a_hat @ np.array([v["x1_star"], v["x2_star"]])

    if template.kind == ModelKind.PROPORTIONAL:
        row = [v["beta1"], v["beta2"]]
        beta, alpha = [row, row], [v["alpha"], v["alpha"]]
        sigma = [[1.0, 0.0], [v["sigma21"], v["sigma22"]]]
    elif template.kind == ModelKind.DEPENDENT:
        row = [v["beta1"], v["beta2"]]
        beta, alpha = [row, row], [v["alpha1"], v["alpha1"] + v["c"]]
        sigma = [[1.0, v["sigma12"]], [v["sigma21"], v["sigma22"]]]
    else:
        beta = [[v["beta11"], v["beta12"]], [v["beta21"], v["beta22"]]]
        alpha = [v["alpha1"], v["alpha2"]]
        sigma = [[1.0, v["sigma12"]], [v["sigma21"], 1.0]]

    return template.with_updates(a_hat=a_hat, b_hat=b_hat, alpha=alpha, beta=beta,
                                 sigma=sigma, omega_pi=v["omega_pi"], omega_s=v["omega_s"])


def stage2_values(p: PhysicalParams) -> Dict[str, float]:
    return {"lambda1": float(p.lam[0]), "lambda2": float(p.lam[1]),
            "nu0": p.nu0, "nu1": p.nu1, "nu2": p.nu2}


def assemble_stage2(values: Dict[str, float], stage1: PhysicalParams) -> PhysicalParams:
    """只替换 λ 与 ν，第一步参数原样保留"""
    return stage1.with_updates(lam=[values["lambda1"], values["lambda2"]],
                               nu0=values["nu0"], nu1=values["nu1"], nu2=values["nu2"])


@dataclass
class EstimationOptions:
    restarts: int = 3
    max_iter: int = 4000
    impose_feller: bool = False
    penalty_weight: float = 1e3
    penalty_growth: float = 10.0
    feller_tol_eq: float = 1e-6
    fixed: Sequence[str] = ()
    perturbation: float = 1.0      # 重启扰动，以各参数单纯形步长为单位
    xatol: float = 1e-5
    fatol: float = 1e-5
    seed: int = 0
    require_convergence: bool = False
    show_progress: bool = False
    filter: FilterOptions = field(default_factory=FilterOptions)


def _safe_feller(p: PhysicalParams, tol_eq: float) -> Optional[FellerReport]:
    try:
        return check_feller(p, Measure.P, tol_eq=tol_eq)
    except StructuralError:
        return None


def _maximize(loglik_fn: Callable[[PhysicalParams], float],
              fields: Sequence[ParamField],
              init_values: Dict[str, float],
              assemble: Callable[[Dict[str, float]], PhysicalParams],
              options: EstimationOptions, stage: int, penalize: bool) -> EstimationResult:
    unknown = sorted(set(options.fixed) - KNOWN_FIELD_NAMES)
    if unknown:
        raise ValidationError("不存在的固定参数", unknown)

    free = [f for f in fields if f.name not in set(options.fixed)]
    steps = np.array([f.step for f in free])
    u0 = np.array([f.to_free(init_values[f.name]) for f in free])

    def unpack(u) -> PhysicalParams:
        values = dict(init_values)
        values.update({f.name: f.to_natural(ui) for f, ui in zip(free, u)})
        return assemble(values)

    weight = options.penalty_weight if penalize else 0.0
    n_eval = 0

    def objective(u, w) -> float:
        nonlocal n_eval
        n_eval += 1
        try:
            p = unpack(u)
            ll = loglik_fn(p)
            penalty = 0.0
            if w > 0.0:
                report = check_feller(p, Measure.P, tol_eq=options.feller_tol_eq)
                penalty = w * float(np.sum(feller_violation(report, options.feller_tol_eq)))
        except (AtsmError, LinAlgError, ValueError, FloatingPointError):
            return INVALID_OBJECTIVE
        value = -ll + penalty
        return value if math.isfinite(value) else INVALID_OBJECTIVE

    if not free:
        p = unpack(u0)
        value = objective(u0, 0.0)
        if value >= INVALID_OBJECTIVE:
            raise EstimationError("初始参数无法求值似然", {"stage": stage})
        return EstimationResult(params=p, loglik=-value, converged=True, stage=stage,
                                restarts=0, n_evaluations=n_eval, penalty_weight=weight,
                                feller=_safe_feller(p, options.feller_tol_eq),
                                message="所有参数均固定")

    rng = np.random.default_rng(options.seed)
    history: List[Dict] = []
    best: Optional[Tuple[Tuple[bool, float], np.ndarray, object]] = None

    for restart in tqdm(range(options.restarts), desc=f"第{stage}步重启",
                        disable=not options.show_progress):
        if restart == 0:
            start = u0
        else:
            center = best[1] if best is not None else u0
            start = center + options.perturbation * steps * rng.standard_normal(steps.size)
        simplex = np.vstack([start, start + np.diag(steps)])

        res = minimize(objective, start, args=(weight,), method="Nelder-Mead",
                       options={"maxiter": options.max_iter, "xatol": options.xatol,
                                "fatol": options.fatol, "initial_simplex": simplex})
        if res.fun >= INVALID_OBJECTIVE:
            history.append({"restart": restart, "objective": None, "converged": False,
                            "penalty_weight": weight})
            logger.info(f"第{stage}步重启 {restart}: 无可求值点")
            continue

        p = unpack(res.x)
        loglik = float(loglik_fn(p))
        feasible = True
        if penalize:
            report = _safe_feller(p, options.feller_tol_eq)
            feasible = report is not None and report.overall
        history.append({"restart": restart, "objective": float(res.fun), "loglik": loglik,
                        "converged": bool(res.success), "feasible": feasible,
                        "penalty_weight": weight, "n_iter": int(res.nit)})
        logger.info(f"第{stage}步重启 {restart}: loglik={loglik:.6f}, 罚权重={weight:g}, "
                    f"收敛={res.success}, Feller可行={feasible}")

        rank = (feasible, loglik)
        if best is None or rank > best[0]:
            best = (rank, res.x.copy(), res)
        if penalize and not feasible:
            weight *= options.penalty_growth

    report = {"stage": stage, "restarts": options.restarts, "n_evaluations": n_eval,
              "history": history}
    if best is None:
        logger.error(f"第{stage}步估计失败：所有重启均无可求值点")
        raise EstimationError(f"第{stage}步估计失败：所有重启均无可求值点", report)

    (feasible, loglik), u_best, res = best
    converged = bool(res.success)
    if options.require_convergence and not any(h.get("converged") for h in history):
        logger.error(f"第{stage}步估计在 {options.restarts} 次重启内未收敛")
        raise EstimationError(f"第{stage}步估计在重启预算内未收敛", report)

    params = unpack(u_best)
    feller = _safe_feller(params, options.feller_tol_eq)
    if penalize and not feasible:
        logger.warning(f"第{stage}步估计结果不满足Feller条件")
    return EstimationResult(params=params, loglik=loglik, converged=converged, stage=stage,
                            restarts=options.restarts, n_evaluations=n_eval,
                            penalty_weight=weight, feller=feller,
                            message=str(res.message), history=history)


def estimate_stage1(data: PanelData, init: PhysicalParams,
                    options: Optional[EstimationOptions] = None) -> EstimationResult:
    """
    第一步：以短期利率与通胀估计 â, b̂, α, β, Σ, ω_π, ω_s

    识别约束由参数化直接满足；impose_feller 时对Feller条件的违反量加罚。
    """
    options = options or EstimationOptions()
    errors = validate_panel(data)
    if errors:
        raise ValidationError("面板数据无效", errors)

    logger.info(f"第一步估计开始: kind={init.kind.value}, T={data.n_quarters}, "
                f"固定参数={list(options.fixed)}")
    stage1_data = data.without_yields()
    result = _maximize(
        lambda p: ekf_loglik(p, stage1_data, 1, options.filter).loglik,
        STAGE1_FIELDS[init.kind],
        stage1_values(init),
        lambda values: assemble_stage1(values, init),
        options, stage=1, penalize=options.impose_feller,
    )
    logger.info(f"第一步估计完成: loglik={result.loglik:.6f}")
    return result


def estimate_stage2(data: PanelData, stage1_params: PhysicalParams,
                    init: Optional[PhysicalParams] = None,
                    options: Optional[EstimationOptions] = None) -> EstimationResult:
    """
    第二步：固定第一步参数，加入收益率方程估计 λ 与 ν

    init 只提供 λ 与 ν 的起点，缺省为 λ = 0 及 stage1_params 中的 ν。
    """
    options = options or EstimationOptions()
    errors = validate_panel(data)
    if errors:
        raise ValidationError("面板数据无效", errors)
    if not data.maturities:
        raise ValidationError("第二步估计需要收益率观测")

    if init is None:
        start = stage2_values(stage1_params)
        start.update(lambda1=0.0, lambda2=0.0)
    else:
        start = stage2_values(init)

    logger.info(f"第二步估计开始: 期限={data.maturities}, 固定参数={list(options.fixed)}")
    result = _maximize(
        lambda p: ekf_loglik(p, data, 2, options.filter).loglik,
        STAGE2_FIELDS,
        start,
        lambda values: assemble_stage2(values, stage1_params),
        options, stage=2, penalize=False,
    )
    logger.info(f"第二步估计完成: loglik={result.loglik:.6f}, lambda={result.params.lam.tolist()}")
    return result
