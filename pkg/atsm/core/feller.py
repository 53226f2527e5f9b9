"""
二维多元Feller条件的显式参数形式

按波动率结构 (比例 / 相依非比例 / 独立) 归约边界条件，
在P测度下用 (â, b̂)，在Q测度下用 (a, b) 求值，并报告每个条件的裕度。
"""

import logging
from enum import Enum
from typing import Iterable, List, Sequence, Tuple

import numpy as np

from atsm.core.model_core import to_risk_neutral
from atsm.models.data_models import (
    ConditionKind, FellerCondition, FellerReport, Measure, ModelKind, PhysicalParams
)
from atsm.models.errors import StructuralError
from atsm.models.validators import KIND_TOL

logger = logging.getLogger(__name__)

DEFAULT_TOL_EQ = 1e-9
DEFAULT_TOL_INEQ = 0.0

DEFAULT_GRID = (0.0, 1.0, 10.0, 1000.0)


class BetaStructure(str, Enum):
    """classify_beta 的建议结果"""
    INDEPENDENT = "independent"
    PROPORTIONAL_OR_DEPENDENT = "proportional-or-dependent"
    PROPORTIONAL = "proportional"
    DEPENDENT = "dependent"
    UNNORMALIZED = "unnormalized"   # 行线性相关但 k≠1，需将 k 吸收进 Σ
    DEGENERATE = "degenerate"       # β = 0，常数波动率


def classify_beta(beta, tol: float = KIND_TOL, alpha=None) -> BetaStructure:
    """根据 β (及可选的 α) 建议波动率结构，仅供参考，不覆盖声明的类型"""
    beta = np.asarray(beta, dtype=float)
    norm2 = float(np.sum(beta ** 2))
    if norm2 == 0.0:
        return BetaStructure.DEGENERATE
    if abs(np.linalg.det(beta)) > tol * norm2:
        return BetaStructure.INDEPENDENT
    if np.max(np.abs(beta[0] - beta[1])) > tol * np.sqrt(norm2):
        return BetaStructure.UNNORMALIZED
    if alpha is None:
        return BetaStructure.PROPORTIONAL_OR_DEPENDENT
    offset = float(alpha[1] - alpha[0])
    if abs(offset) <= tol:
        return BetaStructure.PROPORTIONAL
    if offset > 0:
        return BetaStructure.DEPENDENT
    return BetaStructure.UNNORMALIZED


def _gammas(beta: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """γ₁ = (−β₁₂, β₁₁)，γ₂ = (β₂₂, −β₂₁)"""
    gamma1 = np.array([-beta[0, 1], beta[0, 0]])
    gamma2 = np.array([beta[1, 1], -beta[1, 0]])
    return gamma1, gamma2


def drift_pair(p: PhysicalParams, measure: Measure) -> Tuple[np.ndarray, np.ndarray]:
    """P测度返回 (â, b̂)，Q测度返回 (a, b)"""
    if Measure(measure) == Measure.P:
        return p.a_hat, p.b_hat
    rn = to_risk_neutral(p)
    return rn.a, rn.b


def _half_quad(row: np.ndarray, sigma: np.ndarray) -> float:
    """½ β_i ΣΣᵀ β_iᵀ"""
    s = sigma.T @ row
    return 0.5 * float(s @ s)


def _equality(cond_id: str, value: float, tol_eq: float) -> FellerCondition:
    margin = abs(value)
    return FellerCondition(cond_id, value, 0.0, margin, ConditionKind.EQ_ZERO, margin <= tol_eq)


def _strict(cond_id: str, lhs: float, rhs: float, tol_ineq: float) -> FellerCondition:
    margin = lhs - rhs
    return FellerCondition(cond_id, lhs, rhs, margin, ConditionKind.STRICT_GT, margin > tol_ineq)


def _geq(cond_id: str, lhs: float, rhs: float, tol_ineq: float) -> FellerCondition:
    margin = lhs - rhs
    return FellerCondition(cond_id, lhs, rhs, margin, ConditionKind.GEQ, margin >= -tol_ineq)


def _check_structure(p: PhysicalParams) -> None:
    """在求值任何条件之前检查类型与参数结构"""
    beta = p.beta
    if p.kind in (ModelKind.PROPORTIONAL, ModelKind.DEPENDENT):
        if np.max(np.abs(beta[0] - beta[1])) > KIND_TOL:
            raise StructuralError(f"{p.kind.value}模型要求β两行相等")
        if p.kind == ModelKind.DEPENDENT and p.dependent_offset <= 0.0:
            raise StructuralError("相依模型要求 c = α₂ − α₁ > 0")
    else:
        scale = max(float(np.sum(beta ** 2)), 1.0)
        if abs(np.linalg.det(beta)) <= KIND_TOL * scale:
            raise StructuralError("独立模型要求 det β ≠ 0")


def _proportional_conditions(p, A, B, tol_eq, tol_ineq) -> List[FellerCondition]:
    beta1 = p.beta[0]
    gamma1, _ = _gammas(p.beta)
    norm2 = float(beta1 @ beta1)
    rhs = _half_quad(beta1, p.sigma)
    if norm2 == 0.0:
        # β₁ = 0 时左侧只剩 β₁B
        lhs = float(beta1 @ B)
    else:
        lhs = -(p.alpha[0] / norm2) * float(beta1 @ A @ beta1) + float(beta1 @ B)
    return [
        _strict("pv1", lhs, rhs, tol_ineq),
        _equality("pv2", float(beta1 @ A @ gamma1), tol_eq),
    ]


def _independent_conditions(p, A, B, tol_eq, tol_ineq) -> List[FellerCondition]:
    beta, sigma, alpha = p.beta, p.sigma, p.alpha
    det = float(np.linalg.det(beta))
    gamma1, gamma2 = _gammas(beta)
    beta_inv_alpha = np.linalg.solve(beta, alpha)
    conditions = [
        _equality("iv1", float(beta[0] @ sigma[:, 1]), tol_eq),
        _equality("iv2", float(beta[1] @ sigma[:, 0]), tol_eq),
        _geq("iv3", float(beta[0] @ A @ gamma1) / det, 0.0, tol_ineq),
        _geq("iv4", float(beta[1] @ A @ gamma2) / det, 0.0, tol_ineq),
    ]
    for i, cond_id in ((0, "iv5"), (1, "iv6")):
        lhs = float(beta[i] @ B) - float(beta[i] @ A @ beta_inv_alpha)
        conditions.append(_strict(cond_id, lhs, _half_quad(beta[i], sigma), tol_ineq))
    return conditions


def check_feller(p: PhysicalParams, measure: Measure = Measure.P,
                 tol_eq: float = DEFAULT_TOL_EQ,
                 tol_ineq: float = DEFAULT_TOL_INEQ) -> FellerReport:
    """
    按模型类型求值显式Feller条件

    Args:
        p: 物理参数
        measure: P 用 (â, b̂)，Q 用 (a, b)
        tol_eq: 等式条件容差
        tol_ineq: 不等式裕度阈值

    Returns:
        每个条件的 LHS/RHS/裕度/是否通过 及总体结论
    """
    measure = Measure(measure)
    _check_structure(p)
    A, B = drift_pair(p, measure)

    if p.kind == ModelKind.INDEPENDENT:
        conditions = _independent_conditions(p, A, B, tol_eq, tol_ineq)
    else:
        conditions = _proportional_conditions(p, A, B, tol_eq, tol_ineq)
        if p.kind == ModelKind.DEPENDENT:
            conditions.append(_equality("dv", float(p.beta[0] @ p.sigma[:, 1]), tol_eq))

    overall = all(c.passed for c in conditions)
    logger.debug(f"Feller检查 ({p.kind.value}, {measure.value}): "
                 + ", ".join(f"{c.id}={c.margin:+.3e}" for c in conditions))
    return FellerReport(tuple(conditions), overall, measure, p.kind)


def feller_violation(report: FellerReport, tol_eq: float = DEFAULT_TOL_EQ) -> np.ndarray:
    """每个条件的违反量 (≥0)，用于估计中的外罚函数"""
    out = []
    for cond in report.conditions:
        if cond.kind == ConditionKind.EQ_ZERO:
            out.append(max(cond.margin - tol_eq, 0.0))
        else:
            out.append(max(-cond.margin, 0.0))
    return np.array(out)


def check_feller_on_grid(p: PhysicalParams, measure: Measure = Measure.P,
                         grid: Sequence[float] = DEFAULT_GRID,
                         tol_eq: float = DEFAULT_TOL_EQ) -> bool:
    """独立情形：在有限网格 w, v 上直接求值边界条件"""
    if p.kind != ModelKind.INDEPENDENT:
        raise StructuralError("网格检查只适用于独立波动率模型")
    _check_structure(p)
    A, B = drift_pair(p, measure)
    beta, sigma, alpha = p.beta, p.sigma, p.alpha

    if abs(beta[0] @ sigma[:, 1]) > tol_eq or abs(beta[1] @ sigma[:, 0]) > tol_eq:
        return False

    for i in (0, 1):
        rhs = _half_quad(beta[i], sigma)
        for w in grid:
            target = np.zeros(2)
            target[1 - i] = w
            x = np.linalg.solve(beta, target - alpha)
            if not float(beta[i] @ (A @ x + B)) > rhs:
                return False
    return True


def summarize(report: FellerReport) -> Iterable[str]:
    """逐行文本输出"""
    for c in report.conditions:
        status = "PASS" if c.passed else "FAIL"
        yield f"{c.id}\t{c.kind.value}\tlhs={c.lhs:.6e}\trhs={c.rhs:.6e}\tmargin={c.margin:.6e}\t{status}"
    yield f"overall\t{report.measure.value}\t{'PASS' if report.overall else 'FAIL'}"
