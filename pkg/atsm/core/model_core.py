"""
模型参数化、单位约定、截断波动率与物理/风险中性参数映射
"""

import logging
from typing import Union

import numpy as np

from atsm.models.data_models import (
    PhysicalParams, RiskNeutralParams, StateVec, VolatilityVec
)
from atsm.models.errors import NonStationaryError, SingularDriftError, ValidationError
from atsm.models.validators import validate_physical_params

logger = logging.getLogger(__name__)

# 年化百分比与每季度小数之间的换算因子 (r_t = (X1 + X2) / 400)
QUARTERLY_PCT = 400.0

DELTA0 = 0.0
DELTA = np.full(2, 1.0 / QUARTERLY_PCT)
DELTA.setflags(write=False)

StateLike = Union[StateVec, np.ndarray, list, tuple]


def to_annual_pct(rate_per_quarter):
    """每季度小数 → 年化百分比"""
    return np.asarray(rate_per_quarter, dtype=float) * QUARTERLY_PCT


def from_annual_pct(rate_pct):
    """年化百分比 → 每季度小数"""
    return np.asarray(rate_pct, dtype=float) / QUARTERLY_PCT


def as_state_array(x: StateLike) -> np.ndarray:
    if isinstance(x, StateVec):
        return x.as_array()
    return np.asarray(x, dtype=float)


def validate_params(p: PhysicalParams) -> PhysicalParams:
    """按声明的模型类型校验参数，失败时抛出 ValidationError"""
    errors = validate_physical_params(p)
    if errors:
        raise ValidationError(f"{p.kind.value}模型参数无效", errors)
    return p


def volatility_array(alpha: np.ndarray, beta: np.ndarray, x: np.ndarray) -> np.ndarray:
    """α + βx，x 的最后一维为状态维 (未截断)"""
    return alpha + x @ beta.T


def volatility(p: PhysicalParams, x: StateLike) -> VolatilityVec:
    """波动率因子 V = α + βx，未截断"""
    return VolatilityVec.from_array(volatility_array(p.alpha, p.beta, as_state_array(x)))


def vol_floor(v):
    """逐元素取 max(v, 0)"""
    if isinstance(v, VolatilityVec):
        return VolatilityVec(max(v.v1, 0.0), max(v.v2, 0.0))
    return np.maximum(np.asarray(v, dtype=float), 0.0)


def hadamard_rows(v: np.ndarray, w: np.ndarray) -> np.ndarray:
    """(v⊙w)_ij = v_i w_ij；w 为向量时退化为逐元素乘积"""
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    if w.ndim == 1:
        return v * w
    return v[:, None] * w


def market_price_corrections(alpha, beta, sigma, lam):
    """返回 (Σ(β⊙λ), Σ(α⊙λ))"""
    return sigma @ hadamard_rows(lam, beta), sigma @ hadamard_rows(lam, alpha)


def to_risk_neutral(p: PhysicalParams) -> RiskNeutralParams:
    """a = â − Σ(β⊙λ)，b = b̂ − Σ(α⊙λ)"""
    corr_a, corr_b = market_price_corrections(p.alpha, p.beta, p.sigma, p.lam)
    return RiskNeutralParams(
        a=p.a_hat - corr_a,
        b=p.b_hat - corr_b,
        alpha=p.alpha,
        beta=p.beta,
        sigma=p.sigma,
        lam=p.lam,
    )


def to_physical(rn: RiskNeutralParams, like: PhysicalParams) -> PhysicalParams:
    """to_risk_neutral 的逆映射；噪声尺度与模型类型取自 like"""
    corr_a, corr_b = market_price_corrections(rn.alpha, rn.beta, rn.sigma, rn.lam)
    return like.with_updates(
        a_hat=rn.a + corr_a,
        b_hat=rn.b + corr_b,
        alpha=rn.alpha,
        beta=rn.beta,
        sigma=rn.sigma,
        lam=rn.lam,
    )


def spectral_radius(matrix: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(matrix))))


def check_stationarity(p: PhysicalParams) -> float:
    """要求 I+â 的谱半径 < 1，返回谱半径"""
    rho = spectral_radius(np.eye(2) + p.a_hat)
    if rho >= 1.0:
        logger.debug(f"谱半径 {rho:.6f} >= 1")
        raise NonStationaryError(f"I+â 的谱半径为 {rho:.6f}，物理动态不平稳")
    return rho


def equilibrium_state(p: PhysicalParams) -> StateVec:
    """物理测度下的平稳均值 −â⁻¹b̂"""
    scale = max(float(np.sum(p.a_hat ** 2)), 1e-300)
    if abs(np.linalg.det(p.a_hat)) <= 1e-14 * scale:
        raise SingularDriftError("漂移矩阵 â 奇异，均衡状态不存在")
    check_stationarity(p)
    x_star = -np.linalg.solve(p.a_hat, p.b_hat)
    return StateVec.from_array(x_star)


def short_rate(x: StateLike):
    """每季度短期利率 (x1 + x2) / 400；支持批量状态"""
    arr = as_state_array(x)
    r = DELTA0 + arr @ DELTA
    if np.ndim(r) == 0:
        return float(r)
    return r
