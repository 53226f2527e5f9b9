"""
离散Riccati递推：指数仿射债券价格系数 A_n, B_n
"""

import logging
from typing import Iterable

import numpy as np

from atsm.core.model_core import DELTA, DELTA0, as_state_array, market_price_corrections
from atsm.models.data_models import PhysicalParams, RiccatiTable, RiskNeutralParams
from atsm.models.errors import MaturityRangeError

logger = logging.getLogger(__name__)

# 最长收益率期限 (30年)
DEFAULT_MAX_MATURITY = 120


def _recurse(a: np.ndarray, b: np.ndarray, alpha: np.ndarray, beta: np.ndarray,
             sigma: np.ndarray, N: int) -> RiccatiTable:
    if N < 0:
        raise MaturityRangeError(f"最大期限必须非负 (N={N})")

    transition = (np.eye(2) + a).T
    A = np.zeros(N + 1)
    B = np.zeros((N + 1, 2))
    for n in range(N):
        quad = (sigma.T @ B[n]) ** 2
        A[n + 1] = A[n] + b @ B[n] + 0.5 * alpha @ quad - DELTA0
        B[n + 1] = transition @ B[n] + 0.5 * beta.T @ quad - DELTA
    return RiccatiTable(N=N, A=A, B=B)


def riccati_q(rn: RiskNeutralParams, alpha=None, beta=None, sigma=None,
              N: int = DEFAULT_MAX_MATURITY) -> RiccatiTable:
    """以风险中性参数 (a, b) 递推；α, β, Σ 缺省取自 rn"""
    alpha = rn.alpha if alpha is None else np.asarray(alpha, dtype=float)
    beta = rn.beta if beta is None else np.asarray(beta, dtype=float)
    sigma = rn.sigma if sigma is None else np.asarray(sigma, dtype=float)
    return _recurse(rn.a, rn.b, alpha, beta, sigma, N)


def riccati_p(p: PhysicalParams, N: int = DEFAULT_MAX_MATURITY) -> RiccatiTable:
    """以物理参数 (â, b̂, λ) 递推：I+â−Σ(β⊙λ) 与 b̂−Σ(α⊙λ)"""
    corr_a, corr_b = market_price_corrections(p.alpha, p.beta, p.sigma, p.lam)
    logger.debug(f"Riccati递推 (物理参数): kind={p.kind.value}, N={N}")
    return _recurse(p.a_hat - corr_a, p.b_hat - corr_b, p.alpha, p.beta, p.sigma, N)


def _check_maturity(table: RiccatiTable, n: int, minimum: int) -> int:
    if int(n) != n or not minimum <= n <= table.N:
        raise MaturityRangeError(f"期限 n={n} 超出范围 [{minimum}, {table.N}]")
    return int(n)


def analytic_price(table: RiccatiTable, x, n: int) -> float:
    """exp(A_n + B_nᵀx)"""
    n = _check_maturity(table, n, 0)
    return float(np.exp(table.A[n] + table.B[n] @ as_state_array(x)))


def analytic_yield(table: RiccatiTable, x, n: int) -> float:
    """每季度收益率 −(A_n + B_nᵀx)/n"""
    n = _check_maturity(table, n, 1)
    return float(-(table.A[n] + table.B[n] @ as_state_array(x)) / n)


def yield_curve(table: RiccatiTable, x, maturities: Iterable[int]) -> np.ndarray:
    """多个期限的每季度收益率"""
    mats = np.array([_check_maturity(table, n, 1) for n in maturities], dtype=int)
    x = as_state_array(x)
    return -(table.A[mats] + table.B[mats] @ x) / mats


def log_price_loadings(table: RiccatiTable, maturities: Iterable[int]):
    """收益率观测方程的截距与载荷：y_n = d_n + H_n x"""
    mats = np.array([_check_maturity(table, n, 1) for n in maturities], dtype=int)
    intercept = -table.A[mats] / mats
    loadings = -table.B[mats] / mats[:, None]
    return intercept, loadings
