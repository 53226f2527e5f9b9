"""
状态空间表示、扩展卡尔曼滤波似然与合成面板生成

季度 t 的滤波状态为 (x1_t, x2_t, S_{t+1}, S_t, S_{t−1})，
与之配对的观测为 (r_t, π_{t+1}, {y_{n,t}})，其中 π_{t+1} 取自面板的下一行。
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.linalg import LinAlgError, cho_factor, cho_solve, solve_discrete_lyapunov

from atsm.core.model_core import (
    DELTA, equilibrium_state, short_rate, validate_params, volatility_array
)
from atsm.core.montecarlo import step_p
from atsm.core.random_streams import block_generator, inverse_cdf_normals
from atsm.core.riccati import log_price_loadings, riccati_p
from atsm.models.data_models import FilterResult, FilterState, PanelData, PhysicalParams, RiccatiTable
from atsm.models.errors import FilterDivergenceError, ValidationError
from atsm.models.validators import validate_panel

logger = logging.getLogger(__name__)

STATE_DIM = 5
LOG_2PI = math.log(2.0 * math.pi)

# 面板所用期限 (季度)
PANEL_MATURITIES = (4, 8, 16, 28, 40, 60, 120)

# 季节项 S_{t+1} = −S_t − S_{t−1} − S_{t−2} 的伴随矩阵
SEASONAL_COMPANION = np.array([
    [-1.0, -1.0, -1.0],
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
])
SEASONAL_COMPANION.setflags(write=False)


@dataclass(frozen=True)
class FilterOptions:
    seasonal_prior_var: Optional[float] = None  # None: 4·ω_s²·(V₂*∨0)
    short_rate_var: float = 1e-12
    vol_eps: float = 1e-8
    var_floor: float = 1e-12


@dataclass(frozen=True, eq=False)
class StateSpaceSpec:
    """转移方程与观测方程

    观测行顺序：短期利率、下一季度通胀、各期限收益率 (第二阶段)。
    """
    params: PhysicalParams
    stage: int
    transition: np.ndarray
    intercept: np.ndarray
    maturities: Tuple[int, ...] = ()
    yield_intercept: np.ndarray = field(default_factory=lambda: np.zeros(0))
    yield_loadings: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    options: FilterOptions = FilterOptions()

    @property
    def n_measurements(self) -> int:
        return 2 + len(self.maturities)

    @property
    def degenerate_noise(self) -> bool:
        """通胀与季节噪声 (及第二阶段的收益率噪声) 全为零"""
        p = self.params
        zero = p.omega_pi == 0.0 and p.omega_s == 0.0
        if self.stage == 2:
            zero = zero and p.nu0 == 0.0 and p.nu1 == 0.0 and p.nu2 == 0.0
        return zero

    def volatility(self, x: np.ndarray) -> np.ndarray:
        return volatility_array(self.params.alpha, self.params.beta, x)

    def state_noise(self, x: np.ndarray) -> np.ndarray:
        """由季度 t 的滤波状态求 t→t+1 的噪声协方差"""
        p, eps = self.params, self.options.vol_eps
        v = np.maximum(self.volatility(x), eps)
        q = np.zeros((STATE_DIM, STATE_DIM))
        q[:2, :2] = (p.sigma * v) @ p.sigma.T
        q[2, 2] = p.omega_s ** 2 * v[1]
        return q

    def measurement(self, v_lag: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """观测矩阵 H、截距 d 与测量方差 R；v_lag 为上一季度滤波状态处的波动率"""
        p, opts = self.params, self.options
        vf = np.maximum(v_lag, 0.0)
        k = self.n_measurements
        H = np.zeros((k, STATE_DIM))
        d = np.zeros(k)
        R = np.empty(k)

        H[0, :2] = DELTA
        R[0] = opts.short_rate_var

        H[1, 1] = 1.0
        H[1, 2] = 1.0
        R[1] = p.omega_pi ** 2 * max(vf[1], opts.vol_eps)

        if self.maturities:
            H[2:, :2] = self.yield_loadings
            d[2:] = self.yield_intercept
            R[2:] = (p.nu0 + p.nu1 * math.sqrt(vf[0]) + p.nu2 * math.sqrt(vf[1])) ** 2

        return H, d, np.maximum(R, opts.var_floor)

    def equilibrium_volatility(self) -> np.ndarray:
        return self.volatility(equilibrium_state(self.params).as_array())

    def prior(self) -> FilterState:
        """均衡状态为均值；x块协方差解离散Lyapunov方程，季节块为对角"""
        p = self.params
        x_star = equilibrium_state(p).as_array()
        v_star = np.maximum(self.volatility(x_star), self.options.vol_eps)
        q_star = (p.sigma * v_star) @ p.sigma.T

        cov = np.zeros((STATE_DIM, STATE_DIM))
        cov[:2, :2] = solve_discrete_lyapunov(np.eye(2) + p.a_hat, q_star)
        seasonal = self.options.seasonal_prior_var
        if seasonal is None:
            seasonal = 4.0 * p.omega_s ** 2 * max(float(v_star[1]), 0.0)
        cov[2:, 2:] = seasonal * np.eye(3)

        mean = np.concatenate([x_star, np.zeros(3)])
        return FilterState(mean=mean, cov=cov, loglik_accum=0.0)


def build_state_space(p: PhysicalParams, stage: int, table: Optional[RiccatiTable] = None,
                      maturities: Iterable[int] = (),
                      options: Optional[FilterOptions] = None) -> StateSpaceSpec:
    """
    构造状态空间模型

    Args:
        p: 物理参数
        stage: 1 只含短期利率与通胀，2 另加收益率
        table: 第二阶段必需的Riccati系数表
        maturities: 第二阶段的收益率期限
    """
    if stage not in (1, 2):
        raise ValidationError(f"stage必须为1或2 (当前 {stage})")
    validate_params(p)
    options = options or FilterOptions()

    transition = np.zeros((STATE_DIM, STATE_DIM))
    transition[:2, :2] = np.eye(2) + p.a_hat
    transition[2:, 2:] = SEASONAL_COMPANION
    intercept = np.concatenate([p.b_hat, np.zeros(3)])

    if stage == 1:
        spec = StateSpaceSpec(p, 1, transition, intercept, options=options)
    else:
        if table is None:
            raise ValidationError("第二阶段状态空间需要Riccati系数表")
        mats = tuple(sorted(int(n) for n in maturities))
        if mats:
            d, loadings = log_price_loadings(table, mats)
        else:
            d, loadings = np.zeros(0), np.zeros((0, 2))
        spec = StateSpaceSpec(p, 2, transition, intercept, mats, d, loadings, options)

    if spec.degenerate_noise:
        logger.warning("观测噪声尺度全为零，滤波依赖方差下限")
    return spec


def observation_matrix(data: PanelData, spec: StateSpaceSpec) -> np.ndarray:
    """T × k 观测矩阵；第 t 行为 (r_t, π_{t+1}, y_{n,t})，缺失为 NaN"""
    T = data.n_quarters
    obs = np.full((T, spec.n_measurements), np.nan)
    obs[:, 0] = data.short_rate
    obs[:-1, 1] = data.inflation[1:]
    for j, n in enumerate(spec.maturities):
        obs[:, 2 + j] = data.yields[n]
    return obs


def _floor_psd(cov: np.ndarray) -> Tuple[np.ndarray, float]:
    """对称化并将负特征值截断为0，返回截断前的最小特征值"""
    sym = 0.5 * (cov + cov.T)
    w, u = np.linalg.eigh(sym)
    lowest = float(w[0])
    if lowest < 0.0:
        sym = (u * np.maximum(w, 0.0)) @ u.T
        sym = 0.5 * (sym + sym.T)
    return sym, lowest


def _update(state: FilterState, z: np.ndarray, H: np.ndarray, d: np.ndarray,
            R: np.ndarray, quarter: int) -> Tuple[FilterState, float]:
    innov = z - (H @ state.mean + d)
    S = H @ state.cov @ H.T + np.diag(R)
    try:
        chol = cho_factor(S, lower=True)
    except (LinAlgError, ValueError):
        logger.error(f"新息协方差非正定 (季度索引 {quarter})")
        raise FilterDivergenceError("新息协方差非正定", quarter)

    gain = cho_solve(chol, H @ state.cov).T
    mean = state.mean + gain @ innov
    joseph = np.eye(STATE_DIM) - gain @ H
    cov = joseph @ state.cov @ joseph.T + (gain * R) @ gain.T

    log_det = 2.0 * float(np.sum(np.log(np.diag(chol[0]))))
    quad = float(innov @ cho_solve(chol, innov))
    term = -0.5 * (z.size * LOG_2PI + log_det + quad)
    if not math.isfinite(term) or not np.all(np.isfinite(mean)):
        logger.error(f"滤波发散 (季度索引 {quarter})")
        raise FilterDivergenceError("似然出现非有限值", quarter)
    return FilterState(mean, cov, state.loglik_accum + term), term


def run_filter(spec: StateSpaceSpec, data: PanelData) -> FilterResult:
    """在给定状态空间上运行扩展卡尔曼滤波"""
    T = data.n_quarters
    obs = observation_matrix(data, spec)
    F = spec.transition

    means = np.empty((T, STATE_DIM))
    covs = np.empty((T, STATE_DIM, STATE_DIM))
    terms = np.zeros(T)
    lowest = math.inf

    state = spec.prior()
    v_lag = spec.equilibrium_volatility()
    for t in range(T):
        if t > 0:
            prev = means[t - 1]
            v_lag = spec.volatility(prev[:2])
            state = FilterState(
                F @ prev + spec.intercept,
                F @ covs[t - 1] @ F.T + spec.state_noise(prev[:2]),
                state.loglik_accum,
            )

        mask = np.isfinite(obs[t])
        if mask.any():
            H, d, R = spec.measurement(v_lag)
            state, terms[t] = _update(state, obs[t][mask], H[mask], d[mask], R[mask], t)

        cov, low = _floor_psd(state.cov)
        lowest = min(lowest, low)
        means[t] = state.mean
        covs[t] = cov

    loglik = float(np.sum(terms))
    return FilterResult(loglik=loglik, filtered_means=means, filtered_covs=covs,
                        loglik_terms=terms, min_eigenvalue=lowest)


def ekf_loglik(p: PhysicalParams, data: PanelData, stage: int = 1,
               options: Optional[FilterOptions] = None,
               table: Optional[RiccatiTable] = None) -> FilterResult:
    """
    扩展卡尔曼滤波的预测误差分解对数似然

    第二阶段未给出系数表时按面板的最长期限由参数生成。
    """
    errors = validate_panel(data)
    if errors:
        raise ValidationError("面板数据无效", errors)

    maturities: Sequence[int] = ()
    if stage == 2:
        maturities = data.maturities
        if table is None:
            table = riccati_p(p, max(maturities, default=1))
    spec = build_state_space(p, stage, table, maturities, options)
    return run_filter(spec, data)


def default_schedule(T: int, maturities: Sequence[int] = PANEL_MATURITIES) -> Dict[int, int]:
    """各期限的起始季度：1–10年约在样本27%处，15年约56%，30年约76%"""
    starts = {}
    for n in maturities:
        if n <= 40:
            frac = 0.27
        elif n <= 60:
            frac = 0.56
        else:
            frac = 0.76
        starts[int(n)] = int(round(frac * T))
    return starts


def quarter_labels(T: int, start: str = "1960Q1") -> List[str]:
    return [str(q) for q in pd.period_range(start=start, periods=T, freq="Q")]


def simulate_panel(p: PhysicalParams, T: int, seed: int,
                   schedule: Optional[Dict[int, int]] = None,
                   maturities: Sequence[int] = PANEL_MATURITIES,
                   x0=None, seasonal_init: Tuple[float, float, float] = (0.0, 0.0, 0.0),
                   start: str = "1960Q1") -> PanelData:
    """
    按物理动态与观测方程正向模拟合成季度面板

    Args:
        schedule: 期限 → 起始季度索引；缺省为 default_schedule
        seasonal_init: (S_0, S_{−1}, S_{−2})

    Returns:
        PanelData；truth 中保存真实状态 x (T×2)、季节项 S (S_0..S_T) 与波动率
    """
    if T < 1:
        raise ValidationError("季度数必须为正")
    validate_params(p)
    maturities = tuple(sorted(int(n) for n in maturities))
    schedule = default_schedule(T, maturities) if schedule is None else dict(schedule)
    unknown = set(schedule) - set(maturities)
    if unknown:
        raise ValidationError(f"起始计划包含未模拟的期限: {sorted(unknown)}")

    x_star = equilibrium_state(p).as_array()
    x = np.empty((T, 2))
    x[0] = x_star if x0 is None else np.asarray(x0, dtype=float)

    gen = block_generator(seed, 0)
    shocks = inverse_cdf_normals(gen, (T, 4 + len(maturities)))
    for t in range(T - 1):
        x[t + 1] = step_p(p, x[t], shocks[t, :2])

    v_star = np.maximum(volatility_array(p.alpha, p.beta, x_star), 0.0)
    vf = np.maximum(volatility_array(p.alpha, p.beta, x), 0.0)
    # 滞后波动率 V_{t−1}，样本之前取均衡值
    v_lag1 = np.vstack([v_star, vf[:-1]])
    v_lag2 = np.vstack([v_star, v_lag1[:-1]])

    # seasonal[k] = S_{k−2}，k = 0..T+2
    seasonal = np.zeros(T + 3)
    seasonal[2], seasonal[1], seasonal[0] = seasonal_init
    for t in range(T):
        seasonal[t + 3] = (-seasonal[t + 2] - seasonal[t + 1] - seasonal[t]
                           + p.omega_s * math.sqrt(v_lag1[t, 1]) * shocks[t, 2])
    S = seasonal[2:]

    x_prev = np.vstack([x_star, x[:-1]])
    inflation = x_prev[:, 1] + S[:T] + p.omega_pi * np.sqrt(v_lag2[:, 1]) * shocks[:, 3]
    rates = short_rate(x)

    yields = {}
    if maturities:
        table = riccati_p(p, max(maturities))
        d, loadings = log_price_loadings(table, maturities)
        noise_scale = p.nu0 + p.nu1 * np.sqrt(v_lag1[:, 0]) + p.nu2 * np.sqrt(v_lag1[:, 1])
        for j, n in enumerate(maturities):
            series = d[j] + x @ loadings[j] + noise_scale * shocks[:, 4 + j]
            series[:max(schedule.get(n, 0), 0)] = np.nan
            yields[n] = series

    logger.info(f"生成合成面板: T={T}, seed={seed}, 期限={list(maturities)}")
    return PanelData(
        quarters=quarter_labels(T, start),
        short_rate=rates,
        inflation=inflation,
        yields=yields,
        truth={"x": x, "S": S.copy(), "volatility": vf},
    )
