"""
蒙特卡洛债券定价

按路径块并行模拟状态路径，累积贴现因子 exp(−Σ r_k)，
给出价格均值、标准误、置信区间及对应的收益率区间，
并与Riccati解析收益率比较 (单位：基点)。
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np
from scipy.stats import norm
from tqdm import tqdm

from atsm.core.config import resolve_threads
from atsm.core.model_core import (
    as_state_array, short_rate, to_annual_pct, to_risk_neutral, vol_floor, volatility_array
)
from atsm.core.random_streams import block_normals, block_ranges
from atsm.core.riccati import analytic_yield, riccati_p
from atsm.models.data_models import (
    Dynamics, MCEstimate, MCResult, Measure, PhysicalParams, RiskNeutralParams,
    SimConfig, StateVec
)
from atsm.models.errors import MaturityRangeError, ValidationError
from atsm.models.validators import validate_sim_config

logger = logging.getLogger(__name__)

BP_PER_PCT = 100.0


def _wrap(x_in, x_out):
    if isinstance(x_in, StateVec):
        return StateVec.from_array(x_out)
    return x_out


def _noise(sigma, v_floor, eps):
    return (np.sqrt(v_floor) * eps) @ sigma.T


def step_q_cutoff(p: PhysicalParams, x_t, eps):
    """X' = (I+â)X + b̂ − Σ(V∨0)λ + Σ√(V∨0)ε"""
    x = as_state_array(x_t)
    vf = vol_floor(volatility_array(p.alpha, p.beta, x))
    out = x @ (np.eye(2) + p.a_hat).T + p.b_hat - (vf * p.lam) @ p.sigma.T + _noise(p.sigma, vf, eps)
    return _wrap(x_t, out)


def step_q_raw(rn: RiskNeutralParams, p: PhysicalParams, x_t, eps):
    """X' = (I+a)X + b + Σ√(V∨0)ε"""
    x = as_state_array(x_t)
    vf = vol_floor(volatility_array(p.alpha, p.beta, x))
    out = x @ (np.eye(2) + rn.a).T + rn.b + _noise(p.sigma, vf, eps)
    return _wrap(x_t, out)


def step_p(p: PhysicalParams, x_t, eps):
    """X' = (I+â)X + b̂ + Σ√(V∨0)ε"""
    x = as_state_array(x_t)
    vf = vol_floor(volatility_array(p.alpha, p.beta, x))
    out = x @ (np.eye(2) + p.a_hat).T + p.b_hat + _noise(p.sigma, vf, eps)
    return _wrap(x_t, out)


def step_p_newprob(rn: RiskNeutralParams, x_t, eps):
    """保留风险中性动态时的物理动态：X' = (I+a)X + b + Σ(V∨0)λ + Σ√(V∨0)ε"""
    x = as_state_array(x_t)
    vf = vol_floor(volatility_array(rn.alpha, rn.beta, x))
    out = x @ (np.eye(2) + rn.a).T + rn.b + (vf * rn.lam) @ rn.sigma.T + _noise(rn.sigma, vf, eps)
    return _wrap(x_t, out)


@dataclass(frozen=True)
class _Kernel:
    """一步转移 X' = X Mᵀ + c + (s·(V∨0)⊙λ + √(V∨0)⊙ε) Σᵀ 的预计算矩阵"""
    transition_t: np.ndarray
    intercept: np.ndarray
    alpha: np.ndarray
    beta_t: np.ndarray
    sigma_t: np.ndarray
    lam_term: np.ndarray

    def step(self, x: np.ndarray, eps: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        v = self.alpha + x @ self.beta_t
        vf = np.maximum(v, 0.0)
        shock = vf * self.lam_term + np.sqrt(vf) * eps
        return x @ self.transition_t + self.intercept + shock @ self.sigma_t, v


def _kernel(p: PhysicalParams, measure: Measure, dynamics: Dynamics) -> _Kernel:
    rn = to_risk_neutral(p)
    zero = np.zeros(2)
    if measure == Measure.Q and dynamics == Dynamics.CUTOFF:
        a, b, lam_term = p.a_hat, p.b_hat, -p.lam
    elif measure == Measure.Q and dynamics == Dynamics.RAW:
        a, b, lam_term = rn.a, rn.b, zero
    elif measure == Measure.P and dynamics == Dynamics.NEWPROB:
        a, b, lam_term = rn.a, rn.b, p.lam
    elif measure == Measure.P and dynamics == Dynamics.CUTOFF:
        a, b, lam_term = p.a_hat, p.b_hat, zero
    else:
        raise ValidationError(f"不支持的组合: measure={measure.value}, dynamics={dynamics.value}")
    return _Kernel(
        transition_t=(np.eye(2) + a).T,
        intercept=np.array(b, dtype=float),
        alpha=p.alpha,
        beta_t=p.beta.T,
        sigma_t=p.sigma.T,
        lam_term=np.array(lam_term, dtype=float),
    )


def mean_confidence_interval(samples, ci_level: float = 0.99) -> Tuple[float, float, float, float]:
    """样本均值、均值标准误与正态分位数置信区间"""
    samples = np.asarray(samples, dtype=float)
    m = samples.shape[0]
    if m < 2:
        raise ValidationError("置信区间至少需要2个样本")
    mean = float(samples.mean())
    se = float(samples.std(ddof=1) / math.sqrt(m))
    z = float(norm.ppf(0.5 + ci_level / 2.0))
    return mean, se, mean - z * se, mean + z * se


@dataclass
class _BlockStats:
    count: int
    mean: np.ndarray
    m2: np.ndarray
    floor_counts: np.ndarray
    steps: int


def _simulate_block(kernel: _Kernel, x0: np.ndarray, record_at: np.ndarray, steps: int,
                    seed: int, block_index: int, n_paths: int) -> _BlockStats:
    eps = block_normals(seed, block_index, steps, n_paths)
    x = np.tile(x0, (n_paths, 1))
    log_disc = np.zeros(n_paths)
    recorded = np.empty((record_at.size, n_paths))
    floor_counts = np.zeros(2, dtype=np.int64)

    slot = 0
    for k in range(steps):
        log_disc -= short_rate(x)
        x, v = kernel.step(x, eps[k])
        floor_counts += np.count_nonzero(v < 0.0, axis=0)
        while slot < record_at.size and record_at[slot] == k + 1:
            recorded[slot] = np.exp(log_disc)
            slot += 1

    # 以首条路径为参照平移后再求均值，确定性期限的均值保持精确
    ref = recorded[:, :1]
    centered = recorded - ref
    shift = centered.mean(axis=1)
    mean = ref[:, 0] + shift
    m2 = ((centered - shift[:, None]) ** 2).sum(axis=1)
    return _BlockStats(n_paths, mean, m2, floor_counts, steps)


def _merge(blocks: Sequence[_BlockStats]) -> _BlockStats:
    """按块索引顺序合并 (count, mean, M2)"""
    total = blocks[0]
    count, mean, m2 = total.count, total.mean.copy(), total.m2.copy()
    floors = total.floor_counts.copy()
    for blk in blocks[1:]:
        new_count = count + blk.count
        delta = blk.mean - mean
        mean = mean + delta * (blk.count / new_count)
        m2 = m2 + blk.m2 + delta ** 2 * (count * blk.count / new_count)
        count = new_count
        floors += blk.floor_counts
    return _BlockStats(count, mean, m2, floors, total.steps)


def _run_blocks(kernel: _Kernel, x0: np.ndarray, record_at: np.ndarray, steps: int,
                cfg: SimConfig) -> _BlockStats:
    ranges = block_ranges(cfg.paths, cfg.block_size)
    threads = resolve_threads(cfg.threads)
    logger.info(f"蒙特卡洛开始: paths={cfg.paths}, steps={steps}, blocks={len(ranges)}, "
                f"threads={threads}, dynamics={cfg.dynamics.value}, measure={cfg.measure.value}")

    def run(item):
        index, (start, stop) = item
        return _simulate_block(kernel, x0, record_at, steps, cfg.seed, index, stop - start)

    with ThreadPoolExecutor(max_workers=threads) as pool:
        results = list(tqdm(pool.map(run, enumerate(ranges)), total=len(ranges),
                            desc="MC路径块", disable=not cfg.show_progress))
    return _merge(results)


def _validated(cfg: SimConfig, maturities: Sequence[int]) -> List[int]:
    errors = validate_sim_config(cfg)
    if errors:
        raise ValidationError("模拟配置无效", errors)
    if cfg.paths < 2:
        raise ValidationError("置信区间至少需要2条路径")
    mats = sorted({int(n) for n in maturities})
    if not mats or mats[0] < 1:
        raise MaturityRangeError("期限必须是正整数季度")
    if mats[-1] > cfg.horizon:
        raise MaturityRangeError(f"期限 {mats[-1]} 超出模拟区间 {cfg.horizon}")
    return mats


def price_bond_mc(p: PhysicalParams, x0, maturities: Sequence[int], cfg: SimConfig) -> MCResult:
    """
    蒙特卡洛估计零息债券价格 E_Q[exp(−Σ_{k<n} r_k)]

    所有期限共用同一批路径。
    """
    mats = _validated(cfg, maturities)
    steps = mats[-1]
    x0 = as_state_array(x0)
    kernel = _kernel(p, cfg.measure, cfg.dynamics)

    stats = _run_blocks(kernel, x0, np.array(mats), steps, cfg)
    table = riccati_p(p, steps)
    z = float(norm.ppf(0.5 + cfg.ci_level / 2.0))

    estimates = []
    for j, n in enumerate(mats):
        mean = float(stats.mean[j])
        se = math.sqrt(float(stats.m2[j]) / (stats.count - 1) / stats.count)
        lo, hi = mean - z * se, mean + z * se
        y_point = float(to_annual_pct(-math.log(mean) / n))
        y_lo = float(to_annual_pct(-math.log(hi) / n))
        y_hi = float(to_annual_pct(-math.log(lo) / n)) if lo > 0 else math.inf
        y_analytic = float(to_annual_pct(analytic_yield(table, x0, n)))
        estimates.append(MCEstimate(
            maturity=n,
            price_mean=mean,
            price_se=se,
            price_ci=(lo, hi),
            yield_point=y_point,
            yield_ci=(y_lo, y_hi),
            analytic_yield=y_analytic,
            diff_bp=(y_point - y_analytic) * BP_PER_PCT,
            diff_ci_bp=((y_lo - y_analytic) * BP_PER_PCT, (y_hi - y_analytic) * BP_PER_PCT),
        ))

    denom = float(stats.count * stats.steps)
    floor_frac = (float(stats.floor_counts[0]) / denom, float(stats.floor_counts[1]) / denom)
    logger.info(f"蒙特卡洛完成: 截断频率 v1={floor_frac[0]:.4%}, v2={floor_frac[1]:.4%}")
    return MCResult(tuple(estimates), floor_frac, stats.count, stats.steps, cfg.seed,
                    cfg.dynamics, cfg.measure)


CSV_COLUMNS = ["maturity_q", "analytic_yield_pct", "mc_yield_pct", "diff_bp",
               "ci_lo_bp", "ci_hi_bp", "floor_frac_v1", "floor_frac_v2"]


def yield_diff_curve(p: PhysicalParams, x0, maturities: Sequence[int], cfg: SimConfig) -> List[Dict[str, float]]:
    """模拟收益率与解析收益率之差 (基点) 及其置信区间，每个期限一行"""
    result = price_bond_mc(p, x0, maturities, cfg)
    records = []
    for est in result:
        records.append({
            "maturity_q": est.maturity,
            "analytic_yield_pct": est.analytic_yield,
            "mc_yield_pct": est.yield_point,
            "diff_bp": est.diff_bp,
            "ci_lo_bp": est.diff_ci_bp[0],
            "ci_hi_bp": est.diff_ci_bp[1],
            "floor_frac_v1": result.floor_frac[0],
            "floor_frac_v2": result.floor_frac[1],
        })
    return records


def simulate_paths(p: PhysicalParams, x0, steps: int, seed: int, n_paths: int = 1,
                   measure: Measure = Measure.P,
                   dynamics: Dynamics = Dynamics.CUTOFF) -> Tuple[np.ndarray, Tuple[float, float]]:
    """
    模拟状态轨迹，用于轨迹诊断

    Returns:
        (steps+1, n_paths, 2) 的状态数组，以及各波动率因子为负的频率
    """
    kernel = _kernel(p, Measure(measure), Dynamics(dynamics))
    eps = block_normals(seed, 0, steps, n_paths)
    out = np.empty((steps + 1, n_paths, 2))
    out[0] = as_state_array(x0)
    negatives = np.zeros(2, dtype=np.int64)
    for k in range(steps):
        out[k + 1], v = kernel.step(out[k], eps[k])
        negatives += np.count_nonzero(v < 0.0, axis=0)
    denom = float(max(steps * n_paths, 1))
    return out, (negatives[0] / denom, negatives[1] / denom)
