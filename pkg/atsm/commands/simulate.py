"""
simulate 子命令：蒙特卡洛收益率与解析收益率之差，或状态轨迹诊断
"""

import logging

import click
import numpy as np
import pandas as pd

from atsm.commands.common import (
    config_option, emit_csv, load_run_config, out_option, output_path, parse_int_list,
    parse_state
)
from atsm.core.model_core import volatility_array
from atsm.core.montecarlo import CSV_COLUMNS, simulate_paths, yield_diff_curve
from atsm.models.data_models import Dynamics, Measure

logger = logging.getLogger(__name__)


def _trajectory_frame(params, paths, n_paths) -> pd.DataFrame:
    steps = paths.shape[0]
    v = volatility_array(params.alpha, params.beta, paths)
    return pd.DataFrame({
        "step": np.repeat(np.arange(steps), n_paths),
        "path": np.tile(np.arange(n_paths), steps),
        "x1": paths[:, :, 0].ravel(),
        "x2": paths[:, :, 1].ravel(),
        "v1": v[:, :, 0].ravel(),
        "v2": v[:, :, 1].ravel(),
    })


@click.command("simulate")
@config_option
@click.option("--state", default=None, help="初始状态 x1,x2，缺省为均衡状态")
@click.option("--paths", type=int, default=None, help="路径数，缺省取配置")
@click.option("--seed", type=int, default=None, help="随机种子，缺省取配置")
@click.option("--dynamics", type=click.Choice([d.value for d in Dynamics]), default=None)
@click.option("--measure", type=click.Choice(["P", "Q"]), default=None)
@click.option("--horizon", type=int, default=None)
@click.option("--maturities", default=None, help="期限列表，如 1-120 或 4,8,40")
@click.option("--threads", type=int, default=None, help="线程数，优先于 ATSM_THREADS")
@click.option("--ci-level", type=float, default=None)
@click.option("--block-size", type=int, default=None)
@click.option("--trajectory", type=int, default=None,
              help="改为输出给定步数的状态轨迹 (P测度诊断)")
@click.option("--progress", is_flag=True, help="显示进度条")
@out_option
def simulate_command(config_path, state, paths, seed, dynamics, measure, horizon, maturities,
                     threads, ci_level, block_size, trajectory, progress, out_path):
    """蒙特卡洛定价并与解析收益率比较"""
    cfg, params = load_run_config(config_path, paths=paths, seed=seed, dynamics=dynamics,
                                  measure=measure, horizon=horizon, threads=threads,
                                  ci_level=ci_level, block_size=block_size)
    sim = cfg.sim.to_sim_config(show_progress=progress)
    out_path = output_path(out_path, cfg)
    x0 = parse_state(state, params)

    if trajectory is not None:
        traj_measure = Measure.P if measure is None else Measure(measure)
        traj_dynamics = Dynamics.CUTOFF if dynamics is None else Dynamics(dynamics)
        n_paths = paths or 1
        states, floor_frac = simulate_paths(params, x0, trajectory, sim.seed, n_paths,
                                            traj_measure, traj_dynamics)
        logger.info(f"轨迹截断频率: v1={floor_frac[0]:.4%}, v2={floor_frac[1]:.4%}")
        emit_csv(_trajectory_frame(params, states, n_paths), out_path)
        return

    if maturities is None:
        mats = list(range(1, min(sim.horizon, cfg.riccati.max_maturity) + 1))
    else:
        mats = parse_int_list(maturities)
    records = yield_diff_curve(params, x0, mats, sim)
    emit_csv(pd.DataFrame(records, columns=CSV_COLUMNS), out_path)
