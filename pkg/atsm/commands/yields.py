"""
yields 子命令：Riccati解析收益率曲线
"""

import logging

import click
import numpy as np
import pandas as pd

from atsm.commands.common import (
    config_option, emit_csv, load_run_config, out_option, output_path, parse_state
)
from atsm.core.model_core import to_annual_pct, to_risk_neutral
from atsm.core.riccati import riccati_p, riccati_q, yield_curve

logger = logging.getLogger(__name__)


@click.command("yields")
@config_option
@click.option("--state", default=None, help="状态 x1,x2 (年化百分比)，缺省为均衡状态")
@click.option("--max-n", type=int, default=None, help="最长期限 (季度)，缺省取配置")
@click.option("--via-q", is_flag=True, help="先映射为风险中性参数再递推")
@out_option
def yields_command(config_path, state, max_n, via_q, out_path):
    """输出期限 1..N 的解析收益率与价格系数"""
    cfg, params = load_run_config(config_path)
    out_path = output_path(out_path, cfg)
    N = cfg.riccati.max_maturity if max_n is None else max_n
    x = parse_state(state, params)

    table = riccati_q(to_risk_neutral(params), N=N) if via_q else riccati_p(params, N)
    maturities = np.arange(1, N + 1)
    curve = to_annual_pct(yield_curve(table, x, maturities))
    frame = pd.DataFrame({
        "maturity_q": maturities,
        "yield_pct": curve,
        "A": table.A[1:],
        "B1": table.B[1:, 0],
        "B2": table.B[1:, 1],
    })
    logger.info(f"解析收益率: x=({x.x1}, {x.x2}), N={N}")
    emit_csv(frame, out_path)
