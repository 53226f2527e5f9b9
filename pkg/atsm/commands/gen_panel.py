"""
gen-panel 子命令：生成合成的非平衡季度面板
"""

import logging
import sys
from typing import Dict

import click

from atsm.commands.common import (
    config_option, declared_maturities, load_run_config, out_option, output_path, parse_int_list
)
from atsm.core.panel_store import save_panel
from atsm.core.statespace import simulate_panel
from atsm.models.errors import ValidationError

logger = logging.getLogger(__name__)


def parse_schedule(text: str) -> Dict[int, int]:
    """解析 "120:52,60:30" 为 {期限: 起始季度}"""
    schedule = {}
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        try:
            n, start = (int(s) for s in token.split(":"))
        except ValueError:
            raise ValidationError(f"无法解析的起始计划项 {token!r}，应为 期限:起始季度")
        schedule[n] = start
    return schedule


@click.command("gen-panel")
@config_option
@click.option("--quarters", type=int, required=True, help="季度数 T")
@click.option("--seed", type=int, default=None, help="随机种子，缺省取配置")
@click.option("--maturities", default=None,
              help="期限列表，缺省取配置 io.maturities 或 4,8,16,28,40,60,120")
@click.option("--schedule", default=None, help="各期限起始季度，如 120:52,60:30")
@click.option("--start", default="1960Q1", show_default=True, help="首个季度")
@out_option
def gen_panel_command(config_path, quarters, seed, maturities, schedule, start, out_path):
    """按模型模拟合成面板并写出CSV"""
    cfg, params = load_run_config(config_path, seed=seed)
    seed = cfg.sim.seed
    out_path = output_path(out_path, cfg)
    mats = declared_maturities(cfg) if maturities is None else parse_int_list(maturities)

    start_schedule = None
    if schedule is not None:
        start_schedule = {n: 0 for n in mats}
        start_schedule.update(parse_schedule(schedule))

    panel = simulate_panel(params, quarters, seed, start_schedule, mats, start=start)
    save_panel(panel, out_path if out_path else sys.stdout)
    counts = ", ".join(f"y{n}={panel.observation_count(n)}" for n in panel.maturities)
    logger.info(f"面板各期限观测数: {counts}")
