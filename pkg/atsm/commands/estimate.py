"""
estimate 子命令：两步极大似然估计中的一步
"""

import json
import logging
from pathlib import Path

import click
import pandas as pd

from atsm.commands.common import (
    config_option, declared_maturities, emit_csv, estimation_options, load_run_config, out_option,
    output_path
)
from atsm.core.config import ModelSection
from atsm.core.estimation import estimate_stage1, estimate_stage2
from atsm.core.panel_store import load_panel
from atsm.models.errors import ValidationError

logger = logging.getLogger(__name__)


def _flatten(prefix, value, rows):
    if isinstance(value, list):
        for i, item in enumerate(value):
            _flatten(f"{prefix}[{i}]", item, rows)
    else:
        rows.append({"name": prefix, "value": value})


def result_frame(result) -> pd.DataFrame:
    rows = []
    for key, value in result.params.to_dict().items():
        if key != "kind":
            _flatten(key, value, rows)
    rows.append({"name": "loglik", "value": result.loglik})
    rows.append({"name": "converged", "value": result.converged})
    rows.append({"name": "penalty_weight", "value": result.penalty_weight})
    if result.feller is not None:
        rows.append({"name": "feller_overall", "value": result.feller.overall})
    return pd.DataFrame(rows, columns=["name", "value"])


@click.command("estimate")
@config_option
@click.option("--panel", "panel_path", type=click.Path(dir_okay=False), default=None,
              help="面板CSV，缺省取配置 io.panel")
@click.option("--stage", type=click.IntRange(1, 2), required=True)
@click.option("--save-config", type=click.Path(dir_okay=False), default=None,
              help="将估计参数写入新的配置文件 (可作为下一步的 --config)")
@click.option("--progress", is_flag=True)
@out_option
def estimate_command(config_path, panel_path, stage, save_config, progress, out_path):
    """
    第一步以配置中的参数为起点；第二步把配置中的参数视为第一步结果，
    只估计 λ 与 ν
    """
    cfg, params = load_run_config(config_path)
    out_path = output_path(out_path, cfg)
    panel_path = panel_path or cfg.io.panel
    if not panel_path:
        raise ValidationError("未指定面板文件 (--panel 或 io.panel)")
    data = load_panel(panel_path, declared_maturities(cfg))
    options = estimation_options(cfg, show_progress=progress)

    if stage == 1:
        result = estimate_stage1(data, params, options)
    else:
        result = estimate_stage2(data, params, None, options)

    if save_config:
        fitted = cfg.model_copy(update={"model": ModelSection.from_params(result.params)})
        Path(save_config).write_text(
            json.dumps(fitted.model_dump(mode="json", by_alias=True, exclude_none=True),
                       indent=2, ensure_ascii=False),
            encoding="utf-8",
        )
        logger.info(f"已写出估计后的配置 {save_config}")

    emit_csv(result_frame(result), out_path)
