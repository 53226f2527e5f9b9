"""
子命令共用的选项、配置转换与CSV输出
"""

import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import click
import pandas as pd

from atsm import __version__
from atsm.core.config import RunConfig, config_hash, load_config
from atsm.core.estimation import EstimationOptions
from atsm.core.model_core import equilibrium_state
from atsm.core.statespace import PANEL_MATURITIES, FilterOptions
from atsm.models.data_models import PhysicalParams, StateVec
from atsm.models.errors import ValidationError

logger = logging.getLogger(__name__)

config_option = click.option(
    "--config", "config_path", required=True,
    type=click.Path(exists=True, dir_okay=False), help="JSON配置文件",
)
out_option = click.option(
    "--out", "out_path", type=click.Path(dir_okay=False), default=None,
    help="输出CSV路径，缺省取配置 io.out，再缺省写到标准输出",
)


def load_run_config(path: str, **sim_overrides) -> Tuple[RunConfig, PhysicalParams]:
    """
    加载配置，合并命令行对 sim 节的覆盖，并记录运行标识

    配置哈希取自覆盖后的有效配置，相同的 (哈希, 种子, 版本) 给出相同输出。
    """
    cfg = load_config(path).with_sim_overrides(**sim_overrides)
    logger.info(f"运行标识: config_hash={config_hash(cfg)}, seed={cfg.sim.seed}, version={__version__}")
    return cfg, cfg.params()


def output_path(out_path: Optional[str], cfg: RunConfig) -> Optional[str]:
    """--out 优先，其次配置 io.out"""
    return out_path or cfg.io.out


def declared_maturities(cfg: RunConfig) -> List[int]:
    """面板收益率期限：配置 io.maturities，缺省为默认期限集合"""
    if cfg.io.maturities is None:
        return list(PANEL_MATURITIES)
    return sorted(cfg.io.maturities)


def parse_state(text: Optional[str], p: PhysicalParams) -> StateVec:
    """解析 "x1,x2"，缺省为均衡状态"""
    if text is None:
        return equilibrium_state(p)
    parts = [s.strip() for s in text.split(",")]
    try:
        x1, x2 = (float(s) for s in parts)
    except ValueError:
        raise ValidationError(f"--state 必须形如 x1,x2 (当前 {text!r})")
    return StateVec(x1, x2)


def parse_int_list(text: str) -> List[int]:
    """解析 "1-120" 或 "4,8,40" 及其组合"""
    values = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        try:
            if "-" in token:
                lo, hi = (int(s) for s in token.split("-", 1))
                values.extend(range(lo, hi + 1))
            else:
                values.append(int(token))
        except ValueError:
            raise ValidationError(f"无法解析的整数列表 {text!r}")
    if not values:
        raise ValidationError("整数列表为空")
    return values


def filter_options(cfg: RunConfig) -> FilterOptions:
    return FilterOptions(**cfg.filter.model_dump())


def estimation_options(cfg: RunConfig, show_progress: bool = False) -> EstimationOptions:
    values = cfg.estimation.model_dump()
    values["fixed"] = tuple(values["fixed"])
    return EstimationOptions(filter=filter_options(cfg), show_progress=show_progress, **values)


def emit_csv(frame: pd.DataFrame, out_path: Optional[str]) -> None:
    """CSV只写到 --out 或标准输出，日志走标准错误"""
    if out_path:
        frame.to_csv(out_path, index=False)
        logger.info(f"已写出 {out_path} ({len(frame)} 行)")
    else:
        frame.to_csv(sys.stdout, index=False)


def emit_json(document: Dict[str, Any], out_path: Optional[str]) -> None:
    """JSON写到 --out 或标准输出"""
    text = json.dumps(document, indent=2, ensure_ascii=False)
    if out_path:
        Path(out_path).write_text(text + "\n", encoding="utf-8")
        logger.info(f"已写出 {out_path}")
    else:
        click.echo(text)
