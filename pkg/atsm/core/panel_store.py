"""
季度面板CSV的读写

磁盘上的利率均为年化百分比，读入后短期利率与收益率换算为每季度小数，
通胀保持年化百分比。空单元格表示缺失。
"""

import logging
import re
from pathlib import Path
from typing import Collection, Dict, Optional, Union

import numpy as np
import pandas as pd

from atsm.core.model_core import from_annual_pct, to_annual_pct
from atsm.models.data_models import PanelData
from atsm.models.errors import PanelFormatError
from atsm.models.validators import unobserved_quarters

logger = logging.getLogger(__name__)

DATE_COLUMN = "date"
BASE_COLUMNS = ("short_rate", "inflation")
_YIELD_COLUMN = re.compile(r"^y(\d+)$")

# CSV第1行为表头，数据第 i 行 (从0计) 位于文件第 i+2 行
_HEADER_LINES = 1


def _row_number(index: int) -> int:
    return index + _HEADER_LINES + 1


def _parse_column(frame: pd.DataFrame, column: str) -> np.ndarray:
    raw = frame[column].str.strip()
    values = pd.to_numeric(raw, errors="coerce")
    bad = raw.ne("") & values.isna()
    if bad.any():
        index = int(np.flatnonzero(bad.to_numpy())[0])
        raise PanelFormatError(f"列 {column} 的值 {raw.iloc[index]!r} 无法解析为数字",
                               row=_row_number(index))
    return values.to_numpy(dtype=float)


def _parse_dates(frame: pd.DataFrame):
    periods = []
    for index, text in enumerate(frame[DATE_COLUMN].str.strip()):
        try:
            periods.append(pd.Period(text, freq="Q"))
        except (ValueError, TypeError):
            raise PanelFormatError(f"无法解析的季度 {text!r}", row=_row_number(index))
        if len(periods) > 1 and periods[-1] <= periods[-2]:
            raise PanelFormatError(f"日期不是严格递增的 ({periods[-2]} → {periods[-1]})",
                                   row=_row_number(index))
    return periods


def load_panel(path: Union[str, Path], maturities: Optional[Collection[int]] = None) -> PanelData:
    """
    读取面板CSV

    Args:
        path: CSV路径
        maturities: 允许的期限集合，None 表示不限制

    Returns:
        PanelData；没有任何观测的收益率列被丢弃

    Raises:
        PanelFormatError: 格式错误、期限不在声明集合中，或某季度没有任何观测 (带行号)
    """
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except FileNotFoundError:
        raise PanelFormatError(f"面板文件不存在: {path}")
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise PanelFormatError(f"CSV解析失败: {exc}")

    columns = [c.strip() for c in frame.columns]
    frame.columns = columns
    if DATE_COLUMN not in columns:
        raise PanelFormatError("缺少 date 列")

    yield_columns: Dict[int, str] = {}
    for column in columns:
        if column == DATE_COLUMN or column in BASE_COLUMNS:
            continue
        match = _YIELD_COLUMN.match(column)
        if match is None or int(match.group(1)) < 1:
            raise PanelFormatError(f"未知列 {column!r}")
        n = int(match.group(1))
        if maturities is not None and n not in maturities:
            raise PanelFormatError(f"期限 {n} 不在声明的期限集合中")
        yield_columns[n] = column

    periods = _parse_dates(frame)
    T = len(periods)

    def series(column: str) -> np.ndarray:
        return _parse_column(frame, column) if column in columns else np.full(T, np.nan)

    yields = {}
    for n, column in sorted(yield_columns.items()):
        values = series(column)
        if np.isfinite(values).any():
            yields[n] = from_annual_pct(values)

    panel = PanelData(
        quarters=[str(q) for q in periods],
        short_rate=from_annual_pct(series("short_rate")),
        inflation=series("inflation"),
        yields=yields,
    )
    empty = unobserved_quarters(panel)
    if empty:
        raise PanelFormatError(f"季度 {panel.quarters[empty[0]]} 没有任何观测值",
                               row=_row_number(empty[0]))
    logger.info(f"已读取面板 {path}: {T} 个季度, 期限 {panel.maturities}")
    return panel


def panel_frame(panel: PanelData) -> pd.DataFrame:
    """面板的磁盘表示 (年化百分比)"""
    data = {
        DATE_COLUMN: panel.quarters,
        "short_rate": to_annual_pct(panel.short_rate),
        "inflation": panel.inflation,
    }
    for n in panel.maturities:
        data[f"y{n}"] = to_annual_pct(panel.yields[n])
    return pd.DataFrame(data)


def save_panel(panel: PanelData, target) -> None:
    """写出面板CSV；target 可以是路径或文本流"""
    panel_frame(panel).to_csv(target, index=False, na_rep="")
    if isinstance(target, (str, Path)):
        logger.info(f"已写出面板 {target}: {panel.n_quarters} 个季度")
