"""
check-feller 子命令：显式Feller条件检查
"""

import logging

import click
import pandas as pd

from atsm.commands.common import (
    config_option, emit_csv, emit_json, load_run_config, out_option, output_path
)
from atsm.core.feller import (
    DEFAULT_TOL_EQ, DEFAULT_TOL_INEQ, check_feller, check_feller_on_grid, summarize
)
from atsm.models.data_models import Measure, ModelKind

logger = logging.getLogger(__name__)

COLUMNS = ["id", "kind", "lhs", "rhs", "margin", "pass"]


def _status(ok: bool) -> str:
    return "PASS" if ok else "FAIL"


@click.command("check-feller")
@config_option
@click.option("--measure", type=click.Choice(["P", "Q"]), default="P", show_default=True)
@click.option("--tol-eq", type=float, default=DEFAULT_TOL_EQ, show_default=True,
              help="等式条件容差 (估计表的三位有效数字约需5e-3)")
@click.option("--tol-ineq", type=float, default=DEFAULT_TOL_INEQ, show_default=True)
@click.option("--grid", is_flag=True, help="独立模型另在有限网格上直接检查边界条件")
@click.option("--json", "as_json", is_flag=True, help="输出JSON报告而不是CSV")
@out_option
def check_feller_command(config_path, measure, tol_eq, tol_ineq, grid, as_json, out_path):
    """检查参数是否满足Feller条件"""
    cfg, params = load_run_config(config_path)
    out_path = output_path(out_path, cfg)
    report = check_feller(params, Measure(measure), tol_eq=tol_eq, tol_ineq=tol_ineq)
    for line in summarize(report):
        logger.info(line)

    grid_ok = None
    if grid and params.kind == ModelKind.INDEPENDENT:
        grid_ok = check_feller_on_grid(params, Measure(measure), tol_eq=tol_eq)

    if as_json:
        document = report.to_dict()
        if grid_ok is not None:
            document["grid"] = grid_ok
        emit_json(document, out_path)
        return

    rows = [{"id": c.id, "kind": c.kind.value, "lhs": c.lhs, "rhs": c.rhs,
             "margin": c.margin, "pass": _status(c.passed)} for c in report.conditions]
    if grid_ok is not None:
        rows.append({"id": "grid", "kind": "", "pass": _status(grid_ok)})
    rows.append({"id": "overall", "kind": report.measure.value, "pass": _status(report.overall)})
    emit_csv(pd.DataFrame(rows, columns=COLUMNS), out_path)
