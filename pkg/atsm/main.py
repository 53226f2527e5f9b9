"""
ATSM命令行主入口
"""

import logging
import sys

import click

from atsm import __version__
from atsm.commands.check_feller import check_feller_command
from atsm.commands.estimate import estimate_command
from atsm.commands.gen_panel import gen_panel_command
from atsm.commands.simulate import simulate_command
from atsm.commands.yields import yields_command
from atsm.models.errors import AtsmError, ValidationError

logger = logging.getLogger("atsm")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_VALIDATION = 2


def setup_logging(verbose: bool = False) -> None:
    """日志统一写到标准错误，标准输出只留给CSV"""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )


class AtsmGroup(click.Group):
    """将工具包异常映射为退出码：校验错误为2，其他为1"""

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except ValidationError as exc:
            logger.error(f"校验失败: {exc}")
            click.echo(f"错误: {exc}", err=True)
            ctx.exit(EXIT_VALIDATION)
        except AtsmError as exc:
            logger.error(f"运行失败: {exc}")
            click.echo(f"错误: {exc}", err=True)
            ctx.exit(EXIT_FAILURE)


@click.group(cls=AtsmGroup)
@click.version_option(__version__, prog_name="atsm")
@click.option("-v", "--verbose", is_flag=True, help="输出调试日志")
def cli(verbose):
    """二因子离散时间仿射期限结构模型工具"""
    setup_logging(verbose)


# 子命令注册
cli.add_command(check_feller_command)
cli.add_command(yields_command)
cli.add_command(simulate_command)
cli.add_command(estimate_command)
cli.add_command(gen_panel_command)


def main() -> None:
    cli(prog_name="atsm")


if __name__ == "__main__":
    main()
