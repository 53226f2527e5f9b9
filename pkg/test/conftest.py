"""
共享测试夹具：表格参数加载、小型参数工厂与 slow 标记
"""

import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT))

from atsm.core.config import load_config  # noqa: E402
from atsm.models.data_models import ModelKind, PhysicalParams  # noqa: E402

DATA_DIR = ROOT / "data"
FIXTURE_NAMES = [f"table{t}_{k}" for t in (1, 2) for k in ("prop", "dep", "indep")]


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="运行耗时较长的测试 (百万路径模拟、T=2000估计)")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: 耗时较长，需 --runslow 才运行")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="需要 --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


def fixture_path(name: str) -> Path:
    return DATA_DIR / f"{name}.json"


def load_fixture(name: str) -> PhysicalParams:
    return load_config(fixture_path(name)).params()


def zero_vol_params(kind: ModelKind = ModelKind.PROPORTIONAL, lam=(0.0, 0.0)) -> PhysicalParams:
    """α = β = 0：短期利率确定"""
    return PhysicalParams.create(
        i_plus_a_hat=[[0.93, 0.05], [0.01, 0.94]],
        equilibrium=[2.4, 3.0],
        alpha=[0.0, 0.0],
        beta=[[0.0, 0.0], [0.0, 0.0]],
        sigma=[[1.0, 0.0], [-0.3, 0.6]],
        lam=lam,
        kind=kind,
    )


def random_params(rng: np.random.Generator) -> PhysicalParams:
    """满足识别约束的随机参数 (用于映射与递推的性质测试)"""
    kind = ModelKind(rng.choice([k.value for k in ModelKind]))
    diag = rng.uniform(0.85, 0.98, size=2)
    off = rng.uniform(-0.01, 0.01, size=2)
    i_plus_a = [[diag[0], off[0]], [off[1], diag[1]]]
    eq = rng.uniform(1.0, 4.0, size=2)
    lam = rng.uniform(-0.3, 0.3, size=2)
    if kind == ModelKind.INDEPENDENT:
        beta = [[rng.uniform(0.05, 0.2), rng.uniform(-0.05, 0.05)],
                [rng.uniform(-0.05, 0.05), rng.uniform(0.05, 0.2)]]
        alpha = rng.uniform(-0.3, 0.1, size=2)
        sigma = [[1.0, rng.uniform(-0.5, 0.5)], [rng.uniform(-0.5, 0.5), 1.0]]
    else:
        row = rng.uniform(0.05, 0.25, size=2)
        beta = [row, row]
        a1 = rng.uniform(-0.4, 0.0)
        if kind == ModelKind.PROPORTIONAL:
            alpha = [a1, a1]
            sigma = [[1.0, 0.0], [rng.uniform(-0.5, 0.5), rng.uniform(0.3, 1.0)]]
        else:
            alpha = [a1, a1 + rng.uniform(0.01, 0.3)]
            sigma = [[1.0, rng.uniform(-0.5, 0.5)], [rng.uniform(-0.5, 0.5), rng.uniform(0.3, 1.0)]]
    return PhysicalParams.create(i_plus_a, eq, alpha, beta, sigma, lam, kind)


@pytest.fixture(params=FIXTURE_NAMES)
def table_params(request) -> PhysicalParams:
    return load_fixture(request.param)


@pytest.fixture
def table1_prop() -> PhysicalParams:
    return load_fixture("table1_prop")


@pytest.fixture
def table1_dep() -> PhysicalParams:
    return load_fixture("table1_dep")


@pytest.fixture
def table1_indep() -> PhysicalParams:
    return load_fixture("table1_indep")
