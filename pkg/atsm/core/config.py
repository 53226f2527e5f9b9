"""
运行配置：JSON配置文件的模式校验、配置哈希与线程数解析
"""

import hashlib
import json
import logging
import os
import re
from pathlib import Path
from typing import Annotated, Any, Dict, List, Optional

import pydantic
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, model_validator

from atsm.models.data_models import Dynamics, Measure, ModelKind, PhysicalParams, SimConfig
from atsm.models.errors import ConfigError
from atsm.models.validators import validate_physical_params

logger = logging.getLogger(__name__)

THREADS_ENV = "ATSM_THREADS"

Vec2 = Annotated[List[float], Field(min_length=2, max_length=2)]
Mat2 = Annotated[List[Vec2], Field(min_length=2, max_length=2)]


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class ModelSection(_Section):
    """模型参数；漂移可用 (a_hat, b_hat) 或估计表的 (i_plus_a_hat, equilibrium) 给出"""
    kind: ModelKind
    a_hat: Optional[Mat2] = None
    b_hat: Optional[Vec2] = None
    i_plus_a_hat: Optional[Mat2] = None
    equilibrium: Optional[Vec2] = None
    alpha: Vec2
    beta: Mat2
    sigma: Mat2
    lam: Vec2 = Field(alias="lambda")
    omega_pi: float = Field(default=0.0, ge=0.0)
    omega_s: float = Field(default=0.0, ge=0.0)
    nu0: float = Field(default=0.0, ge=0.0)
    nu1: float = Field(default=0.0, ge=0.0)
    nu2: float = Field(default=0.0, ge=0.0)

    @model_validator(mode="after")
    def _one_drift_layout(self):
        direct = self.a_hat is not None and self.b_hat is not None
        table = self.i_plus_a_hat is not None and self.equilibrium is not None
        partial = (self.a_hat is None) != (self.b_hat is None) or \
                  (self.i_plus_a_hat is None) != (self.equilibrium is None)
        if direct == table or partial:
            raise ValueError("必须且只能给出 (a_hat, b_hat) 或 (i_plus_a_hat, equilibrium) 之一")
        return self

    def to_params(self) -> PhysicalParams:
        noise = dict(omega_pi=self.omega_pi, omega_s=self.omega_s,
                     nu0=self.nu0, nu1=self.nu1, nu2=self.nu2)
        if self.i_plus_a_hat is not None:
            return PhysicalParams.create(self.i_plus_a_hat, self.equilibrium, self.alpha,
                                         self.beta, self.sigma, self.lam, self.kind, **noise)
        return PhysicalParams(a_hat=self.a_hat, b_hat=self.b_hat, alpha=self.alpha,
                              beta=self.beta, sigma=self.sigma, lam=self.lam,
                              kind=self.kind, **noise)

    @classmethod
    def from_params(cls, p: PhysicalParams) -> "ModelSection":
        data = p.to_dict()
        return cls.model_validate(data)


class SimSection(_Section):
    paths: int = Field(default=1_000_000, ge=1)
    horizon: int = Field(default=200, ge=1)
    seed: int = Field(default=20070630, ge=0, lt=2 ** 64)
    dynamics: Dynamics = Dynamics.CUTOFF
    measure: Measure = Measure.Q
    ci_level: float = Field(default=0.99, gt=0.0, lt=1.0)
    threads: Optional[int] = Field(default=None, ge=1)
    block_size: int = Field(default=4096, ge=1)

    def to_sim_config(self, **overrides) -> SimConfig:
        values = self.model_dump()
        values.update({k: v for k, v in overrides.items() if v is not None})
        return SimConfig.create(**values)


class RiccatiSection(_Section):
    max_maturity: int = Field(default=120, ge=1)


class FilterSection(_Section):
    seasonal_prior_var: Optional[float] = Field(default=None, ge=0.0)
    short_rate_var: float = Field(default=1e-12, gt=0.0)
    vol_eps: float = Field(default=1e-8, gt=0.0)
    var_floor: float = Field(default=1e-12, gt=0.0)


class EstimationSection(_Section):
    restarts: int = Field(default=3, ge=1)
    max_iter: int = Field(default=4000, ge=1)
    impose_feller: bool = False
    penalty_weight: float = Field(default=1e3, ge=0.0)
    penalty_growth: float = Field(default=10.0, ge=1.0)
    feller_tol_eq: float = Field(default=1e-6, ge=0.0)
    fixed: List[str] = Field(default_factory=list)
    perturbation: float = Field(default=1.0, ge=0.0)
    xatol: float = Field(default=1e-5, gt=0.0)
    fatol: float = Field(default=1e-5, gt=0.0)
    seed: int = Field(default=0, ge=0)
    require_convergence: bool = False


class IoSection(_Section):
    panel: Optional[str] = None
    out: Optional[str] = None
    # 面板允许的收益率期限，None 取默认期限集合
    maturities: Optional[List[Annotated[int, Field(ge=1)]]] = None


class RunConfig(_Section):
    """一次运行的完整配置，未知键一律拒绝"""
    provenance: str = ""
    model: ModelSection
    sim: SimSection = Field(default_factory=SimSection)
    riccati: RiccatiSection = Field(default_factory=RiccatiSection)
    filter: FilterSection = Field(default_factory=FilterSection)
    estimation: EstimationSection = Field(default_factory=EstimationSection)
    io: IoSection = Field(default_factory=IoSection)

    def params(self) -> PhysicalParams:
        return self.model.to_params()

    def canonical_json(self) -> str:
        return json.dumps(self.model_dump(mode="json", by_alias=True),
                          sort_keys=True, separators=(",", ":"), ensure_ascii=False)

    def with_sim_overrides(self, **overrides) -> "RunConfig":
        """命令行覆盖后的有效配置，None 表示沿用配置文件"""
        values = self.sim.model_dump()
        values.update({k: v for k, v in overrides.items() if v is not None})
        try:
            sim = SimSection.model_validate(values)
        except pydantic.ValidationError as exc:
            details = exc.errors()
            messages = [f"sim.{_field_path(e['loc'])}: {e['msg']}" for e in details]
            raise ConfigError("命令行参数校验失败", field_path=f"sim.{_field_path(details[0]['loc'])}",
                              errors=messages) from exc
        return self.model_copy(update={"sim": sim})


def config_hash(cfg: RunConfig) -> str:
    """规范化JSON的sha256"""
    return hashlib.sha256(cfg.canonical_json().encode("utf-8")).hexdigest()


def _field_path(loc) -> str:
    path = ""
    for part in loc:
        if isinstance(part, int):
            path += f"[{part}]"
        else:
            path += f".{part}" if path else str(part)
    return path


_LEADING_FIELD = re.compile(r"^[a-z_0-9]+(\[\d+\])*")


def parse_config(data: Dict[str, Any]) -> RunConfig:
    """校验已解析的配置字典 (模式约束 + 模型类型识别约束)"""
    try:
        cfg = RunConfig.model_validate(data)
    except pydantic.ValidationError as exc:
        details = exc.errors()
        messages = [f"{_field_path(e['loc'])}: {e['msg']}" for e in details]
        raise ConfigError("配置校验失败", field_path=_field_path(details[0]["loc"]),
                          errors=messages) from exc

    try:
        params = cfg.params()
    except ValueError as exc:
        raise ConfigError(f"模型参数无效: {exc}", field_path="model") from exc

    errors = validate_physical_params(params)
    if errors:
        match = _LEADING_FIELD.match(errors[0])
        field_path = f"model.{match.group(0)}" if match else "model"
        raise ConfigError("模型参数不满足识别约束", field_path=field_path, errors=errors)
    return cfg


def load_config(path) -> RunConfig:
    """
    读取并校验JSON配置文件

    Raises:
        ConfigError: 文件不存在、JSON语法错误 (带行列号) 或约束不满足 (带字段路径)
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"无法读取配置文件 {path}: {exc}") from exc

    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"JSON解析失败: {exc.msg}", line=exc.lineno, column=exc.colno) from exc

    if not isinstance(data, dict):
        raise ConfigError("配置文件顶层必须是对象")

    cfg = parse_config(data)
    logger.debug(f"已加载配置 {path} ({cfg.model.kind.value})")
    return cfg


def resolve_threads(explicit: Optional[int] = None) -> int:
    """显式值优先，其次环境变量或 .env 中的 ATSM_THREADS，最后为CPU核数"""
    if explicit is not None:
        return int(explicit)

    load_dotenv(override=False)
    raw = os.getenv(THREADS_ENV)
    if raw:
        try:
            value = int(raw)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} 必须是正整数 (当前 {raw!r})", field_path=THREADS_ENV)
        if value < 1:
            raise ConfigError(f"{THREADS_ENV} 必须是正整数 (当前 {raw!r})", field_path=THREADS_ENV)
        return value
    return os.cpu_count() or 1
