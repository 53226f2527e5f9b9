"""
ATSM核心数据模型
"""

from dataclasses import dataclass, field, asdict, replace
from enum import Enum
from typing import List, Optional, Dict, Any, Tuple, Iterator

import numpy as np


class ModelKind(str, Enum):
    """波动率结构的三种二维情形"""
    PROPORTIONAL = "proportional"
    DEPENDENT = "dependent"
    INDEPENDENT = "independent"


class Measure(str, Enum):
    P = "P"
    Q = "Q"


class Dynamics(str, Enum):
    """模拟所用的离散动态"""
    CUTOFF = "cutoff"    # 物理参数 + 截断修正的风险中性动态
    RAW = "raw"          # 风险中性参数 (a, b) 的原始动态
    NEWPROB = "newprob"  # 保留 (a, b)，物理漂移加 Σ(V∨0)λ


class ConditionKind(str, Enum):
    STRICT_GT = "strict-gt"
    GEQ = "geq"
    EQ_ZERO = "eq-zero"


def _frozen_array(value, shape: Tuple[int, ...], name: str) -> np.ndarray:
    """复制为只读float64数组并检查形状"""
    arr = np.array(value, dtype=float)
    if arr.shape != shape:
        raise ValueError(f"{name} 形状应为 {shape}，实际为 {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class StateVec:
    x1: float  # 事前实际短期利率 (年化百分比)
    x2: float  # 预期通胀 (年化百分比)

    def as_array(self) -> np.ndarray:
        return np.array([self.x1, self.x2], dtype=float)

    @classmethod
    def from_array(cls, arr) -> "StateVec":
        arr = np.asarray(arr, dtype=float).reshape(2)
        return cls(float(arr[0]), float(arr[1]))

    def to_dict(self) -> Dict[str, float]:
        return {"x1": self.x1, "x2": self.x2}


@dataclass(frozen=True)
class VolatilityVec:
    v1: float
    v2: float

    def as_array(self) -> np.ndarray:
        return np.array([self.v1, self.v2], dtype=float)

    @classmethod
    def from_array(cls, arr) -> "VolatilityVec":
        arr = np.asarray(arr, dtype=float).reshape(2)
        return cls(float(arr[0]), float(arr[1]))


@dataclass(frozen=True, eq=False)
class PhysicalParams:
    """物理测度下的完整参数 (每季度漂移，状态以年化百分比计)"""
    a_hat: np.ndarray
    b_hat: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    sigma: np.ndarray
    lam: np.ndarray
    omega_pi: float = 0.0
    omega_s: float = 0.0
    nu0: float = 0.0
    nu1: float = 0.0
    nu2: float = 0.0
    kind: ModelKind = ModelKind.INDEPENDENT

    def __post_init__(self):
        object.__setattr__(self, "a_hat", _frozen_array(self.a_hat, (2, 2), "a_hat"))
        object.__setattr__(self, "b_hat", _frozen_array(self.b_hat, (2,), "b_hat"))
        object.__setattr__(self, "alpha", _frozen_array(self.alpha, (2,), "alpha"))
        object.__setattr__(self, "beta", _frozen_array(self.beta, (2, 2), "beta"))
        object.__setattr__(self, "sigma", _frozen_array(self.sigma, (2, 2), "sigma"))
        object.__setattr__(self, "lam", _frozen_array(self.lam, (2,), "lam"))
        object.__setattr__(self, "kind", ModelKind(self.kind))
        for name in ("omega_pi", "omega_s", "nu0", "nu1", "nu2"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @classmethod
    def create(cls, i_plus_a_hat, equilibrium, alpha, beta, sigma, lam,
               kind: ModelKind, **noise) -> "PhysicalParams":
        """按估计表的排版构造：给定 I+â 与均衡状态 −â⁻¹b̂"""
        a_hat = np.asarray(i_plus_a_hat, dtype=float) - np.eye(2)
        b_hat = -a_hat @ np.asarray(equilibrium, dtype=float)
        return cls(a_hat=a_hat, b_hat=b_hat, alpha=alpha, beta=beta, sigma=sigma,
                   lam=lam, kind=kind, **noise)

    @property
    def dependent_offset(self) -> float:
        """相依情形的偏移 c = α₂ − α₁"""
        return float(self.alpha[1] - self.alpha[0])

    def with_updates(self, **changes) -> "PhysicalParams":
        return replace(self, **changes)

    def is_close(self, other: "PhysicalParams", atol: float = 1e-13) -> bool:
        if self.kind != other.kind:
            return False
        mine, theirs = self.to_dict(), other.to_dict()
        return all(np.allclose(mine[k], theirs[k], rtol=0.0, atol=atol)
                   for k in mine if k != "kind")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind.value,
            "a_hat": self.a_hat.tolist(),
            "b_hat": self.b_hat.tolist(),
            "alpha": self.alpha.tolist(),
            "beta": self.beta.tolist(),
            "sigma": self.sigma.tolist(),
            "lambda": self.lam.tolist(),
            "omega_pi": self.omega_pi,
            "omega_s": self.omega_s,
            "nu0": self.nu0,
            "nu1": self.nu1,
            "nu2": self.nu2,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PhysicalParams":
        return cls(
            a_hat=data["a_hat"], b_hat=data["b_hat"], alpha=data["alpha"],
            beta=data["beta"], sigma=data["sigma"], lam=data["lambda"],
            omega_pi=data.get("omega_pi", 0.0), omega_s=data.get("omega_s", 0.0),
            nu0=data.get("nu0", 0.0), nu1=data.get("nu1", 0.0), nu2=data.get("nu2", 0.0),
            kind=ModelKind(data["kind"]),
        )


@dataclass(frozen=True, eq=False)
class RiskNeutralParams:
    """风险中性漂移 (a, b)，与物理参数共享 α, β, Σ, λ"""
    a: np.ndarray
    b: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    sigma: np.ndarray
    lam: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "a", _frozen_array(self.a, (2, 2), "a"))
        object.__setattr__(self, "b", _frozen_array(self.b, (2,), "b"))
        object.__setattr__(self, "alpha", _frozen_array(self.alpha, (2,), "alpha"))
        object.__setattr__(self, "beta", _frozen_array(self.beta, (2, 2), "beta"))
        object.__setattr__(self, "sigma", _frozen_array(self.sigma, (2, 2), "sigma"))
        object.__setattr__(self, "lam", _frozen_array(self.lam, (2,), "lam"))


@dataclass(frozen=True)
class FellerCondition:
    id: str
    lhs: float
    rhs: float
    margin: float
    kind: ConditionKind
    passed: bool

    def to_dict(self) -> Dict[str, Any]:
        return {
            "id": self.id,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "margin": self.margin,
            "kind": self.kind.value,
            "pass": self.passed,
        }


@dataclass(frozen=True)
class FellerReport:
    conditions: Tuple[FellerCondition, ...]
    overall: bool
    measure: Measure
    kind: ModelKind

    def condition(self, cond_id: str) -> FellerCondition:
        for cond in self.conditions:
            if cond.id == cond_id:
                return cond
        raise KeyError(cond_id)

    @property
    def ids(self) -> List[str]:
        return [c.id for c in self.conditions]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "measure": self.measure.value,
            "kind": self.kind.value,
            "overall": self.overall,
            "conditions": [c.to_dict() for c in self.conditions],
        }


@dataclass(frozen=True, eq=False)
class RiccatiTable:
    """债券价格系数 A_n (标量) 与 B_n (二维)，n = 0..N"""
    N: int
    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "A", _frozen_array(self.A, (self.N + 1,), "A"))
        object.__setattr__(self, "B", _frozen_array(self.B, (self.N + 1, 2), "B"))


@dataclass(frozen=True)
class SimConfig:
    paths: int = 1_000_000
    horizon: int = 200
    seed: int = 20070630
    dynamics: Dynamics = Dynamics.CUTOFF
    measure: Measure = Measure.Q
    ci_level: float = 0.99
    threads: Optional[int] = None  # None 表示自动检测
    block_size: int = 4096
    show_progress: bool = False

    def __post_init__(self):
        object.__setattr__(self, "dynamics", Dynamics(self.dynamics))
        object.__setattr__(self, "measure", Measure(self.measure))

    @classmethod
    def create(cls, **kwargs) -> "SimConfig":
        from atsm.models.validators import validate_sim_config
        from atsm.models.errors import ValidationError

        cfg = cls(**kwargs)
        errors = validate_sim_config(cfg)
        if errors:
            raise ValidationError("模拟配置无效", errors)
        return cfg


@dataclass(frozen=True)
class MCEstimate:
    maturity: int
    price_mean: float
    price_se: float
    price_ci: Tuple[float, float]
    yield_point: float                 # 年化百分比
    yield_ci: Tuple[float, float]      # 年化百分比
    analytic_yield: float              # 年化百分比
    diff_bp: float
    diff_ci_bp: Tuple[float, float]

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class MCResult:
    """一次蒙特卡洛运行：各期限估计与截断频率"""
    estimates: Tuple[MCEstimate, ...]
    floor_frac: Tuple[float, float]
    paths: int
    steps: int
    seed: int
    dynamics: Dynamics
    measure: Measure

    def __iter__(self) -> Iterator[MCEstimate]:
        return iter(self.estimates)

    def __len__(self) -> int:
        return len(self.estimates)

    def __getitem__(self, index: int) -> MCEstimate:
        return self.estimates[index]

    def by_maturity(self, n: int) -> MCEstimate:
        for est in self.estimates:
            if est.maturity == n:
                return est
        raise KeyError(n)


@dataclass(frozen=True)
class AugmentedState:
    """滤波状态：(x1, x2) 加季节块 (s0, s1, s2)

    s0 是与本季度配对的通胀观测中的季节项，s1、s2 为其滞后。
    """
    x1: float
    x2: float
    s0: float = 0.0
    s1: float = 0.0
    s2: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.x1, self.x2, self.s0, self.s1, self.s2], dtype=float)

    @classmethod
    def from_array(cls, arr) -> "AugmentedState":
        arr = np.asarray(arr, dtype=float).reshape(5)
        return cls(*(float(v) for v in arr))

    @property
    def state(self) -> StateVec:
        return StateVec(self.x1, self.x2)


@dataclass
class FilterState:
    mean: np.ndarray
    cov: np.ndarray
    loglik_accum: float = 0.0


@dataclass
class PanelData:
    """非平衡季度面板；缺失单元为 NaN

    short_rate 与 yields 以每季度小数计，inflation 以年化百分比计。
    """
    quarters: List[str]
    short_rate: np.ndarray
    inflation: np.ndarray
    yields: Dict[int, np.ndarray] = field(default_factory=dict)
    truth: Optional[Dict[str, np.ndarray]] = None  # 仅模拟面板携带

    def __post_init__(self):
        self.short_rate = np.asarray(self.short_rate, dtype=float)
        self.inflation = np.asarray(self.inflation, dtype=float)
        self.yields = {int(n): np.asarray(v, dtype=float)
                       for n, v in sorted(self.yields.items())}

    @property
    def n_quarters(self) -> int:
        return len(self.quarters)

    @property
    def maturities(self) -> List[int]:
        return sorted(self.yields)

    def observation_count(self, maturity: int) -> int:
        return int(np.sum(np.isfinite(self.yields[maturity])))

    def yield_matrix(self) -> np.ndarray:
        """T × 期限数 的收益率矩阵"""
        if not self.yields:
            return np.empty((self.n_quarters, 0))
        return np.column_stack([self.yields[n] for n in self.maturities])

    def without_yields(self) -> "PanelData":
        return PanelData(list(self.quarters), self.short_rate.copy(),
                         self.inflation.copy(), {}, self.truth)

    def with_missing_quarter(self, label: str) -> "PanelData":
        """末尾追加一个全部缺失的季度"""
        pad = np.array([np.nan])
        return PanelData(
            list(self.quarters) + [label],
            np.concatenate([self.short_rate, pad]),
            np.concatenate([self.inflation, pad]),
            {n: np.concatenate([v, pad]) for n, v in self.yields.items()},
            None,
        )


@dataclass
class FilterResult:
    loglik: float
    filtered_means: np.ndarray   # T × 5
    filtered_covs: np.ndarray    # T × 5 × 5
    loglik_terms: np.ndarray     # 每季度贡献
    min_eigenvalue: float        # 截断前最小特征值

    def filtered_states(self) -> np.ndarray:
        return self.filtered_means[:, :2]

    def filtered_state(self, t: int) -> AugmentedState:
        return AugmentedState.from_array(self.filtered_means[t])


@dataclass
class EstimationResult:
    params: PhysicalParams
    loglik: float
    converged: bool
    stage: int
    restarts: int
    n_evaluations: int
    penalty_weight: float = 0.0
    feller: Optional[FellerReport] = None
    message: str = ""
    history: List[Dict[str, Any]] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "stage": self.stage,
            "loglik": self.loglik,
            "converged": self.converged,
            "restarts": self.restarts,
            "n_evaluations": self.n_evaluations,
            "penalty_weight": self.penalty_weight,
            "message": self.message,
            "params": self.params.to_dict(),
            "feller": self.feller.to_dict() if self.feller else None,
        }

