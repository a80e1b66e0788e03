"""
JSON 문서 스키마 (pydantic)

Orlicz 함수, 분포, 실행 설정, 그리고 모든 보고서 형식을 정의한다.
p = ∞ 는 JSON 에서 문자열 "inf" 로, 무한 정의역 상한은 null 로 쓴다.
"""
from __future__ import annotations

import math
from typing import Annotated, Any, Literal, Optional, Union

from pydantic import (
    BaseModel,
    BeforeValidator,
    ConfigDict,
    Field,
    PlainSerializer,
    model_validator,
)

from .config import Tolerances


def _parse_extended(v: Any) -> Any:
    if isinstance(v, str) and v.strip().lower() in {"inf", "+inf", "infinity", "∞"}:
        return math.inf
    return v


def _dump_extended(v: float) -> float | str:
    return "inf" if math.isinf(v) else v


ExtendedFloat = Annotated[float, BeforeValidator(_parse_extended), PlainSerializer(_dump_extended)]


# ---------------------------------------------------------------- Orlicz 함수

class PowerBranchSpec(BaseModel):
    """const + Σ coef·t^exponent"""
    kind: Literal["power"] = "power"
    domain: tuple[float, Optional[float]]
    const: float = 0.0
    terms: list[tuple[float, float]] = Field(default_factory=list)


class AffineBranchSpec(BaseModel):
    kind: Literal["affine"] = "affine"
    domain: tuple[float, Optional[float]]
    intercept: float
    slope: float


class TableBranchSpec(BaseModel):
    """매듭점의 M, M', M'' 로 정의되는 5차 Hermite 표"""
    kind: Literal["table"] = "table"
    domain: tuple[float, Optional[float]]
    knots: list[float]
    values: list[float]
    d1: list[float]
    d2: list[float]

    @model_validator(mode="after")
    def _same_length(self) -> "TableBranchSpec":
        n = len(self.knots)
        if n < 2 or not (len(self.values) == len(self.d1) == len(self.d2) == n):
            raise ValueError("table branch needs >= 2 knots and equal-length value/derivative columns")
        return self


BranchSpec = Annotated[
    Union[PowerBranchSpec, AffineBranchSpec, TableBranchSpec],
    Field(discriminator="kind"),
]


class OrliczSpec(BaseModel):
    branches: list[BranchSpec]
    kink: Optional[float] = None
    flags: dict[str, Any] = Field(default_factory=dict)


# ---------------------------------------------------------------- 분포

DistributionKind = Literal["pareto_q", "uniform", "constant", "custom_table", "from_orlicz", "from_orlicz_max"]


class DistributionSpec(BaseModel):
    kind: DistributionKind
    params: dict[str, Any] = Field(default_factory=dict)


# ---------------------------------------------------------------- 보고서

class ConditionReport(BaseModel):
    condition: str
    q: Optional[float] = None
    grid: list[float] = Field(default_factory=list)
    constants: dict[str, float] = Field(default_factory=dict)
    passed: bool
    argmax: Optional[float] = None
    diagnostic: str = ""


class EquivalenceReport(BaseModel):
    a: float
    b: float
    passed: bool
    grid_lo: float
    grid_hi: float
    diagnostic: str = ""


class DeviationReport(BaseModel):
    label: str
    grid: list[float]
    max_rel_dev: float
    argmax: float
    tolerance: float
    passed: bool


class DensityReport(BaseModel):
    """M_{X,p} 의 2·3계 도함수로 복원한 밀도와 원래 밀도의 점별 비교"""
    p: ExtendedFloat
    grid: list[float]
    max_rel_err: float
    argmax: float
    tolerance: float
    mass: float = 1.0
    passed: bool
    diagnostic: str = ""


class IntegrabilityReport(BaseModel):
    order: float
    certified: bool
    estimate: float
    ratio: float
    truncations: int
    diagnostic: str = ""

    def __bool__(self) -> bool:
        return self.certified


class MCEstimate(BaseModel):
    estimate: float
    dispersion: float = Field(ge=0)
    samples: int
    seed: int
    aggregation: Literal["mean", "median-of-means"]
    blocks: Optional[int] = None


class RatioRow(BaseModel):
    n: int
    estimate: float
    dispersion: float
    predicted: float
    ratio: float


class RatioReport(BaseModel):
    theorem: str
    rows: list[RatioRow]
    spread: float
    bound: Optional[float] = None
    passed: bool = True


class DistortionRow(BaseModel):
    n: int
    min_ratio: float
    max_ratio: float
    proxy: float
    matrices: int


class DistortionReport(BaseModel):
    rows: list[DistortionRow]
    stability: float
    bound: Optional[float] = None
    passed: bool = True


class KhintchineReport(BaseModel):
    estimate: float
    dispersion: float
    lower: float
    upper: float
    passed: bool


# ---------------------------------------------------------------- 실행 설정

Aggregation = Literal["auto", "mean", "median-of-means"]


class MCConfig(BaseModel):
    """Monte Carlo 예산과 집계 방식. 결과는 workers 와 무관하다."""
    model_config = ConfigDict(extra="forbid")

    replicates: int = Field(100_000, ge=1)
    seed: Optional[int] = Field(None, ge=0)
    aggregation: Aggregation = "auto"
    delta: float = Field(0.01, gt=0, lt=1)
    workers: int = Field(1, ge=1)
    block_elements: int = Field(2_000_000, ge=1024)


Command = Literal["norm", "make-dist", "make-orlicz", "conditions", "verify", "roundtrip", "embed"]
TheoremId = Literal[
    "max", "pnorm", "lq-generation", "tensor",
    "max-inverse", "pnorm-inverse", "tensor-x", "general-n",
]
MC_COMMANDS = {"verify", "embed"}


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    command: Command
    orlicz: Optional[Union[str, OrliczSpec]] = None
    general_n: Optional[Union[str, OrliczSpec]] = None
    distribution: Optional[Union[str, DistributionSpec]] = None
    vector: Optional[list[float]] = None
    p: Optional[ExtendedFloat] = None
    q: Optional[float] = None
    n_list: list[int] = Field(default_factory=lambda: [10, 100, 1000])
    map: Literal["max", "pnorm", "qpower", "general-n"] = "pnorm"
    theorem: Optional[TheoremId] = None
    mc: MCConfig = Field(default_factory=MCConfig)
    matrices_per_n: int = Field(20, ge=1)
    spread_bound: float = Field(3.0, gt=1)
    samples: int = Field(0, ge=0)
    grid_points: int = Field(256, ge=2)
    strict: bool = False
    out_dir: str = "out"
    tolerances: Tolerances = Field(default_factory=Tolerances)

    @model_validator(mode="after")
    def _check(self) -> "RunConfig":
        if self.p is not None and not self.p > 1:
            raise ValueError("p must be > 1")
        if self.q is not None and not self.q > 1:
            raise ValueError("q must be > 1")
        if self.p is not None and self.q is not None and not self.q < self.p:
            raise ValueError("need 1 < q < p <= inf")
        if any(n < 1 for n in self.n_list):
            raise ValueError("n_list entries must be positive")
        needs_seed = self.command in MC_COMMANDS or (self.command == "make-dist" and self.samples > 0)
        if needs_seed and self.mc.seed is None:
            raise ValueError(f"seed is mandatory for '{self.command}'")
        return self
