"""
수치 허용 오차 및 기본값
"""
from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field


class Tolerances(BaseModel):
    """모든 수치 루틴이 공유하는 허용 오차 묶음"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    # Luxemburg 노름 이분법
    norm_xtol: float = Field(1e-12, gt=0)
    norm_rtol: float = Field(1e-14, gt=0)

    # 적분
    quad_rtol: float = Field(1e-9, gt=0)
    quad_limit: int = Field(200, ge=50)

    # 성장 조건
    condition_rtol: float = Field(1e-10, gt=0)
    condition_points: int = Field(512, ge=8)
    condition_decades: float = Field(6.0, gt=0)
    pointwise_c_points: int = Field(64, ge=2)
    pointwise_c_min: float = Field(1e-6, gt=0, lt=1)
    pointwise_c_max: float = Field(0.999, gt=0, lt=1)
    pointwise_margin: float = Field(1e-8, ge=0)

    # 극한 추정
    limit_steps: int = Field(24, ge=6)
    limit_agreement: float = Field(1e-6, gt=0)

    # 정규화 / 분포
    normalization_tol: float = Field(1e-8, gt=0)
    density_negative_tol: float = Field(1e-12, ge=0)
    quantile_xtol: float = Field(1e-12, gt=0)
    survival_floor: float = Field(1e-14, gt=0)

    # 격자 기반 Orlicz 함수 표
    table_per_decade: int = Field(24, ge=4)
    table_decades: float = Field(8.0, gt=0)

    # 검증 계약
    roundtrip_tol: float = Field(1e-4, gt=0)
    reconstruction_tol: float = Field(1e-6, gt=0)


DEFAULT_TOLERANCES = Tolerances()


def resolve(tol: Tolerances | None = None) -> Tolerances:
    return DEFAULT_TOLERANCES if tol is None else tol
