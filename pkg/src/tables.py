"""
CSV / JSON 산출물 작성

CSV: 쉼표 구분, '.' 소수점, 헤더 행, LF 줄끝 (pandas)
JSON: indent=2, 키 정렬. 비유한 실수는 "inf" / "-inf" / "nan" 문자열로 쓴다.
같은 입력이면 바이트 단위로 같은 파일이 나와야 한다.
"""
from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel

from .distributions import Distribution
from .orlicz import OrliczFunction
from .schemas import DistortionReport, RatioReport


def ensure_out(out_dir: str | Path = "out") -> Path:
    path = Path(out_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _plain(obj: Any) -> Any:
    if isinstance(obj, BaseModel):
        return _plain(obj.model_dump(mode="json"))
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(obj: Any) -> str:
    return json.dumps(_plain(obj), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def write_json(obj: Any, path: str | Path) -> str:
    path = Path(path)
    path.write_text(dumps(obj), encoding="utf-8", newline="\n")
    return str(path)


def write_csv(df: pd.DataFrame, path: str | Path) -> str:
    df.to_csv(path, index=False, lineterminator="\n")
    return str(path)


# ---------------------------------------------------------------- 프레임

def orlicz_grid_frame(M: OrliczFunction, grid: Sequence[float]) -> pd.DataFrame:
    s = np.asarray(grid, dtype=float)
    return pd.DataFrame({"s": s, "M": M(s)})


def survival_frame(d: Distribution, grid: Sequence[float]) -> pd.DataFrame:
    x = np.asarray(grid, dtype=float)
    return pd.DataFrame({"x": x, "survival": d.sf(x)})


def sample_frame(samples: np.ndarray) -> pd.DataFrame:
    return pd.DataFrame({"x": np.asarray(samples, dtype=float)})


def curve_frame(grid: Sequence[float], values: Sequence[float], name: str) -> pd.DataFrame:
    return pd.DataFrame({"s": np.asarray(grid, dtype=float), name: np.asarray(values, dtype=float)})


def ratio_frame(report: RatioReport) -> pd.DataFrame:
    cols = ["n", "estimate", "dispersion", "predicted", "ratio"]
    return pd.DataFrame([r.model_dump() for r in report.rows], columns=cols)


def distortion_frame(report: DistortionReport) -> pd.DataFrame:
    cols = ["n", "min_ratio", "max_ratio", "proxy", "matrices"]
    return pd.DataFrame([r.model_dump() for r in report.rows], columns=cols)
