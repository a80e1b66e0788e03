"""
공용 수치 루틴: 적분, 이분법, 로그 격자, 극한 가속
"""
from __future__ import annotations

import logging
import warnings
from typing import Callable, Iterable

import numpy as np
import scipy.integrate

from .config import DEFAULT_TOLERANCES
from .errors import NumericalError

log = logging.getLogger("numerics")


def quad(
    func: Callable[[float], float],
    a: float,
    b: float,
    points: Iterable[float] | None = None,
    rtol: float | None = None,
    limit: int | None = None,
) -> float:
    """
    scipy.integrate.quad 래퍼

    특이점/꺾임점(points)에서 구간을 나눠 적분한다. 무한 구간에서도 points 를 쓸 수 있다.
    """
    rtol = DEFAULT_TOLERANCES.quad_rtol if rtol is None else rtol
    limit = DEFAULT_TOLERANCES.quad_limit if limit is None else limit
    if b == a:
        return 0.0
    sign = 1.0
    if b < a:
        sign, a, b = -1.0, b, a

    cuts = sorted({float(p) for p in (points or []) if a < p < b})
    edges = [a, *cuts, b]
    total = 0.0
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", scipy.integrate.IntegrationWarning)
        for lo, hi in zip(edges[:-1], edges[1:]):
            val, _err = scipy.integrate.quad(func, lo, hi, epsabs=0.0, epsrel=rtol, limit=limit)
            total += val
    for w in caught:
        if issubclass(w.category, scipy.integrate.IntegrationWarning):
            log.warning("quad [%g, %g]: %s", a, b, str(w.message).splitlines()[0])
    return sign * total


def log_grid(lo: float, hi: float, num: int) -> np.ndarray:
    if not (0 < lo < hi):
        raise NumericalError(f"invalid log grid [{lo}, {hi}]")
    return np.geomspace(lo, hi, num)


def grow_bracket(pred: Callable[[float], bool], start: float, factor: float = 2.0, max_steps: int = 400) -> float:
    """pred 가 참이 되는 첫 점을 start 부터 factor 배씩 키워가며 찾는다"""
    x = float(start)
    for _ in range(max_steps):
        if pred(x):
            return x
        x *= factor
    raise NumericalError(f"bracket search failed after {max_steps} steps (last x={x:g})")


def vector_bisect(
    pred: Callable[[np.ndarray], np.ndarray],
    lo: np.ndarray,
    hi: np.ndarray,
    rtol: float,
    max_iter: int = 400,
) -> np.ndarray:
    """
    원소별 이분법. pred(x) 가 참이 되는 최소 경계를 찾는다.

    Args:
        pred: 단조 술어 (x 가 크면 참)
        lo, hi: pred(lo)=거짓, pred(hi)=참 을 만족하는 초기 구간
        rtol: 상대 폭 허용치

    Returns:
        경계의 상한 근사 (pred 가 참인 쪽)
    """
    lo = np.array(lo, dtype=float, copy=True)
    hi = np.array(hi, dtype=float, copy=True)
    for _ in range(max_iter):
        open_ = (hi - lo) > rtol * np.maximum(hi, np.finfo(float).tiny)
        if not open_.any():
            break
        mid = np.where(lo > 0, np.sqrt(lo * hi), 0.5 * (lo + hi))
        up = np.asarray(pred(mid), dtype=bool)
        hi = np.where(open_ & up, mid, hi)
        lo = np.where(open_ & ~up, mid, lo)
    return hi


def aitken(x0: float, x1: float, x2: float) -> float:
    """Aitken 델타 제곱 가속"""
    d1, d2 = x1 - x0, x2 - x1
    denom = d2 - d1
    if denom == 0.0 or not np.isfinite(denom):
        return x2
    return x2 - d2 * d2 / denom
