"""
성장 조건 검사

격자 인증(grid certification)이며 증명이 아니다. 모든 보고서는 사용한 격자를 기록한다.
"""
from __future__ import annotations

import logging
import math

import numpy as np

from .config import Tolerances, resolve
from .errors import InputError, LimitNotFoundError
from .numerics import aitken, quad
from .orlicz import OrliczFunction, PowerBranch, conjugate, default_grid
from .schemas import ConditionReport

log = logging.getLogger("conditions")


def _check_q(q: float) -> None:
    if not q > 1:
        raise InputError(f"q must be > 1, got {q}")


def _divergence(M: OrliczFunction, q: float) -> str:
    """∫₀ M(t) t^{-q-1} dt 가 0 근처에서 발산하면 진단 문자열"""
    first = M.branches[0]
    lead = first.leading_exponent if isinstance(first, PowerBranch) else None
    if lead is not None and lead <= q:
        kind = "logarithmic" if lead == q else "power"
        return f"divergent inner integral ({kind}): M(t)/t^q does not vanish at 0 (leading exponent {lead:g} <= q={q:g})"
    return ""


def integral_condition_curve(M: OrliczFunction, q: float, grid: np.ndarray, method: str = "closed") -> np.ndarray:
    """
    C(s) = [∫₀^s M(t) t^{-q-1} dt] · s^q / M(s)

    closed: 분기별 닫힌 형태(표 분기는 적분)를 누적
    quad:   t = s·e^{-u} 치환 후 [0, ∞) 적분 (교차 검증용)
    """
    s = np.asarray(grid, dtype=float)
    if method == "closed":
        pieces = [M.weighted_integral(q, 0.0, float(s[0]))]
        pieces += [M.weighted_integral(q, float(a), float(b)) for a, b in zip(s[:-1], s[1:])]
        inner = np.cumsum(pieces)
    elif method == "quad":
        def one(x: float) -> float:
            pts = [math.log(x / b) for b in M.breakpoints if 0 < b < x]
            return quad(lambda u: M(x * math.exp(-u)) * (x * math.exp(-u)) ** (-q), 0.0, math.inf, points=pts)
        inner = np.array([one(float(x)) for x in s])
    else:
        raise InputError(f"unknown method {method!r}")
    Ms = M(s)
    with np.errstate(divide="ignore", invalid="ignore"):
        curve = np.where(Ms > 0, inner * s ** q / np.where(Ms > 0, Ms, 1.0), 0.0)
    return curve


def check_integral_condition(
    M: OrliczFunction,
    q: float,
    grid=None,
    tol: Tolerances | None = None,
    method: str = "closed",
) -> ConditionReport:
    """
    ∫₀^s M(t)t^{-q-1}dt ≤ C·M(s)/s^q, 0 < s ≤ M⁻¹(1)
    """
    _check_q(q)
    tol = resolve(tol)
    s = default_grid(M, tol) if grid is None else np.asarray(grid, dtype=float)
    diag = _divergence(M, q)
    if diag:
        log.info(f"적분 조건 실패 ({M.name}, q={q:g}): {diag}")
        return ConditionReport(condition="integral", q=q, grid=s.tolist(), constants={"C": math.inf},
                               passed=False, argmax=float(s[0]), diagnostic=diag)
    curve = integral_condition_curve(M, q, s, method=method)
    k = int(np.argmax(curve))
    C = float(curve[k])
    passed = bool(math.isfinite(C))
    log.info(f"적분 조건 ({M.name}, q={q:g}): C={C:.10g} at s={s[k]:.4g}")
    return ConditionReport(condition="integral", q=q, grid=s.tolist(), constants={"C": C},
                           passed=passed, argmax=float(s[k]), diagnostic="" if passed else "non-finite constant")


def check_pointwise_condition(
    M: OrliczFunction,
    q: float,
    grid=None,
    c_grid=None,
    tol: Tolerances | None = None,
) -> ConditionReport:
    """
    M(cs) ≤ γ c^q M(s) 를 만족하는 c<1, γ<1 탐색

    γ(c) = sup_s M(cs)/(c^q M(s)) 를 최소화하는 c 를 보고한다.
    """
    _check_q(q)
    tol = resolve(tol)
    s = default_grid(M, tol) if grid is None else np.asarray(grid, dtype=float)
    cs = np.geomspace(tol.pointwise_c_min, tol.pointwise_c_max, tol.pointwise_c_points) if c_grid is None else np.asarray(c_grid)
    Ms = M(s)
    pos = Ms > 0
    best_c, best_g, best_arg = math.nan, math.inf, math.nan
    for c in cs:
        ratio = M(c * s[pos]) / (c ** q * Ms[pos])
        k = int(np.argmax(ratio))
        if ratio[k] < best_g:
            best_c, best_g, best_arg = float(c), float(ratio[k]), float(s[pos][k])
    passed = best_g < 1.0 - tol.pointwise_margin
    diag = "" if passed else f"no c with gamma(c) < 1 found on the search grid (best gamma={best_g:.6g})"
    log.info(f"점별 조건 ({M.name}, q={q:g}): c={best_c:.4g}, gamma={best_g:.6g}, passed={passed}")
    return ConditionReport(condition="pointwise", q=q, grid=s.tolist(), constants={"c": best_c, "gamma": best_g},
                           passed=bool(passed), argmax=best_arg, diagnostic=diag)


def _limit(seq: np.ndarray, agreement: float) -> float:
    """감소 수열 t_k 위에서의 극한 (Aitken 가속 + 직전 삼중항과의 일치 확인)"""
    x = np.asarray(seq, dtype=float)
    if not np.all(np.isfinite(x)):
        if np.all(np.isinf(x[-3:])):
            return float(x[-1])
        raise LimitNotFoundError("non-finite values in sequence")
    d_prev, d_last = x[-2] - x[-3], x[-1] - x[-2]
    # 반올림 수준의 흔들림은 발산으로 보지 않는다
    if abs(d_last) <= 1e-12 * max(1.0, abs(x[-1])):
        return float(x[-1])
    if d_prev != 0.0 and np.sign(d_prev) == np.sign(d_last) and abs(d_last) >= abs(d_prev):
        return math.copysign(math.inf, d_last)
    last = aitken(x[-3], x[-2], x[-1])
    prev = aitken(x[-4], x[-3], x[-2])
    if abs(last - prev) > agreement * max(1.0, abs(last)):
        raise LimitNotFoundError(f"accelerated values {prev:.6g} and {last:.6g} disagree")
    return float(last)


def check_limits(M: OrliczFunction, q: float, tol: Tolerances | None = None) -> tuple[float, float, float]:
    """
    lim_{t→0⁺} M(t)/t^q, M'(t)/t^{q-1}, M''(t)/t^{q-2} 의 수치 추정
    """
    _check_q(q)
    tol = resolve(tol)
    first_hi = M.branches[0].hi
    t0 = 0.5 * min(M.unit_level, first_hi)
    t = t0 * 4.0 ** (-np.arange(tol.limit_steps + 1, dtype=float))
    out = []
    for order in (0, 1, 2):
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            seq = M.derivative(t, order) / t ** (q - order)
        out.append(_limit(seq, tol.limit_agreement))
    log.info(f"극한 ({M.name}, q={q:g}): {out[0]:.3g}, {out[1]:.3g}, {out[2]:.3g}")
    return out[0], out[1], out[2]


def check_growth_monotone(M: OrliczFunction, q: float, eps: float, grid=None, tol: Tolerances | None = None) -> ConditionReport:
    """t ↦ M(t) t^{-q-ε} 가 격자에서 비감소인지 (적분 조건의 충분 조건, C ≤ 1/ε)"""
    _check_q(q)
    if not eps > 0:
        raise InputError("eps must be positive")
    tol = resolve(tol)
    s = default_grid(M, tol) if grid is None else np.asarray(grid, dtype=float)
    g = M(s) * s ** (-q - eps)
    drops = np.diff(g) < -1e-12 * np.abs(g[1:])
    passed = not bool(drops.any())
    arg = float(s[1:][drops][0]) if drops.any() else None
    return ConditionReport(condition="growth-monotone", q=q, grid=s.tolist(), constants={"bound": 1.0 / eps, "eps": eps},
                           passed=passed, argmax=arg, diagnostic="" if passed else "M(t)t^(-q-eps) decreases")


def check_power_convexity(M: OrliczFunction, q: float, eps: float, grid=None, tol: Tolerances | None = None) -> ConditionReport:
    """x ↦ M(x^{1/(q+ε)}) 의 볼록성 (2차 차분)"""
    _check_q(q)
    tol = resolve(tol)
    s = default_grid(M, tol) if grid is None else np.asarray(grid, dtype=float)
    x = np.linspace(float(s[0]) ** (q + eps), float(s[-1]) ** (q + eps), s.size)
    g = M(x ** (1.0 / (q + eps)))
    second = g[:-2] - 2 * g[1:-1] + g[2:]
    bad = second < -1e-10 * np.maximum(np.abs(g[1:-1]), 1e-300)
    passed = not bool(bad.any())
    arg = float(x[1:-1][bad][0] ** (1.0 / (q + eps))) if bad.any() else None
    return ConditionReport(condition="power-convexity", q=q, grid=s.tolist(), constants={"eps": eps},
                           passed=passed, argmax=arg, diagnostic="" if passed else "composition is not convex")


def check_dual_condition(M: OrliczFunction, q: float, c: float, gamma: float, grid=None, rtol: float = 1e-6) -> ConditionReport:
    """
    켤레 쪽 부등식 M*(γ⁻¹c^{1-q}s) ≤ γ⁻¹c^{-q}M*(s)

    좌변이 유한한 s 만 검사한다 (선형 꼬리 함수의 켤레는 기울기 밖에서 +∞).
    """
    _check_q(q)
    Ms = conjugate(M)
    if grid is None:
        t = default_grid(M)
        s = np.asarray(M.derivative(t), dtype=float)
        s = s[s > Ms.base_slope]
    else:
        s = np.asarray(grid, dtype=float)
    scale = c ** (1 - q) / gamma
    s = s[scale * s < Ms.slope_limit]
    if s.size == 0:
        return ConditionReport(condition="dual", q=q, grid=[], constants={"c": c, "gamma": gamma},
                               passed=False, diagnostic="no grid point with finite left side")
    lhs = Ms(scale * s)
    rhs = Ms(s) * c ** (-q) / gamma
    excess = lhs - rhs * (1 + rtol)
    k = int(np.argmax(excess))
    passed = bool(np.all(excess <= 0))
    return ConditionReport(condition="dual", q=q, grid=s.tolist(),
                           constants={"c": c, "gamma": gamma, "max_ratio": float(np.max(lhs / np.maximum(rhs, 1e-300)))},
                           passed=passed, argmax=float(s[k]), diagnostic="" if passed else "dual inequality violated")


def check_delta2(M: OrliczFunction, K: float = 2.0, grid=None, tol: Tolerances | None = None) -> ConditionReport:
    """0 근처 Δ₂ 상수 sup M(Ks)/M(s)"""
    if not K > 1:
        raise InputError("K must be > 1")
    tol = resolve(tol)
    s = default_grid(M, tol) if grid is None else np.asarray(grid, dtype=float)
    Ms = M(s)
    pos = Ms > 0
    ratio = M(K * s[pos]) / Ms[pos]
    k = int(np.argmax(ratio))
    C = float(ratio[k])
    return ConditionReport(condition="delta2", grid=s.tolist(), constants={"K": K, "C_K": C},
                           passed=bool(math.isfinite(C)), argmax=float(s[pos][k]))


def is_n_function(M: OrliczFunction) -> bool:
    """M(s)/s → 0 (s→0), → ∞ (s→∞)"""
    if M.derivative(0.0) > 0:
        return False
    first = M.branches[0]
    if isinstance(first, PowerBranch):
        lead = first.leading_exponent
        if lead is not None and lead <= 1:
            return False
    return math.isinf(M.tail_slope)
