"""
Orlicz 함수 표현과 Luxemburg 노름

Orlicz 함수는 구간별 분기(branch) 목록으로 저장한다.
  - power:  const + Σ c·t^e
  - affine: a + b·t (선형 꼬리)
  - table:  매듭점의 M, M', M'' 로 만든 5차 Hermite 보간 (정방향 사상 결과)
모든 도함수는 오른쪽 도함수이며, 분기 경계에서 dM' 은 원자(점질량)를 가질 수 있다.
"""
from __future__ import annotations

import dataclasses
import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from functools import cached_property
from typing import ClassVar, Sequence

import numpy as np
from scipy import optimize
from scipy.interpolate import BPoly

from .config import Tolerances, resolve
from .errors import InputError, NotNormalizableError, NumericalError
from .numerics import grow_bracket, log_grid, quad, vector_bisect
from .schemas import (
    AffineBranchSpec,
    EquivalenceReport,
    OrliczSpec,
    PowerBranchSpec,
    TableBranchSpec,
)

log = logging.getLogger("orlicz")


def _power_integral(k: float, a: float, b: float) -> float:
    """∫_a^b y^k dy (a 는 0, b 는 ∞ 일 수 있음)"""
    if b <= a:
        return 0.0
    if k == -1.0:
        if a == 0.0 or math.isinf(b):
            return math.inf
        return math.log(b / a)
    if k > -1.0:
        if math.isinf(b):
            return math.inf
        return (b ** (k + 1) - a ** (k + 1)) / (k + 1)
    if a == 0.0:
        return math.inf
    upper = 0.0 if math.isinf(b) else b ** (k + 1)
    return (upper - a ** (k + 1)) / (k + 1)


def _falling(e: float, order: int) -> float:
    out = 1.0
    for j in range(order):
        out *= e - j
    return out


def _upper(hi: float) -> float | None:
    return None if math.isinf(hi) else float(hi)


# ---------------------------------------------------------------- 분기

class Branch(ABC):
    kind: ClassVar[str]
    lo: float
    hi: float

    @abstractmethod
    def value(self, t: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def deriv(self, t: np.ndarray, order: int = 1) -> np.ndarray: ...

    @abstractmethod
    def weighted_integral(self, r: float, a: float, b: float) -> float:
        """∫_a^b M(y) y^{-r-1} dy  (구간은 이 분기 안)"""

    @abstractmethod
    def to_spec(self): ...

    @abstractmethod
    def scaled(self, a: float, b: float) -> "Branch":
        """t ↦ a·M(b·t) 에 해당하는 분기"""


@dataclass(frozen=True)
class PowerBranch(Branch):
    lo: float
    hi: float
    terms: tuple[tuple[float, float], ...] = ()
    const: float = 0.0
    kind: ClassVar[str] = "power"

    def value(self, t):
        t = np.asarray(t, dtype=float)
        out = np.full(t.shape, self.const, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            for c, e in self.terms:
                out = out + c * np.power(t, e)
        return out

    def deriv(self, t, order=1):
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            for c, e in self.terms:
                f = _falling(e, order)
                if f == 0.0 or c == 0.0:
                    continue
                out = out + c * f * np.power(t, e - order)
        return out

    def weighted_integral(self, r, a, b):
        total = self.const * _power_integral(-r - 1.0, a, b) if self.const else 0.0
        for c, e in self.terms:
            if c:
                total += c * _power_integral(e - r - 1.0, a, b)
        return total

    @property
    def leading_exponent(self) -> float | None:
        """0 근처에서 지배적인 지수 (const 가 있으면 0)"""
        if self.const:
            return 0.0
        exps = [e for c, e in self.terms if c]
        return min(exps) if exps else None

    def scaled(self, a, b):
        terms = tuple((a * c * b ** e, e) for c, e in self.terms)
        return dataclasses.replace(self, lo=self.lo / b, hi=self.hi / b, terms=terms, const=a * self.const)

    def to_spec(self):
        return PowerBranchSpec(
            domain=(float(self.lo), _upper(self.hi)),
            const=float(self.const),
            terms=[(float(c), float(e)) for c, e in self.terms],
        )


@dataclass(frozen=True)
class AffineBranch(PowerBranch):
    kind: ClassVar[str] = "affine"

    @classmethod
    def of(cls, lo: float, hi: float, intercept: float, slope: float) -> "AffineBranch":
        return cls(lo=float(lo), hi=float(hi), terms=((float(slope), 1.0),), const=float(intercept))

    @property
    def intercept(self) -> float:
        return self.const

    @property
    def slope(self) -> float:
        return sum(c for c, e in self.terms if e == 1.0)

    def to_spec(self):
        return AffineBranchSpec(domain=(float(self.lo), _upper(self.hi)), intercept=self.intercept, slope=self.slope)


@dataclass(frozen=True, eq=False)
class TableBranch(Branch):
    lo: float
    hi: float
    knots: np.ndarray
    values: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    kind: ClassVar[str] = "table"

    def __post_init__(self):
        for name in ("knots", "values", "d1", "d2"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if np.any(np.diff(self.knots) <= 0):
            raise InputError("table knots must be strictly increasing")
        poly = BPoly.from_derivatives(self.knots, np.column_stack([self.values, self.d1, self.d2]))
        object.__setattr__(self, "_poly", poly)
        object.__setattr__(self, "_dpolys", tuple(poly.derivative(k) for k in (1, 2, 3)))

    def value(self, t):
        return self._poly(np.asarray(t, dtype=float))

    def deriv(self, t, order=1):
        if order == 0:
            return self.value(t)
        if order > 3:
            return np.zeros(np.shape(t))
        return self._dpolys[order - 1](np.asarray(t, dtype=float))

    def weighted_integral(self, r, a, b):
        poly = self._poly
        return quad(lambda y: float(poly(y)) * y ** (-r - 1.0), a, b)

    def scaled(self, a, b):
        return TableBranch(
            lo=self.lo / b, hi=self.hi / b, knots=self.knots / b,
            values=a * self.values, d1=a * b * self.d1, d2=a * b * b * self.d2,
        )

    def to_spec(self):
        return TableBranchSpec(
            domain=(float(self.lo), _upper(self.hi)),
            knots=self.knots.tolist(), values=self.values.tolist(),
            d1=self.d1.tolist(), d2=self.d2.tolist(),
        )


def _branch_from_spec(spec) -> Branch:
    lo, hi = spec.domain
    hi = math.inf if hi is None else hi
    if spec.kind == "power":
        return PowerBranch(lo=lo, hi=hi, terms=tuple((c, e) for c, e in spec.terms), const=spec.const)
    if spec.kind == "affine":
        return AffineBranch.of(lo, hi, spec.intercept, spec.slope)
    return TableBranch(lo=lo, hi=hi, knots=spec.knots, values=spec.values, d1=spec.d1, d2=spec.d2)


# ---------------------------------------------------------------- Orlicz 함수

class OrliczFunction:
    """
    구간별 Orlicz 함수 (생성 후 불변)

    Args:
        branches: [0, ∞) 를 빈틈없이 덮는 분기 목록 (각 분기는 [lo, hi) 반열린 구간)
        name: 로그/보고서용 이름
    """

    def __init__(self, branches: Sequence[Branch], name: str = "M", tol: Tolerances | None = None):
        branches = tuple(branches)
        if not branches:
            raise InputError("Orlicz function needs at least one branch")
        if branches[0].lo != 0.0:
            raise InputError("first branch must start at 0")
        if not math.isinf(branches[-1].hi):
            raise InputError("last branch must extend to infinity")
        if isinstance(branches[-1], TableBranch) or isinstance(branches[0], TableBranch):
            raise InputError("table branches cannot touch 0 or infinity")
        for left, right in zip(branches[:-1], branches[1:]):
            if not left.lo < left.hi or abs(left.hi - right.lo) > 1e-12 * max(1.0, abs(left.hi)):
                raise InputError(f"branch domains not contiguous at {left.hi}")
        self.branches = branches
        self.name = name
        self.tol = resolve(tol)
        self._starts = np.array([b.lo for b in branches], dtype=float)
        m0 = float(branches[0].value(np.array(0.0)))
        if not abs(m0) <= 1e-14:
            raise InputError(f"M(0) must be 0, got {m0:g}")

    # -- 평가
    def _apply(self, t, fn, side: str = "right"):
        arr = np.asarray(t, dtype=float)
        flat = np.atleast_1d(arr).ravel()
        if np.any(flat < 0) or np.any(np.isnan(flat)):
            raise InputError("Orlicz functions are defined on [0, inf)")
        idx = np.clip(np.searchsorted(self._starts, flat, side=side) - 1, 0, len(self.branches) - 1)
        out = np.empty_like(flat)
        for k in np.unique(idx):
            sel = idx == k
            out[sel] = fn(self.branches[k], flat[sel])
        if arr.ndim == 0:
            return float(out[0])
        return out.reshape(arr.shape)

    def __call__(self, t):
        return self._apply(t, lambda b, x: b.value(x))

    def derivative(self, t, order: int = 1):
        """오른쪽 도함수 M^(order)(t⁺)"""
        if order == 0:
            return self(t)
        return self._apply(t, lambda b, x: b.deriv(x, order))

    def left_derivative(self, t, order: int = 1):
        """왼쪽 도함수 M^(order)(t⁻)"""
        if order == 0:
            return self._apply(t, lambda b, x: b.value(x), side="left")
        return self._apply(t, lambda b, x: b.deriv(x, order), side="left")

    def branch_at(self, t: float) -> Branch:
        k = int(np.clip(np.searchsorted(self._starts, t, side="right") - 1, 0, len(self.branches) - 1))
        return self.branches[k]

    # -- 구조 정보
    @property
    def breakpoints(self) -> np.ndarray:
        return self._starts[1:].copy()

    @property
    def linear_tail(self) -> bool:
        return isinstance(self.branches[-1], AffineBranch)

    @property
    def kink(self) -> float | None:
        """선형 꼬리가 시작되는 점 t₁"""
        if self.linear_tail and len(self.branches) > 1:
            return float(self.branches[-1].lo)
        return None

    @property
    def tail_slope(self) -> float:
        """lim M'(t) = ∫ dM'"""
        last = self.branches[-1]
        if any(c > 0 and e > 1 for c, e in last.terms):
            return math.inf
        return float(sum(c for c, e in last.terms if e == 1.0))

    @cached_property
    def unit_level(self) -> float:
        """M⁻¹(1)"""
        return self.inverse(1.0)

    def inverse(self, y: float) -> float:
        """M(t) = y 인 최소 t"""
        if y <= 0:
            return 0.0
        hi = grow_bracket(lambda t: self(t) >= y, 1.0)
        lo = 0.0
        if hi > 1.0:
            lo = hi / 2.0
        return float(optimize.brentq(lambda t: self(t) - y, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps))

    def normalization_integral(self, method: str = "closed") -> float:
        """
        ∫₀^∞ x dM'(x) (분기 경계의 원자 포함)

        closed: lim_{t→∞} (t M'(t) - M(t)) 를 마지막 분기에서 계산
        quad:   분기별 ∫ x M'' dx 의 적분 + 경계 원자 b·(M'(b⁺)-M'(b⁻))
        """
        last = self.branches[-1]
        if method == "closed":
            if any(c * (e - 1) > 0 for c, e in last.terms):
                return math.inf
            return float(-last.const)
        total = 0.0
        for br in self.branches:
            if math.isinf(br.hi):
                if any(c * (e - 1) > 0 for c, e in br.terms):
                    return math.inf
                continue
            total += quad(lambda x, br=br: x * float(br.deriv(np.array(x), 2)), br.lo, br.hi)
        for b in self.breakpoints:
            total += b * (self.derivative(b) - self.left_derivative(b))
        return total

    @property
    def normalized(self) -> bool:
        return abs(self.normalization_integral() - 1.0) <= self.tol.normalization_tol

    @property
    def smoothness(self) -> str:
        cls = 3
        for b in self.breakpoints:
            for order in (0, 1, 2, 3):
                right, left = self.derivative(b, order), self.left_derivative(b, order)
                if abs(right - left) > 1e-9 * max(1.0, abs(right), abs(left)):
                    cls = min(cls, order - 1)
                    break
        return "C0" if cls < 0 else f"C{cls}"

    def weighted_integral(self, r: float, a: float, b: float) -> float:
        """∫_a^b M(y) y^{-r-1} dy, 분기 경계에서 분할"""
        if b <= a:
            return 0.0
        cuts = [a, *[float(x) for x in self.breakpoints if a < x < b], b]
        return sum(self.branch_at(lo).weighted_integral(r, lo, hi) for lo, hi in zip(cuts[:-1], cuts[1:]))

    def convexity_defect(self, grid: np.ndarray) -> float:
        """격자 위 중점 현 검사와 M'' ≥ 0 검사의 최대 위반량 (상대값)"""
        g = np.asarray(grid, dtype=float)
        vals = self(g)
        mid = self(0.5 * (g[:-1] + g[1:]))
        chord = 0.5 * (vals[:-1] + vals[1:])
        scale = np.maximum(np.abs(chord), np.finfo(float).tiny)
        defect = float(np.max(np.maximum(mid - chord, 0.0) / scale)) if g.size > 1 else 0.0
        d2 = self.derivative(g, 2)
        d2_scale = np.maximum(np.abs(self.derivative(g, 1)) / np.maximum(g, 1e-300), 1e-300)
        defect = max(defect, float(np.max(np.maximum(-d2, 0.0) / d2_scale)))
        mono = np.diff(vals)
        if np.any(mono < -1e-12 * np.maximum(np.abs(vals[1:]), 1.0)):
            defect = max(defect, 1.0)
        return defect

    def scaled(self, a: float = 1.0, b: float = 1.0, name: str | None = None) -> "OrliczFunction":
        """t ↦ a·M(b·t)"""
        if a <= 0 or b <= 0:
            raise InputError("scaling factors must be positive")
        return OrliczFunction([br.scaled(a, b) for br in self.branches], name=name or f"{a:g}*{self.name}({b:g}t)", tol=self.tol)

    # -- 직렬화
    def to_spec(self) -> OrliczSpec:
        return OrliczSpec(
            branches=[b.to_spec() for b in self.branches],
            kink=self.kink,
            flags={"normalized": self.normalized, "linear_tail": self.linear_tail, "smoothness": self.smoothness},
        )

    @classmethod
    def from_spec(cls, spec: OrliczSpec | dict, name: str = "M", tol: Tolerances | None = None) -> "OrliczFunction":
        if isinstance(spec, dict):
            spec = OrliczSpec.model_validate(spec)
        out = cls([_branch_from_spec(b) for b in spec.branches], name=name, tol=tol)
        if spec.kink is not None and (out.kink is None or abs(out.kink - spec.kink) > 1e-9 * spec.kink):
            raise InputError(f"declared kink {spec.kink} does not match the branch layout")
        return out

    def __repr__(self) -> str:
        kinds = ",".join(b.kind for b in self.branches)
        return f"OrliczFunction({self.name}: {kinds})"


# ---------------------------------------------------------------- 팩토리

def power(r: float, coef: float = 1.0, name: str | None = None) -> OrliczFunction:
    """coef·t^r"""
    if r < 1 or coef <= 0:
        raise InputError(f"t^{r} is not an Orlicz function (need r >= 1, coef > 0)")
    return OrliczFunction([PowerBranch(0.0, math.inf, ((coef, r),))], name=name or f"t^{r:g}")


def young_power(r: float) -> OrliczFunction:
    """t^r / r"""
    return power(r, 1.0 / r, name=f"t^{r:g}/{r:g}")


def piecewise_power(breaks: Sequence[float], exponents: Sequence[float], coef: float = 1.0) -> OrliczFunction:
    """
    연속인 구간별 거듭제곱 함수. 지수가 비감소이면 볼록이다.
    """
    breaks = [float(b) for b in breaks]
    exponents = [float(e) for e in exponents]
    if len(exponents) != len(breaks) + 1:
        raise InputError("need len(exponents) == len(breaks) + 1")
    if any(b <= 0 for b in breaks) or any(b2 <= b1 for b1, b2 in zip(breaks, breaks[1:])):
        raise InputError("breaks must be positive and increasing")
    if exponents[0] < 1 or any(e2 < e1 for e1, e2 in zip(exponents, exponents[1:])):
        raise InputError("exponents must be >= 1 and nondecreasing")
    edges = [0.0, *breaks, math.inf]
    c = coef
    branches = []
    for k, e in enumerate(exponents):
        branches.append(PowerBranch(edges[k], edges[k + 1], ((c, e),)))
        if k + 1 < len(exponents):
            b = edges[k + 1]
            c = c * b ** (e - exponents[k + 1])
    return OrliczFunction(branches, name="piecewise(" + ",".join(f"{e:g}" for e in exponents) + ")")


def hinge(threshold: float = 1.0) -> OrliczFunction:
    """(t - threshold)₊: 상수 확률변수의 M_X"""
    if threshold <= 0:
        raise InputError("threshold must be positive")
    return OrliczFunction(
        [PowerBranch(0.0, threshold), AffineBranch.of(threshold, math.inf, -threshold, 1.0)],
        name=f"(t-{threshold:g})+",
    )


def linearized_power(r: float, strict: bool = False) -> OrliczFunction:
    """정규화 후 선형 연장한 t^r"""
    return normalize_by_linearization(power(r), strict=strict)


def pareto_p_orlicz(p: float, q: float) -> OrliczFunction:
    """
    Pareto형 밀도 q(q-1)x^{-q-1} 가 ℓ_p 노름 안에서 만드는 두 분기 Orlicz 함수 (명시적 공식)
    """
    if not 1 < q < p:
        raise InputError("need 1 < q < p <= inf")
    s_star = (q - 1) ** (-1.0 / q)
    mean = q * (q - 1) ** ((1 - q) / q)
    if math.isinf(p):
        low = PowerBranch(0.0, s_star, ((1.0, q),))
        return OrliczFunction([low, AffineBranch.of(s_star, math.inf, -1.0, mean)], name=f"M_xi(q={q:g})")
    cq = 1 + q / (p - 1) + q * (q - 1) / ((p - 1) * (p - q))
    cp = -q * (q - 1) ** (p / q) / ((p - 1) * (p - q))
    low = PowerBranch(0.0, s_star, ((cq, q), (cp, p)))
    high = AffineBranch.of(s_star, math.inf, -1.0, p / (p - 1) * mean)
    return OrliczFunction([low, high], name=f"M_xi,p(p={p:g},q={q:g})")


# ---------------------------------------------------------------- 정규화

def normalize_by_linearization(M: OrliczFunction, strict: bool = False) -> OrliczFunction:
    """
    ∫₀^{t₁} x dM'(x) = 1 인 t₁ 에서 M 을 잘라 선형으로 연장한다.

    기본은 접선 연장 (값은 재조정하지 않음, M(t₁) ≠ 1 가능).
    strict=True 면 t₁ = M⁻¹(1) 에 꺾임을 두어 M(t₁) = 1 을 보장한다.
    두 경우 모두 꼬리 기울기는 (1 + M(t₁))/t₁ 이므로 정규화 적분은 정확히 1 이다.
    """
    def h(t: float) -> float:
        # ∫_[0,t] x dM'(x) = t M'(t⁻) - M(t)
        return t * M.left_derivative(t) - M(t)

    tol = M.tol.normalization_tol
    if strict:
        t1 = M.unit_level
        if h(t1) > 1.0 + tol:
            raise NotNormalizableError(f"strict mode needs t*M'(t)-M(t) <= 1 at M^-1(1)={t1:.6g}")
    else:
        try:
            hi = grow_bracket(lambda t: h(t) >= 1.0, 1.0, max_steps=1100)
        except NumericalError as e:
            raise NotNormalizableError("normalization integral never reaches 1") from e
        lo = 0.0
        while hi > 1e-300 and h(hi / 2.0) >= 1.0:
            hi /= 2.0
        lo = hi / 2.0 if h(hi / 2.0) < 1.0 else 0.0
        t1 = float(optimize.bisect(lambda t: h(t) - 1.0, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps))

    m1 = M(t1)
    slope = (1.0 + m1) / t1
    if slope < M.left_derivative(t1) * (1 - 1e-10):
        raise NotNormalizableError(f"tail slope {slope:.6g} would break convexity at t1={t1:.6g}")

    kept = []
    for br in M.branches:
        if br.lo >= t1:
            break
        kept.append(dataclasses.replace(br, hi=min(br.hi, t1)))
    kept.append(AffineBranch.of(t1, math.inf, m1 - slope * t1, slope))
    out = OrliczFunction(kept, name=f"{M.name}~", tol=M.tol)
    log.info(f"선형 연장 정규화: {M.name} t1={t1:.10g}, M(t1)={m1:.6g}, slope={slope:.6g}, strict={strict}")
    return out


# ---------------------------------------------------------------- Luxemburg 노름

def luxemburg_norm(M: OrliczFunction, x, tol: Tolerances | None = None) -> float:
    """
    ‖x‖_M = inf{t>0 : Σ M(|x_i|/t) ≤ 1}

    볼록성으로 해는 [max|x|/M⁻¹(1), Σ|x|/M⁻¹(1)] 안에 있다. 그 구간에서 이분법.
    """
    tol = resolve(tol)
    v = np.abs(np.asarray(x, dtype=float)).ravel()
    if not np.all(np.isfinite(v)):
        raise InputError("vector has non-finite entries")
    v = v[v > 0]
    if v.size == 0:
        return 0.0
    vals, counts = np.unique(v, return_counts=True)
    u1 = M.unit_level
    lo = float(vals[-1] / u1)
    hi = float(np.dot(vals, counts) / u1)

    def excess(t: float) -> float:
        return float(np.dot(counts, M(vals / t))) - 1.0

    if hi <= lo or excess(lo) <= 0.0:
        return lo
    if excess(hi) > 0.0:
        hi = grow_bracket(lambda t: excess(t) <= 0.0, hi)
    if excess(hi) == 0.0:
        # 선형 M 처럼 상한이 정확한 해인 경우
        return hi
    t = optimize.bisect(excess, lo, hi, xtol=tol.norm_xtol * min(1.0, lo), rtol=tol.norm_rtol)
    log.debug(f"luxemburg: n={v.size} bracket=[{lo:.6g},{hi:.6g}] t*={t:.12g}")
    return float(t)


def luxemburg_norm_rows(M: OrliczFunction, X, rtol: float = 1e-12) -> np.ndarray:
    """행별 Luxemburg 노름 (원소별 벡터화 이분법)"""
    A = np.abs(np.asarray(X, dtype=float))
    if A.ndim != 2:
        raise InputError("expected a 2-D array")
    if not np.all(np.isfinite(A)):
        raise InputError("matrix has non-finite entries")
    u1 = M.unit_level
    lo = A.max(axis=1) / u1
    hi = A.sum(axis=1) / u1
    out = np.zeros(A.shape[0])
    live = hi > 0
    if not live.any():
        return out
    Al = A[live]

    def fits(t: np.ndarray) -> np.ndarray:
        return M(Al / t[:, None]).sum(axis=1) <= 1.0

    out[live] = vector_bisect(fits, lo[live] * (1 - 1e-15), hi[live] * (1 + 1e-15), rtol=rtol)
    return out


# ---------------------------------------------------------------- 켤레 함수

class ConjugateFunction:
    """
    M*(s) = sup_{t≥0} (st - M(t))

    선형 꼬리 함수는 꼬리 기울기보다 큰 s 에서 +∞ 를 명시적으로 돌려준다.
    """

    def __init__(self, M: OrliczFunction):
        self.M = M
        self.slope_limit = M.tail_slope
        self.base_slope = float(M.derivative(0.0))

    def _one(self, s: float) -> float:
        M = self.M
        if s < 0:
            raise InputError("conjugate is evaluated on [0, inf)")
        if s <= self.base_slope:
            return 0.0
        if s > self.slope_limit:
            return math.inf
        if s == self.slope_limit:
            return float(-M.branches[-1].const)
        hi = grow_bracket(lambda t: M.derivative(t) >= s, 1.0)
        while hi > 1e-300 and M.derivative(hi / 2.0) >= s:
            hi /= 2.0
        lo = hi / 2.0
        res = optimize.minimize_scalar(
            lambda t: M(t) - s * t, bounds=(lo, hi), method="bounded",
            options={"xatol": 1e-13 * hi, "maxiter": 500},
        )
        t = float(res.x)
        return max(0.0, s * t - M(t), s * lo - M(lo), s * hi - M(hi))

    def __call__(self, s):
        arr = np.asarray(s, dtype=float)
        out = np.array([self._one(float(v)) for v in np.atleast_1d(arr).ravel()])
        return float(out[0]) if arr.ndim == 0 else out.reshape(arr.shape)


def conjugate(M: OrliczFunction) -> ConjugateFunction:
    return ConjugateFunction(M)


# ---------------------------------------------------------------- 동치 상수

def _sup_ratio(num: np.ndarray, den: np.ndarray) -> float:
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(den > 0, num / np.where(den > 0, den, 1.0), np.where(num > 0, np.inf, 0.0))
    return float(np.max(r)) if r.size else 0.0


def default_grid(M: OrliczFunction, tol: Tolerances | None = None) -> np.ndarray:
    """(0, M⁻¹(1)] 위 로그 격자"""
    tol = resolve(tol)
    u1 = M.unit_level
    return log_grid(u1 * 10.0 ** (-tol.condition_decades), u1, tol.condition_points)


def is_admissible(M: OrliczFunction, N: OrliczFunction, a: float, b: float, grid, rtol: float = 1e-10) -> bool:
    """a⁻¹M(b⁻¹t) ≤ N(t) ≤ aM(bt) 를 격자에서 확인"""
    t = np.asarray(grid, dtype=float)
    Nt = N(t)
    upper = np.all(Nt <= a * M(b * t) * (1 + rtol) + 1e-300)
    lower = np.all(M(t / b) / a <= Nt * (1 + rtol) + 1e-300)
    return bool(upper and lower)


def equivalence_constants(
    M: OrliczFunction,
    N: OrliczFunction,
    grid=None,
    b_grid=None,
    max_constant: float = 1e12,
) -> EquivalenceReport:
    """
    a⁻¹M(b⁻¹t) ≤ N(t) ≤ aM(bt) 를 만족하는 (a, b) 중 a·b 가 최소인 것

    b 는 [1, 64] 기하 격자에서 고르고, 각 b 에 대해 필요한 최소 a 를 닫힌 형태로 계산한다.
    """
    t = default_grid(M) if grid is None else np.asarray(grid, dtype=float)
    bs = np.geomspace(1.0, 64.0, 97) if b_grid is None else np.asarray(b_grid, dtype=float)
    Nt = N(t)
    best = (math.inf, math.inf, math.inf)
    for b in bs:
        a = max(1.0, _sup_ratio(Nt, M(b * t)), _sup_ratio(M(t / b), Nt))
        score = a * b
        if score < best[0]:
            best = (score, a, float(b))
    _, a, b = best
    passed = bool(math.isfinite(a) and a <= max_constant)
    diag = "" if passed else "ratio unbounded on grid"
    log.info(f"동치 상수: {M.name} ~ {N.name}: a={a:.6g}, b={b:.6g}, passed={passed}")
    return EquivalenceReport(a=a, b=b, passed=passed, grid_lo=float(t[0]), grid_hi=float(t[-1]), diagnostic=diag)
