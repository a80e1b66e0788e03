"""
분포 → Orlicz 함수 정방향 사상과 왕복 검증

정방향 사상은 세 구간으로 조립한다.
  - 작은 s: 멱꼬리(또는 유계 지지집합)에서 닫힌 형태 거듭제곱 분기
  - 중간:   로그 격자의 M, M', M'' 로 만든 5차 Hermite 표
  - 큰 s:   s ≥ 1/lo 에서 닫힌 형태 (선형 또는 s^q 꼬리)
닫힌 구간이 없으면 표 끝에서 거듭제곱 바닥(floor)과 접선 천장(ceiling)으로 잇는다.
꼬리 적분 ∫_[1/s,∞) 는 원자를 포함한다 (≥ 관례).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .conditions import check_integral_condition
from .config import Tolerances, resolve
from .distributions import (
    Distribution,
    certify_q_integrability,
    density_from_orlicz,
    distribution_from_orlicz_max,
)
from .errors import (
    AtomsPresentError,
    DivergentIntegralError,
    InputError,
    NotIntegrableError,
    QuadratureError,
)
from .numerics import quad
from .orlicz import AffineBranch, Branch, OrliczFunction, PowerBranch, TableBranch, default_grid
from .schemas import ConditionReport, DensityReport, DeviationReport

log = logging.getLogger("correspondence")

_NUDGE = 1e-12


# ---------------------------------------------------------------- 부분 적률

def _moment_columns(d: Distribution, r: float, ys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """오름차순 ys 에서 (∫_[0,y) x^r dP, ∫_[y,∞) x^r dP) 를 누적 계산"""
    pieces = np.array(
        [d.partial_moment(r, 0.0, float(ys[0]))]
        + [d.partial_moment(r, float(a), float(b)) for a, b in zip(ys[:-1], ys[1:])]
    )
    below = np.cumsum(pieces)
    top = d.partial_moment(r, float(ys[-1]), math.inf)
    above = top + np.concatenate([np.cumsum(pieces[:0:-1])[::-1], [0.0]])
    return below, above


def _require_moment(d: Distribution, r: float) -> float:
    idx = d.tail_index
    if not math.isnan(idx) and idx <= r:
        raise NotIntegrableError(f"E X^{r:g} is infinite for {d!r} (tail index {idx:g})")
    m = d.partial_moment(r)
    if not math.isfinite(m):
        raise NotIntegrableError(f"E X^{r:g} is infinite for {d!r}")
    return m


# ---------------------------------------------------------------- 사상 정의

class _ForwardMap:
    name: str
    exponent: float | None  # 천장 분기의 증가 지수 (None 이면 sM'/M 로 맞춤)

    def columns(self, s: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        raise NotImplementedError

    def low_exact(self) -> tuple[float, Branch] | None:
        return None

    def high_exact(self) -> tuple[float, Branch] | None:
        return None

    def exact_branches(self) -> list[Branch] | None:
        """모든 s 에서 닫힌 형태가 있으면 분기 목록 (표 없음)"""
        return None

    def splits(self) -> list[float]:
        return []

    def scale(self) -> float:
        return 1.0


@dataclass
class _QPowerMap(_ForwardMap):
    """
    s ↦ M_{X^q, p/q}(s^q). q=1 이면 M_{X,p}, 추가로 p=∞ 이면 M_X.

    M  = q/(p-q)·s^p A_p + p/(p-q)·s^q B_q - S
    M' = pq/(p-q)·(s^{p-1}A_p + s^{q-1}B_q)
    M''= pq/(p-q)·((p-1)s^{p-2}A_p + (q-1)s^{q-2}B_q)
    (A_r = ∫_[0,1/s) x^r dP, B_r = ∫_[1/s,∞) x^r dP, S = P(X ≥ 1/s))
    """
    d: Distribution
    p: float
    q: float
    name: str = "M"

    @property
    def exponent(self) -> float:
        return self.q

    def columns(self, s):
        d, p, q = self.d, self.p, self.q
        s = np.asarray(s, dtype=float)
        ys = 1.0 / s[::-1]
        _, Bq = _moment_columns(d, q, ys)
        Bq = Bq[::-1]
        S = np.asarray(d.sf(ys), dtype=float)[::-1]
        if math.isinf(p):
            f = np.asarray(d.pdf(ys), dtype=float)[::-1]
            M = s ** q * Bq - S
            M1 = q * s ** (q - 1) * Bq
            M2 = q * (q - 1) * s ** (q - 2) * Bq + q * f / s ** 3
        else:
            Ap, _ = _moment_columns(d, p, ys)
            Ap = Ap[::-1]
            k = p * q / (p - q)
            M = q / (p - q) * s ** p * Ap + p / (p - q) * s ** q * Bq - S
            M1 = k * (s ** (p - 1) * Ap + s ** (q - 1) * Bq)
            M2 = k * ((p - 1) * s ** (p - 2) * Ap + (q - 1) * s ** (q - 2) * Bq)
        return np.maximum(M, 0.0), M1, np.maximum(M2, 0.0)

    def _coef(self, alpha: float) -> float:
        p, q = self.p, self.q
        if math.isinf(p):
            return q / (alpha - q)
        return q / (p - q) * alpha / (p - alpha) + p / (p - q) * alpha / (alpha - q) - 1.0

    def low_exact(self):
        d, p, q = self.d, self.p, self.q
        if d.tail is not None:
            start = d.tail.start
            alphas = [a for _, a in d.tail.terms]
            if any(a <= q for a in alphas) or (math.isfinite(p) and any(abs(p - a) < 1e-12 for a in alphas)):
                return None
            terms = [(c * self._coef(a), a) for c, a in d.tail.terms]
            if math.isfinite(p):
                # 꼬리 시작점의 원자도 [0, 1/s) 에 들어간다
                head = d.partial_moment(p, 0.0, start) + d.atom_mass(start) * start ** p
                K = q / (p - q) * (head - sum(c * a * start ** (p - a) / (p - a) for c, a in d.tail.terms))
                if K != 0.0:
                    terms.insert(0, (K, p))
            s_low = 1.0 / start
            return s_low, PowerBranch(0.0, s_low, tuple(terms))
        if math.isfinite(d.hi):
            s_low = 1.0 / d.hi
            if math.isinf(p):
                return s_low, PowerBranch(0.0, s_low)
            return s_low, PowerBranch(0.0, s_low, ((q / (p - q) * d.partial_moment(p), p),))
        return None

    def _top(self, s_high: float, EXq: float) -> PowerBranch:
        """s ≥ 1/lo: 모든 질량이 [1/s, ∞) 에 있다"""
        p, q = self.p, self.q
        coef = EXq if math.isinf(p) else p / (p - q) * EXq
        if q == 1.0:
            return AffineBranch.of(s_high, math.inf, -1.0, coef)
        return PowerBranch(s_high, math.inf, ((coef, q),), const=-1.0)

    def high_exact(self):
        d = self.d
        if not d.lo > 0:
            return None
        s_high = 1.0 / d.lo
        return s_high, self._top(s_high, d.partial_moment(self.q))

    def exact_branches(self):
        """
        밀도가 구간별 상수 c_k (x ∈ [x_k, x_{k+1})) 이면 s ∈ [1/x_{k+1}, 1/x_k) 에서

            M(s) = q/(p-q)·P_k s^p + p/(p-q)·Q_k s^q - R_k + c_k·pq/((p+1)(q+1))·s^{-1}

        P_k = ∫_[0,x_k) x^p dP - c_k x_k^{p+1}/(p+1), Q_k = ∫_[x_{k+1},∞) x^q dP + c_k x_{k+1}^{q+1}/(q+1),
        R_k = S(x_{k+1}) + c_k x_{k+1}. p = ∞ 이면 Q_k s^q - R_k + c_k·q/(q+1)·s^{-1}.
        """
        d, p, q = self.d, self.p, self.q
        if d.linear_survival is None or d.atoms:
            return None
        xs, ss = (np.asarray(v, dtype=float) for v in d.linear_survival)
        c = -np.diff(ss) / np.diff(xs)
        finite_p = math.isfinite(p)

        def pieces(r: float) -> np.ndarray:
            return c * (xs[1:] ** (r + 1) - xs[:-1] ** (r + 1)) / (r + 1)

        mq = pieces(q)
        above_q = np.concatenate([np.cumsum(mq[::-1])[::-1][1:], [0.0]])
        if finite_p:
            mp = pieces(p)
            below_p = np.concatenate([[0.0], np.cumsum(mp)[:-1]])
            first = PowerBranch(0.0, 1.0 / xs[-1], ((q / (p - q) * float(mp.sum()), p),))
        else:
            first = PowerBranch(0.0, 1.0 / xs[-1])

        branches: list[Branch] = [first]
        for k in reversed(range(c.size)):
            lo = 1.0 / xs[k + 1]
            hi = math.inf if xs[k] == 0.0 else 1.0 / xs[k]
            Q = c[k] * xs[k + 1] ** (q + 1) / (q + 1) + above_q[k]
            R = c[k] * xs[k + 1] + ss[k + 1]
            if finite_p:
                P = below_p[k] - c[k] * xs[k] ** (p + 1) / (p + 1)
                terms = [(q / (p - q) * P, p), (p / (p - q) * Q, q), (c[k] * p * q / ((p + 1) * (q + 1)), -1.0)]
            else:
                terms = [(Q, q), (c[k] * q / (q + 1), -1.0)]
            branches.append(PowerBranch(lo, hi, tuple((float(a), e) for a, e in terms if a != 0.0), const=-float(R)))
        if xs[0] > 0.0:
            branches.append(self._top(1.0 / xs[0], float(mq.sum())))
        return branches

    def splits(self):
        d = self.d
        xs = [loc for loc, _ in d.atoms] + list(d.breakpoints) + [d.lo, d.hi]
        return [1.0 / x for x in xs if 0 < x < math.inf]

    def scale(self):
        return 1.0 / self.d.mean()


@dataclass
class _GeneralNMap(_ForwardMap):
    """M(s) = E N(sX), M' = E[X N'(sX)], M'' = E[X² N''(sX)] + N' 의 꺾임 기여"""
    d: Distribution
    N: OrliczFunction
    name: str = "M"

    @property
    def exponent(self) -> float | None:
        return 1.0 if self.N.linear_tail else None

    def columns(self, s):
        d, N = self.d, self.N
        kinks = [float(b) for b in N.breakpoints]
        jumps = [float(N.derivative(b) - N.left_derivative(b)) for b in kinks]
        M, M1, M2 = [], [], []
        for sv in np.asarray(s, dtype=float):
            pts = [b / sv for b in kinks]
            M.append(d.expect(lambda x: float(N(sv * x)), points=pts))
            M1.append(d.expect(lambda x: x * float(N.derivative(sv * x)), points=pts))
            extra = sum(J * b * b * d.pdf(b / sv) / sv ** 3 for b, J in zip(kinks, jumps) if J)
            M2.append(d.expect(lambda x: x * x * float(N.derivative(sv * x, 2)), points=pts) + extra)
        return np.array(M), np.array(M1), np.maximum(np.array(M2), 0.0)

    def low_exact(self):
        first = self.N.branches[0]
        if not (isinstance(first, PowerBranch) and first.const == 0.0 and math.isfinite(self.d.hi)):
            return None
        s_low = first.hi / self.d.hi
        try:
            terms = tuple((c * _require_moment(self.d, e), e) for c, e in first.terms)
        except NotIntegrableError:
            return None
        return s_low, PowerBranch(0.0, s_low, terms)

    def high_exact(self):
        N, d = self.N, self.d
        if not (N.linear_tail and N.kink is not None and d.lo > 0):
            return None
        last = N.branches[-1]
        s_high = N.kink / d.lo
        return s_high, AffineBranch.of(s_high, math.inf, last.intercept, last.slope * d.mean())

    def splits(self):
        d = self.d
        xs = [loc for loc, _ in d.atoms] + list(d.breakpoints) + [d.lo, d.hi]
        return [float(b) / x for b in self.N.breakpoints for x in xs if 0 < x < math.inf]

    def scale(self):
        return self.N.unit_level / self.d.mean()


# ---------------------------------------------------------------- 조립

def _floor(s: float, m: float, m1: float) -> PowerBranch:
    """[0, s) 거듭제곱 바닥: c·t^k, k = sM'/M"""
    if m <= 0:
        return PowerBranch(0.0, s)
    k = max(1.0, s * m1 / m)
    return PowerBranch(0.0, s, ((m / s ** k, k),))


def _ceiling(s: float, m: float, m1: float, exponent: float | None) -> PowerBranch:
    """[s, ∞) 천장: 값과 기울기를 맞춘 const + c·t^g"""
    g = exponent if exponent is not None else (max(1.0, s * m1 / m) if m > 0 else 1.0)
    if g == 1.0:
        return AffineBranch.of(s, math.inf, m - m1 * s, m1)
    c = m1 / (g * s ** (g - 1))
    return PowerBranch(s, math.inf, ((c, g),), const=m - c * s ** g)


def _assemble(fmap: _ForwardMap, tol: Tolerances) -> OrliczFunction:
    exact = fmap.exact_branches()
    if exact is not None:
        out = OrliczFunction(exact, name=fmap.name, tol=tol)
        bps = out.breakpoints
        log.debug(f"{fmap.name}: 닫힌 형태 분기 {len(exact)}개")
        _assert_convex(out, np.geomspace(bps.min() / 10.0, bps.max() * 10.0, 512))
        return out

    low = fmap.low_exact()
    high = fmap.high_exact()
    span = 10.0 ** tol.table_decades
    if low is not None and high is not None:
        a, b = low[0], high[0]
    elif low is not None:
        a = low[0]
        b = max(fmap.scale() * span, a * 100.0)
    elif high is not None:
        b = high[0]
        a = min(fmap.scale() / span, b / 100.0)
    else:
        a, b = fmap.scale() / span, fmap.scale() * span

    branches: list[Branch] = []
    first_vals = last_vals = None
    if b > a * (1 + 1e-12):
        cuts = sorted({a, b, *[c for c in fmap.splits() if a * (1 + 1e-9) < c < b * (1 - 1e-9)]})
        segments = []
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            n = max(2, int(math.ceil(math.log10(hi / lo) * tol.table_per_decade)) + 1)
            knots = np.geomspace(lo, hi, n)
            knots[0], knots[-1] = lo, hi
            evals = knots.copy()
            # 구간 양 끝에서는 안쪽 한쪽 극한값
            evals[0] *= 1 + _NUDGE
            evals[-1] *= 1 - _NUDGE
            segments.append((lo, hi, knots, evals))
        all_evals = np.concatenate([seg[3] for seg in segments])
        M, M1, M2 = fmap.columns(all_evals)
        log.debug(f"{fmap.name}: table [{a:.4g}, {b:.4g}] segments={len(segments)} knots={all_evals.size}")
        offset = 0
        for lo, hi, knots, _ in segments:
            sl = slice(offset, offset + knots.size)
            offset += knots.size
            branches.append(TableBranch(lo=lo, hi=hi, knots=knots, values=M[sl], d1=M1[sl], d2=M2[sl]))
        first_vals = (M[0], M1[0])
        last_vals = (M[-1], M1[-1])

    if low is not None:
        branches.insert(0, low[1])
    else:
        if first_vals is None:
            M, M1, _ = fmap.columns(np.array([a]))
            first_vals = (M[0], M1[0])
        branches.insert(0, _floor(a, *first_vals))
    if high is not None:
        branches.append(high[1])
    else:
        if last_vals is None:
            M, M1, _ = fmap.columns(np.array([b]))
            last_vals = (M[0], M1[0])
        branches.append(_ceiling(b, *last_vals, fmap.exponent))

    out = OrliczFunction(branches, name=fmap.name, tol=tol)
    _assert_convex(out, np.geomspace(a / 10.0, b * 10.0, 512))
    return out


def _assert_convex(M: OrliczFunction, grid: np.ndarray, limit: float = 1e-6) -> None:
    defect = M.convexity_defect(grid)
    if defect > limit:
        raise QuadratureError(f"{M.name}: convexity defect {defect:.3g} on the assembly grid")


# ---------------------------------------------------------------- 공개 사상

def orlicz_from_max(d: Distribution, tol: Tolerances | None = None) -> OrliczFunction:
    """M_X(s) = s∫_[1/s,∞) x dP - P(X ≥ 1/s)"""
    tol = resolve(tol)
    _require_moment(d, 1.0)
    M = _assemble(_QPowerMap(d, math.inf, 1.0, name=f"M_X[{d.kind}]"), tol)
    log.info(f"정방향 사상 (max): {d!r} -> {M!r}")
    return M


def orlicz_from_p_norm(d: Distribution, p: float, tol: Tolerances | None = None) -> OrliczFunction:
    """
    M_{X,p}(s) = s^p/(p-1)·∫_[0,1/s) x^p dP + p/(p-1)·s∫_[1/s,∞) x dP - P(X ≥ 1/s)

    p = ∞ 이면 orlicz_from_max 와 같다.
    """
    if not p > 1:
        raise InputError(f"p must be in (1, inf], got {p}")
    if math.isinf(p):
        return orlicz_from_max(d, tol)
    tol = resolve(tol)
    _require_moment(d, 1.0)
    M = _assemble(_QPowerMap(d, p, 1.0, name=f"M_X,p[{d.kind}, p={p:g}]"), tol)
    log.info(f"정방향 사상 (p-norm, p={p:g}): {d!r} -> {M!r}")
    return M


def orlicz_from_q_power(d: Distribution, p: float, q: float, tol: Tolerances | None = None) -> OrliczFunction:
    """s ↦ M_{X^q, p/q}(s^q). q = 1 이면 orlicz_from_p_norm 과 같다."""
    if not q >= 1:
        raise InputError(f"q must be >= 1, got {q}")
    if not q < p:
        raise InputError(f"need q < p, got q={q}, p={p}")
    if q == 1.0:
        return orlicz_from_p_norm(d, p, tol)
    tol = resolve(tol)
    if d.source is not None:
        cert = certify_q_integrability(d, q)
        if not cert.certified:
            raise NotIntegrableError(f"X^{q:g} is not integrable: {cert.diagnostic}")
    else:
        _require_moment(d, q)
    M = _assemble(_QPowerMap(d, p, q, name=f"M_X^q[{d.kind}, p={p:g}, q={q:g}]"), tol)
    log.info(f"정방향 사상 (q-power, p={p:g}, q={q:g}): {d!r} -> {M!r}")
    return M


def orlicz_from_general_N(d: Distribution, N: OrliczFunction, tol: Tolerances | None = None) -> OrliczFunction:
    """M(s) = ∫ N(sx) dP(x)"""
    tol = resolve(tol)
    EX = _require_moment(d, 1.0)
    if not N.normalized:
        log.warning(f"{N.name} is not normalized; the result will not be either")
    name = f"M_N[{d.kind}, {N.name}]"
    first = N.branches[0]
    if len(N.branches) == 1 and isinstance(first, PowerBranch) and first.const == 0.0:
        terms = tuple((c * (EX if e == 1.0 else _require_moment(d, e)), e) for c, e in first.terms)
        M = OrliczFunction([PowerBranch(0.0, math.inf, terms)], name=name, tol=tol)
    else:
        M = _assemble(_GeneralNMap(d, N, name=name), tol)
    if N.normalized and not abs(M.normalization_integral() - 1.0) <= 1e-6:
        log.warning(f"{name}: normalization integral {M.normalization_integral():.10g} deviates from 1")
    log.info(f"정방향 사상 (general N): {d!r}, {N.name} -> {M!r}, normalized={M.normalized}")
    return M


# ---------------------------------------------------------------- 이중적분 표현

def forward_double_integral(d: Distribution, s: float, p: float = math.inf, check_monotone: bool = True) -> float:
    """
    정의식의 이중적분을 직접 계산 (Fubini 형태와의 교차 검증용)

    p < ∞: p/(p-1)∫₀^s [t^{p-1}∫_{x≤1/t} x^p dP + ∫_{x>1/t} x dP] dt
    p = ∞: ∫₀^s ∫_{x≥1/t} x dP dt
    피적분함수는 t 에 대해 증가해야 하며 위반은 적분 실패로 간주한다.
    """
    if s <= 0:
        return 0.0

    if math.isinf(p):
        def inner(t: float) -> float:
            return d.partial_moment(1.0, 1.0 / t, math.inf)
        factor = 1.0
    else:
        def inner(t: float) -> float:
            y = 1.0 / t
            return t ** (p - 1) * (d.partial_moment(p, 0.0, y) + d.atom_mass(y) * y ** p) + d.partial_moment(1.0, y, math.inf) - d.atom_mass(y) * y
        factor = p / (p - 1)

    if check_monotone:
        probe = np.array([inner(float(t)) for t in np.geomspace(s * 1e-6, s, 64)])
        if np.any(np.diff(probe) < -1e-9 * np.maximum(np.abs(probe[1:]), 1e-300)):
            raise QuadratureError("inner integrand of the double integral is not increasing")
    pts = [1.0 / x for x in [loc for loc, _ in d.atoms] + list(d.breakpoints) + [d.lo, d.hi] if 0 < x < math.inf]
    return factor * quad(inner, 0.0, s, points=pts)


def _deviation(label: str, F: Callable, G: Callable, grid: np.ndarray, tolerance: float) -> DeviationReport:
    g = np.asarray(grid, dtype=float)
    f_vals = np.asarray(F(g), dtype=float)
    g_vals = np.asarray(G(g), dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(g_vals != 0, np.abs(f_vals - g_vals) / np.abs(g_vals), np.abs(f_vals))
    k = int(np.argmax(rel))
    dev = float(rel[k])
    log.info(f"{label}: max_rel_dev={dev:.3g} at s={g[k]:.4g} (tol {tolerance:g})")
    return DeviationReport(label=label, grid=g.tolist(), max_rel_dev=dev, argmax=float(g[k]),
                           tolerance=tolerance, passed=bool(dev <= tolerance))


def compare_representations(d: Distribution, p: float, grid: Sequence[float] | None = None,
                            tolerance: float = 1e-7, tol: Tolerances | None = None) -> DeviationReport:
    """Fubini 닫힌 형태(표) 대 이중적분"""
    M = orlicz_from_p_norm(d, p, tol)
    g = np.asarray(grid, dtype=float) if grid is not None else np.geomspace(M.unit_level * 1e-2, M.unit_level * 10, 12)
    direct = np.vectorize(lambda s: forward_double_integral(d, float(s), p))
    return _deviation(f"representations[{d.kind}, p={p:g}]", M, direct, g, tolerance)


# ---------------------------------------------------------------- 왕복 / 복원

def roundtrip_M_to_M(M: OrliczFunction, p: float, grid=None, tol: Tolerances | None = None) -> DeviationReport:
    """M → (밀도) → M_{X,p} 의 (0, t₁] 위 최대 상대 편차"""
    tol = resolve(tol)
    d = distribution_from_orlicz_max(M, tol) if math.isinf(p) else density_from_orlicz(M, p, tol)
    back = orlicz_from_p_norm(d, p, tol)
    t1 = M.kink if M.kink is not None else M.unit_level
    g = np.geomspace(t1 * 1e-6, t1, 256) if grid is None else np.asarray(grid, dtype=float)
    return _deviation(f"roundtrip[{M.name}, p={p:g}]", back, M, g, tol.roundtrip_tol)


def density_from_MXp(d: Distribution, p: float, grid=None, tol: Tolerances | None = None,
                     M: OrliczFunction | None = None) -> DensityReport:
    """
    M_{X,p} 을 만들고 그 2·3계 도함수로 밀도를 복원해 d 의 밀도와 비교

    f(x) = (1 - 2/p) x^{-3} M''(1/x) - (1/p) x^{-4} M'''(1/x),  p = ∞ 이면 x^{-3} M_X''(1/x).
    M 을 넘기면 그 함수를 d 의 대응 함수로 보고 검사한다.
    """
    tol = resolve(tol)
    if d.atoms:
        raise AtomsPresentError(f"{d!r} has atoms: density reconstruction needs a continuous density")
    if not p > 1:
        raise InputError(f"p must be in (1, inf], got {p}")
    _require_moment(d, 1.0)
    if M is None:
        M = orlicz_from_p_norm(d, p, tol)
    if grid is None:
        x = np.asarray(d.quantile(np.linspace(0.005, 0.995, 199)), dtype=float)
        x = np.unique(x[x > 0])
    else:
        x = np.sort(np.asarray(grid, dtype=float))
    # 매듭점 바로 옆은 한쪽 도함수가 섞이므로 뺀다
    bps = np.asarray([*d.breakpoints, d.lo, d.hi, *(1.0 / M.breakpoints[M.breakpoints > 0])], dtype=float)
    bps = bps[np.isfinite(bps) & (bps > 0)]
    if bps.size:
        near = np.min(np.abs(x[:, None] - bps[None, :]) / bps[None, :], axis=1) < 1e-6
        x = x[~near]
    if x.size == 0:
        raise InputError(f"no grid point of {d!r} lies away from breakpoints")
    f = np.asarray(d.pdf(x), dtype=float)
    s = 1.0 / x
    M2 = np.asarray(M.derivative(s, 2), dtype=float)
    if math.isinf(p):
        rebuilt = x ** -3 * M2
    else:
        M3 = np.asarray(M.derivative(s, 3), dtype=float)
        rebuilt = (1 - 2 / p) * x ** -3 * M2 - (1 / p) * x ** -4 * M3
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(f > 0, np.abs(rebuilt - f) / np.where(f > 0, f, 1.0), np.abs(rebuilt))
    k = int(np.argmax(rel))
    err = float(rel[k])
    mass = d.total_mass()
    diagnostic = ""
    if not err <= tol.reconstruction_tol:
        diagnostic = f"rebuilt density {rebuilt[k]:.6g} vs {f[k]:.6g} at x={x[k]:.6g}"
    elif abs(mass - 1.0) > tol.reconstruction_tol:
        diagnostic = f"density integrates to {mass:.6g}, not 1"
    log.info(f"밀도 복원 ({d!r}, p={p:g}): max_rel_err={err:.3g} at x={x[k]:.4g}, 질량={mass:.6g}")
    return DensityReport(p=p, grid=x.tolist(), max_rel_err=err, argmax=float(x[k]),
                         tolerance=tol.reconstruction_tol, mass=mass, passed=not diagnostic,
                         diagnostic=diagnostic)


# ---------------------------------------------------------------- q-거듭제곱 닫힌 형태

@dataclass(frozen=True)
class QPowerResult:
    function: OrliczFunction
    C: float
    coefficient: float
    report: ConditionReport | None = None


def closed_form_qpower(M: OrliczFunction, q: float, tol: Tolerances | None = None) -> QPowerResult:
    """
    F(s) = qM(s) + q(q-1)s^q∫₀^s M(y)y^{-q-1}dy 를 분기별로 정확히 계산

    거듭제곱 분기 κ + Σc·y^e 는 κ + Σc[q + q(q-1)/(e-q)]s^e + K·s^q 가 되고,
    표 분기와 e = q 항이 있는 분기는 F, F', F'' 로 표를 다시 만든다.
    상계 계수 q(1 + C(q-1)) 의 C 는 적분 조건 검사에서 가져온다.
    """
    tol = resolve(tol)
    if not q >= 1:
        raise InputError(f"q must be >= 1, got {q}")
    if q == 1.0:
        return QPowerResult(function=M, C=0.0, coefficient=1.0)
    report = check_integral_condition(M, q, tol=tol)
    if not report.passed:
        raise DivergentIntegralError(f"integral condition violated for {M.name}, q={q:g}: {report.diagnostic}")
    C = report.constants["C"]

    branches: list[Branch] = []
    I_lo = 0.0
    for br in M.branches:
        lo, hi = br.lo, br.hi
        if isinstance(br, PowerBranch) and all(e != q for c, e in br.terms if c):
            kappa = br.const
            K = I_lo
            if lo > 0:
                K += kappa * lo ** (-q) / q - sum(c * lo ** (e - q) / (e - q) for c, e in br.terms if c)
            K *= q * (q - 1)
            terms = [(c * (q + q * (q - 1) / (e - q)), e) for c, e in br.terms if c]
            if K != 0.0:
                terms.append((K, q))
            branches.append(PowerBranch(lo, hi, tuple(terms), const=kappa))
        else:
            knots = br.knots if isinstance(br, TableBranch) else np.geomspace(lo, hi, 64)
            inc = [0.0] + [br.weighted_integral(q, float(a), float(b)) for a, b in zip(knots[:-1], knots[1:])]
            I = I_lo + np.cumsum(inc)
            m, m1, m2 = br.value(knots), br.deriv(knots, 1), br.deriv(knots, 2)
            F = q * m + q * (q - 1) * knots ** q * I
            F1 = q * m1 + q * q * (q - 1) * knots ** (q - 1) * I + q * (q - 1) * m / knots
            F2 = q * m2 + q * q * (q - 1) ** 2 * knots ** (q - 2) * I + q * (q - 1) ** 2 * m / knots ** 2 + q * (q - 1) * m1 / knots
            branches.append(TableBranch(lo=lo, hi=hi, knots=knots, values=F, d1=F1, d2=F2))
        if math.isfinite(hi):
            I_lo += br.weighted_integral(q, lo, hi)

    F = OrliczFunction(branches, name=f"qpower[{M.name}, q={q:g}]", tol=tol)
    coef = q * (1 + C * (q - 1))
    log.info(f"q-거듭제곱 닫힌 형태: {M.name}, q={q:g}, C={C:.6g}, bound coefficient={coef:.6g}")
    return QPowerResult(function=F, C=C, coefficient=coef, report=report)


def check_qpower_bound(result: QPowerResult, M: OrliczFunction, grid=None, rtol: float = 1e-9) -> ConditionReport:
    """F(s) ≤ q(1 + C(q-1))·M(s) 격자 확인"""
    g = default_grid(M) if grid is None else np.asarray(grid, dtype=float)
    Ms = M(g)
    pos = Ms > 0
    ratio = result.function(g[pos]) / Ms[pos]
    k = int(np.argmax(ratio))
    worst = float(ratio[k])
    passed = worst <= result.coefficient * (1 + rtol)
    return ConditionReport(condition="qpower-bound", grid=g.tolist(),
                           constants={"coefficient": result.coefficient, "max_ratio": worst},
                           passed=bool(passed), argmax=float(g[pos][k]),
                           diagnostic="" if passed else "F exceeds q(1+C(q-1))M")


def qpower_identity(M: OrliczFunction, p: float, q: float, grid=None, tolerance: float = 1e-4,
                    tol: Tolerances | None = None) -> DeviationReport:
    """closed_form_qpower(M, q) 대 orlicz_from_q_power(density_from_orlicz(M, p), p, q)"""
    tol = resolve(tol)
    closed = closed_form_qpower(M, q, tol).function
    d = distribution_from_orlicz_max(M, tol) if math.isinf(p) else density_from_orlicz(M, p, tol)
    forward = orlicz_from_q_power(d, p, q, tol)
    g = default_grid(M, tol) if grid is None else np.asarray(grid, dtype=float)
    return _deviation(f"qpower-identity[{M.name}, p={p:g}, q={q:g}]", forward, closed, g, tolerance)
