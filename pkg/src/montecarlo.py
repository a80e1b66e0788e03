"""
기댓값 범함수의 Monte Carlo 추정과 비율 안정성 검증

재현성 규약
  - 반복(replicate)은 block_elements 기준 청크로 나뉘고, 청크 k 는
    SeedSequence(seed, spawn_key=(stream..., k)) 하위 스트림을 쓴다.
  - 청크 크기는 workers 와 무관하고 결과는 청크 순서대로 모으므로
    workers 수를 바꿔도 추정값이 비트 단위로 같다.
꼬리 지수 ≤ 2 (분산 무한) 이면 auto 집계는 median-of-means 를 고른다.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .correspondence import orlicz_from_general_N, orlicz_from_max, orlicz_from_p_norm
from .distributions import Distribution, density_from_orlicz, distribution_from_orlicz_max, pareto_q
from .errors import InputError
from .numerics import quad
from .orlicz import OrliczFunction, luxemburg_norm, luxemburg_norm_rows
from .schemas import MCConfig, MCEstimate, RatioReport, RatioRow

log = logging.getLogger("montecarlo")

Kernel = Callable[[np.random.Generator, int], np.ndarray]

THEOREMS = ("max", "pnorm", "lq-generation", "tensor", "max-inverse", "pnorm-inverse", "tensor-x", "general-n")


# ---------------------------------------------------------------- 실행 / 집계

def substream(seed: int, stream: Sequence[int]) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(int(s) for s in stream)))


def simulate(kernel: Kernel, cfg: MCConfig, per_replicate: int, stream: Sequence[int] = ()) -> np.ndarray:
    """
    kernel(rng, m) 은 반복 m 개의 값을 돌려준다.

    Returns:
        길이 cfg.replicates 의 반복값 배열 (청크 순서)
    """
    if cfg.seed is None:
        raise InputError("Monte Carlo runs need an explicit seed")
    chunk = max(1, cfg.block_elements // max(1, per_replicate))
    sizes = [chunk] * (cfg.replicates // chunk)
    if cfg.replicates % chunk:
        sizes.append(cfg.replicates % chunk)

    def work(k: int) -> np.ndarray:
        return np.asarray(kernel(substream(cfg.seed, (*stream, k)), sizes[k]), dtype=float)

    if cfg.workers == 1 or len(sizes) == 1:
        parts = [work(k) for k in range(len(sizes))]
    else:
        with ThreadPoolExecutor(max_workers=cfg.workers) as ex:
            parts = list(ex.map(work, range(len(sizes))))
    log.debug(f"simulate: replicates={cfg.replicates} chunks={len(sizes)} stream={tuple(stream)}")
    return np.concatenate(parts)


def choose_aggregation(cfg: MCConfig, tail_index: float) -> str:
    if cfg.aggregation != "auto":
        return cfg.aggregation
    if math.isnan(tail_index) or tail_index <= 2.0:
        return "median-of-means"
    return "mean"


def aggregate(values: np.ndarray, cfg: MCConfig, tail_index: float = math.inf) -> MCEstimate:
    """평균(표준오차) 또는 median-of-means(블록 평균의 MAD)"""
    v = np.asarray(values, dtype=float)
    mode = choose_aggregation(cfg, tail_index)
    if mode == "mean":
        est = float(v.mean())
        disp = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
        return MCEstimate(estimate=est, dispersion=disp, samples=int(v.size), seed=int(cfg.seed), aggregation="mean")
    k = min(v.size, max(1, math.ceil(2.0 * math.log(1.0 / cfg.delta))))
    means = np.array([b.mean() for b in np.array_split(v, k)])
    est = float(np.median(means))
    disp = float(np.median(np.abs(means - est)))
    return MCEstimate(estimate=est, dispersion=disp, samples=int(v.size), seed=int(cfg.seed),
                      aggregation="median-of-means", blocks=k)


def _weights(a) -> np.ndarray:
    w = np.asarray(a, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise InputError("weights must be a non-empty vector")
    if not np.all(np.isfinite(w)):
        raise InputError("weights have non-finite entries")
    return w


def as_matrix(A) -> np.ndarray:
    m = np.asarray(A, dtype=float)
    if m.ndim != 2 or m.size == 0:
        raise InputError("expected a non-empty matrix")
    if not np.all(np.isfinite(m)):
        raise InputError("matrix has non-finite entries")
    return m


def _pnorm_rows(V: np.ndarray, p: float) -> np.ndarray:
    if math.isinf(p):
        return np.max(np.abs(V), axis=1)
    return np.linalg.norm(V, ord=p, axis=1)


# ---------------------------------------------------------------- 추정량

def expect_max(d: Distribution, a, cfg: MCConfig, stream: Sequence[int] = ()) -> MCEstimate:
    """E max_i |a_i X_i|"""
    w = np.abs(_weights(a))
    values = simulate(lambda rng, m: np.max(w * d.draw(rng, (m, w.size)), axis=1), cfg, w.size, stream)
    return aggregate(values, cfg, d.tail_index)


def expect_pnorm(d: Distribution, a, p: float, cfg: MCConfig, stream: Sequence[int] = ()) -> MCEstimate:
    """E ‖(a_i X_i)‖_p"""
    if not p >= 1:
        raise InputError(f"p must be >= 1, got {p}")
    w = np.abs(_weights(a))
    values = simulate(lambda rng, m: _pnorm_rows(w * d.draw(rng, (m, w.size)), p), cfg, w.size, stream)
    return aggregate(values, cfg, d.tail_index)


def expect_orlicz_norm(d: Distribution, a, N: OrliczFunction, cfg: MCConfig, stream: Sequence[int] = ()) -> MCEstimate:
    """E ‖(a_i X_i)‖_N (행별 Luxemburg 노름)"""
    w = np.abs(_weights(a))
    values = simulate(lambda rng, m: luxemburg_norm_rows(N, w * d.draw(rng, (m, w.size))), cfg, w.size, stream)
    return aggregate(values, cfg, d.tail_index)


def expect_tensor_pnorm(d_xi: Distribution, d_X: Distribution, A, p: float, cfg: MCConfig,
                        stream: Sequence[int] = ()) -> MCEstimate:
    """E_ξ E_X ‖(a_ij ξ_i X_j)‖_p"""
    if not p >= 1:
        raise InputError(f"p must be >= 1, got {p}")
    Am = np.abs(as_matrix(A))
    n, m_cols = Am.shape

    if math.isinf(p):
        def kernel(rng, m):
            xi = d_xi.draw(rng, (m, n))
            x = d_X.draw(rng, (m, m_cols))
            return np.max(Am[None, :, :] * xi[:, :, None] * x[:, None, :], axis=(1, 2))
    else:
        Ap = Am ** p

        def kernel(rng, m):
            xi = d_xi.draw(rng, (m, n))
            x = d_X.draw(rng, (m, m_cols))
            return np.einsum("ri,ij,rj->r", xi ** p, Ap, x ** p) ** (1.0 / p)

    values = simulate(kernel, cfg, n * m_cols, stream)
    return aggregate(values, cfg, joint_tail_index(d_xi, d_X))


def joint_tail_index(*ds: Distribution) -> float:
    idx = [d.tail_index for d in ds]
    return math.nan if any(math.isnan(i) for i in idx) else min(idx)


def expected_max_exact(d: Distribution, a) -> float:
    """
    E max_i |a_i X_i| = ∫₀^∞ 1 - Π_i (1 - S(x/|a_i|)) dx

    1 - Π(1-S) 는 -expm1(Σ log1p(-S)) 로 계산해 작은 S 에서 정밀도를 지킨다.
    """
    w = np.abs(_weights(a))
    w = w[w > 0]
    if w.size == 0:
        return 0.0
    vals, counts = np.unique(w, return_counts=True)

    def integrand(x: float) -> float:
        S = np.clip(d.sf(x / vals), 0.0, 1.0)
        if np.any(S >= 1.0):
            return 1.0
        return float(-np.expm1(np.dot(counts, np.log1p(-S))))

    xs = [loc for loc, _ in d.atoms] + list(d.breakpoints) + [d.lo, d.hi]
    pts = [float(v * x) for v in vals for x in xs if 0 < x < math.inf]
    upper = float(vals.max() * d.hi) if math.isfinite(d.hi) else math.inf
    return quad(integrand, 0.0, upper, points=pts)


# ---------------------------------------------------------------- 비율 안정성

@dataclass(frozen=True)
class RatioCase:
    """
    비율 안정성 한 점의 입력

    weights 는 벡터 (tensor 계열은 행렬). 이론별로 필요한 필드만 채운다.
      max, pnorm:             d (+ p)
      lq-generation:          xi, p, q
      tensor:                 M, p, q (ξ, X 는 M 에서 생성)
      max-inverse:            M
      pnorm-inverse:          M, p
      tensor-x:               d, p, q
      general-n:              d, N
    """
    weights: np.ndarray
    d: Distribution | None = None
    xi: Distribution | None = None
    M: OrliczFunction | None = None
    N: OrliczFunction | None = None
    p: float = math.inf
    q: float | None = None
    label: str = field(default="")

    @property
    def n(self) -> int:
        return int(np.asarray(self.weights).shape[0])


def nested_norm(A, M: OrliczFunction, q: float) -> float:
    """‖(‖(a_ij)_j‖_M)_i‖_q"""
    rows = luxemburg_norm_rows(M, as_matrix(A))
    return float(np.linalg.norm(rows, ord=q))


class _Derived:
    """사례 사이에서 재사용하는 유도 객체 (분포/Orlicz 함수는 불변이므로 id 로 캐시)"""

    def __init__(self):
        self._cache: dict[tuple, object] = {}

    def get(self, key: tuple, build: Callable[[], object]):
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]


def _evaluate(theorem: str, case: RatioCase, cfg: MCConfig, stream: tuple[int, ...], derived: _Derived) -> tuple[MCEstimate, float]:
    a = np.asarray(case.weights, dtype=float)
    if theorem == "max":
        MX = derived.get(("MX", id(case.d)), lambda: orlicz_from_max(case.d))
        return expect_max(case.d, a, cfg, stream), luxemburg_norm(MX, a)
    if theorem == "pnorm":
        MXp = derived.get(("MXp", id(case.d), case.p), lambda: orlicz_from_p_norm(case.d, case.p))
        return expect_pnorm(case.d, a, case.p, cfg, stream), luxemburg_norm(MXp, a)
    if theorem == "lq-generation":
        xi = case.xi or derived.get(("xi", case.q), lambda: pareto_q(case.q))
        return expect_pnorm(xi, a, case.p, cfg, stream), float(np.linalg.norm(a, ord=case.q))
    if theorem == "tensor":
        xi = case.xi or derived.get(("xi", case.q), lambda: pareto_q(case.q))
        X = case.d or derived.get(("X", id(case.M), case.p), lambda: density_from_orlicz(case.M, case.p))
        return expect_tensor_pnorm(xi, X, a, case.p, cfg, stream), nested_norm(a, case.M, case.q)
    if theorem == "max-inverse":
        X = case.d or derived.get(("Xmax", id(case.M)), lambda: distribution_from_orlicz_max(case.M))
        return expect_max(X, a, cfg, stream), luxemburg_norm(case.M, a)
    if theorem == "pnorm-inverse":
        X = case.d or derived.get(("X", id(case.M), case.p), lambda: density_from_orlicz(case.M, case.p))
        return expect_pnorm(X, a, case.p, cfg, stream), luxemburg_norm(case.M, a)
    if theorem == "tensor-x":
        xi = case.xi or derived.get(("xi", case.q), lambda: pareto_q(case.q))
        MXp = derived.get(("MXp", id(case.d), case.p), lambda: orlicz_from_p_norm(case.d, case.p))
        return expect_tensor_pnorm(xi, case.d, a, case.p, cfg, stream), nested_norm(a, MXp, case.q)
    if theorem == "general-n":
        MN = derived.get(("MN", id(case.d), id(case.N)), lambda: orlicz_from_general_N(case.d, case.N))
        return expect_orlicz_norm(case.d, a, case.N, cfg, stream), luxemburg_norm(MN, a)
    raise InputError(f"unknown theorem id {theorem!r}")


def ratio_stability(theorem: str, cases: Sequence[RatioCase], cfg: MCConfig, bound: float | None = None) -> RatioReport:
    """
    사례별 (경험적 기댓값) / (예측 노름) 과 n 에 걸친 spread = max/min

    상수 자체가 아니라 spread 의 유계성을 검증한다.
    """
    if theorem not in THEOREMS:
        raise InputError(f"unknown theorem id {theorem!r}")
    if not cases:
        raise InputError("ratio_stability needs at least one case")
    derived = _Derived()
    rows = []
    code = THEOREMS.index(theorem)
    for k, case in enumerate(cases):
        est, predicted = _evaluate(theorem, case, cfg, (code, k), derived)
        ratio = est.estimate / predicted if predicted > 0 else math.inf
        rows.append(RatioRow(n=case.n, estimate=est.estimate, dispersion=est.dispersion,
                             predicted=predicted, ratio=ratio))
        log.info(f"{theorem}: n={case.n} estimate={est.estimate:.6g}±{est.dispersion:.2g} "
                 f"predicted={predicted:.6g} ratio={ratio:.4g}")
    ratios = np.array([r.ratio for r in rows])
    finite = bool(np.all(np.isfinite(ratios)) and np.all(ratios > 0))
    spread = float(ratios.max() / ratios.min()) if finite else math.inf
    passed = finite and (bound is None or spread <= bound)
    log.info(f"비율 안정성 {theorem}: spread={spread:.4g}, bound={bound}, passed={passed}")
    return RatioReport(theorem=theorem, rows=rows, spread=spread, bound=bound, passed=passed)
