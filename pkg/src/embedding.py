"""
ℓ_q^n(ℓ_M^n) → L₁ 사상 Ψ_n 의 경험적 왜곡 검증

Ψ_n(A) 의 L₁ 노름은 E|Σ a_ij r_ij ξ_i X_j| (r 은 Rademacher 부호).
분모는 중첩 Luxemburg 노름 ‖(‖(a_ij)_j‖_M)_i‖_q.
실제 Banach–Mazur 거리가 아니라 비율의 최솟값/최댓값만 보고한다.
"""
from __future__ import annotations

import logging
import math
from typing import Sequence

import numpy as np

from .distributions import Distribution, density_from_orlicz, pareto_q
from .errors import InputError, NotTwoConcaveError
from .montecarlo import aggregate, nested_norm, simulate, joint_tail_index, as_matrix, substream
from .orlicz import AffineBranch, OrliczFunction
from .schemas import DistortionReport, DistortionRow, KhintchineReport, MCConfig, MCEstimate

log = logging.getLogger("embedding")

_STREAM_MATRICES = 101
_STREAM_PSI = 102
_STREAM_KHINTCHINE = 103


def check_two_concave(M: OrliczFunction, points: int = 128, rtol: float = 1e-9) -> bool:
    """
    매끄러운 분기에서 M''' ≤ 0 확인 (꺾임점은 제외)

    Raises:
        NotTwoConcaveError: M''' > 0 인 점이 있을 때
    """
    for br in M.branches:
        if isinstance(br, AffineBranch):
            continue
        lo = br.lo if br.lo > 0 else (br.hi if math.isfinite(br.hi) else 1.0) * 1e-6
        hi = br.hi if math.isfinite(br.hi) else max(lo, 1.0) * 1e6
        t = np.geomspace(lo * (1 + 1e-9), hi * (1 - 1e-9), points)
        d3 = br.deriv(t, 3)
        scale = np.abs(br.deriv(t, 2)) / t
        bad = d3 > rtol * np.maximum(scale, 1e-300)
        if np.any(bad):
            raise NotTwoConcaveError(f"M'''({float(t[bad][0]):.6g}) = {float(d3[bad][0]):.3g} > 0 for {M.name}")
    return True


def rademacher(rng: np.random.Generator, size) -> np.ndarray:
    return rng.integers(0, 2, size=size, dtype=np.int8).astype(float) * 2.0 - 1.0


def psi_l1_norm(
    A,
    M: OrliczFunction,
    q: float,
    cfg: MCConfig,
    stream: Sequence[int] = (),
    xi: Distribution | None = None,
    X: Distribution | None = None,
) -> MCEstimate:
    """E|Σ_ij a_ij r_ij ξ_i X_j|, ξ ~ pareto_q(q), X ~ density_from_orlicz(M, 2)"""
    Am = as_matrix(A)
    check_two_concave(M)
    xi = xi or pareto_q(q)
    X = X or density_from_orlicz(M, 2.0)
    if not np.any(Am):
        return MCEstimate(estimate=0.0, dispersion=0.0, samples=cfg.replicates, seed=int(cfg.seed),
                          aggregation="mean")
    n, m_cols = Am.shape

    def kernel(rng, m):
        r = rademacher(rng, (m, n, m_cols))
        s = xi.draw(rng, (m, n))
        x = X.draw(rng, (m, m_cols))
        return np.abs(np.einsum("ij,rij,ri,rj->r", Am, r, s, x))

    values = simulate(kernel, cfg, n * m_cols, (_STREAM_PSI, *stream))
    return aggregate(values, cfg, joint_tail_index(xi, X))


def _ensemble(n: int, count: int, rng: np.random.Generator) -> list[tuple[str, np.ndarray]]:
    """항등, 계수 1, 단일 원소, 이후 표준정규 행렬"""
    mats = [
        ("identity", np.eye(n)),
        ("rank-one", np.outer(rng.standard_normal(n), rng.standard_normal(n))),
        ("single-entry", np.eye(n, 1) @ np.eye(1, n)),
    ]
    while len(mats) < count:
        mats.append(("normal", rng.standard_normal((n, n))))
    return mats[:count]


def distortion_sweep(
    M: OrliczFunction,
    q: float,
    n_list: Sequence[int],
    matrices_per_n: int,
    cfg: MCConfig,
    bound: float | None = None,
    scale: float = 1.0,
) -> DistortionReport:
    """n 별 psi_l1_norm(A)/‖A‖_{ℓ_q(ℓ_M)} 의 최솟값·최댓값과 n 에 걸친 안정성"""
    if matrices_per_n < 1:
        raise InputError("matrices_per_n must be positive")
    if cfg.seed is None:
        raise InputError("Monte Carlo runs need an explicit seed")
    check_two_concave(M)
    xi = pareto_q(q)
    X = density_from_orlicz(M, 2.0)
    rows = []
    for n in n_list:
        mats = _ensemble(int(n), matrices_per_n, substream(cfg.seed, (_STREAM_MATRICES, int(n))))
        ratios = []
        for k, (kind, A) in enumerate(mats):
            A = scale * A
            est = psi_l1_norm(A, M, q, cfg, stream=(int(n), k), xi=xi, X=X)
            ratios.append(est.estimate / nested_norm(A, M, q))
            log.debug(f"n={n} {kind}#{k}: ratio={ratios[-1]:.4g}")
        lo, hi = float(min(ratios)), float(max(ratios))
        rows.append(DistortionRow(n=int(n), min_ratio=lo, max_ratio=hi, proxy=hi / lo, matrices=len(mats)))
        log.info(f"왜곡 n={n}: min={lo:.4g} max={hi:.4g} proxy={hi / lo:.4g}")
    stability = max(r.proxy for r in rows)
    passed = bound is None or stability <= bound
    log.info(f"왜곡 안정성: {stability:.4g}, bound={bound}, passed={passed}")
    return DistortionReport(rows=rows, stability=stability, bound=bound, passed=bool(passed))


def khintchine_sandwich(c, cfg: MCConfig, stream: Sequence[int] = (), k_sigma: float = 4.0) -> KhintchineReport:
    """E_r|Σ c_ij r_ij| 가 [‖c‖₂/√2, ‖c‖₂] 안에 있는지 (분산 k_sigma 배 허용)"""
    w = np.asarray(c, dtype=float).ravel()
    if not np.all(np.isfinite(w)):
        raise InputError("coefficients have non-finite entries")
    norm2 = float(np.linalg.norm(w))
    values = simulate(lambda rng, m: np.abs(rademacher(rng, (m, w.size)) @ w), cfg, w.size,
                      (_STREAM_KHINTCHINE, *stream))
    est = aggregate(values, cfg)
    lower, upper = norm2 / math.sqrt(2.0), norm2
    slack = k_sigma * est.dispersion
    passed = lower - slack <= est.estimate <= upper + slack
    return KhintchineReport(estimate=est.estimate, dispersion=est.dispersion, lower=lower, upper=upper,
                            passed=bool(passed))
