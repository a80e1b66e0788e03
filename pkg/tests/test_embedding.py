import math

import numpy as np
import pytest

from src.distributions import pareto_q, uniform
from src.embedding import check_two_concave, distortion_sweep, khintchine_sandwich, psi_l1_norm, rademacher
from src.errors import InputError, NotTwoConcaveError
from src.orlicz import linearized_power, power
from src.schemas import MCConfig


def cfg(**kw):
    base = {"replicates": 3000, "seed": 2024, "block_elements": 8192}
    base.update(kw)
    return MCConfig(**base)


def test_two_concavity():
    assert check_two_concave(linearized_power(1.7))
    assert check_two_concave(power(2.0))
    with pytest.raises(NotTwoConcaveError):
        check_two_concave(power(3.0))


def test_rademacher_signs():
    r = rademacher(np.random.default_rng(0), 10_000)
    assert set(np.unique(r)) == {-1.0, 1.0}
    assert abs(r.mean()) < 0.05


def test_psi_of_zero_matrix_is_zero():
    est = psi_l1_norm(np.zeros((3, 3)), linearized_power(1.7), 1.5, cfg())
    assert est.estimate == 0.0


def test_psi_is_homogeneous():
    M = linearized_power(1.7)
    A = np.array([[1.0, 0.5], [0.0, 2.0]])
    e1 = psi_l1_norm(A, M, 1.5, cfg())
    e2 = psi_l1_norm(3.0 * A, M, 1.5, cfg())
    # same draws, so the scaling is exact
    assert e2.estimate == pytest.approx(3.0 * e1.estimate, rel=1e-12)


def test_khintchine_sandwich_holds():
    rep = khintchine_sandwich(np.array([1.0, 2.0, 2.0]), cfg(replicates=20_000))
    assert rep.passed
    assert rep.upper == pytest.approx(3.0)
    assert rep.lower == pytest.approx(3.0 / np.sqrt(2.0))


def test_khintchine_rejects_non_finite():
    with pytest.raises(InputError):
        khintchine_sandwich([1.0, np.inf], cfg())


def test_distortion_sweep_reports_each_dimension():
    rep = distortion_sweep(linearized_power(1.7), 1.5, [2, 4], 4, cfg(replicates=1500), bound=10.0)
    assert [r.n for r in rep.rows] == [2, 4]
    assert all(r.matrices == 4 for r in rep.rows)
    assert all(r.max_ratio >= r.min_ratio > 0 for r in rep.rows)
    assert rep.stability == pytest.approx(max(r.proxy for r in rep.rows))
    assert rep.passed


def test_distortion_sweep_needs_two_concave_function():
    with pytest.raises(NotTwoConcaveError):
        distortion_sweep(power(3.0), 1.5, [2], 2, cfg())


def test_distortion_sweep_needs_seed():
    with pytest.raises(InputError):
        distortion_sweep(linearized_power(1.7), 1.5, [2], 2, MCConfig(replicates=100))


def _light(**kw):
    # pareto_q(3) and uniform draws have finite variance, so the mean and its standard error apply
    return {"xi": pareto_q(3.0), "X": uniform(), **kw}


def test_psi_is_invariant_under_full_sign_flip():
    M = linearized_power(1.7)
    A = np.array([[1.0, -0.5, 0.2], [0.0, 2.0, -1.0]])
    assert psi_l1_norm(-A, M, 1.5, cfg()).estimate == psi_l1_norm(A, M, 1.5, cfg()).estimate


def _close(e1, e2, k=4.0):
    return abs(e1.estimate - e2.estimate) <= k * math.hypot(e1.dispersion, e2.dispersion)


def test_psi_is_invariant_under_row_and_column_permutations():
    M = linearized_power(1.7)
    A = np.array([[1.0, 0.5, 0.0], [0.3, 2.0, 1.0], [0.0, 0.7, 1.5]])
    c = cfg(replicates=20_000)
    base = psi_l1_norm(A, M, 1.5, c, **_light())
    assert base.aggregation == "mean"
    permuted = psi_l1_norm(A[[2, 0, 1]][:, [1, 2, 0]], M, 1.5, c, stream=(1,), **_light())
    assert _close(base, permuted)


def test_psi_is_invariant_under_entrywise_signs():
    M = linearized_power(1.7)
    A = np.array([[1.0, 0.5], [0.3, 2.0]])
    signs = np.array([[1.0, -1.0], [-1.0, 1.0]])
    c = cfg(replicates=20_000)
    base = psi_l1_norm(A, M, 1.5, c, **_light())
    flipped = psi_l1_norm(signs * A, M, 1.5, c, stream=(1,), **_light())
    assert _close(base, flipped)


def test_single_entries_are_exchangeable():
    M = linearized_power(1.7)
    c = cfg(replicates=20_000)
    estimates = []
    for k, (i, j) in enumerate([(0, 0), (0, 2), (2, 1)]):
        A = np.zeros((3, 3))
        A[i, j] = 2.0
        estimates.append(psi_l1_norm(A, M, 1.5, c, stream=(k,), **_light()))
    expected = 2.0 * pareto_q(3.0).mean() * 0.5
    for est in estimates:
        assert abs(est.estimate - expected) <= 4 * est.dispersion
    assert _close(estimates[0], estimates[1]) and _close(estimates[1], estimates[2])


def test_one_by_one_psi_is_the_product_of_means():
    # E|a r xi X| = |a| E xi E X
    M = linearized_power(1.7)
    est = psi_l1_norm([[-1.5]], M, 1.5, cfg(replicates=40_000), **_light())
    expected = 1.5 * pareto_q(3.0).mean() * 0.5
    assert abs(est.estimate - expected) <= 4 * est.dispersion


def test_distortion_sweep_is_stable_across_dimensions():
    M = linearized_power(1.7)
    c = cfg(replicates=3000)
    rep = distortion_sweep(M, 1.5, [2, 4, 8, 16], 20, c, bound=4.0)
    assert [r.n for r in rep.rows] == [2, 4, 8, 16]
    assert all(r.matrices == 20 for r in rep.rows)
    assert rep.passed, rep.stability
    scaled = distortion_sweep(M, 1.5, [2, 4], 5, c, scale=5.0)
    plain = distortion_sweep(M, 1.5, [2, 4], 5, c)
    for a, b in zip(scaled.rows, plain.rows):
        assert a.min_ratio == pytest.approx(b.min_ratio, rel=1e-9)
        assert a.max_ratio == pytest.approx(b.max_ratio, rel=1e-9)
