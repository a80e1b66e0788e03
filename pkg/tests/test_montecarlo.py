import math

import numpy as np
import pytest

from src.distributions import constant, custom_table, pareto_q, uniform
from src.errors import InputError
from src.montecarlo import (
    RatioCase,
    aggregate,
    choose_aggregation,
    expect_max,
    expect_orlicz_norm,
    expect_pnorm,
    expect_tensor_pnorm,
    expected_max_exact,
    nested_norm,
    ratio_stability,
    simulate,
)
from src.orlicz import linearized_power, luxemburg_norm, power
from src.schemas import MCConfig


def cfg(**kw):
    base = {"replicates": 20_000, "seed": 12345, "block_elements": 4096}
    base.update(kw)
    return MCConfig(**base)


def test_seed_is_mandatory():
    with pytest.raises(InputError):
        simulate(lambda rng, m: rng.random(m), MCConfig(replicates=10), 1)


def test_same_seed_same_estimate():
    a = np.ones(5)
    e1 = expect_max(uniform(), a, cfg())
    e2 = expect_max(uniform(), a, cfg())
    assert e1.estimate == e2.estimate
    assert expect_max(uniform(), a, cfg(seed=1)).estimate != e1.estimate


def test_worker_count_does_not_change_results():
    a = np.ones(8)
    single = expect_pnorm(pareto_q(2.5), a, 2.0, cfg(workers=1))
    multi = expect_pnorm(pareto_q(2.5), a, 2.0, cfg(workers=4))
    assert single.estimate == multi.estimate
    assert single.dispersion == multi.dispersion


def test_streams_are_independent():
    v1 = simulate(lambda rng, m: rng.random(m), cfg(replicates=100), 1, (1,))
    v2 = simulate(lambda rng, m: rng.random(m), cfg(replicates=100), 1, (2,))
    assert not np.array_equal(v1, v2)


def test_expected_max_of_uniforms():
    # E max of n uniforms = n/(n+1)
    n = 4
    est = expect_max(uniform(), np.ones(n), cfg())
    assert est.aggregation == "mean"
    assert abs(est.estimate - n / (n + 1)) <= 4 * est.dispersion
    assert expected_max_exact(uniform(), np.ones(n)) == pytest.approx(n / (n + 1), rel=1e-8)


@pytest.mark.parametrize("d", [constant(2.0), uniform(0.5, 2.0), pareto_q(3.0)], ids=["constant", "uniform", "pareto"])
def test_expected_max_agrees_with_exact_quadrature_within_four_dispersions(d):
    a = np.array([1.0, 2.0, 0.5])
    exact = expected_max_exact(d, a)
    est = expect_max(d, a, cfg(replicates=40_000, aggregation="mean"))
    assert abs(est.estimate - exact) <= 4 * est.dispersion + 1e-12 * exact


def test_mean_and_median_of_means_agree_on_light_tails():
    a = np.ones(8)
    by_mean = expect_pnorm(uniform(), a, 2.0, cfg(aggregation="mean"))
    by_mom = expect_pnorm(uniform(), a, 2.0, cfg(aggregation="median-of-means"))
    assert by_mom.blocks == math.ceil(2 * math.log(100))
    # a block mean has sqrt(blocks) times the standard error of the full mean
    assert abs(by_mom.estimate - by_mean.estimate) <= 4 * math.sqrt(by_mom.blocks) * by_mean.dispersion


@pytest.mark.parametrize("d", [
    pareto_q(1.5), uniform(0.5, 2.0), custom_table([0.0, 1.0, 3.0], [1.0, 0.5, 0.0]),
], ids=["pareto", "uniform", "table"])
def test_samples_stay_inside_the_dkw_band(d):
    n = 20_000
    x = np.sort(d.sample(n, seed=99))
    F = 1.0 - np.asarray(d.sf(x), dtype=float)
    i = np.arange(1, n + 1)
    gap = max(np.max(np.abs(i / n - F)), np.max(np.abs((i - 1) / n - F)))
    # P(sup|F_n - F| > eps) <= 2 exp(-2 n eps^2) = 1e-6
    eps = math.sqrt(math.log(2.0 / 1e-6) / (2.0 * n))
    assert gap <= eps


def test_heavy_tail_uses_median_of_means():
    c = cfg()
    assert choose_aggregation(c, 1.5) == "median-of-means"
    assert choose_aggregation(c, math.nan) == "median-of-means"
    assert choose_aggregation(c, 3.0) == "mean"
    assert choose_aggregation(cfg(aggregation="mean"), 1.5) == "mean"
    est = expect_max(pareto_q(1.5), np.ones(3), c)
    assert est.aggregation == "median-of-means"
    assert est.blocks == math.ceil(2 * math.log(1 / c.delta))


def test_aggregate_mean_dispersion_is_standard_error():
    v = np.arange(100, dtype=float)
    est = aggregate(v, cfg(aggregation="mean"))
    assert est.estimate == pytest.approx(49.5)
    assert est.dispersion == pytest.approx(np.std(v, ddof=1) / 10.0)


def test_orlicz_norm_estimator_matches_p_norm_for_powers():
    a = np.ones(6)
    c = cfg(replicates=4000)
    by_norm = expect_orlicz_norm(uniform(), a, power(2.0), c)
    by_p = expect_pnorm(uniform(), a, 2.0, c)
    assert by_norm.estimate == pytest.approx(by_p.estimate, rel=1e-9)


def test_tensor_estimator_with_one_by_one_matrix():
    # ||a xi X||_p = a xi X
    est = expect_tensor_pnorm(uniform(), uniform(), [[2.0]], 3.0, cfg())
    assert abs(est.estimate - 2.0 * 0.25) <= 5 * est.dispersion + 1e-3
    est_inf = expect_tensor_pnorm(uniform(), uniform(), [[2.0]], math.inf, cfg())
    assert est_inf.estimate == pytest.approx(est.estimate, rel=1e-12)


def test_tensor_estimator_factorizes_for_rank_one_matrices():
    # ||(u_i v_j xi_i X_j)||_p = ||(u_i xi_i)||_p ||(v_j X_j)||_p, and xi, X are independent
    u, v = np.array([1.0, 2.0, 0.5]), np.array([0.3, 1.0, 1.5, 2.0])
    c = cfg(aggregation="mean")
    joint = expect_tensor_pnorm(uniform(), uniform(0.5, 2.0), np.outer(u, v), 3.0, c)
    left = expect_pnorm(uniform(), u, 3.0, c, stream=(1,))
    right = expect_pnorm(uniform(0.5, 2.0), v, 3.0, c, stream=(2,))
    product = left.estimate * right.estimate
    spread = math.hypot(joint.dispersion, right.estimate * left.dispersion, left.estimate * right.dispersion)
    assert abs(joint.estimate - product) <= 4 * spread


def test_nested_norm_for_power_two():
    A = np.array([[3.0, 4.0], [0.0, 1.0]])
    assert nested_norm(A, power(2.0), 2.0) == pytest.approx(math.sqrt(26.0), rel=1e-9)


def test_max_ratio_is_stable_for_pareto():
    d = pareto_q(2.5)
    cases = [RatioCase(weights=np.ones(n), d=d) for n in (4, 16, 64)]
    rep = ratio_stability("max", cases, cfg(replicates=5000), bound=3.0)
    assert rep.passed
    assert len(rep.rows) == 3
    assert all(r.ratio > 0 for r in rep.rows)


def test_lq_generation_ratio_is_stable():
    cases = [RatioCase(weights=np.ones(n), p=math.inf, q=1.5) for n in (4, 16, 64)]
    rep = ratio_stability("lq-generation", cases, cfg(replicates=5000), bound=3.0)
    assert rep.passed
    assert rep.rows[0].predicted == pytest.approx(4 ** (1 / 1.5))


def test_tensor_ratio_is_stable_for_linearized_power():
    M = linearized_power(1.7)
    rng = np.random.default_rng(2024)
    cases = [RatioCase(weights=rng.standard_normal((n, n)), M=M, p=2.0, q=1.5) for n in (4, 8, 16, 32)]
    rep = ratio_stability("tensor", cases, cfg(replicates=10_000), bound=3.0)
    assert rep.passed, rep.spread
    assert [r.n for r in rep.rows] == [4, 8, 16, 32]
    assert rep.rows[2].predicted == pytest.approx(nested_norm(cases[2].weights, M, 1.5))


def test_pnorm_inverse_ratio_uses_the_given_function():
    M = linearized_power(1.7)
    cases = [RatioCase(weights=np.ones(n), M=M, p=2.0) for n in (4, 16)]
    rep = ratio_stability("pnorm-inverse", cases, cfg(replicates=3000), bound=3.0)
    assert rep.rows[1].predicted == pytest.approx(luxemburg_norm(M, np.ones(16)))
    assert rep.passed


def test_unknown_theorem_is_rejected():
    with pytest.raises(InputError):
        ratio_stability("nope", [RatioCase(weights=np.ones(2), d=uniform())], cfg())
    with pytest.raises(InputError):
        ratio_stability("max", [], cfg())
