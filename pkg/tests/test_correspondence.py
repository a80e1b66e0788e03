import math
from dataclasses import replace

import numpy as np
import pytest

from src.correspondence import (
    check_qpower_bound,
    closed_form_qpower,
    compare_representations,
    density_from_MXp,
    forward_double_integral,
    orlicz_from_general_N,
    orlicz_from_max,
    orlicz_from_p_norm,
    orlicz_from_q_power,
    qpower_identity,
    roundtrip_M_to_M,
)
from src.distributions import (
    Distribution,
    PowerTail,
    constant,
    custom_table,
    density_from_orlicz,
    pareto_q,
    uniform,
)
from src.errors import AtomsPresentError, DivergentIntegralError, InputError, NotIntegrableError
from src.orlicz import TableBranch, equivalence_constants, linearized_power, pareto_p_orlicz, power


def test_max_map_of_uniform():
    M = orlicz_from_max(uniform())
    s = np.array([0.5, 1.0, 1.5, 3.0, 20.0])
    expected = np.where(s <= 1.0, 0.0, (s + 1.0 / s - 2.0) / 2.0)
    np.testing.assert_allclose(M(s), expected, rtol=1e-6, atol=1e-12)


def test_p_norm_map_of_uniform_below_one():
    M = orlicz_from_p_norm(uniform(), 2.0)
    s = np.array([0.1, 0.5, 0.9])
    np.testing.assert_allclose(M(s), s ** 2 / 3.0, rtol=1e-12)


@pytest.mark.parametrize("p,q", [(3.0, 1.5), (2.0, 1.5), (math.inf, 1.5), (4.0, 2.5)])
def test_p_norm_map_of_pareto_matches_explicit_formula(p, q):
    M = orlicz_from_p_norm(pareto_q(q), p)
    explicit = pareto_p_orlicz(p, q)
    s = np.geomspace(1e-2, 10.0, 64)
    np.testing.assert_allclose(M(s), explicit(s), rtol=1e-9)


def test_max_map_of_constant_is_hinge():
    M = orlicz_from_max(constant(2.0))
    s = np.array([0.1, 0.5, 1.0, 4.0])
    np.testing.assert_allclose(M(s), np.maximum(2.0 * s - 1.0, 0.0), atol=1e-12)


def test_forward_maps_need_a_mean():
    with pytest.raises(NotIntegrableError):
        orlicz_from_max(_infinite_mean())
    with pytest.raises(InputError):
        orlicz_from_p_norm(uniform(), 1.0)


def _infinite_mean():
    # S(x) = x^(-1/2) on [1, inf)
    return Distribution(
        kind="custom_table", params={}, lo=1.0, hi=math.inf,
        survival_fn=lambda x: np.power(np.maximum(x, 1.0), -0.5),
        density_fn=lambda x: np.where(x >= 1.0, 0.5 * np.power(np.maximum(x, 1.0), -1.5), 0.0),
        tail=PowerTail(start=1.0, terms=((1.0, 0.5),)),
    )


@pytest.mark.parametrize("r", [1.5, 1.7, 1.9])
@pytest.mark.parametrize("p", [2.0, 3.0])
def test_roundtrip_from_orlicz_function(r, p):
    rep = roundtrip_M_to_M(linearized_power(r), p)
    assert rep.passed, rep
    assert rep.max_rel_dev <= 1e-4


def test_roundtrip_on_random_linearized_powers():
    rng = np.random.default_rng(7)
    for _ in range(50):
        p = float(rng.uniform(2.0, 4.0))
        r = float(rng.uniform(1.4, min(1.95, p - 0.1)))
        rep = roundtrip_M_to_M(linearized_power(r), p)
        assert rep.passed, (r, p, rep.max_rel_dev)


def test_roundtrip_for_max_construction():
    rep = roundtrip_M_to_M(linearized_power(1.7), math.inf)
    assert rep.passed


def test_generated_function_is_normalized_and_convex():
    d = density_from_orlicz(linearized_power(1.7), 3.0)
    M = orlicz_from_p_norm(d, 3.0)
    assert M.normalized
    assert M.convexity_defect(np.geomspace(1e-3, 1e3, 400)) <= 1e-6


@pytest.mark.parametrize("d,p", [
    (pareto_q(1.5), 3.0), (pareto_q(2.5), 4.0), (uniform(), 2.0), (uniform(), 3.0), (uniform(), math.inf),
    (uniform(0.5, 2.0), 3.0), (custom_table([0.0, 1.0, 3.0], [1.0, 0.5, 0.0]), 2.5),
    (custom_table([0.2, 0.7, 1.5, 4.0], [1.0, 0.6, 0.1, 0.0]), math.inf),
])
def test_density_reconstruction(d, p):
    rep = density_from_MXp(d, p)
    assert rep.passed, rep.diagnostic
    assert rep.max_rel_err <= 1e-6
    assert rep.mass == pytest.approx(1.0, abs=1e-6)


def test_piecewise_constant_density_gives_closed_form_map():
    # uniform[0,1], p=2: s - 1 + 1/(3s) for s >= 1
    M = orlicz_from_p_norm(uniform(), 2.0)
    s = np.array([1.0, 1.5, 4.0, 50.0])
    np.testing.assert_allclose(M(s), s - 1.0 + 1.0 / (3.0 * s), rtol=1e-12)
    assert not any(isinstance(b, TableBranch) for b in M.branches)


@pytest.mark.parametrize("p", [2.0, 3.0, math.inf])
def test_density_reconstruction_rejects_wrong_density(p):
    d = uniform()
    tripled = replace(d, density_fn=lambda x: np.where((x >= 0) & (x <= 1), 3.0, 0.0))
    rep = density_from_MXp(tripled, p)
    assert not rep.passed
    assert rep.max_rel_err == pytest.approx(2.0 / 3.0, rel=1e-6)


def test_density_reconstruction_rejects_function_of_another_law():
    M = orlicz_from_p_norm(uniform(), 2.0)
    rep = density_from_MXp(uniform(0.0, 2.0), 2.0, M=M)
    assert not rep.passed
    assert "rebuilt density" in rep.diagnostic


def test_density_reconstruction_differentiates_the_built_map(monkeypatch):
    def refuse(*args, **kwargs):
        raise RuntimeError("forward map requested")

    monkeypatch.setattr("src.correspondence.orlicz_from_p_norm", refuse)
    with pytest.raises(RuntimeError, match="forward map requested"):
        density_from_MXp(uniform(), 2.0)


def test_density_reconstruction_needs_a_continuous_law():
    with pytest.raises(AtomsPresentError):
        density_from_MXp(density_from_orlicz(linearized_power(1.5), 2.0), 2.0)


def test_fubini_form_matches_double_integral():
    rep = compare_representations(pareto_q(1.5), 3.0)
    assert rep.passed
    s = 0.7
    direct = forward_double_integral(uniform(), s * 2.0, math.inf)
    assert direct == pytest.approx(float(orlicz_from_max(uniform())(s * 2.0)), rel=1e-6)


def test_general_n_with_constant_one_reproduces_n():
    N = linearized_power(1.7)
    M = orlicz_from_general_N(constant(1.0), N)
    s = np.geomspace(1e-3, 100.0, 50)
    np.testing.assert_allclose(M(s), N(s), rtol=1e-12)


@pytest.mark.parametrize("d", [uniform(), pareto_q(3.0)], ids=["uniform", "pareto3"])
@pytest.mark.parametrize("p", [2.5, 4.0])
def test_general_n_with_kinked_power_is_equivalent_to_p_norm_map(d, p):
    N = linearized_power(p)
    grid = np.geomspace(N.kink * 1e-4, N.kink, 200)
    rep = equivalence_constants(orlicz_from_general_N(d, N), orlicz_from_p_norm(d, p), grid=grid)
    assert rep.passed
    assert math.isfinite(rep.a) and math.isfinite(rep.b)
    assert rep.a >= 1.0 and rep.b >= 1.0


def test_general_n_with_single_power():
    d = uniform()
    M = orlicz_from_general_N(d, power(2.0))
    assert M(3.0) == pytest.approx(9.0 / 3.0, rel=1e-10)


def test_general_n_table_region_is_convex_and_increasing():
    M = orlicz_from_general_N(pareto_q(2.5), linearized_power(1.7))
    s = np.geomspace(1e-2, 10.0, 80)
    assert np.all(np.diff(M(s)) > 0)
    assert M.convexity_defect(s) <= 1e-6


def test_q_power_map_reduces_to_p_norm_when_q_is_one():
    d = pareto_q(2.0)
    s = np.geomspace(0.05, 5.0, 20)
    np.testing.assert_allclose(orlicz_from_q_power(d, 3.0, 1.0)(s), orlicz_from_p_norm(d, 3.0)(s), rtol=1e-14)


def test_q_power_map_rejects_non_integrable_power():
    with pytest.raises(NotIntegrableError):
        orlicz_from_q_power(pareto_q(1.5), 3.0, 1.7)
    with pytest.raises(InputError):
        orlicz_from_q_power(pareto_q(2.5), 2.0, 2.2)


def test_closed_form_qpower_coefficient_and_bound():
    M = linearized_power(1.7)
    res = closed_form_qpower(M, 1.5)
    assert res.C == pytest.approx(5.0, rel=1e-6)
    assert res.coefficient == pytest.approx(1.5 * (1 + 5.0 * 0.5), rel=1e-6)
    assert check_qpower_bound(res, M).passed


def test_closed_form_qpower_on_pure_power():
    # F(s) = [q + q(q-1)/(r-q)] s^r
    res = closed_form_qpower(power(1.7), 1.5)
    assert res.function(2.0) == pytest.approx(5.25 * 2.0 ** 1.7, rel=1e-12)


def test_closed_form_qpower_diverges_at_critical_exponent():
    with pytest.raises(DivergentIntegralError):
        closed_form_qpower(power(1.5), 1.5)


@pytest.mark.parametrize("p,q,r", [(2.0, 1.5, 1.7), (3.0, 1.5, 1.7), (3.0, 2.2, 2.5)])
def test_qpower_identity(p, q, r):
    rep = qpower_identity(linearized_power(r), p, q)
    assert rep.passed, rep
    assert rep.max_rel_dev <= 1e-4
