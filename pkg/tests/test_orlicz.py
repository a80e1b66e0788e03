import math

import numpy as np
import pytest

from src.errors import InputError, NotNormalizableError
from src.orlicz import (
    AffineBranch,
    OrliczFunction,
    PowerBranch,
    conjugate,
    equivalence_constants,
    hinge,
    is_admissible,
    linearized_power,
    luxemburg_norm,
    luxemburg_norm_rows,
    normalize_by_linearization,
    pareto_p_orlicz,
    piecewise_power,
    power,
    young_power,
)


def test_norm_of_3_4_under_square_is_5():
    assert luxemburg_norm(power(2.0), [3.0, 4.0]) == pytest.approx(5.0, rel=1e-12)


def test_norm_zero_vector_and_sign_invariance():
    M = linearized_power(1.7)
    assert luxemburg_norm(M, [0.0, 0.0]) == 0.0
    assert luxemburg_norm(M, [-1.0, 2.0]) == pytest.approx(luxemburg_norm(M, [1.0, -2.0]), rel=1e-14)


def test_norm_rejects_non_finite():
    with pytest.raises(InputError):
        luxemburg_norm(power(2.0), [1.0, math.nan])


def test_norm_is_homogeneous_and_solves_the_level_equation():
    M = linearized_power(1.5)
    x = np.array([0.3, 1.2, 2.5, 0.01])
    t = luxemburg_norm(M, x)
    assert float(np.sum(M(x / t))) == pytest.approx(1.0, abs=1e-9)
    assert luxemburg_norm(M, 3.0 * x) == pytest.approx(3.0 * t, rel=1e-10)


@pytest.mark.parametrize("M", [power(2.0), linearized_power(1.7), hinge(1.0), pareto_p_orlicz(3.0, 1.5)], ids=lambda M: M.name)
def test_norm_satisfies_the_triangle_inequality(M):
    rng = np.random.default_rng(11)
    for _ in range(200):
        n = int(rng.integers(1, 9))
        x = rng.standard_normal(n) * rng.lognormal(0.0, 1.0)
        y = rng.standard_normal(n) * rng.lognormal(0.0, 1.0)
        lhs = luxemburg_norm(M, x + y)
        assert lhs <= (luxemburg_norm(M, x) + luxemburg_norm(M, y)) * (1 + 1e-9) + 1e-12


@pytest.mark.parametrize("M", [power(2.0), linearized_power(1.7), hinge(1.0), pareto_p_orlicz(3.0, 1.5)], ids=lambda M: M.name)
def test_norm_is_monotone_in_absolute_values(M):
    rng = np.random.default_rng(12)
    for _ in range(200):
        n = int(rng.integers(1, 9))
        x = rng.standard_normal(n)
        # |y_i| >= |x_i| entrywise, signs arbitrary
        y = (np.abs(x) + rng.exponential(0.5, n)) * rng.choice([-1.0, 1.0], n)
        assert luxemburg_norm(M, x) <= luxemburg_norm(M, y) * (1 + 1e-9) + 1e-12


def test_hinge_norm_hits_the_bracket_end():
    # M(t) = (t-1)+ , ||(2)|| = 1
    assert luxemburg_norm(hinge(1.0), [2.0]) == pytest.approx(1.0, rel=1e-12)


def test_row_norms_match_scalar_norm():
    M = linearized_power(1.7)
    A = np.array([[1.0, 2.0, 0.5], [0.0, 0.0, 0.0], [3.0, -1.0, 4.0]])
    rows = luxemburg_norm_rows(M, A)
    assert rows[1] == 0.0
    for k in (0, 2):
        assert rows[k] == pytest.approx(luxemburg_norm(M, A[k]), rel=1e-9)


def test_linearized_power_kink_and_normalization():
    M = linearized_power(1.5)
    t1 = 2.0 ** (2.0 / 3.0)
    assert M.kink == pytest.approx(t1, rel=1e-12)
    assert M.linear_tail
    assert M.normalization_integral() == pytest.approx(1.0, abs=1e-12)
    assert M.normalization_integral("quad") == pytest.approx(1.0, abs=1e-8)
    assert M.normalized
    # 접선 연장이므로 C1
    assert M.smoothness == "C1"
    assert M.tail_slope == pytest.approx(3.0 / t1, rel=1e-12)


def test_strict_linearization_puts_kink_at_unit_level():
    M = linearized_power(1.5, strict=True)
    assert M.kink == pytest.approx(1.0, rel=1e-12)
    assert M(1.0) == pytest.approx(1.0, rel=1e-12)
    assert M.normalization_integral() == pytest.approx(1.0, abs=1e-12)
    assert M.smoothness == "C0"


def test_strict_linearization_fails_when_slope_too_small():
    # t M'(t) - M(t) = 2 > 1 at M^-1(1) = 1
    with pytest.raises(NotNormalizableError):
        linearized_power(3.0, strict=True)


def test_power_rejects_exponent_below_one():
    with pytest.raises(InputError):
        power(0.5)


def test_branch_layout_is_validated():
    with pytest.raises(InputError):
        OrliczFunction([PowerBranch(0.0, 1.0, ((1.0, 2.0),))])
    with pytest.raises(InputError):
        OrliczFunction([PowerBranch(0.0, 1.0, ((1.0, 2.0),)), AffineBranch.of(2.0, math.inf, -1.0, 2.0)])


def test_piecewise_power_is_continuous_and_convex():
    M = piecewise_power([1.0, 2.0], [1.5, 2.0, 3.0])
    for b in (1.0, 2.0):
        assert M(b) == pytest.approx(M.left_derivative(b, 0), rel=1e-12)
    assert M.convexity_defect(np.geomspace(1e-3, 10.0, 400)) <= 1e-12


def test_pareto_p_orlicz_is_continuous_at_the_switch_point():
    p, q = 3.0, 1.5
    M = pareto_p_orlicz(p, q)
    s_star = (q - 1) ** (-1.0 / q)
    expected = (p + q - 1) / ((p - 1) * (q - 1))
    assert M.branches[0].value(np.array(s_star)) == pytest.approx(expected, rel=1e-12)
    assert M.branches[1].value(np.array(s_star)) == pytest.approx(expected, rel=1e-12)
    assert M.normalized


def test_spec_round_trip_keeps_values():
    M = linearized_power(1.7)
    back = OrliczFunction.from_spec(M.to_spec().model_dump(mode="json"))
    t = np.geomspace(1e-3, 50.0, 64)
    np.testing.assert_allclose(back(t), M(t), rtol=1e-14)
    assert back.kink == pytest.approx(M.kink)


def test_spec_with_wrong_kink_is_rejected():
    spec = linearized_power(1.7).to_spec().model_dump(mode="json")
    spec["kink"] = 0.5
    with pytest.raises(InputError):
        OrliczFunction.from_spec(spec)


def test_conjugate_of_young_power():
    # (t^r/r)* = s^r'/r'
    M = young_power(3.0)
    Ms = conjugate(M)
    s = np.array([0.5, 1.0, 2.0])
    np.testing.assert_allclose(Ms(s), s ** 1.5 / 1.5, rtol=1e-8)


def test_conjugate_is_infinite_beyond_tail_slope():
    M = linearized_power(1.5)
    Ms = conjugate(M)
    assert math.isinf(Ms(M.tail_slope * 1.01))
    assert Ms(M.tail_slope) == pytest.approx(1.0, rel=1e-12)
    assert Ms(0.0) == 0.0


def test_equivalence_constants_for_scaled_power():
    M = power(2.0)
    N = M.scaled(4.0, 1.0)
    rep = equivalence_constants(M, N)
    assert rep.passed
    assert is_admissible(M, N, rep.a, rep.b, np.geomspace(1e-3, 1.0, 64))
    assert rep.a * rep.b <= 4.0 + 1e-9


def test_normalize_cuts_before_the_next_piece():
    # t^2 up to 1, t^3 beyond: t*M'(t) - M(t) = t^2 reaches 1 exactly at the break
    M = normalize_by_linearization(piecewise_power([1.0], [2.0, 3.0]))
    assert M.kink == pytest.approx(1.0, rel=1e-12)
    assert M.tail_slope == pytest.approx(2.0, rel=1e-12)
    assert M(3.0) == pytest.approx(5.0, rel=1e-12)
    assert M.normalization_integral() == pytest.approx(1.0, abs=1e-10)
