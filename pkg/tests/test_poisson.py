import json

import numpy as np
import pytest

from modelframes.analysis import DEFAULT_SCHEDULE, correlation, gaussian, indicator_interval, inner_product, zero_function
from modelframes.bumps import BumpSpec, bump_ft, bump_time
from modelframes.cutproject import build_model_set
from modelframes.errors import ConfigurationError, MembershipError, ResolutionError, TruncationError
from modelframes.poisson import (
    bessel_bound,
    bracket,
    bracket_coefficient,
    dual_table,
    mean_bracket_check,
    plancherel_sum_check,
    poisson_sides,
    poisson_verify,
    table_for_means,
)


@pytest.fixture(scope="module")
def spec(window):
    return BumpSpec(window, 0.5, 2)


@pytest.fixture(scope="module")
def patch50(scheme, window):
    return build_model_set(scheme, window, (0.0, 0.0), 50.0)


@pytest.fixture(scope="module")
def wide_table(scheme, spec):
    f = gaussian()
    return table_for_means(scheme, spec, [gaussian(1, 1.3)], DEFAULT_SCHEDULE)


T_GRID = np.linspace(-2, 2, 101)


def test_poisson_gaussian(patch50, spec):
    rep = poisson_verify(patch50, spec, gaussian(), T_GRID)
    assert rep.passed and rep.max_abs_residual <= 1e-6
    d = json.loads(rep.to_json())
    assert set(d) >= {"residuals", "max_abs_residual", "truncation", "verdict", "tolerance"}
    assert d["truncation"]["weight_floor"] == 1e-10


def test_poisson_doubling_reduces_residual(scheme, window, patch50, spec):
    base = poisson_verify(patch50, spec, gaussian(), T_GRID)
    P = base.truncation["dual_p2_radius"]
    bigger = build_model_set(scheme, window, (0.0, 0.0), 100.0)
    doubled = poisson_verify(bigger, spec, gaussian(), T_GRID, floor=0.0, p2_radius=2 * P)
    assert doubled.max_abs_residual < base.max_abs_residual


def test_poisson_zero_function(patch50, spec):
    lhs, rhs = poisson_sides(patch50, dual_table(patch50.scheme, spec, (-6, 6)), zero_function(), T_GRID)
    assert np.all(lhs == 0) and np.all(rhs == 0)


def test_poisson_translated(patch50, spec, rng):
    base = poisson_verify(patch50, spec, gaussian(), T_GRID)
    for v in rng.uniform(-1, 1, 3):
        rep = poisson_verify(patch50, spec, gaussian().translate(v), T_GRID)
        assert abs(rep.max_abs_residual - base.max_abs_residual) <= 1e-8


def test_poisson_truncation_error(scheme, window, spec):
    small = build_model_set(scheme, window, (0.0, 0.0), 2.0)
    with pytest.raises(TruncationError) as info:
        poisson_verify(small, spec, gaussian(1, 0.3), T_GRID)
    assert info.value.tails["primal"] > 1e-7


def test_bracket_requires_table():
    with pytest.raises(ConfigurationError):
        bracket(gaussian(), gaussian(), None, 0.0)


def test_bracket_zero_and_sesquilinear(wide_table, rng):
    f, g = gaussian(1, 0.9), gaussian(1, 1.2).translate(0.4)
    t = rng.uniform(-5, 5, 20)
    assert np.all(bracket(f, zero_function(), wide_table, t) == 0)
    c = 0.3 - 1.7j
    np.testing.assert_allclose(bracket(f, g.scale(c), wide_table, t), np.conj(c) * bracket(f, g, wide_table, t), atol=1e-14)
    np.testing.assert_allclose(bracket(f, g, wide_table, t), np.conj(bracket(g, f, wide_table, t)), atol=1e-14)


def test_absolute_bracket_nonnegative(wide_table, rng):
    f = gaussian(1, 1.1).translate(0.3)
    t = rng.uniform(-50, 50, 50)
    vals = bracket(f, f, wide_table.as_absolute(), t)
    assert np.all(vals.real >= 0) and np.all(np.abs(vals.imag) < 1e-14)


def test_bracket_index_shift(scheme, spec):
    # re-indexing gamma* -> gamma* - eta0 moves the argument by p1*(eta0)
    tab = dual_table(scheme, spec, (-12, 12))
    eta0 = scheme.dual.generator @ np.array([1, 0])
    f = gaussian()
    t = 0.37
    shifted = bracket(f, f, tab, t + eta0[0])[0]
    p1 = tab.p1 - eta0[0]
    w = bump_ft(spec, -((tab.p2 - eta0[1]) + eta0[1])) / scheme.covolume
    manual = np.sum(w * np.abs(f.ft(t - p1)) ** 2)
    assert shifted == pytest.approx(manual, abs=1e-13)


def test_bracket_coefficient_origin(wide_table, patch50):
    f = gaussian()
    pair = bracket_coefficient(f, f, wide_table, patch50, 0.0)
    assert pair.direct == pytest.approx(bump_time(wide_table.spec, 0.0) * inner_product(f, f).value)


def test_bracket_coefficient_smallest_positive(wide_table, patch50):
    f = gaussian()
    lam = patch50.values[patch50.values > 0][:3]
    for pair in bracket_coefficient(f, f, wide_table, patch50, lam):
        assert pair.difference <= 1e-2
        assert pair.birkhoff.residuals_decreasing()


def test_bracket_coefficient_membership(wide_table, patch50):
    with pytest.raises(MembershipError):
        bracket_coefficient(gaussian(), gaussian(), wide_table, patch50, 0.5)


def test_bracket_coefficient_disjoint(scheme, spec, patch50):
    f = indicator_interval(0.3).modulate(-1.0)
    g = indicator_interval(0.3).modulate(1.0)
    tab = dual_table(scheme, spec, (-1010, 1010), floor=1e-8)
    pair = bracket_coefficient(f, g, tab, patch50, patch50.values[patch50.values > 0][0])
    assert pair.direct == 0 and pair.birkhoff.value == 0


def test_birkhoff_vanishes_off_spectrum(wide_table, patch50):
    from modelframes.analysis import birkhoff_coefficient

    f = gaussian()
    v = patch50.values
    mid = 0.5 * (v[v > 1][0] + v[v > 1][1])
    est = birkhoff_coefficient(lambda x: bracket(f, f, wide_table, x), mid)
    on = bracket_coefficient(f, f, wide_table, patch50, v[v > 1][0])
    assert abs(est.value) < abs(on.direct) / 5


def test_mean_bracket_gaussian(wide_table):
    f = gaussian()
    rep = mean_bracket_check(f, f, wide_table)
    assert rep.passed
    assert rep.details["expected"] == pytest.approx(2 / 3 * 2**-0.5)


def test_mean_bracket_orthogonal(scheme, spec):
    f = indicator_interval(0.3).modulate(-1.0)
    g = indicator_interval(0.3).modulate(1.0)
    tab = dual_table(scheme, spec, (-1010, 1010), floor=1e-8)
    rep = mean_bracket_check(f, g, tab)
    assert rep.max_abs_residual == 0


def test_mean_bracket_independent_of_psi(scheme, window):
    f = gaussian()
    reps = []
    for eps, n in ((0.5, 2), (0.4, 3)):
        sp = BumpSpec(window, eps, n)
        tab = table_for_means(scheme, sp, [f], DEFAULT_SCHEDULE)
        reps.append(mean_bracket_check(f, f, tab, normalize=True))
    assert abs(reps[0].details["mean"] - reps[1].details["mean"]) <= 2e-2


def test_plancherel_gaussian(wide_table, scheme, window):
    patch = build_model_set(scheme, window, (0.0, 0.0), 60.0)
    f = gaussian()
    rep = plancherel_sum_check(f, f, f, wide_table, patch)
    assert rep.passed


def test_plancherel_asymmetric_triple(scheme, window, spec):
    """Unconjugated bracket product; the conjugated one fails for this triple."""
    patch = build_model_set(scheme, window, (0.0, 0.0), 60.0)
    f = gaussian(1, 0.9).translate(0.3)
    g = gaussian(1, 1.1).translate(-0.5)
    h = gaussian(1, 1.0).translate(0.9).modulate(0.2)
    tab = table_for_means(scheme, spec, [f, g, h], (125, 250, 500, 1000))
    rep = plancherel_sum_check(f, g, h, tab, patch, R_schedule=(125, 250, 500, 1000))
    assert rep.passed


def test_plancherel_zero_and_linear(wide_table, scheme, window):
    patch = build_model_set(scheme, window, (0.0, 0.0), 60.0)
    f = gaussian()
    z = plancherel_sum_check(f, f, zero_function(), wide_table, patch, R_schedule=(50, 100, 200))
    assert z.details["direct"] == 0 and z.details["mean"] == 0
    a = plancherel_sum_check(f, f, f, wide_table, patch, R_schedule=(50, 100, 200))
    b = plancherel_sum_check(f, f.scale(2.0), f, wide_table, patch, R_schedule=(50, 100, 200))
    assert b.details["direct"] == pytest.approx(2 * a.details["direct"], rel=1e-14)
    assert b.details["mean"] == pytest.approx(2 * a.details["mean"], rel=1e-14)


def test_bessel_bound(scheme, spec, patch50):
    tab = dual_table(scheme, spec, (-6, 6))
    t = np.linspace(-3, 3, 241)
    g = gaussian()
    res = bessel_bound(g, tab, t, patch50, trials=10)
    assert res.verdict == "pass" and all(r < res.bound for r in res.ratios)
    res2 = bessel_bound(g.scale(2.0), tab, t)
    assert res2.B == pytest.approx(4 * res.B)
    zero = bessel_bound(zero_function(), tab, t)
    assert zero.B == 0 and zero.bound == 0


def test_bessel_sparse_grid(scheme, spec):
    tab = dual_table(scheme, spec, (-6, 6))
    with pytest.raises(ResolutionError):
        bessel_bound(gaussian(1, 0.2), tab, np.linspace(-3, 3, 5))
