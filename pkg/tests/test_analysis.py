import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from modelframes.analysis import (
    birkhoff_coefficient,
    correlation,
    from_descriptor,
    ft_pointwise,
    gaussian,
    grid_function,
    indicator_interval,
    inner_product,
    read_grid_csv,
    sinc_product,
    smooth_cutoff_gaussian,
    write_grid_csv,
)
from modelframes.bumps import BumpSpec
from modelframes.cutproject import Window
from modelframes.errors import EvaluationError, ResolutionError


def time_inner(f, g, L=14.0, n=280001):
    x = np.linspace(-L, L, n)
    return np.trapezoid(f.time(x) * np.conj(g.time(x)), x)


def test_gaussian_self_dual():
    f = gaussian()
    t = np.linspace(-3, 3, 13)
    np.testing.assert_allclose(ft_pointwise(f, t), np.exp(-np.pi * t**2))
    np.testing.assert_allclose(f.time(t), np.exp(-np.pi * t**2))


def test_translation_phase(rng):
    f = gaussian(1.0, 0.8)
    for lam, t in rng.uniform(-3, 3, size=(10, 2)):
        assert ft_pointwise(f.translate(lam), t) == pytest.approx(np.exp(-2j * np.pi * lam * t) * f.ft(t))


def test_indicator_time_values():
    f = indicator_interval(0.75)
    x = np.array([0.0, 0.3, 1.1])
    np.testing.assert_allclose(f.time(x), 1.5 * np.sinc(1.5 * x))
    assert ft_pointwise(f, 0.7) == 1.0 and ft_pointwise(f, 0.8) == 0.0


def test_unit_gaussian_norm():
    f = gaussian()
    res = inner_product(f, f)
    assert res.value == pytest.approx(2**-0.5, abs=1e-14)
    assert res.error < 1e-12


def test_disjoint_supports_zero():
    f = indicator_interval(0.5).modulate(-1.0)
    g = indicator_interval(0.5).modulate(1.0)
    assert inner_product(f, g).value == 0


def test_translated_gaussian_pair_vs_time_oracle(rng):
    for _ in range(5):
        w1, w2 = rng.uniform(0.6, 1.6, 2)
        lam = rng.uniform(-2, 2)
        f, g = gaussian(1, w1), gaussian(1, w2).translate(lam)
        assert inner_product(f, g).value == pytest.approx(time_inner(f, g), abs=1e-8)


def test_parseval_random_pairs(rng):
    for _ in range(20):
        w1, w2 = rng.uniform(0.7, 1.5, 2)
        a, b = rng.uniform(-1.5, 1.5, 2)
        f = gaussian(1, w1).translate(a).modulate(rng.uniform(-0.5, 0.5))
        g = gaussian(1, w2).translate(b)
        assert inner_product(f, g).value == pytest.approx(time_inner(f, g), abs=1e-8)


def test_conjugate_symmetry(rng):
    f = gaussian(1, 0.9).translate(0.4).modulate(0.3)
    g = smooth_cutoff_gaussian(1.2, 1.0).translate(-0.7)
    assert inner_product(f, g).value == pytest.approx(np.conj(inner_product(g, f).value), abs=1e-14)


def test_commutation_phase(rng):
    f = gaussian(1, 1.1)
    t = np.linspace(-2, 2, 9)
    for b, lam in rng.uniform(-2, 2, size=(10, 2)):
        mt = f.translate(lam).modulate(b)
        tm = f.modulate(b).translate(lam)
        np.testing.assert_allclose(mt.ft(t), np.exp(2j * np.pi * b * lam) * tm.ft(t), atol=1e-14)


def test_modulation_shifts_argument():
    f = gaussian(1, 1.0)
    assert f.modulate(0.5).ft(0.2) == pytest.approx(f.ft(-0.3))
    assert f.modulate(0.5).time(0.3) == pytest.approx(np.exp(2j * np.pi * 0.5 * 0.3) * f.time(0.3))


def test_correlation_closed_form():
    f = gaussian()
    u = np.linspace(-4, 4, 33)
    np.testing.assert_allclose(correlation(f, f, u), 2**-0.5 * np.exp(-np.pi * u**2 / 2), atol=1e-14)


def test_smooth_cutoff_class_d():
    f = smooth_cutoff_gaussian(1.0, 1.0)
    assert f.support() == (-1.0, 1.0)
    assert f.ft(1.0) == 0.0 and f.ft(0.0) == pytest.approx(1.0)
    assert abs(f.ft(0.999)) < 1e-6
    assert inner_product(f, f).value.real == pytest.approx(time_inner(f, f, L=20, n=4001).real, abs=1e-6)


def test_sinc_product_kind():
    spec = BumpSpec(Window(1.0, "open"), 0.5, 2)
    f = sinc_product(spec)
    assert f.time(0.0) == 1.0
    assert f.ft(1.5) == 0.0


def test_grid_function_and_csv():
    t = np.linspace(-1, 1, 201)
    f = grid_function(np.exp(-np.pi * t**2) * (1 + 0.5j), 0.01, -1.0)
    vals, info = ft_pointwise(f, np.array([0.0, 2.0]), annotate=True)
    assert vals[1] == 0 and info["outside_support"] == 1
    buf = io.StringIO()
    write_grid_csv(f, buf)
    buf.seek(0)
    g = read_grid_csv(buf)
    np.testing.assert_allclose(g.ft(t), f.ft(t))
    assert buf.getvalue().splitlines()[1] == "t,re,im"


def test_nyquist_rejection():
    f = gaussian()
    with pytest.raises(ResolutionError):
        inner_product(f, f.translate(40.0), h=0.5)


def test_descriptor_roundtrip():
    f = gaussian(2.0, 0.5).translate(0.3)
    g = from_descriptor(f.to_dict())
    assert g == f
    with pytest.raises(ValueError):
        from_descriptor({"kind": "gaussian", "bogus": 1})


def test_involution():
    f = gaussian(1, 0.8).translate(0.7).modulate(0.2).scale(1j)
    x = np.array([-0.4, 0.1, 0.9])
    np.testing.assert_allclose(f.involution().time(x), np.conj(f.time(-x)), atol=1e-14)


def test_birkhoff_constant():
    th = 0.37
    m = birkhoff_coefficient(lambda x: np.exp(-2j * np.pi * th * x), th)
    assert m.value == pytest.approx(1.0)


def test_birkhoff_off_frequency_decay():
    # frequencies chosen so the cube averages do not vanish exactly
    th0 = math.sqrt(2) / 10
    m = birkhoff_coefficient(lambda x: np.exp(-2j * np.pi * th0 * x), th0 + 0.013, R_schedule=(100, 200, 400, 800))
    assert abs(m.value) < 1 / (np.pi * 0.013 * 800)
    assert len(m.residuals) == 3


def test_birkhoff_trig_polynomial():
    freqs = np.array([0.0, 1 / math.sqrt(2), -math.sqrt(3)])
    coefs = np.array([0.5, 1 - 0.25j, 0.3j])

    def p(x):
        return sum(c * np.exp(-2j * np.pi * f * x) for c, f in zip(coefs, freqs))

    ests = birkhoff_coefficient(p, freqs, R_schedule=(125, 250, 500, 1000))
    for e, c in zip(ests, coefs):
        assert abs(e.value - c) <= 1e-2
    # Bohr: mean of |p|^2 is the sum of squared coefficients
    m = birkhoff_coefficient(lambda x: np.abs(p(x)) ** 2, 0.0, R_schedule=(125, 250, 500, 1000))
    assert m.value.real == pytest.approx(np.sum(np.abs(coefs) ** 2), abs=1e-2)


@settings(max_examples=20, deadline=None)
@given(a=st.complex_numbers(max_magnitude=3), b=st.complex_numbers(max_magnitude=3), th=st.floats(-2, 2))
def test_birkhoff_linear_and_conjugate(a, b, th):
    f1 = lambda x: np.exp(-2j * np.pi * 0.7 * x) + 0.2
    f2 = lambda x: np.cos(2 * np.pi * math.sqrt(5) * x) * (1 + 1j)
    sched = (20, 40, 80)
    lhs = birkhoff_coefficient(lambda x: a * f1(x) + b * f2(x), th, sched).value
    rhs = a * birkhoff_coefficient(f1, th, sched).value + b * birkhoff_coefficient(f2, th, sched).value
    assert lhs == pytest.approx(rhs, abs=1e-9)
    c1 = birkhoff_coefficient(lambda x: np.conj(f1(x)), -th, sched).value
    assert c1 == pytest.approx(np.conj(birkhoff_coefficient(f1, th, sched).value), abs=1e-12)


def test_birkhoff_nonfinite():
    with pytest.raises(EvaluationError):
        birkhoff_coefficient(lambda x: np.where(x > 3, np.nan, 1.0), 0.0, (10, 20, 40))
