import io
import math

import numpy as np
import pytest

from modelframes.cutproject import (
    CutProjectScheme,
    Window,
    build_model_set,
    density_estimate,
    is_close,
    min_pairwise_distance,
    pseudometric,
    read_patch_csv,
    relative_separation,
    write_patch_csv,
)
from modelframes.errors import CoverageError, EmptySetError, NonGenericConfigurationError

A2, B3 = math.sqrt(2.0), math.sqrt(3.0)


def brute_force_model_set(R, a=1.0, t=0.0, s=0.0, kmax=200, closed=False):
    k, l = np.meshgrid(np.arange(-kmax, kmax + 1), np.arange(-kmax, kmax + 1), indexing="ij")
    k, l = k.ravel(), l.ravel()
    lam = t + (1 + B3 * A2) * k - B3 * l
    p2 = l - A2 * k
    if closed:
        inside = (p2 >= -a - s - 1e-12) & (p2 <= a - s + 1e-12)
    else:
        inside = (p2 > -a - s + 1e-12) & (p2 < a - s - 1e-12)
    keep = inside & (np.abs(lam) <= R)
    return np.sort(lam[keep])


def test_origin_in_unshifted_set(scheme, window):
    patch = build_model_set(scheme, window, (0.0, 0.0), 5.0)
    assert patch.index_of(0.0) >= 0


def test_canonical_patch_matches_brute_force(scheme, window):
    patch = build_model_set(scheme, window, (0.0, 0.0), 20.0)
    np.testing.assert_allclose(patch.values, brute_force_model_set(20.0), atol=1e-12)
    assert np.all(np.diff(patch.values) > 0)


def test_membership_predicate_holds(scheme, window):
    patch = build_model_set(scheme, window, (0.3, 0.17), 30.0)
    amb = patch.preimages.ambient
    np.testing.assert_allclose(patch.values, 0.3 + amb[:, 0], atol=0)
    assert np.all(np.abs(amb[:, 1] + 0.17) <= 1.0)
    np.testing.assert_allclose(amb, patch.preimages.integer_coords @ scheme.lattice.generator.T)


def test_shift_identity(scheme, window):
    t, s, R = 0.37, 0.21, 25.0
    shifted = build_model_set(scheme, window, (t, s), R)
    np.testing.assert_allclose(shifted.values, brute_force_model_set(R, t=t, s=s), atol=1e-12)
    base = build_model_set(scheme, window, (0.0, s), R + 1.0)
    expected = base.values + t
    expected = expected[np.abs(expected) <= R]
    np.testing.assert_allclose(shifted.values, expected, atol=1e-12)


def test_non_generic_boundary_rejected(scheme):
    # p2(0) = 0 sits on the boundary of Omega - s when s = 1
    with pytest.raises(NonGenericConfigurationError):
        build_model_set(scheme, Window(1.0), (0.0, 1.0), 5.0)


def test_closed_unit_window_is_not_generic(scheme):
    # (k, l) = (0, +-1) projects to p2 = +-1
    with pytest.raises(NonGenericConfigurationError):
        build_model_set(scheme, Window(1.0), (0.0, 0.0), 5.0)
    closed = build_model_set(scheme, Window(1.0, "closed"), (0.0, 0.0), 20.0)
    opened = build_model_set(scheme, Window(1.0, "open"), (0.0, 0.0), 20.0)
    np.testing.assert_allclose(closed.values, brute_force_model_set(20.0, closed=True), atol=1e-12)
    extra = np.setdiff1d(np.round(closed.values, 9), np.round(opened.values, 9))
    np.testing.assert_allclose(np.sort(extra), [-B3, B3], atol=1e-9)


def test_generic_window_needs_no_policy(scheme):
    p = build_model_set(scheme, Window(0.9), (0.0, 0.0), 50.0)
    np.testing.assert_allclose(p.values, brute_force_model_set(50.0, a=0.9), atol=1e-12)


def test_uniform_discreteness_stable(scheme, window):
    gaps = [min_pairwise_distance(build_model_set(scheme, window, (0.0, 0.0), R).points) for R in (100, 200, 400)]
    assert gaps[0] > 0
    assert gaps[0] == pytest.approx(gaps[1]) == pytest.approx(gaps[2])


def test_density_converges(scheme, window):
    est = density_estimate(scheme, window, [1e2, 1e3, 1e4])
    assert est.formula_density == pytest.approx(2.0)
    assert abs(est.estimate - 2.0) <= 1e-2
    assert est.residuals[2] <= est.residuals[1] <= est.residuals[0]
    assert abs(est.extrapolated - 2.0) <= est.confidence + 1e-2


def test_density_halves_with_window(scheme):
    full = density_estimate(scheme, Window.canonical(), [1e2, 1e3, 1e4])
    half = density_estimate(scheme, Window(0.5, "open"), [1e2, 1e3, 1e4])
    assert half.formula_density == pytest.approx(full.formula_density / 2)
    assert half.estimate == pytest.approx(full.estimate / 2, abs=2e-2)


def test_density_doubling_schedule_generic_shift(scheme, window):
    radii = [250 * 2**j for j in range(6)]
    est = density_estimate(scheme, window, radii, shift=(0.123, 0.0456))
    r = est.residuals
    # statistical monotonicity: never grows by more than 10% of the first residual scale
    assert r[-1] <= r[0] + 1e-12
    assert r[-1] < 1e-2


def test_density_schedule_validation(scheme, window):
    with pytest.raises(ValueError):
        density_estimate(scheme, window, [10, 5, 20])
    with pytest.raises(ValueError):
        density_estimate(scheme, window, [10, 20])


def _degenerate_patch(scheme, window, values, radius=20.0):
    base = build_model_set(scheme, window, (0.0, 0.0), radius)
    return base.with_points(np.asarray(values, dtype=float).reshape(-1, 1))


def test_relative_separation_integers(scheme, window):
    patch = _degenerate_patch(scheme, window, np.arange(10), radius=10.0)
    assert relative_separation(patch) == 1


def test_relative_separation_duplicate(scheme, window):
    base = np.arange(10, dtype=float)
    patch = _degenerate_patch(scheme, window, np.sort(np.append(base, 4.001)), radius=10.0)
    assert relative_separation(patch) == 2


def test_relative_separation_stable(scheme, window):
    r1 = relative_separation(build_model_set(scheme, window, (0.0, 0.0), 100.0))
    r2 = relative_separation(build_model_set(scheme, window, (0.0, 0.0), 200.0))
    r3 = relative_separation(build_model_set(scheme, window, (0.31, 0.2), 200.0))
    assert r1 == r2 == r3 >= 1


def test_relative_separation_empty(scheme, window):
    with pytest.raises(EmptySetError):
        relative_separation(_degenerate_patch(scheme, window, []))


def test_is_close_self(scheme, window):
    p = build_model_set(scheme, window, (0.0, 0.0), 30.0)
    res = is_close(p, p, 20.0, 0.1)
    assert res.close
    np.testing.assert_allclose(res.shift, 0.0)


def test_is_close_small_shift(scheme, window):
    eps = 0.1
    p = build_model_set(scheme, window, (0.0, 0.0), 30.0)
    q = build_model_set(scheme, window, (eps / 2, 0.0), 30.0)
    res = is_close(p, q, 20.0, eps)
    assert res.close
    np.testing.assert_allclose(res.shift, eps / 2, atol=1e-12)


def test_is_close_shifted_copy_property(scheme, window, rng):
    p = build_model_set(scheme, window, (0.0, 0.0), 40.0)
    for x in rng.uniform(-0.2, 0.2, size=5):
        q = build_model_set(scheme, window, (-x, 0.0), 40.0)
        assert is_close(p, q, 25.0, 0.2).close


def test_is_close_extra_point(scheme, window):
    p = build_model_set(scheme, window, (0.0, 0.0), 30.0)
    extra = np.sort(np.append(p.values, 0.5)).reshape(-1, 1)
    q = p.with_points(extra)
    assert not is_close(p, q, 20.0, 0.1).close


def test_is_close_coverage(scheme, window):
    p = build_model_set(scheme, window, (0.0, 0.0), 10.0)
    with pytest.raises(CoverageError):
        is_close(p, p, 10.0, 0.5)


def test_pseudometric_identical_and_removed(scheme, window):
    p = build_model_set(scheme, window, (0.0, 0.0), 600.0)
    radii = [100.0, 400.0, 1200.0]
    assert all(v == 0 for _, v in pseudometric(p, p, radii))
    i0 = p.index_of(0.0)
    q = p.with_points(np.delete(p.points, i0, axis=0))
    vals = pseudometric(p, q, radii)
    assert [v for _, v in vals] == pytest.approx([1 / R for R in radii])


def test_pseudometric_window_difference(scheme):
    p = build_model_set(scheme, Window.canonical(), (0.0, 0.0), 5000.0)
    # [-1, 1.1] = Window(1.05) - (-0.05)
    q = build_model_set(scheme, Window(1.05, "open"), (0.0, -0.05), 5000.0)
    (_, d), = pseudometric(p, q, [1e4])
    assert d == pytest.approx(0.1, abs=5e-3)


def test_pseudometric_symmetry_triangle(scheme, window):
    radii = [200.0, 800.0]
    ps = [
        build_model_set(scheme, window, (0.0, 0.0), 500.0),
        build_model_set(scheme, Window(0.9, "open"), (0.0, 0.03), 500.0),
        build_model_set(scheme, window, (0.2, 0.0), 500.0),
    ]
    d = {}
    for i in range(3):
        for j in range(3):
            d[i, j] = np.array([v for _, v in pseudometric(ps[i], ps[j], radii)])
    for i in range(3):
        np.testing.assert_allclose(d[i, i], 0)
        for j in range(3):
            np.testing.assert_allclose(d[i, j], d[j, i])
            for k in range(3):
                assert np.all(d[i, k] <= d[i, j] + d[j, k] + 1e-12)


def test_csv_roundtrip(scheme, window):
    p = build_model_set(scheme, window, (0.25, 0.1), 15.0)
    buf = io.StringIO()
    write_patch_csv(p, buf)
    buf.seek(0)
    q = read_patch_csv(buf)
    np.testing.assert_array_equal(q.points, p.points)
    np.testing.assert_array_equal(q.preimages.integer_coords, p.preimages.integer_coords)
    assert q.window == p.window and q.shift == p.shift and q.radius == p.radius
    header = buf.getvalue().splitlines()[1]
    assert header == "lambda_0,k_0,k_1"
