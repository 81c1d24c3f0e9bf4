"""Acceptance suite on the canonical preset (alpha = sqrt2, beta = sqrt3,
Omega = [-1, 1], eps = 1/2, n = 2, m = 1).

Each test prints one ``criterion N: PASS/FAIL`` line; the lines are
collected again in the terminal summary.
"""

import time

import numpy as np
import pytest

from modelframes.analysis import DEFAULT_SCHEDULE, gaussian, l2_norm_sq, smooth_cutoff_gaussian
from modelframes.bumps import BumpSpec, phi_convolution_oracle, phi_profile
from modelframes.cli import main
from modelframes.cutproject import CutProjectScheme, Window, build_model_set, density_estimate
from modelframes.frames import (
    GeneratorFamily,
    bessel_necessary_check,
    covariance_check,
    decay_profile,
    default_t_grid,
    n_diagnostic,
    n_hat_coefficients,
    n_series_reconstruct,
)
from modelframes.gabor import GaborSystem, density_check, wexler_raz_check
from modelframes.poisson import (
    bracket_coefficient,
    mean_bracket_check,
    plancherel_sum_check,
    poisson_verify,
    table_for_means,
)

SCHEME = CutProjectScheme.canonical()
OMEGA = Window.canonical()
SPEC = BumpSpec(OMEGA, 0.5, 2)


def test_criterion_01_poisson_summation(acceptance):
    start = time.perf_counter()
    t = np.linspace(-2, 2, 101)
    F = gaussian()
    base = poisson_verify(build_model_set(SCHEME, OMEGA, (0.0, 0.0), 50.0), SPEC, F, t, floor=1e-10)
    P = base.truncation["dual_p2_radius"]
    doubled = poisson_verify(build_model_set(SCHEME, OMEGA, (0.0, 0.0), 100.0), SPEC, F, t, floor=0.0, p2_radius=2 * P)
    elapsed = time.perf_counter() - start
    ok = base.max_abs_residual <= 1e-6 and doubled.max_abs_residual < base.max_abs_residual and elapsed <= 30
    detail = f"max|LHS-RHS| {base.max_abs_residual:.2e} -> {doubled.max_abs_residual:.2e} after doubling, {elapsed:.1f}s"
    assert acceptance(1, ok, detail)


def test_criterion_02_density(acceptance):
    start = time.perf_counter()
    est = density_estimate(SCHEME, OMEGA, [1e2, 1e3, 1e4])
    elapsed = time.perf_counter() - start
    r = est.residuals
    ok = abs(est.estimate - 2.0) <= 1e-2 and r[0] >= r[1] >= r[2] and elapsed <= 10
    detail = f"count(R)/R at R=1e4 {est.estimate:.5f}, residuals {[f'{x:.1e}' for x in r]}, {elapsed:.1f}s"
    assert acceptance(2, ok, detail)


def test_criterion_03_bracket_coefficients(acceptance):
    start = time.perf_counter()
    f = gaussian()
    table = table_for_means(SCHEME, SPEC, [f], DEFAULT_SCHEDULE)
    patch = build_model_set(SCHEME, OMEGA, (0.0, 0.0), 50.0)
    lam = patch.values[patch.values > 0][:3]
    pairs = bracket_coefficient(f, f, table, patch, lam, DEFAULT_SCHEDULE)
    elapsed = time.perf_counter() - start
    diffs = [p.difference for p in pairs]
    ok = (
        max(DEFAULT_SCHEDULE) == 2000.0
        and all(d <= 1e-2 for d in diffs)
        and all(p.birkhoff.residuals_decreasing() for p in pairs)
        and elapsed <= 60
    )
    detail = f"lambda {np.round(lam, 4).tolist()}, |direct-Birkhoff| max {max(diffs):.1e}, {elapsed:.1f}s"
    assert acceptance(3, ok, detail)


def test_criterion_04_mean_identity(acceptance):
    f, g = gaussian(), gaussian(1.0, 1.3)
    rep = mean_bracket_check(f, g, table_for_means(SCHEME, SPEC, [f, g], DEFAULT_SCHEDULE), tolerance=1e-2)
    normalised = []
    for eps, n in ((0.5, 2), (0.4, 3)):
        spec = BumpSpec(OMEGA, eps, n)
        tab = table_for_means(SCHEME, spec, [f, g], DEFAULT_SCHEDULE)
        normalised.append(mean_bracket_check(f, g, tab, normalize=True).details["mean"])
    spread = abs(normalised[0] - normalised[1])
    ok = rep.max_abs_residual <= 1e-2 and spread <= 2e-2
    detail = f"|M - psi(0)<f,g>| {rep.max_abs_residual:.1e}, two bumps differ by {spread:.1e}"
    assert acceptance(4, ok, detail)


def test_criterion_05_plancherel_sum(acceptance):
    f = gaussian()
    table = table_for_means(SCHEME, SPEC, [f], DEFAULT_SCHEDULE)
    patch = build_model_set(SCHEME, OMEGA, (0.0, 0.0), 60.0)
    rep = plancherel_sum_check(f, f, f, table, patch, tolerance=1e-2)
    ok = rep.max_abs_residual <= 1e-2
    assert acceptance(5, ok, f"|direct - mean| {rep.max_abs_residual:.1e}")


def test_criterion_06_phi_closed_form(acceptance):
    # Expected to fail: at n = 8 the convolution differs from its n -> oo
    # limit sinc(2 xi) by O(eps^n) = 6e-3, independent of the quadrature.
    xi = np.linspace(-10, 10, 201)
    conv = phi_convolution_oracle(BumpSpec(OMEGA, 0.5, 8, 60), xi)
    err = float(np.max(np.abs(conv - phi_profile(OMEGA, xi))))
    exact0 = phi_profile(OMEGA, 0.0) == 1.0
    ok = err <= 1e-4 and exact0
    assert acceptance(6, ok, f"max|Psi*Psi - sinc(2xi)| {err:.2e} (n=8, S=60), Phi(0)=1 exactly: {exact0}")


def test_criterion_07_central_equivalence(acceptance):
    start = time.perf_counter()
    mid = Window(1.0, "midpoint")
    f = smooth_cutoff_gaussian(1.0, 1.0)
    fam = GeneratorFamily.single(gaussian(), gaussian(1.0, 0.7))
    x = np.linspace(-4, 4, 81)
    prof = decay_profile(f, fam)
    patch = build_model_set(SCHEME, mid, (0.0, 0.0), 4 + max(-prof.lo, prof.hi) + 1)
    N = n_diagnostic(f, fam, patch, x)
    sweep = (500.0, 1000.0, 2000.0, 4000.0, 8000.0)
    rec = n_series_reconstruct(n_hat_coefficients(f, fam, SCHEME, mid, sweep[-1]), x, sweep)
    elapsed = time.perf_counter() - start
    err = float(np.max(np.abs(rec.values - N)) / l2_norm_sq(f))
    ok = err <= 1e-3 and rec.deltas_decreasing and elapsed <= 300
    detail = f"max|N - series| {err:.1e} ||f||^2 at P={sweep[-1]:g}, deltas {[f'{d:.1e}' for d in rec.deltas]}, {elapsed:.1f}s"
    assert acceptance(7, ok, detail)


def test_criterion_08_covariance(acceptance):
    f = smooth_cutoff_gaussian(1.0, 1.0)
    shifts = np.random.default_rng(0).uniform(-5, 5, 20)
    rep = covariance_check(f, gaussian(), SCHEME, OMEGA, shifts, radius=60.0, tolerance=1e-8)
    ok = len(rep.residuals) == 20 and rep.max_abs_residual <= 1e-8
    assert acceptance(8, ok, f"max two-way residual {rep.max_abs_residual:.1e} over 20 shifts")


def test_criterion_09_bessel_necessary(acceptance):
    fam = GeneratorFamily.single(gaussian())
    t = default_t_grid(fam)
    patch = build_model_set(SCHEME, OMEGA, (0.0, 0.0), 80.0)
    rep = bessel_necessary_check(fam, patch, t, trials=50, seed=0, tolerance=0.01)
    B, lhs = rep.details["B_g"], rep.details["max_lhs"]
    ok = lhs <= B * 1.01 and len(rep.details["ratios"]) == 50
    assert acceptance(9, ok, f"max D sum|g^|^2 {lhs:.4f} vs B_g {B:.4f} on {t.size} t-points")


def test_criterion_10_wexler_raz(acceptance):
    g = gaussian(1.0, 0.8).translate(0.3).modulate(0.1)
    h = gaussian(0.7, 1.3).translate(-0.2)
    pts = SCHEME.dual_points(np.array([-3.0, 3.0]), (-3.0, 3.0))
    etas = pts.integer_coords[np.argsort(np.abs(pts.ambient).sum(axis=1), kind="stable")[:5]]
    rep = wexler_raz_check(GaborSystem((g,), [[1.0]]), GaborSystem((h,), [[1.0]]), SCHEME, OMEGA, etas, np.arange(-2, 3))
    same = GaborSystem((g,), [[1.0]])
    origin = wexler_raz_check(same, same, SCHEME, OMEGA, np.zeros((1, 2), dtype=int), [0]).entries[0]["value"]
    expected = SCHEME.density(OMEGA) / same.det_A * l2_norm_sq(g)
    origin_err = abs(origin - expected)
    ok = len(rep.entries) == 25 and rep.max_identity_residual <= 1e-6 and origin_err <= 1e-6
    detail = f"identity residual {rep.max_identity_residual:.1e} over 5x5, (0,0) entry error {origin_err:.1e}"
    assert acceptance(10, ok, detail)


def test_criterion_11_density_condition(acceptance):
    ok3 = density_check(SCHEME, OMEGA, [[3.0]])
    ok1 = density_check(SCHEME, OMEGA, [[1.0]])
    agree = max(ok3.agreement, ok1.agreement)
    ok = ok3.passed and ok3.margin == pytest.approx(1.0) and not ok1.passed and agree <= 0.02
    detail = f"A=3 pass margin {ok3.margin:.3f}, A=1 {'fails' if not ok1.passed else 'passes'}, density disagreement {agree:.1e}"
    assert acceptance(11, ok, detail)


def test_criterion_12_determinism(acceptance, tmp_path):
    codes = [main(["all", "--config", "canonical", "--out", str(tmp_path / run), "--quiet"]) for run in ("a", "b")]
    a = (tmp_path / "a" / "report.json").read_bytes()
    b = (tmp_path / "b" / "report.json").read_bytes()
    ok = a == b and codes[0] == codes[1]
    assert acceptance(12, ok, f"two runs of the canonical config, report.json {len(a)} bytes, identical: {a == b}")
