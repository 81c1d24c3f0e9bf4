"""Frame sums over model-set translates, the diagnostic ``N(x)`` and its
Fourier coefficients, and the tight/dual certification equations.

For generators ``g_k`` with partners ``h_k`` and a test function ``f``,

    N(x) = sum_k sum_lambda <T_x f, T_lambda g_k> <T_lambda h_k, T_x f>,

is almost periodic with coefficients

    N^(eta) = D Phi(-p2*(eta)) int f^(t) conj(f^(t - p1*)) sum_k conj(g^_k(t)) h^_k(t - p1*) dt,

where ``Phi(xi) = sinc(|Omega| xi)`` and ``D`` is the density. The
certificates evaluate ``L(t, eta) = D Phi(-p2*) sum_k conj(g^_k(t)) h^_k(t - p1*)``
against ``delta_{eta, 0}``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import fft as sfft
from scipy.interpolate import CubicSpline
from scipy.signal import fftconvolve

from .analysis import FourierFunction, auto_spacing, correlation, l2_norm_sq
from .bumps import BumpSpec, bump_ft, phi_profile
from .cutproject import CutProjectScheme, ModelSetPatch, Window, build_model_set
from .errors import ConfigurationError, TruncationError
from .poisson import ResidualReport, _jsonable, random_class_d

DECAY_REL = 1e-8
DECAY_STEP = 0.5
DEFAULT_TOLERANCE = 1e-3


# ---------------------------------------------------------------- family


@dataclass(frozen=True)
class GeneratorFamily:
    """Generators ``g_k`` and optional partners ``h_k`` of equal length."""

    members: tuple
    partners: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(self.members))
        if self.partners is not None:
            object.__setattr__(self, "partners", tuple(self.partners))
            if len(self.partners) != len(self.members):
                raise ConfigurationError("partner family must have the same length as the generators")

    @classmethod
    def single(cls, g: FourierFunction, h: FourierFunction | None = None) -> "GeneratorFamily":
        return cls((g,), None if h is None else (h,))

    def __len__(self) -> int:
        return len(self.members)

    @property
    def h(self) -> tuple:
        return self.members if self.partners is None else self.partners

    @property
    def is_zero(self) -> bool:
        return all(g.is_zero for g in self.members) or all(h.is_zero for h in self.h)

    def scaled(self, c: complex) -> "GeneratorFamily":
        """Scale generators and partners by ``c``."""
        parts = None if self.partners is None else tuple(h.scale(c) for h in self.partners)
        return GeneratorFamily(tuple(g.scale(c) for g in self.members), parts)

    def swapped(self) -> "GeneratorFamily":
        return GeneratorFamily(self.h, self.members)

    def pairs(self):
        return list(zip(self.members, self.h))

    def support(self) -> tuple:
        sup = [f.support() for f in self.members + self.h if not f.is_zero]
        if not sup:
            return (0.0, 0.0)
        return (min(s[0] for s in sup), max(s[1] for s in sup))

    def sum_sq(self, t) -> np.ndarray:
        """``sum_k |g^_k(t)|^2``."""
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape)
        for g in self.members:
            out += np.abs(g.ft(t)) ** 2
        return out

    def cross(self, t, p) -> np.ndarray:
        """``sum_k conj(g^_k(t)) h^_k(t - p)`` on the outer grid ``(t, p)``."""
        t = np.asarray(t, dtype=float)[:, None]
        p = np.asarray(p, dtype=float)[None, :]
        out = np.zeros((t.shape[0], p.shape[1]), dtype=complex)
        for g, h in self.pairs():
            out += np.conj(g.ft(t)) * h.ft(t - p)
        return out

    def to_dict(self) -> dict:
        d = {"members": [g.to_dict() for g in self.members]}
        if self.partners is not None:
            d["partners"] = [h.to_dict() for h in self.partners]
        return d


def _family(obj) -> GeneratorFamily:
    if isinstance(obj, GeneratorFamily):
        return obj
    if isinstance(obj, FourierFunction):
        return GeneratorFamily.single(obj)
    return GeneratorFamily(tuple(obj))


# ------------------------------------------------------------ truncation


@dataclass(frozen=True)
class DecayProfile:
    """Where ``u -> <f, T_u g_k>`` is significant, sampled on a coarse grid."""

    u: np.ndarray
    magnitude: np.ndarray  # sum_k |<f,T_u g_k>| |<f,T_u h_k>|
    lo: float
    hi: float

    def tail_outside(self, a: float, b: float, density: float) -> float:
        """``D int |C(u)| du`` over samples outside ``[a, b]``."""
        out = (self.u < a) | (self.u > b)
        return float(density * DECAY_STEP * self.magnitude[out].sum())


def decay_profile(f: FourierFunction, family: GeneratorFamily, rel: float = DECAY_REL) -> DecayProfile:
    """Locate the ``u`` range where the correlations exceed ``rel`` of
    their peak; beyond the sampled range they are below the 1e-12 extents."""
    pairs = [(g, h) for g, h in family.pairs() if not (g.is_zero or h.is_zero)]
    if f.is_zero or not pairs:
        return DecayProfile(np.zeros(1), np.zeros(1), 0.0, 0.0)
    umax = max(
        abs(f.shift - q.shift) + f.profile.time_extent + q.profile.time_extent for g, h in pairs for q in (g, h)
    )
    n = int(math.ceil(umax / DECAY_STEP))
    u = DECAY_STEP * np.arange(-n, n + 1)
    big = np.zeros(u.shape)
    mag = np.zeros(u.shape)
    for g, h in pairs:
        cg = np.abs(correlation(f, g, u))
        ch = cg if h is g else np.abs(correlation(f, h, u))
        big = np.maximum(big, np.maximum(cg, ch))
        mag += cg * ch
    sig = np.nonzero(big >= rel * big.max())[0]
    lo = float(u[max(sig[0] - 1, 0)])
    hi = float(u[min(sig[-1] + 1, u.size - 1)])
    return DecayProfile(u, mag, lo, hi)


def _require_cover(patch: ModelSetPatch, prof: DecayProfile, x_lo: float, x_hi: float):
    need = max(abs(x_hi + prof.hi), abs(x_lo + prof.lo))
    if patch.radius < need:
        raise TruncationError(
            f"patch radius {patch.radius:g} too small; correlations are significant up to |lambda| = {need:g}",
            {"required_radius": need, "radius": patch.radius},
        )


def _terms(f: FourierFunction, family: GeneratorFamily, u: np.ndarray) -> np.ndarray:
    """``sum_k <f, T_u g_k> conj(<f, T_u h_k>)`` elementwise in ``u``."""
    out = np.zeros(u.shape, dtype=complex)
    for g, h in family.pairs():
        if g.is_zero or h.is_zero:
            continue
        cg = correlation(f, g, u.ravel()).reshape(u.shape)
        ch = cg if h is g else correlation(f, h, u.ravel()).reshape(u.shape)
        out += cg * np.conj(ch)
    return out


# -------------------------------------------------------------- frame sums


@dataclass(frozen=True)
class FrameSum:
    """A truncated frame-type sum with its tail estimate."""

    value: complex
    tail: float
    points: int
    radius: float

    def __float__(self):
        return float(self.value.real)

    def to_dict(self) -> dict:
        return _jsonable(self.__dict__)


def mixed_frame_sum(f: FourierFunction, family, patch: ModelSetPatch) -> FrameSum:
    """``<S_{g,h} f, f> = sum_k sum_lambda <f, T_lambda g_k> <T_lambda h_k, f>``.

    Points on the window boundary count with the patch multiplicity.

    Raises
    ------
    TruncationError
        If the correlations are still above ``1e-8`` of their peak at the
        patch edge.
    """
    family = _family(family)
    if patch.m != 1:
        raise ConfigurationError("frame sums are implemented for m == 1")
    prof = decay_profile(f, family)
    if f.is_zero or family.is_zero:
        return FrameSum(0j, 0.0, len(patch), patch.radius)
    _require_cover(patch, prof, 0.0, 0.0)
    lam = patch.values
    val = complex(np.sum(patch.multiplicity * _terms(f, family, lam)))
    tail = prof.tail_outside(-patch.radius, patch.radius, patch.scheme.density(patch.window))
    return FrameSum(val, tail, len(patch), patch.radius)


def frame_sum(f: FourierFunction, family, patch: ModelSetPatch) -> FrameSum:
    """``<S_g f, f> = sum_k sum_lambda |<f, T_lambda g_k>|^2``."""
    family = _family(family)
    res = mixed_frame_sum(f, GeneratorFamily(family.members), patch)
    return FrameSum(complex(res.value.real, 0.0), res.tail, res.points, res.radius)


def _shifted_patch(scheme, window, x, radius):
    return build_model_set(scheme, window, (-float(x), 0.0), radius)


def covariance_check(
    f: FourierFunction,
    family,
    scheme: CutProjectScheme,
    window: Window,
    x,
    radius: float = 60.0,
    tolerance: float = 1e-8,
) -> ResidualReport:
    """Compare ``<S^{Lambda - x} f, f>`` with ``<S^Lambda T_x f, T_x f>``.

    The first uses the translated point set and ``f``; the second the
    original set and the translated function. The residual is relative to
    ``||f||^2``.
    """
    family = _family(family)
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    base = build_model_set(scheme, window, (0.0, 0.0), radius)
    nf = l2_norm_sq(f) or 1.0
    res, left, right = [], [], []
    for xi in xs:
        a = frame_sum(f, family, _shifted_patch(scheme, window, xi, radius)).value.real
        b = frame_sum(f.translate(xi), family, base).value.real
        left.append(a)
        right.append(b)
        res.append(abs(a - b) / nf)
    trunc = {"radius": radius, "decay_rel": DECAY_REL}
    return ResidualReport("covariance", res, xs.tolist(), tolerance, trunc, {"shifted_set": left, "shifted_function": right})


@dataclass(frozen=True)
class ContinuityProbe:
    x_sequence: tuple
    x_limit: float
    differences: tuple
    slack: float

    @property
    def nonincreasing(self) -> bool:
        d = self.differences
        return all(b <= a * (1 + self.slack) + 1e-15 for a, b in zip(d, d[1:]))

    def to_dict(self) -> dict:
        return _jsonable({**self.__dict__, "nonincreasing": self.nonincreasing})


def continuity_probe(
    f: FourierFunction,
    family,
    scheme: CutProjectScheme,
    window: Window,
    x_sequence,
    x_limit: float,
    radius: float = 60.0,
    slack: float = 0.1,
) -> ContinuityProbe:
    """``|<S^{Lambda - x_j} f, f> - <S^{Lambda - x_limit} f, f>|`` along a sequence."""
    family = _family(family)
    lim = frame_sum(f, family, _shifted_patch(scheme, window, x_limit, radius)).value.real
    diffs = []
    for xj in x_sequence:
        v = frame_sum(f, family, _shifted_patch(scheme, window, xj, radius)).value.real
        diffs.append(abs(v - lim))
    return ContinuityProbe(tuple(float(x) for x in x_sequence), float(x_limit), tuple(diffs), slack)


# ------------------------------------------------------------ diagnostic


def n_diagnostic(
    f: FourierFunction,
    family,
    patch: ModelSetPatch,
    x_grid,
    method: str = "exact",
    spacing: float | None = None,
) -> np.ndarray:
    """``N(x) = sum_k sum_lambda <T_x f, T_lambda g_k> <T_lambda h_k, T_x f>``.

    ``method="exact"`` evaluates every correlation ``<f, T_{lambda - x} g_k>``
    by quadrature. ``method="interpolated"`` tabulates
    ``C(u) = sum_k <f,T_u g_k> conj(<f,T_u h_k>)`` once on a grid of the
    given spacing and sums a cubic spline of it; ``C`` is band-limited to
    twice the Fourier support of ``f``, so this is accurate for long grids.
    """
    family = _family(family)
    x = np.asarray(x_grid, dtype=float)
    if f.is_zero or family.is_zero or x.size == 0:
        return np.zeros(x.shape)
    prof = decay_profile(f, family)
    _require_cover(patch, prof, float(x.min()), float(x.max()))
    lam = patch.values
    mult = patch.multiplicity
    real = family.partners is None
    if method == "exact":
        out = np.empty(x.shape, dtype=complex)
        for i, xi in enumerate(x):
            u = lam - xi
            sel = (u >= prof.lo) & (u <= prof.hi)
            out[i] = np.sum(mult[sel] * _terms(f, family, u[sel]))
    elif method == "interpolated":
        if spacing is None:
            lo, hi = f.support()
            spacing = 1.0 / (128 * (hi - lo))
        n = int(math.ceil((prof.hi - prof.lo) / spacing))
        u = prof.lo + spacing * np.arange(n + 1)
        C = _terms(f, family, u)
        sre, sim = CubicSpline(u, C.real), CubicSpline(u, C.imag)
        order = np.argsort(x)
        xs = x[order]
        acc = np.zeros(x.size, dtype=complex)
        for lj, mj in zip(lam, mult):
            # lambda - x in [lo, hi]  <=>  x in [lambda - hi, lambda - lo]
            a, b = np.searchsorted(xs, [lj - prof.hi, lj - prof.lo], side="left")
            if b > a:
                uu = lj - xs[a:b]
                acc[a:b] += mj * (sre(uu) + 1j * sim(uu))
        out = np.empty(x.size, dtype=complex)
        out[order] = acc
        out = out.reshape(x.shape)
    else:
        raise ValueError(f"unknown method {method!r}")
    return out.real if real else out


# ---------------------------------------------------------- coefficients


@dataclass(frozen=True)
class CoefficientTable:
    """Fourier coefficients ``N^(eta)`` of the diagnostic, keyed by dual point."""

    integer_coords: np.ndarray
    p1: np.ndarray
    p2: np.ndarray
    values: np.ndarray
    P: float
    overlap: float
    provenance: str
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return self.values.size

    def restrict(self, P: float) -> "CoefficientTable":
        sel = np.abs(self.p2) <= P
        return CoefficientTable(
            self.integer_coords[sel], self.p1[sel], self.p2[sel], self.values[sel], P, self.overlap, self.provenance, self.metadata
        )

    def entry(self, p1: float, tol: float = 1e-9) -> complex:
        """Coefficient at the dual point with the given ``p1*`` (0 if absent)."""
        i = np.nonzero(np.abs(self.p1 - p1) < tol)[0]
        return complex(self.values[i[0]]) if i.size else 0j

    def to_dict(self) -> dict:
        return _jsonable(
            {
                "provenance": self.provenance,
                "P": self.P,
                "overlap": self.overlap,
                "metadata": self.metadata,
                "entries": [
                    {"eta": z, "p1_star": a, "p2_star": b, "value": v}
                    for z, a, b, v in zip(self.integer_coords.tolist(), self.p1, self.p2, self.values)
                ],
            }
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def write_csv(self, fp) -> None:
        w = csv.writer(fp, lineterminator="\n")
        w.writerow(["p1_star", "p2_star", "re", "im"])
        for a, b, v in zip(self.p1, self.p2, self.values):
            w.writerow([repr(float(a)), repr(float(b)), repr(float(v.real)), repr(float(v.imag))])


def overlap_integral(f: FourierFunction, family: GeneratorFamily, p, h: float | None = None) -> np.ndarray:
    """``I(p) = int f^(t) conj(f^(t-p)) sum_k conj(g^_k(t)) h^_k(t-p) dt``.

    Writing ``a_k = f^ conj(g^_k)`` and ``b_k = f^ conj(h^_k)``, ``I`` is the
    cross-correlation ``sum_k int a_k(t) conj(b_k(t - p)) dt``. It is
    computed by FFT on a uniform grid over the support of ``f^`` (trapezoid,
    spectrally accurate for smooth compactly supported integrands) and
    evaluated off-grid by a cubic spline.
    """
    p = np.asarray(p, dtype=float)
    lo, hi = f.support()
    if f.is_zero or family.is_zero or hi <= lo:
        return np.zeros(p.shape, dtype=complex)
    if h is None:
        h = min(auto_spacing([f] + list(family.members) + list(family.h)), (hi - lo) / 4096)
    n = int(math.ceil((hi - lo) / h))
    t = np.linspace(lo, hi, n + 1)
    h = t[1] - t[0]
    L = sfft.next_fast_len(2 * t.size)
    acc = np.zeros(L, dtype=complex)
    ff = f.ft(t)
    for g, hk in family.pairs():
        a = ff * np.conj(g.ft(t))
        b = ff * np.conj(hk.ft(t))
        acc += sfft.fft(a, L) * np.conj(sfft.fft(b, L))
    circ = sfft.ifft(acc) * h
    lags = np.arange(-n, n + 1)
    vals = circ[lags % L]
    q = lags * h
    sre, sim = CubicSpline(q, vals.real), CubicSpline(q, vals.imag)
    inside = np.abs(p) <= q[-1]
    out = np.zeros(p.shape, dtype=complex)
    out[inside] = sre(p[inside]) + 1j * sim(p[inside])
    return out


def psi_sq_transform(spec: BumpSpec, xi, h: float = 0.01, L: float = 4000.0) -> np.ndarray:
    """``(psi^2)^(xi) = (psi^ * psi^)(xi)`` by FFT convolution of the sinc
    product on ``[-L, L]``, then a cubic spline.

    Working on the Fourier side avoids inverting slowly decaying products
    (large ``n``). The result is band-limited to the window, so a step of
    0.01 makes the spline error negligible.
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    N = int(round(L / h))
    s = h * np.arange(-N, N + 1)
    v = bump_ft(spec, s)
    conv = fftconvolve(v, v, mode="same") * h
    keep = np.abs(s) <= L / 2
    spline = CubicSpline(s[keep], conv[keep])
    out = np.zeros(xi.shape)
    inside = np.abs(xi) <= L / 2
    out[inside] = spline(xi[inside])
    return out


def n_hat_coefficients(
    f: FourierFunction,
    family,
    scheme: CutProjectScheme,
    window: Window,
    P: float,
    variant: str = "phi",
    spec: BumpSpec | None = None,
    h: float | None = None,
) -> CoefficientTable:
    """Coefficients ``N^(eta)`` for ``|p2*(eta)| <= P`` and ``|p1*(eta)|`` within
    the support overlap of ``f^``.

    ``variant="phi"`` uses the weight ``D Phi(-p2*)``; ``variant="psi"`` uses
    ``vol^{-1} (psi^2)^(-p2*)`` for the bump ``spec``.
    """
    family = _family(family)
    if f.profile.tail_bound != 0.0:
        raise ConfigurationError("f must have compact Fourier support")
    lo, hi = f.support()
    ov = hi - lo
    pts = scheme.dual_points(np.array([-ov, ov]), (-P, P))
    p1, p2 = pts.ambient[:, 0], pts.ambient[:, 1]
    order = np.lexsort((p2, p1))
    z, p1, p2 = pts.integer_coords[order], p1[order], p2[order]
    I = overlap_integral(f, family, p1, h)
    if variant == "phi":
        weight = scheme.density(window) * phi_profile(window, -p2)
        prov = "phi"
        meta = {"density": scheme.density(window), "window_length": window.length}
    elif variant == "psi":
        if spec is None:
            raise ConfigurationError("the psi variant needs a BumpSpec")
        weight = psi_sq_transform(spec, -p2) / scheme.covolume
        prov = "psi"
        meta = {"covolume": scheme.covolume, "bump": {"epsilon": spec.epsilon, "n": spec.n, "S": spec.S}}
    else:
        raise ValueError(f"unknown variant {variant!r}")
    vals = weight * I
    keep = vals != 0
    return CoefficientTable(z[keep], p1[keep], p2[keep], vals[keep], float(P), float(ov), prov, meta)


@dataclass(frozen=True)
class SeriesReconstruction:
    x: np.ndarray
    P_sweep: tuple
    partials: tuple  # one array per P
    deltas: tuple  # max |S_{P_j} - S_{P_{j-1}}|

    @property
    def values(self) -> np.ndarray:
        return self.partials[-1]

    @property
    def deltas_decreasing(self) -> bool:
        d = self.deltas
        return all(b < a for a, b in zip(d, d[1:]))


def n_series_reconstruct(table: CoefficientTable, x_grid, P_sweep: Sequence[float] | None = None) -> SeriesReconstruction:
    """Partial sums ``sum_{|p2*| <= P} N^(eta) e^{-2 pi i p1*(eta) x}``."""
    x = np.asarray(x_grid, dtype=float)
    sweep = tuple(float(P) for P in (P_sweep if P_sweep is not None else (table.P,)))
    if any(P > table.P for P in sweep):
        raise ConfigurationError("P_sweep exceeds the table truncation")
    partials, deltas = [], []
    for P in sweep:
        sel = np.abs(table.p2) <= P
        if np.any(sel):
            s = np.exp(-2j * np.pi * np.outer(x.ravel(), table.p1[sel])) @ table.values[sel]
        else:
            s = np.zeros(x.size, dtype=complex)
        s = s.reshape(x.shape)
        if partials:
            deltas.append(float(np.max(np.abs(s - partials[-1]))) if s.size else 0.0)
        partials.append(s)
    return SeriesReconstruction(x, sweep, tuple(partials), tuple(deltas))


# ---------------------------------------------------------- Bessel check


def empirical_upper_bound(family, patch: ModelSetPatch, trials: int = 50, seed: int = 0) -> tuple:
    """Max of ``frame_sum(f) / ||f||^2`` over random class-D ``f``; also
    returns the individual ratios."""
    family = _family(family)
    if family.is_zero:
        return 0.0, []
    rng = np.random.default_rng(seed)
    ratios = [frame_sum(f, family, patch).value.real / l2_norm_sq(f) for f in random_class_d(rng, trials)]
    return float(max(ratios)), ratios


def bessel_necessary_check(
    family, patch: ModelSetPatch, t_grid, trials: int = 50, seed: int = 0, tolerance: float = 0.01
) -> ResidualReport:
    """Check ``D sum_k |g^_k(t)|^2 <= B_g (1 + tolerance)`` on ``t_grid``.

    ``B_g`` is estimated empirically. The residual at ``t`` is the relative
    excess ``max(0, D S(t) / B_g - 1)``, so the report passes iff the
    inequality holds everywhere.
    """
    family = _family(family)
    t = np.asarray(t_grid, dtype=float)
    D = patch.scheme.density(patch.window)
    B, ratios = empirical_upper_bound(family, patch, trials, seed)
    lhs = D * family.sum_sq(t)
    if B > 0:
        res = np.maximum(0.0, lhs / B - 1.0)
    else:
        res = np.where(lhs > 0, np.inf, 0.0)
    trunc = {"radius": patch.radius, "trials": trials, "seed": seed}
    details = {"B_g": B, "density": D, "max_lhs": float(lhs.max()) if lhs.size else 0.0, "ratios": ratios}
    return ResidualReport("bessel_necessary", res.tolist(), t.tolist(), tolerance, trunc, details)


# --------------------------------------------------------- certificates


@dataclass
class CertificateReport:
    """Residuals of ``L(t, eta) = delta_{eta, 0}`` on a ``(t, eta)`` grid.

    ``residual_eta0[i] = |L(t_i, 0) - 1|``; ``residual_eta[j] = max_t |L(t, eta_j)|``
    over ``eta_j != 0``.
    """

    equation: str
    t_grid: np.ndarray
    residual_eta0: np.ndarray
    eta_p1: np.ndarray
    eta_p2: np.ndarray
    residual_eta: np.ndarray
    tolerance: float
    truncation: dict
    details: dict = field(default_factory=dict)

    @property
    def max_eta0(self) -> float:
        return float(self.residual_eta0.max()) if self.residual_eta0.size else 0.0

    @property
    def max_off(self) -> float:
        return float(self.residual_eta.max()) if self.residual_eta.size else 0.0

    @property
    def passed(self) -> bool:
        extra = self.details.get("bessel_excess", 0.0)
        return self.max_eta0 <= self.tolerance and self.max_off <= self.tolerance and extra <= self.tolerance

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"

    def to_dict(self) -> dict:
        return _jsonable(
            {
                "equation": self.equation,
                "t_grid": self.t_grid,
                "residual_eta0": self.residual_eta0,
                "eta_p1_star": self.eta_p1,
                "eta_p2_star": self.eta_p2,
                "residual_eta": self.residual_eta,
                "max_residual_eta0": self.max_eta0,
                "max_residual_eta_nonzero": self.max_off,
                "tolerance": self.tolerance,
                "truncation": self.truncation,
                "details": self.details,
                "verdict": self.verdict,
            }
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def default_P(window: Window, level: float = 1e-3) -> float:
    """Radius beyond which ``|Phi| <= 1 / (pi |Omega| xi)`` is below ``level``."""
    return 1.0 / (math.pi * window.length * level)


def default_t_grid(family: GeneratorFamily, points: int = 201) -> np.ndarray:
    """Uniform grid over the generators' bandwidth plus a tenth on each side."""
    lo, hi = family.support()
    if hi <= lo:
        lo, hi = -1.0, 1.0
    m = (hi - lo) / 10
    return np.linspace(lo - m, hi + m, points)


def _L_values(family: GeneratorFamily, scheme, window, t, P, chunk=2048):
    """Evaluate ``L(t, eta)`` for all ``eta`` that can be nonzero on ``t``."""
    D = scheme.density(window)
    # symmetric in (g, h) so swapped pairs see the same dual points
    lo, hi = family.support()
    box = np.array([min(t.min(), lo) - hi, max(t.max(), hi) - lo])
    pts = scheme.dual_points(box, (-P, P))
    p1, p2 = pts.ambient[:, 0], pts.ambient[:, 1]
    order = np.lexsort((p2, p1))
    p1, p2 = p1[order], p2[order]
    zero = np.all(pts.integer_coords[order] == 0, axis=1)
    eta0 = np.zeros(t.size, dtype=complex)
    off = np.zeros(int((~zero).sum()))
    p1o, p2o = p1[~zero], p2[~zero]
    weight = D * phi_profile(window, -p2o)
    for i in range(0, p1o.size, chunk):
        blk = slice(i, i + chunk)
        off[blk] = np.max(np.abs(weight[blk][None, :] * family.cross(t, p1o[blk])), axis=0) if t.size else 0.0
    eta0 = D * family.cross(t, np.zeros(1))[:, 0]
    return eta0, p1o, p2o, off


def _certify(family, scheme, window, t_grid, P, tolerance, equation, sensitivity=True):
    family = _family(family)
    t = default_t_grid(family) if t_grid is None else np.asarray(t_grid, dtype=float)
    P = default_P(window) if P is None else float(P)
    eta0, p1, p2, off = _L_values(family, scheme, window, t, P)
    res0 = np.abs(eta0 - 1.0)
    details = {"L_eta0": eta0}
    if sensitivity:
        _, _, _, off2 = _L_values(family, scheme, window, t, 2 * P)
        details["sensitivity_2P"] = {"max_residual_eta_nonzero": float(off2.max()) if off2.size else 0.0}
    trunc = {"P": P, "dual_points": int(p1.size) + 1, "t_points": int(t.size), "grid_only": True}
    return CertificateReport(equation, t, res0, p1, p2, off, tolerance, trunc, details)


def tight_certify(family, scheme: CutProjectScheme, window: Window, t_grid=None, P=None, tolerance: float = DEFAULT_TOLERANCE) -> CertificateReport:
    """Residuals of ``D Phi(-p2*) sum_k conj(g^_k(t)) g^_k(t - p1*) = delta_{eta,0}``."""
    family = GeneratorFamily(_family(family).members)
    return _certify(family, scheme, window, t_grid, P, tolerance, "tight")


def dual_certify(family_g, family_h, scheme: CutProjectScheme, window: Window, t_grid=None, P=None, tolerance: float = DEFAULT_TOLERANCE) -> CertificateReport:
    """Residuals of ``D Phi(-p2*) sum_k conj(g^_k(t)) h^_k(t - p1*) = delta_{eta,0}``.

    The swapped pair ``(h, g)`` is evaluated too; its maxima are stored under
    ``details["swapped"]`` and enter the verdict.
    """
    g = _family(family_g).members
    h = _family(family_h).members
    fam = GeneratorFamily(g, h)
    rep = _certify(fam, scheme, window, t_grid, P, tolerance, "dual")
    sw = _certify(fam.swapped(), scheme, window, rep.t_grid, rep.truncation["P"], tolerance, "dual", sensitivity=False)
    rep.details["swapped"] = {"max_residual_eta0": sw.max_eta0, "max_residual_eta_nonzero": sw.max_off}
    rep.residual_eta0 = np.maximum(rep.residual_eta0, sw.residual_eta0)
    rep.residual_eta = np.maximum(rep.residual_eta, sw.residual_eta)
    return rep


def tight_certify_v2(
    family,
    scheme: CutProjectScheme,
    window: Window,
    t_grid=None,
    trials: int = 50,
    patch: ModelSetPatch | None = None,
    tolerance: float = DEFAULT_TOLERANCE,
    seed: int = 0,
) -> CertificateReport:
    """Check (a) empirical ``B_g <= 1 + tolerance`` and (b)
    ``|D sum_k |g^_k(t)|^2 - 1| <= tolerance`` on ``t_grid``."""
    family = GeneratorFamily(_family(family).members)
    t = default_t_grid(family) if t_grid is None else np.asarray(t_grid, dtype=float)
    D = scheme.density(window)
    res0 = np.abs(D * family.sum_sq(t) - 1.0)
    if patch is None:
        patch = build_model_set(scheme, window, (0.0, 0.0), 80.0)
    B, ratios = empirical_upper_bound(family, patch, trials, seed)
    details = {"B_g": B, "bessel_excess": max(0.0, B - 1.0), "ratios": ratios}
    trunc = {"radius": patch.radius, "trials": trials, "seed": seed, "t_points": int(t.size), "grid_only": True}
    empty = np.zeros(0)
    return CertificateReport("tight_v2", t, res0, empty, empty, empty, tolerance, trunc, details)
