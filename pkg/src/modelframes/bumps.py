"""Smooth windows built as infinite convolutions of box densities.

``psi_n`` is supported on ``Omega = [-a, a]`` and has Fourier transform

    psi_n^(t) = prod_{s >= 0} sinc(t * eps^{n s} * |Omega_n|),  Omega_n = (1 - eps^n) Omega,

with ``sinc(x) = sin(pi x) / (pi x)``. As ``n`` grows ``psi_n`` tends to
``1_Omega / |Omega|`` and the profile ``Phi = |Omega| (Psi * Psi)`` equals
``sinc(|Omega| xi)``.
"""

from __future__ import annotations

import csv
import functools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.signal import fftconvolve

from .cutproject import ModelSetPatch, Window
from .errors import ConfigurationError, ResolutionError
from .lattice import LatticePoints

DEFAULT_S = 40
DEFAULT_FLOOR = 1e-10
_MAX_FFT = 2**23


@dataclass(frozen=True)
class BumpSpec:
    window: Window
    epsilon: float = 0.5
    n: int = 2
    S: int = DEFAULT_S

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n}")
        if int(self.S) != self.S or self.S < 1:
            raise ValueError(f"S must be an integer >= 1, got {self.S}")

    @property
    def shrunk_length(self) -> float:
        """``|Omega_n| = (1 - eps^n) |Omega|``."""
        return (1.0 - self.epsilon**self.n) * self.window.length

    def scales(self) -> np.ndarray:
        """Box lengths ``eps^{n s} |Omega_n|`` for ``s = 0..S``."""
        return self.shrunk_length * self.epsilon ** (self.n * np.arange(self.S + 1))

    def truncation_error(self, t_max: float) -> float:
        """Bound on ``|1 - prod_{s > S} sinc(t c_s)|`` for ``|t| <= t_max``."""
        c = self.shrunk_length * self.epsilon ** (self.n * (self.S + 1))
        q = self.epsilon ** (2 * self.n)
        # 1 - sinc(x) <= (pi x)^2 / 6, geometric in s
        return (math.pi * c * t_max) ** 2 / 6.0 / (1.0 - q)

    def with_truncation_for(self, t_max: float, target: float = 1e-12) -> "BumpSpec":
        """Smallest ``S >= self.S`` whose dropped factors stay below ``target``."""
        spec = self
        while spec.truncation_error(t_max) > target:
            spec = BumpSpec(self.window, self.epsilon, self.n, spec.S + 1)
        return spec


def bump_ft(spec: BumpSpec, t) -> np.ndarray:
    """Truncated sinc product ``prod_{s=0}^{S} sinc(t eps^{ns} |Omega_n|)``."""
    t = np.asarray(t, dtype=float)
    out = np.ones_like(t)
    for c in spec.scales():
        out = out * np.sinc(t * c)
    return out


def ft_envelope(spec: BumpSpec, t) -> np.ndarray:
    """Decay envelope ``prod_{s: c_s|t| >= 1} (pi c_s |t|)^{-1}`` (at most 1)."""
    t = np.abs(np.asarray(t, dtype=float))
    out = np.ones_like(t)
    for c in spec.scales():
        x = c * t
        out = out * np.where(x >= 1.0, 1.0 / (math.pi * np.maximum(x, 1.0)), 1.0)
    return out


@functools.lru_cache(maxsize=256)
def envelope_radius(spec: BumpSpec, level: float) -> float:
    """Smallest ``P`` (to 1e-6 relative) with ``envelope(t) < level`` for ``|t| > P``."""
    if level >= 1.0:
        return 0.0
    hi = 1.0 / spec.shrunk_length
    while ft_envelope(spec, hi) >= level:
        hi *= 2.0
        if hi > 1e15:
            raise ResolutionError(f"bump envelope does not reach {level:g} below |t| = 1e15")
    lo = hi / 2.0
    while hi - lo > 1e-6 * hi:
        mid = 0.5 * (lo + hi)
        if ft_envelope(spec, mid) >= level:
            lo = mid
        else:
            hi = mid
    return hi


def ft_tail_integral(spec: BumpSpec, T: float) -> float:
    """Bound on ``int_{|t| > T} |psi^(t)| dt`` from the envelope."""
    u = np.linspace(0.0, 80.0, 8001)
    t = T * np.exp(u)
    return float(2.0 * np.trapezoid(ft_envelope(spec, t) * t, u))


@functools.lru_cache(maxsize=32)
def _time_grid(spec: BumpSpec, tol: float):
    a = spec.window.half_width
    dt = 1.0 / (8.0 * a)  # period 8a > support 2a, no wrap-around
    T = 64.0 / spec.shrunk_length
    while ft_tail_integral(spec, T) > tol / 10.0:
        T *= 2.0
        if 2 * 2 * T / dt > _MAX_FFT:
            raise ResolutionError(
                f"inverse transform of psi_n (eps={spec.epsilon}, n={spec.n}) needs |t| > {T:g} "
                f"for tolerance {tol:g}; grid budget exceeded"
            )
    tail = ft_tail_integral(spec, T)
    K = int(math.ceil(T / dt))
    M = 1 << int(math.ceil(math.log2(2 * 2 * K)))  # zero padding for a finer x grid
    k = np.arange(-K, K)
    buf = np.zeros(M)
    buf[k % M] = bump_ft(spec.with_truncation_for(T), k * dt)
    vals = np.fft.fftshift(np.real(np.fft.ifft(buf))) * M * dt
    x = (np.arange(M) - M // 2) / (M * dt)
    keep = np.abs(x) <= 1.25 * a
    spline = CubicSpline(x[keep], vals[keep])
    return spline, float(x[keep][0]), float(x[keep][-1]), tail, float(x[1] - x[0])


def bump_time(spec: BumpSpec, x, tol: float = 1e-8) -> np.ndarray:
    """``psi_n(x)`` by a zero-padded inverse FFT of the sinc product.

    Raises
    ------
    ResolutionError
        If the transform's tail beyond the affordable frequency range is
        larger than ``tol``.
    """
    spline, lo, hi, _, _ = _time_grid(spec, float(tol))
    x = np.asarray(x, dtype=float)
    inside = (x >= lo) & (x <= hi)
    return np.where(inside, spline(np.clip(x, lo, hi)), 0.0)


def bump_time_metadata(spec: BumpSpec, tol: float = 1e-8) -> dict:
    _, lo, hi, tail, h = _time_grid(spec, float(tol))
    return {"x_range": [lo, hi], "x_spacing": h, "ft_tail_bound": tail}


def bump_ft_l1(spec: BumpSpec, tol: float = 1e-8) -> float:
    """``||psi^||_1`` by Simpson quadrature plus the envelope tail."""
    from scipy.integrate import simpson

    T = 64.0 / spec.shrunk_length
    while ft_tail_integral(spec, T) > tol and T < 1e7:
        T *= 2.0
    h = min(0.01, 0.05 / spec.shrunk_length)
    t = np.linspace(0.0, T, int(math.ceil(T / h)) + 1)
    return float(2.0 * simpson(np.abs(bump_ft(spec, t)), x=t))


@dataclass(frozen=True)
class BumpFunction:
    """``psi_n`` with its transform; the time grid is computed on first use."""

    spec: BumpSpec
    tol: float = 1e-8

    def ft(self, t):
        return bump_ft(self.spec, t)

    def time_values(self, x):
        return bump_time(self.spec, x, self.tol)

    def __call__(self, x):
        return self.time_values(x)


def phi_profile(window: Window, xi) -> np.ndarray:
    """Closed form ``Phi(xi) = sinc(|Omega| xi)``; ``Phi(0) = 1`` exactly."""
    return np.sinc(window.length * np.asarray(xi, dtype=float))


def phi_convolution_oracle(spec: BumpSpec, xi, h: float = 0.05, L: float = 16000.0) -> np.ndarray:
    """``|Omega| (psi_n^ * psi_n^)(xi)`` by trapezoid convolution on ``[-L, L]``.

    Independent numerical check of :func:`phi_profile` (the limit ``n -> oo``).
    ``h`` below 1/4 keeps the trapezoid rule alias-free because the
    integrand is the transform of a function supported in ``[-2a, 2a]``.
    """
    xi = np.asarray(xi, dtype=float)
    N = int(round(L / h))
    s = h * np.arange(-N, N + 1)
    f = bump_ft(spec, s)
    conv = fftconvolve(f, f, mode="same") * h
    return spec.window.length * np.interp(xi, s, conv)


# --------------------------------------------------------------- weights


@dataclass(frozen=True)
class WeightTable:
    """Primal weights ``w(lambda) = psi(p2(gamma) + s)`` and dual weights
    ``w~(gamma*) = vol^{-1} psi^(p2*(gamma*))``."""

    patch: ModelSetPatch
    spec: BumpSpec
    lambdas: np.ndarray
    weights: np.ndarray
    dual_points: LatticePoints
    dual_weights: np.ndarray
    floor: float
    p1_range: tuple
    p2_radius: float
    metadata: dict = field(default_factory=dict, compare=False)

    @property
    def p1_star(self) -> np.ndarray:
        return self.dual_points.ambient[:, 0]

    @property
    def p2_star(self) -> np.ndarray:
        return self.dual_points.ambient[:, -1]

    def truncation(self) -> dict:
        return {
            "weight_floor": self.floor,
            "dual_p1_range": list(self.p1_range),
            "dual_p2_radius": self.p2_radius,
            "dual_points": int(len(self.dual_points)),
            "primal_radius": self.patch.radius,
            "primal_points": int(self.lambdas.shape[0]),
            **self.metadata,
        }

    def write_primal_csv(self, fp) -> None:
        w = csv.writer(fp, lineterminator="\n")
        w.writerow(["lambda", "w_psi"])
        for lam, v in zip(self.lambdas, self.weights):
            w.writerow([repr(float(lam)), repr(float(v))])

    def write_dual_csv(self, fp) -> None:
        w = csv.writer(fp, lineterminator="\n")
        w.writerow(["p1_star", "p2_star", "w_tilde"])
        for a, b, v in zip(self.p1_star, self.p2_star, self.dual_weights):
            w.writerow([repr(float(a)), repr(float(b)), repr(float(v))])


def dual_weight_points(scheme, spec: BumpSpec, p1_range, floor: float = DEFAULT_FLOOR, p2_radius: float | None = None):
    """Dual points with ``p1*`` in ``p1_range`` and ``|w~| >= floor``.

    The ``p2*`` cut-off comes from the decay envelope unless given.
    Returns ``(points, weights, p2_radius)``.
    """
    vol = scheme.covolume
    if p2_radius is None:
        p2_radius = envelope_radius(spec, floor * vol)
    pts = scheme.dual_points(np.asarray(p1_range, dtype=float), (-p2_radius, p2_radius))
    w = bump_ft(spec.with_truncation_for(p2_radius), pts.ambient[:, -1]) / vol
    keep = np.abs(w) >= floor
    return pts[keep], w[keep], float(p2_radius)


def weight_table(
    patch: ModelSetPatch,
    spec: BumpSpec,
    p1_range=(-10.0, 10.0),
    floor: float = DEFAULT_FLOOR,
    p2_radius: float | None = None,
    tol: float = 1e-8,
) -> WeightTable:
    """Primal and dual weight tables for a patch and bump.

    Raises
    ------
    ConfigurationError
        If the bump's window differs from the patch's window.
    """
    if not math.isclose(patch.window.half_width, spec.window.half_width, rel_tol=0, abs_tol=1e-15):
        raise ConfigurationError(
            f"bump window half_width {spec.window.half_width} differs from patch window {patch.window.half_width}"
        )
    s = patch.shift[1]
    w = bump_time(spec, patch.p2 + s, tol)
    keep = w > 0
    lam = patch.points[keep, 0] if patch.m == 1 else patch.points[keep]
    pts, dw, P = dual_weight_points(patch.scheme, spec, p1_range, floor, p2_radius)
    meta = {"bump_time": bump_time_metadata(spec, tol)}
    return WeightTable(patch, spec, lam, w[keep], pts, dw, float(floor), tuple(float(v) for v in p1_range), P, meta)
