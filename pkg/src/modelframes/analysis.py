"""Fourier-side functions on the real line, inner products and mean values.

Conventions: ``f^(t) = int f(x) e^{-2 pi i x t} dx``, ``T_a f(x) = f(x - a)``
and ``M_b f(x) = e^{2 pi i b x} f(x)``, so that ``(T_a f)^(t) =
e^{-2 pi i a t} f^(t)``, ``(M_b f)^(t) = f^(t - b)`` and
``M_b T_a = e^{2 pi i a b} T_a M_b``.

Every :class:`FourierFunction` is stored in the canonical form
``c T_shift M_mod f0`` around a fixed real profile ``f0``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import simpson

from .bumps import BumpSpec, bump_ft, bump_time, envelope_radius
from .cutproject import Window
from .errors import EvaluationError, ResolutionError

TAIL_LEVEL = 1e-12
_GAUSS_CUT = math.sqrt(math.log(1.0 / TAIL_LEVEL) / math.pi)  # e^{-pi x^2} = 1e-12
_GAUSS_TIME = math.sqrt(16 * math.log(10.0) / math.pi)  # e^{-pi x^2} = 1e-16


# ------------------------------------------------------------- profiles


@dataclass(frozen=True)
class GaussianProfile:
    amplitude: float = 1.0
    width: float = 1.0
    kind = "gaussian"

    def ft(self, t):
        return self.amplitude * np.exp(-np.pi * (np.asarray(t, dtype=float) / self.width) ** 2)

    def time(self, x):
        w = self.width
        return self.amplitude * w * np.exp(-np.pi * (w * np.asarray(x, dtype=float)) ** 2)

    def support(self):
        c = _GAUSS_CUT * self.width
        return (-c, c)

    @property
    def tail_bound(self):
        return TAIL_LEVEL * abs(self.amplitude)

    @property
    def feature(self):
        return self.width

    @property
    def time_extent(self):
        return _GAUSS_TIME / self.width

    def to_dict(self):
        return {"kind": "gaussian", "amplitude": self.amplitude, "width": self.width}


@dataclass(frozen=True)
class IndicatorProfile:
    a: float
    kind = "indicator_interval"

    def ft(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(np.abs(t) <= self.a, 1.0, 0.0)

    def time(self, x):
        return 2 * self.a * np.sinc(2 * self.a * np.asarray(x, dtype=float))

    def support(self):
        return (-self.a, self.a)

    tail_bound = 0.0

    @property
    def feature(self):
        return 2 * self.a

    @property
    def time_extent(self):
        return 4.0 / self.a

    def to_dict(self):
        return {"kind": "indicator_interval", "a": self.a}


@dataclass(frozen=True)
class SincProductProfile:
    """Class-D function whose transform is the bump ``psi_n`` and whose time
    values are the sinc product."""

    spec: BumpSpec
    kind = "sinc_product"

    def ft(self, t):
        return bump_time(self.spec, t)

    def time(self, x):
        return bump_ft(self.spec, x)

    def support(self):
        a = self.spec.window.half_width
        return (-a, a)

    tail_bound = 0.0

    @property
    def feature(self):
        return self.spec.window.half_width * self.spec.epsilon**self.spec.n

    @property
    def time_extent(self):
        return envelope_radius(self.spec, TAIL_LEVEL)

    def to_dict(self):
        s = self.spec
        return {"kind": "sinc_product", "half_width": s.window.half_width, "epsilon": s.epsilon, "n": s.n, "S": s.S}


CUTOFF_SPEC = BumpSpec(Window(1.0, "open"), 0.5, 1)


@dataclass(frozen=True)
class SmoothCutoffGaussianProfile:
    """``exp(-pi (t/w)^2) chi(t/W)`` with ``chi`` the ``eps = 1/2, n = 1``
    bump on ``[-1, 1]``, normalised so ``chi(0) = 1``."""

    width: float = 1.0
    cutoff: float = 1.0
    kind = "smooth_cutoff_gaussian"

    def ft(self, t):
        t = np.asarray(t, dtype=float)
        chi = bump_time(CUTOFF_SPEC, t / self.cutoff) / _chi0()
        return np.exp(-np.pi * (t / self.width) ** 2) * np.where(np.abs(t) < self.cutoff, chi, 0.0)

    def time(self, x):
        return _time_by_quadrature(self, x)

    def support(self):
        return (-self.cutoff, self.cutoff)

    tail_bound = 0.0

    @property
    def feature(self):
        return min(self.width, self.cutoff) / 2

    @property
    def time_extent(self):
        return _GAUSS_TIME / self.width + envelope_radius(CUTOFF_SPEC, TAIL_LEVEL) / self.cutoff

    def to_dict(self):
        return {"kind": "smooth_cutoff_gaussian", "width": self.width, "cutoff": self.cutoff}


_CHI0 = []


def _chi0():
    if not _CHI0:
        _CHI0.append(float(bump_time(CUTOFF_SPEC, 0.0)))
    return _CHI0[0]


@dataclass(frozen=True, eq=False)
class GridProfile:
    """Fourier-side samples on ``start + k * spacing``, linearly interpolated."""

    samples: np.ndarray
    spacing: float
    start: float
    kind = "grid"

    def __post_init__(self):
        s = np.array(self.samples, dtype=complex)
        if not self.spacing > 0:
            raise ValueError("grid spacing must be positive")
        if s.ndim != 1 or s.size < 2 or not np.all(np.isfinite(s)):
            raise ValueError("grid samples must be a finite 1-D array with at least 2 entries")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @property
    def nodes(self):
        return self.start + self.spacing * np.arange(self.samples.size)

    def ft(self, t):
        t = np.asarray(t, dtype=float)
        nodes = self.nodes
        re = np.interp(t, nodes, self.samples.real, left=0.0, right=0.0)
        im = np.interp(t, nodes, self.samples.imag, left=0.0, right=0.0)
        return re + 1j * im

    def time(self, x):
        return _time_by_quadrature(self, x)

    def support(self):
        return (float(self.start), float(self.start + self.spacing * (self.samples.size - 1)))

    @property
    def tail_bound(self):
        return float(max(abs(self.samples[0]), abs(self.samples[-1])))

    @property
    def feature(self):
        return 64 * self.spacing

    @property
    def time_extent(self):
        return 1.0 / (2 * self.spacing)

    def to_dict(self):
        lo, hi = self.support()
        return {"kind": "grid", "spacing": self.spacing, "support": [lo, hi], "size": int(self.samples.size)}

    def __eq__(self, other):
        return (
            isinstance(other, GridProfile)
            and self.spacing == other.spacing
            and self.start == other.start
            and np.array_equal(self.samples, other.samples)
        )

    def __hash__(self):
        return hash((self.spacing, self.start, self.samples.tobytes()))


def _time_by_quadrature(profile, x):
    lo, hi = profile.support()
    x = np.atleast_1d(np.asarray(x, dtype=float))
    h = min(profile.feature / 64, 1.0 / (8 * (np.max(np.abs(x)) + profile.time_extent)))
    t = _simpson_nodes(lo, hi, h)
    vals = profile.ft(t)
    out = np.array([simpson(vals * np.exp(2j * np.pi * xi * t), x=t) for xi in x])
    return out


# ------------------------------------------------------- FourierFunction


@dataclass(frozen=True)
class FourierFunction:
    """``coef * T_shift M_mod f0`` for a profile ``f0``."""

    profile: object
    coef: complex = 1.0
    shift: float = 0.0
    mod: float = 0.0

    @property
    def kind(self) -> str:
        return self.profile.kind

    def ft(self, t):
        t = np.asarray(t, dtype=float)
        base = self.profile.ft(t - self.mod)
        if self.shift != 0.0:
            base = base * np.exp(-2j * np.pi * self.shift * t)
        return self.coef * base

    def time(self, x):
        x = np.asarray(x, dtype=float)
        y = x - self.shift
        base = self.profile.time(y)
        if self.mod != 0.0:
            base = base * np.exp(2j * np.pi * self.mod * y)
        return self.coef * base

    def __call__(self, x):
        return self.time(x)

    def translate(self, a: float) -> "FourierFunction":
        return replace(self, shift=self.shift + float(a))

    def modulate(self, b: float) -> "FourierFunction":
        # M_b T_s M_m = e^{2 pi i b s} T_s M_{m + b}
        return replace(self, coef=self.coef * np.exp(2j * np.pi * b * self.shift), mod=self.mod + float(b))

    def scale(self, c: complex) -> "FourierFunction":
        return replace(self, coef=self.coef * c)

    def involution(self) -> "FourierFunction":
        """``g*(x) = conj(g(-x))``, whose transform is ``conj(g^)``."""
        if isinstance(self.profile, GridProfile):
            p = GridProfile(np.conj(self.profile.samples), self.profile.spacing, self.profile.start)
            return FourierFunction(p, np.conj(self.coef), -self.shift, self.mod)
        return FourierFunction(self.profile, np.conj(self.coef), -self.shift, self.mod)

    def support(self) -> tuple:
        lo, hi = self.profile.support()
        return (lo + self.mod, hi + self.mod)

    @property
    def tail_bound(self) -> float:
        return abs(self.coef) * self.profile.tail_bound

    @property
    def is_zero(self) -> bool:
        return self.coef == 0

    def to_dict(self) -> dict:
        c = complex(self.coef)
        return {**self.profile.to_dict(), "coef": [c.real, c.imag], "shift": self.shift, "mod": self.mod}


def gaussian(amplitude: float = 1.0, width: float = 1.0) -> FourierFunction:
    """``f^(t) = amplitude * exp(-pi (t / width)^2)``."""
    return FourierFunction(GaussianProfile(float(amplitude), float(width)))


def indicator_interval(a: float) -> FourierFunction:
    return FourierFunction(IndicatorProfile(float(a)))


def sinc_product(spec: BumpSpec) -> FourierFunction:
    return FourierFunction(SincProductProfile(spec))


def smooth_cutoff_gaussian(width: float = 1.0, cutoff: float = 1.0) -> FourierFunction:
    return FourierFunction(SmoothCutoffGaussianProfile(float(width), float(cutoff)))


def grid_function(samples, spacing: float, start: float) -> FourierFunction:
    return FourierFunction(GridProfile(samples, float(spacing), float(start)))


def zero_function() -> FourierFunction:
    return FourierFunction(GaussianProfile(), 0.0)


def from_descriptor(d: dict) -> FourierFunction:
    """Build a function from a plain dict such as ``{"kind": "gaussian", "width": 1}``."""
    d = dict(d)
    kind = d.pop("kind")
    coef = d.pop("coef", 1.0)
    if isinstance(coef, (list, tuple)):
        coef = complex(coef[0], coef[1])
    shift = float(d.pop("shift", 0.0))
    mod = float(d.pop("mod", 0.0))
    if kind == "gaussian":
        f = gaussian(d.pop("amplitude", 1.0), d.pop("width", 1.0))
    elif kind == "indicator_interval":
        f = indicator_interval(d.pop("a"))
    elif kind == "sinc_product":
        half = d.pop("half_width", 1.0)
        f = sinc_product(BumpSpec(Window(half, "open"), d.pop("epsilon", 0.5), d.pop("n", 2), d.pop("S", 40)))
    elif kind == "smooth_cutoff_gaussian":
        f = smooth_cutoff_gaussian(d.pop("width", 1.0), d.pop("cutoff", 1.0))
    else:
        raise ValueError(f"unknown function kind {kind!r}")
    if d:
        raise ValueError(f"unknown keys for {kind}: {sorted(d)}")
    return FourierFunction(f.profile, coef, shift, mod)


def ft_pointwise(f: FourierFunction, t, annotate: bool = False):
    """Evaluate ``f^(t)`` including accumulated translation/modulation phases.

    For grid functions, points outside the sampled support evaluate to 0;
    with ``annotate=True`` a dict with the number of such points and the
    declared tail bound is returned as well.
    """
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)):
        raise ValueError("t must be finite")
    vals = f.ft(t)
    if not annotate:
        return vals
    lo, hi = f.support()
    outside = int(np.sum((t < lo) | (t > hi)))
    return vals, {"outside_support": outside, "tail_bound": f.tail_bound}


# ----------------------------------------------------------- quadrature


@dataclass(frozen=True)
class QuadratureResult:
    value: complex
    error: float
    spacing: float
    interval: tuple

    def __complex__(self):
        return complex(self.value)


def _simpson_nodes(lo: float, hi: float, h: float) -> np.ndarray:
    n = max(2, int(math.ceil((hi - lo) / h)))
    n += n % 2
    return np.linspace(lo, hi, n + 1)


def _overlap(*fs: FourierFunction):
    lo = max(f.support()[0] for f in fs)
    hi = min(f.support()[1] for f in fs)
    return lo, hi


def nyquist_spacing(fs: Sequence[FourierFunction], max_phase: float = 0.0) -> float:
    """Largest step resolving the integrand's phases (time-side extent)."""
    shifts = [f.shift for f in fs]
    extent = (max(shifts) - min(shifts)) + max_phase + sum(f.profile.time_extent for f in fs)
    return 1.0 / (2.0 * extent)


def auto_spacing(fs: Sequence[FourierFunction], max_phase: float = 0.0) -> float:
    feature = min(f.profile.feature for f in fs)
    return min(feature / 64.0, nyquist_spacing(fs, max_phase) / 4.0)


def inner_product(f: FourierFunction, g: FourierFunction, h: float | None = None) -> QuadratureResult:
    """``<f, g> = int f^ conj(g^) dt`` by composite Simpson over the common support.

    The error estimate is the Richardson difference ``|I_h - I_{2h}| / 15``.

    Raises
    ------
    ResolutionError
        If a user-supplied ``h`` is coarser than the Nyquist step of the
        integrand.
    """
    lo, hi = _overlap(f, g)
    if f.is_zero or g.is_zero or hi <= lo:
        return QuadratureResult(0j, 0.0, 0.0 if h is None else h, (lo, hi))
    if h is None:
        h = auto_spacing([f, g])
    elif h > nyquist_spacing([f, g]):
        raise ResolutionError(f"step {h:g} too coarse; Nyquist step is {nyquist_spacing([f, g]):g}")
    t = _simpson_nodes(lo, hi, h)
    y = f.ft(t) * np.conj(g.ft(t))
    fine = simpson(y, x=t)
    coarse = simpson(y[::2], x=t[::2])
    return QuadratureResult(complex(fine), float(abs(fine - coarse) / 15.0), float(t[1] - t[0]), (lo, hi))


def correlation(f: FourierFunction, g: FourierFunction, u, h: float | None = None, chunk: int = 512) -> np.ndarray:
    """``<f, T_u g> = int f^(t) conj(g^(t)) e^{2 pi i u t} dt`` for an array of ``u``."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    lo, hi = _overlap(f, g)
    if f.is_zero or g.is_zero or hi <= lo or u.size == 0:
        return np.zeros(u.shape, dtype=complex)
    umax = float(np.max(np.abs(u)))
    if h is None:
        h = auto_spacing([f, g], umax)
    elif h > nyquist_spacing([f, g], umax):
        raise ResolutionError(f"step {h:g} too coarse for |u| <= {umax:g}")
    t = _simpson_nodes(lo, hi, h)
    w = _simpson_weights(t)
    G = f.ft(t) * np.conj(g.ft(t)) * w
    out = np.empty(u.shape, dtype=complex)
    for i in range(0, u.size, chunk):
        uu = u[i : i + chunk]
        out[i : i + chunk] = np.exp(2j * np.pi * np.outer(uu, t)) @ G
    return out


def _simpson_weights(t: np.ndarray) -> np.ndarray:
    n = t.size - 1
    h = (t[-1] - t[0]) / n
    w = np.ones(t.size)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * h / 3.0


def integrate(fn: Callable, lo: float, hi: float, h: float) -> complex:
    """Composite Simpson of a vectorised callable on ``[lo, hi]``."""
    if hi <= lo:
        return 0j
    t = _simpson_nodes(lo, hi, h)
    return complex(simpson(fn(t), x=t))


def l2_norm_sq(f: FourierFunction) -> float:
    return float(inner_product(f, f).value.real)


# ----------------------------------------------------------- mean values


@dataclass(frozen=True)
class MeanEstimate:
    """Averages ``(1/R) int_{-R/2}^{R/2} sample(x) e^{2 pi i x theta} dx`` along a schedule."""

    value: complex
    R_schedule: tuple
    values: tuple
    residuals: tuple
    theta: float = 0.0
    spacing: float = 0.0

    def residuals_decreasing(self, slack: float = 0.0) -> bool:
        r = self.residuals
        return all(b <= a * (1 + slack) for a, b in zip(r, r[1:]))

    def to_dict(self) -> dict:
        return {
            "value": [self.value.real, self.value.imag],
            "R_schedule": list(self.R_schedule),
            "values": [[v.real, v.imag] for v in self.values],
            "residuals": list(self.residuals),
            "theta": self.theta,
            "spacing": self.spacing,
        }


DEFAULT_SCHEDULE = (250.0, 500.0, 1000.0, 2000.0)


def _nested_grid(radii, h0):
    r0 = radii[0]
    n0 = int(math.ceil(r0 / (2 * h0)))
    h = r0 / (2 * n0)
    for r in radii:
        k = r / (2 * h)
        if abs(k - round(k)) > 1e-9:
            raise ValueError("schedule radii must be integer multiples of the first radius")
    K = int(round(radii[-1] / (2 * h)))
    return h, K


def birkhoff_from_samples(x: np.ndarray, values: np.ndarray, thetas, radii, h: float) -> list:
    """Mean-value estimates from samples on the symmetric grid ``x = h k``."""
    values = np.asarray(values)
    if not np.all(np.isfinite(values)):
        raise EvaluationError("sample returned a non-finite value")
    K = (x.size - 1) // 2
    out = []
    for theta in np.atleast_1d(thetas):
        y = values * np.exp(2j * np.pi * theta * x)
        vals = []
        for r in radii:
            k = int(round(r / (2 * h)))
            seg = y[K - k : K + k + 1]
            w = np.ones(seg.size)
            w[1:-1:2] = 4.0
            w[2:-1:2] = 2.0
            vals.append(complex(np.dot(w, seg) * h / 3.0 / r))
        res = tuple(abs(b - a) for a, b in zip(vals, vals[1:]))
        out.append(MeanEstimate(vals[-1], tuple(float(r) for r in radii), tuple(vals), res, float(theta), h))
    return out


def birkhoff_coefficient(sample: Callable, theta, R_schedule=DEFAULT_SCHEDULE, h: float = 1.0 / 32):
    """Birkhoff/Bohr coefficient estimate of an almost periodic sample.

    ``sample`` must accept an array of points. The sample is evaluated once
    on the grid of the largest cube and averaged over each nested cube with
    composite Simpson. A scalar ``theta`` gives one :class:`MeanEstimate`, an
    array gives a list.
    """
    radii = [float(r) for r in R_schedule]
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise ValueError("R_schedule must be increasing")
    hh, K = _nested_grid(radii, h)
    x = hh * np.arange(-K, K + 1)
    vals = np.asarray(sample(x))
    res = birkhoff_from_samples(x, vals, theta, radii, hh)
    return res[0] if np.ndim(theta) == 0 else res


# ------------------------------------------------------------------- CSV


def write_grid_csv(f: FourierFunction, fp) -> None:
    """Write ``f^`` at its grid nodes as ``t,re,im`` with a metadata line."""
    if not isinstance(f.profile, GridProfile):
        raise TypeError("only grid functions can be written as CSV")
    p = f.profile
    t = p.nodes + f.mod
    v = f.ft(t)
    lo, hi = f.support()
    fp.write(f"# spacing={p.spacing!r},support_lo={lo!r},support_hi={hi!r}\n")
    w = csv.writer(fp, lineterminator="\n")
    w.writerow(["t", "re", "im"])
    for ti, vi in zip(t, v):
        w.writerow([repr(float(ti)), repr(float(vi.real)), repr(float(vi.imag))])


def read_grid_csv(fp) -> FourierFunction:
    meta_line = fp.readline()
    if not meta_line.startswith("#"):
        raise ValueError("grid CSV must start with a '#' metadata line")
    meta = dict(kv.split("=") for kv in meta_line[1:].strip().split(","))
    rows = list(csv.reader(fp))[1:]
    arr = np.array([[float(c) for c in r] for r in rows])
    return grid_function(arr[:, 1] + 1j * arr[:, 2], float(meta["spacing"]), float(meta["support_lo"]))
