"""Semi-regular Gabor systems ``{T_lambda M_beta g_l}`` with ``lambda`` in a
model set and ``beta`` in a lattice ``Delta = A Z``.

Everything reduces to :mod:`modelframes.frames` through the expanded family
``g_k = M_beta g_l``, ``k = (l, beta)``, whose transforms are
``g^_k(t) = g^_l(t - beta)``. The Wexler-Raz check evaluates

    D |det A|^{-1} Phi(-p2*(eta)) sum_l <T_{A^I v} M_{p1*(eta)} h_l, g_l>

two ways: as inner products, and as Fourier coefficients of the
``A``-periodisation ``F_eta(t) = C(eta) sum_l sum_n conj(g^_l(t - A n)) h^_l(t - A n - p1*)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .analysis import FourierFunction, inner_product, l2_norm_sq
from .bumps import phi_profile
from .cutproject import CutProjectScheme, Window, density_estimate
from .errors import BudgetExceededError, ConfigurationError
from .frames import (
    CertificateReport,
    GeneratorFamily,
    default_P,
    default_t_grid,
    dual_certify,
    tight_certify,
)
from .poisson import _jsonable

TAIL_REL = 1e-10
MAX_MODULATIONS = 100_000
DENSITY_AGREEMENT = 0.02


@dataclass(frozen=True)
class GaborSystem:
    """Windows ``g_l`` and modulation lattice ``Delta = A Z^m`` (here ``m = 1``).

    ``beta_radius`` bounds the enumerated modulations ``|beta| <= beta_radius``;
    ``None`` picks the radius where every ``|g^_l(t - beta)|`` has dropped
    below ``1e-10`` of its peak on the grid in use.
    """

    windows: tuple
    A: np.ndarray
    beta_radius: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "windows", tuple(self.windows))
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        if A.shape != (1, 1):
            raise ConfigurationError("only m = 1 modulation lattices are supported")
        if not abs(np.linalg.det(A)) > 0:
            raise ConfigurationError("modulation matrix A must be invertible")
        A.setflags(write=False)
        object.__setattr__(self, "A", A)
        if not self.windows:
            raise ConfigurationError("a Gabor system needs at least one window")

    @property
    def L(self) -> int:
        return len(self.windows)

    @property
    def det_A(self) -> float:
        return float(abs(np.linalg.det(self.A)))

    @property
    def A_inv_T(self) -> np.ndarray:
        """``A^I = (A^T)^{-1}``."""
        return np.linalg.inv(self.A.T)

    @property
    def step(self) -> float:
        return float(self.A[0, 0])

    def same_lattice(self, other: "GaborSystem") -> bool:
        return np.allclose(self.A, other.A, rtol=0, atol=1e-14)

    def radius_for(self, t_grid) -> float:
        """Smallest ``R`` with ``|g^_l(t - beta)| <= 1e-10 peak`` for all ``|beta| > R``."""
        if self.beta_radius is not None:
            return float(self.beta_radius)
        t = np.asarray(t_grid, dtype=float)
        reach = 0.0
        for g in self.windows:
            if g.is_zero:
                continue
            s = np.linspace(*g.support(), 4001)
            v = np.abs(g.ft(s))
            big = s[v >= TAIL_REL * v.max()]
            reach = max(reach, abs(big[0]), abs(big[-1]))
        return float(np.max(np.abs(t)) + reach) if t.size else reach

    def betas(self, radius: float) -> np.ndarray:
        a = abs(self.step)
        n = int(math.floor(radius / a))
        if 2 * n + 1 > MAX_MODULATIONS:
            raise BudgetExceededError(f"{2 * n + 1} modulations exceed the budget of {MAX_MODULATIONS}", 2 * n + 1)
        return a * np.arange(-n, n + 1)

    def to_dict(self) -> dict:
        return {"windows": [g.to_dict() for g in self.windows], "A": self.A.tolist(), "beta_radius": self.beta_radius}


def expand_gabor(system: GaborSystem, t_grid=None, radius: float | None = None) -> GeneratorFamily:
    """The family ``M_beta g_l`` for ``|beta| <= radius``, ordered by ``(l, beta)``."""
    if radius is None:
        radius = system.radius_for(np.zeros(1) if t_grid is None else t_grid)
    members = [g.modulate(float(b)) for g in system.windows for b in system.betas(radius)]
    return GeneratorFamily(tuple(members))


def gabor_sum_bound(system: GaborSystem) -> float:
    """Upper bound for ``sum_l sum_n |g^_l(t - A n)|^2`` when each ``|g^_l|`` is unimodal:
    ``sum_l (max |g^_l|^2 + ||g_l||^2 / |det A|)``."""
    out = 0.0
    for g in system.windows:
        if g.is_zero:
            continue
        s = np.linspace(*g.support(), 4001)
        out += float(np.max(np.abs(g.ft(s)) ** 2)) + l2_norm_sq(g) / system.det_A
    return out


def _grid(system, t_grid):
    if t_grid is not None:
        return np.asarray(t_grid, dtype=float)
    return default_t_grid(GeneratorFamily(system.windows))


def gabor_tight_certify(system: GaborSystem, scheme: CutProjectScheme, window: Window, t_grid=None, P=None, **kw) -> CertificateReport:
    """Tight-frame certificate of the expanded family. At ``eta = 0`` this is
    ``D sum_l sum_n |g^_l(t - A n)|^2 = 1``."""
    t = _grid(system, t_grid)
    rep = tight_certify(expand_gabor(system, t), scheme, window, t, P, **kw)
    rep.equation = "gabor_tight"
    rep.truncation["beta_radius"] = system.radius_for(t)
    return rep


def gabor_dual_certify(
    system_g: GaborSystem, system_h: GaborSystem, scheme: CutProjectScheme, window: Window, t_grid=None, P=None, **kw
) -> CertificateReport:
    """Dual-pair certificate of the expanded families.

    Raises
    ------
    ConfigurationError
        If the two systems do not share ``Delta``.
    """
    if not system_g.same_lattice(system_h):
        raise ConfigurationError("dual Gabor systems must share the modulation lattice")
    if system_g.L != system_h.L:
        raise ConfigurationError("dual Gabor systems must have the same number of windows")
    t = _grid(system_g, t_grid)
    R = max(system_g.radius_for(t), system_h.radius_for(t))
    rep = dual_certify(expand_gabor(system_g, t, R), expand_gabor(system_h, t, R), scheme, window, t, P, **kw)
    rep.equation = "gabor_dual"
    rep.truncation["beta_radius"] = R
    return rep


# ------------------------------------------------------------ Wexler-Raz


def wr_inner(g: FourierFunction, h: FourierFunction, a: float, b: float, order: str = "TM") -> complex:
    """``<T_a M_b h, g>`` (``order="TM"``) or ``<M_b T_a h, g>`` (``"MT"``)."""
    if order == "TM":
        u = h.modulate(b).translate(a)
    elif order == "MT":
        u = h.translate(a).modulate(b)
    else:
        raise ValueError(f"unknown order {order!r}")
    return inner_product(u, g).value


def periodization_coefficients(
    g: FourierFunction, h: FourierFunction, A: float, p: float, v, points: int | None = None
) -> np.ndarray:
    """Fourier coefficients ``(1/A) int_0^A sum_n conj(g^(t - A n)) h^(t - A n - p) e^{-2 pi i v t / A} dt``.

    The periodisation is smooth and periodic, so the trapezoid rule on one
    period is spectrally accurate.

    Raises
    ------
    BudgetExceededError
        If more than ``MAX_MODULATIONS`` shifts are needed.
    """
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if g.is_zero or h.is_zero:
        return np.zeros(v.shape, dtype=complex)
    A = abs(A)
    glo, ghi = g.support()
    hlo, hhi = h.support()
    lo, hi = max(glo, hlo + p), min(ghi, hhi + p)
    if hi <= lo:
        return np.zeros(v.shape, dtype=complex)
    n_lo = int(math.floor((0.0 - hi) / A)) - 1
    n_hi = int(math.ceil((A - lo) / A)) + 1
    if n_hi - n_lo + 1 > MAX_MODULATIONS:
        raise BudgetExceededError("periodisation needs too many shifts", n_hi - n_lo + 1)
    if points is None:
        feature = min(g.profile.feature, h.profile.feature)
        points = max(512, int(math.ceil(64 * A / feature)))
    t = A * np.arange(points) / points
    F = np.zeros(points, dtype=complex)
    for n in range(n_lo, n_hi + 1):
        s = t - A * n
        F += np.conj(g.ft(s)) * h.ft(s - p)
    phase = np.exp(-2j * np.pi * np.outer(v, t) / A)
    return phase @ F / points


@dataclass
class WexlerRazReport:
    """Entries of the biorthogonality relations over a finite ``(eta, v)`` box."""

    entries: list
    tolerance: float
    identity_tolerance: float
    truncation: dict
    details: dict = field(default_factory=dict)

    @property
    def max_residual(self) -> float:
        return max((e["residual"] for e in self.entries), default=0.0)

    @property
    def max_identity_residual(self) -> float:
        return max((e["identity_residual"] for e in self.entries), default=0.0)

    @property
    def identity_passed(self) -> bool:
        return self.max_identity_residual <= self.identity_tolerance

    @property
    def passed(self) -> bool:
        return self.max_residual <= self.tolerance

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"

    def to_dict(self) -> dict:
        return _jsonable(
            {
                "entries": self.entries,
                "max_residual": self.max_residual,
                "max_identity_residual": self.max_identity_residual,
                "identity_verdict": "pass" if self.identity_passed else "fail",
                "verdict": self.verdict,
                "tolerance": self.tolerance,
                "identity_tolerance": self.identity_tolerance,
                "truncation": self.truncation,
                "details": self.details,
            }
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def default_eta_box(system_g: GaborSystem, system_h: GaborSystem, scheme: CutProjectScheme, window: Window, P=None):
    """Dual points with ``|p2*| <= P`` and ``p1*`` within the window overlap."""
    P = default_P(window) if P is None else P
    sup = [w.support() for w in system_g.windows + system_h.windows if not w.is_zero]
    width = max(s[1] for s in sup) - min(s[0] for s in sup) if sup else 0.0
    return scheme.dual_points(np.array([-width, width]), (-P, P)).integer_coords


def wexler_raz_check(
    system_g: GaborSystem,
    system_h: GaborSystem,
    scheme: CutProjectScheme,
    window: Window,
    eta_box=None,
    v_box=None,
    tolerance: float = 1e-3,
    identity_tolerance: float = 1e-6,
) -> WexlerRazReport:
    """Evaluate the Wexler-Raz relations and the periodisation identity.

    ``eta_box`` is an array of dual-lattice integer coordinates (default:
    :func:`default_eta_box`); ``v_box`` the integer frequencies
    (default ``-2..2``).
    """
    if not system_g.same_lattice(system_h):
        raise ConfigurationError("Wexler-Raz pairs must share the modulation lattice")
    if system_g.L != system_h.L:
        raise ConfigurationError("Wexler-Raz pairs must have the same number of windows")
    etas = default_eta_box(system_g, system_h, scheme, window) if eta_box is None else np.atleast_2d(eta_box)
    vs = np.arange(-2, 3) if v_box is None else np.asarray(v_box, dtype=int)
    D = scheme.density(window)
    A = system_g.step
    AI = float(system_g.A_inv_T[0, 0])
    detA = system_g.det_A
    amb = np.asarray(etas, dtype=float) @ scheme.dual.generator.T
    entries = []
    for z, (p1, p2) in zip(np.asarray(etas).tolist(), amb):
        C = D * float(phi_profile(window, -p2))
        per = np.zeros(vs.size, dtype=complex)
        for g, h in zip(system_g.windows, system_h.windows):
            per += periodization_coefficients(g, h, A, p1, vs)
        for v, pv in zip(vs.tolist(), per):
            direct = sum(wr_inner(g, h, AI * v, p1) for g, h in zip(system_g.windows, system_h.windows))
            value = C / detA * direct
            via_period = C * pv
            target = 1.0 if (v == 0 and all(c == 0 for c in z)) else 0.0
            scale = max(1.0, abs(value))
            entries.append(
                {
                    "eta": z,
                    "p1_star": float(p1),
                    "p2_star": float(p2),
                    "v": int(v),
                    "value": complex(value),
                    "periodization_value": complex(via_period),
                    "target": target,
                    "residual": float(abs(value - target)),
                    "identity_residual": float(abs(value - via_period) / scale),
                }
            )
    trunc = {"eta_points": int(len(etas)), "v_box": vs.tolist(), "A": system_g.A.tolist()}
    return WexlerRazReport(entries, tolerance, identity_tolerance, trunc, {"density": D, "det_A": detA})


# --------------------------------------------------------------- density


@dataclass(frozen=True)
class DensityVerdict:
    formula_density: float
    empirical_density: float
    det_A: float
    passed: bool
    margin: float
    agreement: float
    anomaly: bool
    message: str
    radii: tuple

    def to_dict(self) -> dict:
        return {
            "formula_density": self.formula_density,
            "empirical_density": self.empirical_density,
            "det_A": self.det_A,
            "pass": self.passed,
            "margin": self.margin,
            "relative_disagreement": self.agreement,
            "anomaly": self.anomaly,
            "message": self.message,
            "radii": list(self.radii),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def density_check(scheme: CutProjectScheme, window: Window, A, radii=(1e2, 1e3, 1e4)) -> DensityVerdict:
    """Necessary condition ``D <= |det A|`` for a dual of the stated form.

    The comparison allows a relative slack of 1e-12 so that ``|det A| = D``
    is a boundary pass despite rounding in the covolume.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    det = float(abs(np.linalg.det(A)))
    D = scheme.density(window)
    emp = density_estimate(scheme, window, radii).estimate
    ok = D <= det * (1 + 1e-12)
    disagree = abs(emp - D) / D
    msg = "necessary condition satisfied" if ok else "necessary condition violated"
    return DensityVerdict(D, float(emp), det, bool(ok), det - D, float(disagree), bool(disagree > DENSITY_AGREEMENT), msg, tuple(radii))
