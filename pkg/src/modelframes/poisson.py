"""Model-set Poisson summation and the psi-bracket product.

With primal weights ``w(lambda) = psi(p2(gamma))`` and dual weights
``w~(gamma*) = vol^{-1} psi^(p2*(gamma*))``,

    sum_lambda w(lambda) F(lambda) e^{-2 pi i lambda t}
        = sum_{gamma*} w~(-p2*(gamma*)) F^(t - p1*(gamma*)),

and the bracket ``[f^, g^](t) = sum w~(-p2*) f^(t - p1*) conj(g^(t - p1*))``
is almost periodic with Bohr coefficients ``w(lambda) <f, T_lambda g>``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .analysis import (
    DEFAULT_SCHEDULE,
    FourierFunction,
    MeanEstimate,
    birkhoff_coefficient,
    correlation,
    inner_product,
    smooth_cutoff_gaussian,
)
from .bumps import (
    DEFAULT_FLOOR,
    BumpSpec,
    bump_ft,
    bump_ft_l1,
    bump_time,
    bump_time_metadata,
    envelope_radius,
    ft_tail_integral,
)
from .cutproject import CutProjectScheme, ModelSetPatch
from .errors import ConfigurationError, MembershipError, ResolutionError, TruncationError


# ---------------------------------------------------------------- reports


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (complex, np.complexfloating)):
        return [float(v.real), float(v.imag)]
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    return v


@dataclass
class ResidualReport:
    name: str
    residuals: list
    grid: list
    tolerance: float
    truncation: dict
    details: dict = field(default_factory=dict)

    @property
    def max_abs_residual(self) -> float:
        return float(max(self.residuals)) if len(self.residuals) else 0.0

    @property
    def verdict(self) -> str:
        return "pass" if self.max_abs_residual <= self.tolerance else "fail"

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_dict(self) -> dict:
        return _jsonable(
            {
                "name": self.name,
                "residuals": [float(r) for r in self.residuals],
                "grid": self.grid,
                "max_abs_residual": self.max_abs_residual,
                "truncation": self.truncation,
                "verdict": self.verdict,
                "tolerance": self.tolerance,
                "details": self.details,
            }
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


# ------------------------------------------------------------- dual table


@dataclass(frozen=True)
class DualTable:
    """Dual points sorted by ``p1*`` with weights ``w~(-p2*)``."""

    scheme: CutProjectScheme
    spec: BumpSpec
    p1: np.ndarray
    p2: np.ndarray
    weights: np.ndarray
    floor: float
    p1_range: tuple
    p2_radius: float
    absolute: bool = False

    def __len__(self):
        return self.p1.size

    def truncation(self) -> dict:
        return {
            "weight_floor": self.floor,
            "dual_p1_range": list(self.p1_range),
            "dual_p2_radius": self.p2_radius,
            "dual_points": int(self.p1.size),
            "absolute_weights": self.absolute,
        }

    def as_absolute(self) -> "DualTable":
        return DualTable(
            self.scheme, self.spec, self.p1, self.p2, np.abs(self.weights), self.floor, self.p1_range, self.p2_radius, True
        )

    def tail_bound(self) -> float:
        """Bound on ``int_{|u| > P} |psi^(u)| du`` for the dropped dual points."""
        return ft_tail_integral(self.spec, self.p2_radius)


def dual_table(
    scheme: CutProjectScheme,
    spec: BumpSpec,
    p1_range,
    floor: float = DEFAULT_FLOOR,
    p2_radius: float | None = None,
    absolute: bool = False,
) -> DualTable:
    """Enumerate the dual weight table on ``p1* in p1_range``, ``|w~| >= floor``."""
    vol = scheme.covolume
    if p2_radius is None:
        p2_radius = envelope_radius(spec, floor * vol)
    lo, hi = float(p1_range[0]), float(p1_range[1])
    pts = scheme.dual_points(np.array([lo, hi]), (-p2_radius, p2_radius))
    p1 = pts.ambient[:, 0]
    p2 = pts.ambient[:, -1]
    w = bump_ft(spec.with_truncation_for(p2_radius), -p2) / vol
    keep = np.abs(w) >= floor
    p1, p2, w = p1[keep], p2[keep], w[keep]
    order = np.argsort(p1, kind="stable")
    p1, p2, w = p1[order], p2[order], w[order]
    if absolute:
        w = np.abs(w)
    for a in (p1, p2, w):
        a.setflags(write=False)
    return DualTable(scheme, spec, p1, p2, w, float(floor), (lo, hi), float(p2_radius), absolute)


def comb_sum(table: DualTable, t, G: Callable, support: tuple, chunk: int = 32) -> np.ndarray:
    """``sum_j w_j G(t - p1_j)`` for a function ``G`` vanishing off ``support``.

    Raises
    ------
    ConfigurationError
        If the table's ``p1*`` range does not cover ``t - support``.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    lo, hi = support
    if t.size == 0:
        return np.zeros(0, dtype=complex)
    need_lo, need_hi = float(t.min() - hi), float(t.max() - lo)
    if need_lo < table.p1_range[0] - 1e-9 or need_hi > table.p1_range[1] + 1e-9:
        raise ConfigurationError(
            f"dual table covers p1* in {table.p1_range}, evaluation needs [{need_lo:.6g}, {need_hi:.6g}]"
        )
    order = np.argsort(t, kind="stable")
    ts = t[order]
    out = np.zeros(t.size, dtype=complex)
    p1, w = table.p1, table.weights
    for i in range(0, ts.size, chunk):
        tc = ts[i : i + chunk]
        j0 = np.searchsorted(p1, tc[0] - hi, side="left")
        j1 = np.searchsorted(p1, tc[-1] - lo, side="right")
        if j1 <= j0:
            continue
        s = tc[:, None] - p1[None, j0:j1]
        inside = (s >= lo) & (s <= hi)
        vals = np.where(inside, G(np.where(inside, s, 0.5 * (lo + hi))), 0.0)
        out[order[i : i + chunk]] = vals @ w[j0:j1]
    return out


def _support_of(*fs: FourierFunction) -> tuple:
    lo = max(f.support()[0] for f in fs)
    hi = min(f.support()[1] for f in fs)
    return lo, hi


def _require_table(table):
    if table is None:
        raise ConfigurationError("a dual weight table is required (build one with dual_table)")


# --------------------------------------------------------------- Poisson


def poisson_sides(patch: ModelSetPatch, table: DualTable, F: FourierFunction, t_grid, tol: float = 1e-8):
    """Left and right sides of the Poisson formula on ``t_grid``."""
    if patch.shift != (0.0, 0.0):
        raise ConfigurationError("poisson summation is stated for the unshifted model set")
    t = np.asarray(t_grid, dtype=float)
    lam = patch.values
    w = bump_time(table.spec, patch.p2, tol)
    Fl = w * F.time(lam)
    lhs = np.exp(-2j * np.pi * np.outer(t, lam)) @ Fl
    rhs = comb_sum(table, t, F.ft, F.support())
    return lhs, rhs


def _primal_tail(F: FourierFunction, R: float, density: float) -> float:
    x = np.linspace(R, R + 200.0, 20001)
    left = np.trapezoid(np.abs(F.time(-x)), x)
    right = np.trapezoid(np.abs(F.time(x)), x)
    return float(density * (left + right))


def poisson_verify(
    patch: ModelSetPatch,
    spec: BumpSpec,
    F: FourierFunction,
    t_grid,
    floor: float = DEFAULT_FLOOR,
    tolerance: float = 1e-6,
    p2_radius: float | None = None,
    table: DualTable | None = None,
) -> ResidualReport:
    """Two-sided check of the model-set Poisson summation formula.

    Raises
    ------
    TruncationError
        If the estimated primal or dual tail exceeds ``tolerance / 10``.
    """
    t = np.asarray(t_grid, dtype=float)
    lo, hi = F.support()
    if table is None:
        table = dual_table(patch.scheme, spec, (float(t.min() - hi), float(t.max() - lo)), floor, p2_radius)
    density = patch.scheme.density(patch.window)
    fmax = float(np.max(np.abs(F.ft(np.linspace(lo, hi, 257))))) if not F.is_zero else 0.0
    tails = {
        "primal": _primal_tail(F, patch.radius, density) if not F.is_zero else 0.0,
        "dual": (hi - lo) * fmax * table.tail_bound() + (hi - lo) * F.tail_bound,
    }
    if max(tails.values()) > tolerance / 10:
        raise TruncationError(f"estimated tails {tails} exceed tolerance/10 = {tolerance / 10:g}", tails)
    lhs, rhs = poisson_sides(patch, table, F, t)
    res = np.abs(lhs - rhs)
    trunc = {
        "primal_radius": patch.radius,
        "primal_points": len(patch),
        **table.truncation(),
        "bump_time": bump_time_metadata(spec),
        "estimated_tails": tails,
    }
    return ResidualReport("poisson", res.tolist(), t.tolist(), tolerance, trunc)


# --------------------------------------------------------------- brackets


def bracket(f: FourierFunction, g: FourierFunction, table: DualTable | None, t) -> np.ndarray:
    """``[f^, g^]^psi(t)``; conjugate-linear in ``g``."""
    _require_table(table)
    support = _support_of(f, g)
    if f.is_zero or g.is_zero or support[1] <= support[0]:
        return np.zeros(np.shape(np.atleast_1d(t)), dtype=complex)
    G = lambda s: f.ft(s) * np.conj(g.ft(s))
    return comb_sum(table, t, G, support)


def table_for_means(scheme, spec, fs: Sequence[FourierFunction], R_schedule, floor: float = 1e-8) -> DualTable:
    """Dual table wide enough to evaluate brackets of ``fs`` on ``[-R/2, R/2]``."""
    lo = min(f.support()[0] for f in fs)
    hi = max(f.support()[1] for f in fs)
    half = max(R_schedule) / 2.0
    return dual_table(scheme, spec, (-half - hi - 1.0, half - lo + 1.0), floor)


@dataclass(frozen=True)
class CoefficientPair:
    lam: float
    direct: complex
    birkhoff: MeanEstimate

    @property
    def difference(self) -> float:
        return abs(self.direct - self.birkhoff.value)


def bracket_coefficient(
    f: FourierFunction,
    g: FourierFunction,
    table: DualTable,
    patch: ModelSetPatch,
    lam,
    R_schedule=DEFAULT_SCHEDULE,
    h: float = 1.0 / 32,
    tol: float = 1e-8,
):
    """Direct and Birkhoff values of the bracket's Bohr coefficient at ``lam``.

    ``lam`` may be a sequence of patch points, in which case the bracket is
    sampled once and a list is returned.

    Raises
    ------
    MembershipError
        If some ``lam`` is not a patch point.
    """
    _require_table(table)
    lams = np.atleast_1d(np.asarray(lam, dtype=float))
    idx = [patch.index_of(l) for l in lams]
    if any(i < 0 for i in idx):
        bad = lams[[i < 0 for i in idx]][0]
        raise MembershipError(f"{bad!r} is not a point of the patch")
    w = bump_time(table.spec, patch.p2[idx] + patch.shift[1], tol)
    exact = patch.values[idx]
    direct = w * correlation(f, g, exact)
    ests = birkhoff_coefficient(lambda x: bracket(f, g, table, x), exact, R_schedule, h)
    out = [CoefficientPair(float(l), complex(d), e) for l, d, e in zip(exact, direct, ests)]
    return out[0] if np.ndim(lam) == 0 else out


def mean_bracket_check(
    f: FourierFunction,
    g: FourierFunction,
    table: DualTable,
    R_schedule=DEFAULT_SCHEDULE,
    tolerance: float = 1e-2,
    h: float = 1.0 / 32,
    normalize: bool = False,
) -> ResidualReport:
    """``|M{[f^, g^]^psi} - psi(0) <f, g>|`` with the mean from a Birkhoff average.

    With ``normalize=True`` both sides are divided by ``psi(0)`` (the
    bump rescaled so that ``psi(0) = 1``).
    """
    _require_table(table)
    psi0 = float(bump_time(table.spec, 0.0))
    ip = inner_product(f, g)
    mean = birkhoff_coefficient(lambda x: bracket(f, g, table, x), 0.0, R_schedule, h)
    scale = 1.0 / psi0 if normalize else 1.0
    expected = psi0 * ip.value * scale
    value = mean.value * scale
    res = abs(value - expected)
    trunc = {**table.truncation(), "quadrature_spacing": ip.spacing, "birkhoff_spacing": mean.spacing, "R_schedule": list(mean.R_schedule)}
    details = {
        "mean": value,
        "expected": expected,
        "psi0": psi0,
        "birkhoff_residuals": list(mean.residuals),
        "normalized": normalize,
    }
    return ResidualReport("mean_bracket", [res], [0.0], tolerance, trunc, details)


def _decay_truncated_sum(lam: np.ndarray, terms_fn, ref_fn, rel: float = 1e-8, run: int = 20):
    """Sum ``terms_fn`` over ``lam`` ordered by ``|lam|``, stopping once
    ``|ref|`` stays below ``rel * peak`` for ``run`` consecutive points."""
    order = np.argsort(np.abs(lam), kind="stable")
    lam_sorted = lam[order]
    ref = np.abs(ref_fn(lam_sorted))
    peak = ref.max() if ref.size else 0.0
    small = ref < rel * peak
    stop = lam_sorted.size
    count = 0
    for i, s in enumerate(small):
        count = count + 1 if s else 0
        if count >= run:
            stop = i + 1
            break
    used = order[:stop]
    converged = stop < lam_sorted.size or peak == 0.0
    return terms_fn(used), stop, converged


def plancherel_sum_check(
    f: FourierFunction,
    g: FourierFunction,
    h_fn: FourierFunction,
    table: DualTable,
    patch: ModelSetPatch,
    R_schedule=DEFAULT_SCHEDULE,
    tolerance: float = 1e-2,
    h: float = 1.0 / 32,
    tol: float = 1e-8,
) -> ResidualReport:
    """Compare ``sum_lambda w^2 <f, T_lambda g> <T_lambda h, f>`` with the mean
    of ``[f^, g^]^psi * [h^, f^]^psi``.

    Raises
    ------
    TruncationError
        If the correlations have not decayed inside the patch.
    """
    _require_table(table)
    lam = patch.values
    w2 = bump_time(table.spec, patch.p2 + patch.shift[1], tol) ** 2

    def terms(idx):
        a = correlation(f, g, lam[idx])
        # <T_l h, f> = <h, T_{-l} f>
        b = correlation(h_fn, f, -lam[idx])
        return np.sum(w2[idx] * a * b)

    direct, used, converged = _decay_truncated_sum(lam, terms, lambda l: correlation(f, g, l) if not (f.is_zero or g.is_zero) else np.zeros(l.shape))
    if not converged:
        raise TruncationError("correlations did not decay below 1e-8 of peak within the patch", {"points": used})
    sample = lambda x: bracket(f, g, table, x) * bracket(h_fn, f, table, x)
    mean = birkhoff_coefficient(sample, 0.0, R_schedule, h)
    res = abs(direct - mean.value)
    trunc = {
        **table.truncation(),
        "primal_radius": patch.radius,
        "lambda_terms_used": int(used),
        "birkhoff_spacing": mean.spacing,
        "R_schedule": list(mean.R_schedule),
    }
    details = {"direct": complex(direct), "mean": mean.value, "birkhoff_residuals": list(mean.residuals)}
    return ResidualReport("plancherel_sum", [res], [0.0], tolerance, trunc, details)


@dataclass
class BesselBound:
    B: float
    bound: float
    ratios: list
    verdict: str
    truncation: dict

    def to_dict(self):
        return _jsonable(self.__dict__)


def random_class_d(rng: np.random.Generator, count: int, width_range=(0.25, 4.0), shift_range=(-5.0, 5.0)):
    """Random smooth-cutoff Gaussians: widths log-uniform, cut-off ``3 w``,
    random time shifts."""
    lo, hi = np.log(width_range[0]), np.log(width_range[1])
    out = []
    for _ in range(count):
        w = float(np.exp(rng.uniform(lo, hi)))
        out.append(smooth_cutoff_gaussian(w, 3.0 * w).translate(float(rng.uniform(*shift_range))))
    return out


def weighted_frame_sum(f, g, patch, spec, power: int = 2, tol: float = 1e-8) -> float:
    w = bump_time(spec, patch.p2 + patch.shift[1], tol)
    c = correlation(f, g, patch.values)
    return float(np.sum(np.abs(w) ** power * np.abs(c) ** 2))


def bessel_bound(
    g: FourierFunction,
    table: DualTable,
    t_grid,
    patch: ModelSetPatch | None = None,
    trials: int = 10,
    seed: int = 0,
) -> BesselBound:
    """Bessel bound for ``{w(lambda) T_lambda g}`` from the ``|psi^|`` bracket.

    ``B = vol^{-1} max_t sum |w~(-p2*)| |g^(t - p1*)|^2`` and the bound is
    ``B * vol * ||psi^||_1``. If a patch is given, ``trials`` random class-D
    ``f`` are checked against it.

    Raises
    ------
    ResolutionError
        If the ``t_grid`` spacing exceeds a quarter of ``g^``'s feature width.
    """
    t = np.asarray(t_grid, dtype=float)
    if t.size > 1 and np.max(np.diff(np.sort(t))) > g.profile.feature / 4:
        raise ResolutionError("t_grid too sparse for the bandwidth of g^")
    vol = table.scheme.covolume
    absw = table.as_absolute()
    if g.is_zero:
        s = np.zeros(t.size)
    else:
        s = comb_sum(absw, t, lambda u: np.abs(g.ft(u)) ** 2, g.support()).real
    B = float(s.max() / vol) if s.size else 0.0
    l1 = bump_ft_l1(table.spec)
    bound = B * vol * l1
    ratios = []
    if patch is not None and not g.is_zero:
        rng = np.random.default_rng(seed)
        for f in random_class_d(rng, trials):
            ratios.append(weighted_frame_sum(f, g, patch, table.spec) / inner_product(f, f).value.real)
    verdict = "pass" if all(r <= bound for r in ratios) else "fail"
    trunc = {**table.truncation(), "psi_hat_l1": l1, "trials": trials, "seed": seed}
    return BesselBound(B, bound, ratios, verdict, trunc)
