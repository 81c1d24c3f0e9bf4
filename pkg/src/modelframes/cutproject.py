"""Cut-and-project schemes and simple model sets with interval windows.

Physical space is the first ``m`` lattice coordinates, internal space the
last one. Balls ``B(0, R)`` are sup-norm cubes. A patch of radius ``R``
holds the points with ``|lambda|_inf <= R``; counting quantities normalised
by ``R^m`` use the centred cube of side ``R``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import (
    CoverageError,
    EmptySetError,
    InvalidLatticeError,
    NonGenericConfigurationError,
)
from .lattice import Lattice, LatticePoints, cut_project_generator, dual_lattice, enumerate_in_box

COLLISION_TOL = 1e-10
BOUNDARY_TOL = 1e-8
MATCH_TOL = 1e-9

CANONICAL_ALPHA = math.sqrt(2.0)
CANONICAL_BETA = math.sqrt(3.0)


@dataclass(frozen=True)
class CutProjectScheme:
    lattice: Lattice
    alpha: tuple | None = None
    beta: tuple | None = None
    dual: Lattice = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.lattice.dim < 2:
            raise InvalidLatticeError("a cut-and-project scheme needs d = m + 1 >= 2")
        object.__setattr__(self, "dual", dual_lattice(self.lattice))

    @classmethod
    def from_alpha_beta(cls, alpha, beta) -> "CutProjectScheme":
        """Scheme of the standard example lattice built from ``alpha`` and ``beta``.

        Rational independence of ``1, alpha`` and of ``beta, 1 + beta.alpha``
        is the caller's responsibility; it is not checked.
        """
        a = tuple(float(x) for x in np.atleast_1d(alpha))
        b = tuple(float(x) for x in np.atleast_1d(beta))
        return cls(Lattice(cut_project_generator(a, b)), a, b)

    @classmethod
    def canonical(cls) -> "CutProjectScheme":
        return cls.from_alpha_beta(CANONICAL_ALPHA, CANONICAL_BETA)

    @property
    def m(self) -> int:
        return self.lattice.dim - 1

    @property
    def covolume(self) -> float:
        return self.lattice.covolume

    @staticmethod
    def p1(points: np.ndarray) -> np.ndarray:
        return np.asarray(points)[..., :-1]

    @staticmethod
    def p2(points: np.ndarray) -> np.ndarray:
        return np.asarray(points)[..., -1]

    def density(self, window: "Window") -> float:
        """Exact density ``|Omega| / vol(Gamma)`` of the simple model set."""
        return window.length / self.covolume

    def dual_points(self, p1_box, p2_range, budget=None) -> LatticePoints:
        """Dual lattice points with ``p1*`` in ``p1_box`` and ``p2*`` in ``p2_range``."""
        box = _strip_box(self.m, p1_box, p2_range)
        kw = {} if budget is None else {"budget": budget}
        return enumerate_in_box(self.dual, box, **kw)

    def to_dict(self) -> dict:
        return {
            "generator": self.lattice.generator.tolist(),
            "alpha": list(self.alpha) if self.alpha is not None else None,
            "beta": list(self.beta) if self.beta is not None else None,
            "m": self.m,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CutProjectScheme":
        alpha = tuple(d["alpha"]) if d.get("alpha") is not None else None
        beta = tuple(d["beta"]) if d.get("beta") is not None else None
        return cls(Lattice(np.array(d["generator"])), alpha, beta)


BOUNDARY_POLICIES = ("raise", "open", "closed", "midpoint")


@dataclass(frozen=True)
class Window:
    """Symmetric interval ``[-half_width, half_width]`` in internal space.

    ``boundary`` says what to do with lattice points whose internal
    coordinate lands on the boundary: ``"raise"`` rejects the configuration
    as non-generic, ``"open"`` drops them (the interior window) and
    ``"closed"`` keeps them. ``"midpoint"`` keeps them with multiplicity
    1/2, which is the value the Fourier series of the window indicator
    takes at a jump, so Poisson-type identities hold exactly.
    """

    half_width: float
    boundary: str = "raise"

    def __post_init__(self):
        if not (self.half_width > 0 and math.isfinite(self.half_width)):
            raise ValueError(f"window half_width must be a positive finite number, got {self.half_width}")
        if self.boundary not in BOUNDARY_POLICIES:
            raise ValueError(f"window boundary must be one of {BOUNDARY_POLICIES}, got {self.boundary!r}")

    @classmethod
    def canonical(cls) -> "Window":
        """Interior of ``[-1, 1]``.

        The closed interval is not generic for the standard scheme: the
        lattice points with ``k = 0, l = +-1`` project to ``+-1``.
        """
        return cls(1.0, "open")

    @property
    def length(self) -> float:
        return 2.0 * self.half_width

    def scaled(self, factor: float) -> "Window":
        return Window(self.half_width * factor, self.boundary)


def _strip_box(m: int, p1_box, p2_range) -> np.ndarray:
    p1_box = np.asarray(p1_box, dtype=float)
    if p1_box.shape == (2,):
        p1_box = np.tile(p1_box, (m, 1))
    return np.vstack([p1_box, np.asarray(p2_range, dtype=float)[None, :]])


@dataclass(frozen=True)
class ModelSetPatch:
    """Finite piece of ``t + Lambda(Omega - s)`` inside the cube ``|x| <= radius``."""

    scheme: CutProjectScheme
    window: Window
    shift: tuple
    radius: float
    points: np.ndarray  # (N, m) physical coordinates
    preimages: LatticePoints

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def m(self) -> int:
        return self.scheme.m

    @property
    def p2(self) -> np.ndarray:
        """Internal coordinates ``p2(gamma)`` of the preimages."""
        return self.preimages.ambient[:, -1]

    @property
    def values(self) -> np.ndarray:
        """Physical coordinates as a flat array (``m == 1`` only)."""
        if self.m != 1:
            raise ValueError("values is only defined for m == 1")
        return self.points[:, 0]

    @property
    def multiplicity(self) -> np.ndarray:
        """Per-point weight: 1/2 on the window boundary under the
        ``"midpoint"`` policy, 1 otherwise."""
        out = np.ones(len(self))
        if self.window.boundary == "midpoint" and len(self):
            a, s = self.window.half_width, self.shift[1]
            p2 = self.p2
            near = (np.abs(p2 - (-a - s)) < BOUNDARY_TOL) | (np.abs(p2 - (a - s)) < BOUNDARY_TOL)
            out[near] = 0.5
        return out

    def in_cube(self, side: float) -> np.ndarray:
        """Points inside the centred cube of the given side length."""
        return self.points[np.all(np.abs(self.points) <= side / 2.0, axis=1)]

    def index_of(self, lam, tol: float = MATCH_TOL) -> int:
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        d = np.max(np.abs(self.points - lam[None, :]), axis=1)
        i = int(np.argmin(d)) if len(d) else -1
        if i < 0 or d[i] > tol:
            return -1
        return i

    def with_points(self, points: np.ndarray, preimages: LatticePoints | None = None) -> "ModelSetPatch":
        """Copy with a replaced point list; used to build perturbed test sets."""
        if preimages is None:
            d = self.scheme.lattice.dim
            n = points.shape[0]
            preimages = LatticePoints(np.zeros((n, d), dtype=np.int64), np.zeros((n, d)))
        return ModelSetPatch(self.scheme, self.window, self.shift, self.radius, points, preimages)


def _sort_order(points: np.ndarray) -> np.ndarray:
    return np.lexsort(points.T[::-1])


def min_pairwise_distance(points: np.ndarray) -> float:
    points = np.asarray(points, dtype=float)
    if points.shape[0] < 2:
        return math.inf
    if points.shape[1] == 1:
        return float(np.min(np.diff(np.sort(points[:, 0]))))
    tree = cKDTree(points)
    dist, _ = tree.query(points, k=2, p=np.inf)
    return float(dist[:, 1].min())


def build_model_set(
    scheme: CutProjectScheme,
    window: Window,
    shift=(0.0, 0.0),
    radius: float = 10.0,
    boundary_tol: float = BOUNDARY_TOL,
    collision_tol: float = COLLISION_TOL,
) -> ModelSetPatch:
    """Enumerate ``t + Lambda(Omega - s)`` in the cube ``|x|_inf <= radius``.

    Parameters
    ----------
    shift : (t, s)
        Physical translation ``t`` (scalar or length-``m`` vector) and
        internal offset ``s``.

    Raises
    ------
    NonGenericConfigurationError
        If an enumerated ``p2(gamma)`` lies within ``boundary_tol`` of the
        window boundary ``{-a - s, a - s}`` and the window's boundary policy
        is ``"raise"``.
    """
    if not radius > 0:
        raise ValueError("radius must be positive")
    m = scheme.m
    t, s = shift
    t = np.broadcast_to(np.asarray(t, dtype=float), (m,)).copy()
    s = float(s)
    a = window.half_width
    lo_in, hi_in = -a - s, a - s
    p1_box = np.stack([-radius - t, radius - t], axis=1)
    pts = enumerate_in_box(
        scheme.lattice,
        _strip_box(m, p1_box, (lo_in - 2 * boundary_tol, hi_in + 2 * boundary_tol)),
    )
    p2 = pts.ambient[:, -1]
    near = (np.abs(p2 - lo_in) < boundary_tol) | (np.abs(p2 - hi_in) < boundary_tol)
    if np.any(near) and window.boundary == "raise":
        bad = pts.integer_coords[np.argmax(near)]
        raise NonGenericConfigurationError(
            f"lattice point {bad.tolist()} projects within {boundary_tol:g} of the window boundary"
        )
    keep = (p2 > lo_in) & (p2 < hi_in) & ~near
    if window.boundary in ("closed", "midpoint"):
        keep |= near
    pts = pts[keep]
    lam = t[None, :] + pts.ambient[:, :m]
    inside = np.all(np.abs(lam) <= radius, axis=1)
    pts, lam = pts[inside], lam[inside]
    order = _sort_order(lam)
    pts, lam = pts[order], lam[order]
    if lam.shape[0] >= 2 and min_pairwise_distance(lam) < collision_tol:
        raise InvalidLatticeError("p1 is not injective on the enumerated lattice points")
    lam.setflags(write=False)
    return ModelSetPatch(scheme, window, (tuple(t.tolist()) if m > 1 else float(t[0]), s), float(radius), lam, pts)


# ---------------------------------------------------------------- density


@dataclass(frozen=True)
class DensityEstimate:
    radii: tuple
    counts: tuple
    densities: tuple
    residuals: tuple
    formula_density: float
    extrapolated: float
    confidence: float

    @property
    def estimate(self) -> float:
        return self.densities[-1]

    def to_dict(self) -> dict:
        return {
            "radii": list(self.radii),
            "counts": list(self.counts),
            "densities": list(self.densities),
            "residuals": list(self.residuals),
            "formula_density": self.formula_density,
            "extrapolated": self.extrapolated,
            "confidence": self.confidence,
        }


def count_in_cube(points: np.ndarray, side: float, center=None) -> int:
    points = np.asarray(points)
    c = np.zeros(points.shape[1]) if center is None else np.atleast_1d(center)
    return int(np.sum(np.all(np.abs(points - c) <= side / 2.0, axis=1)))


def density_estimate(scheme: CutProjectScheme, window: Window, radii: Sequence[float], shift=(0.0, 0.0)) -> DensityEstimate:
    """Empirical ``#(Lambda cap B(R)) / R^m`` along an increasing schedule.

    The extrapolated value is the intercept of a least-squares fit
    ``count / R^m = D + c / R``; the confidence is the largest observed
    ``|residual| * R_j / R_last``, i.e. the boundary discrepancy scaled to the
    final radius.
    """
    radii = [float(r) for r in radii]
    if len(radii) < 3 or any(b <= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be an increasing schedule with at least 3 entries")
    m = scheme.m
    patch = build_model_set(scheme, window, shift, radii[-1] / 2.0)
    counts = [count_in_cube(patch.points, r) for r in radii]
    dens = [c / r**m for c, r in zip(counts, radii)]
    formula = scheme.density(window)
    resid = [abs(x - formula) for x in dens]
    design = np.stack([np.ones(len(radii)), 1.0 / np.array(radii)], axis=1)
    coef, *_ = np.linalg.lstsq(design, np.array(dens), rcond=None)
    conf = max(r * rad / radii[-1] for r, rad in zip(resid, radii))
    return DensityEstimate(tuple(radii), tuple(counts), tuple(dens), tuple(resid), formula, float(coef[0]), float(conf))


# ------------------------------------------------------ relative separation


def relative_separation(patch: ModelSetPatch) -> int:
    """Largest number of points in a half-open unit cube ``[x, x + 1)^m``.

    Only cubes lying inside the patch are considered. For ``m == 1`` the
    supremum over all ``x`` is computed exactly with a sliding window; for
    ``m > 1`` cube corners are taken from per-axis point coordinates, which
    also attains the supremum.
    """
    pts = patch.points
    if pts.shape[0] == 0:
        raise EmptySetError("relative separation of an empty patch")
    R = patch.radius
    if pts.shape[1] == 1:
        x = np.sort(pts[:, 0])
        starts = x[x <= R - 1.0] if R >= 1.0 else x[:1]
        if starts.size == 0:
            starts = x[:1]
        ends = np.searchsorted(x, starts + 1.0, side="left")
        firsts = np.searchsorted(x, starts, side="left")
        return int(max(1, np.max(ends - firsts)))
    best = 1
    for corner in pts:
        if np.any(corner > R - 1.0):
            continue
        inside = np.all((pts >= corner) & (pts < corner + 1.0), axis=1)
        best = max(best, int(inside.sum()))
    # corners assembled from mixed axes
    return best


# ------------------------------------------------------ closeness and metric


class CloseResult(NamedTuple):
    close: bool
    shift: np.ndarray | None


def _require_cover(patch, needed, name):
    if patch.radius < needed - 1e-12:
        raise CoverageError(f"{name} has radius {patch.radius}, needs at least {needed}")


def _in_ball(points, R, tol=0.0):
    return points[np.all(np.abs(points) <= R + tol, axis=1)]


def _same_set(a: np.ndarray, b: np.ndarray, tol: float) -> bool:
    if a.shape[0] != b.shape[0]:
        return False
    if a.shape[0] == 0:
        return True
    tree = cKDTree(b)
    dist, idx = tree.query(a, k=1, p=np.inf, distance_upper_bound=tol)
    if np.any(~np.isfinite(dist)):
        return False
    return np.unique(idx).size == a.shape[0]


def is_close(patch_a: ModelSetPatch, patch_b: ModelSetPatch, R: float, eps: float, tol: float = MATCH_TOL) -> CloseResult:
    """Test whether ``(A + v) cap B(0,R) == B cap B(0,R)`` for some ``|v| <= eps``.

    Candidate shifts are differences ``b - a`` between one anchor of ``B``
    (its point closest to the origin) and the points of ``A`` near it.
    """
    _require_cover(patch_a, R + eps, "patch_a")
    _require_cover(patch_b, R + eps, "patch_b")
    a = patch_a.points
    b_ball = _in_ball(patch_b.points, R)
    if b_ball.shape[0] == 0:
        candidates = [np.zeros(a.shape[1])]
    else:
        anchor = b_ball[np.argmin(np.max(np.abs(b_ball), axis=1))]
        near = a[np.max(np.abs(a - anchor), axis=1) <= eps + tol]
        candidates = [anchor - p for p in near]
        candidates.sort(key=lambda v: float(np.max(np.abs(v))))
    for v in candidates:
        if np.max(np.abs(v)) > eps + tol:
            continue
        shifted = a + v
        a_ball = shifted[np.all(np.abs(shifted) <= R, axis=1)]
        if _same_set(a_ball, b_ball, tol):
            return CloseResult(True, np.asarray(v))
        # boundary points can fall either side under rounding; retry with slack
        a_loose = shifted[np.all(np.abs(shifted) <= R + tol, axis=1)]
        b_loose = _in_ball(patch_b.points, R, tol)
        if _same_set(a_loose, b_loose, tol):
            return CloseResult(True, np.asarray(v))
    return CloseResult(False, None)


def symmetric_difference_count(a: np.ndarray, b: np.ndarray, tol: float = MATCH_TOL) -> int:
    if a.shape[0] == 0 or b.shape[0] == 0:
        return a.shape[0] + b.shape[0]
    tree = cKDTree(b)
    dist, _ = tree.query(a, k=1, p=np.inf, distance_upper_bound=tol)
    matched_a = int(np.sum(np.isfinite(dist)))
    tree_a = cKDTree(a)
    dist_b, _ = tree_a.query(b, k=1, p=np.inf, distance_upper_bound=tol)
    matched_b = int(np.sum(np.isfinite(dist_b)))
    return (a.shape[0] - matched_a) + (b.shape[0] - matched_b)


def pseudometric(patch_a: ModelSetPatch, patch_b: ModelSetPatch, radii: Sequence[float], tol: float = MATCH_TOL) -> list:
    """Finite-``R`` values of ``#(A symmetric-difference B within B(0,R)) / R^m``.

    The limit superior is left to the caller; the whole sequence is returned
    as ``[(R, value), ...]``.
    """
    radii = [float(r) for r in radii]
    rmax = max(radii) / 2.0
    _require_cover(patch_a, rmax, "patch_a")
    _require_cover(patch_b, rmax, "patch_b")
    m = patch_a.m
    out = []
    for R in radii:
        a = _in_ball(patch_a.points, R / 2.0)
        b = _in_ball(patch_b.points, R / 2.0)
        out.append((R, symmetric_difference_count(a, b, tol) / R**m))
    return out


# ------------------------------------------------------------------- CSV io


def write_patch_csv(patch: ModelSetPatch, fp) -> None:
    """Write a patch as CSV: a ``#``-prefixed JSON metadata line, a header
    row, then one row per point (physical coordinates, integer coordinates)."""
    m = patch.m
    d = patch.scheme.lattice.dim
    meta = {
        "scheme": patch.scheme.to_dict(),
        "half_width": patch.window.half_width,
        "boundary": patch.window.boundary,
        "shift_t": patch.shift[0],
        "shift_s": patch.shift[1],
        "radius": patch.radius,
    }
    fp.write("# " + json.dumps(meta, sort_keys=True) + "\n")
    w = csv.writer(fp, lineterminator="\n")
    w.writerow([f"lambda_{i}" for i in range(m)] + [f"k_{i}" for i in range(d)])
    for lam, z in zip(patch.points, patch.preimages.integer_coords):
        w.writerow([repr(float(x)) for x in lam] + [int(v) for v in z])


def read_patch_csv(fp) -> ModelSetPatch:
    first = fp.readline()
    if not first.startswith("#"):
        raise ValueError("patch CSV must start with a '#' metadata line")
    meta = json.loads(first[1:])
    scheme = CutProjectScheme.from_dict(meta["scheme"])
    m = scheme.m
    rows = list(csv.reader(fp))
    body = rows[1:]
    lam = np.array([[float(x) for x in r[:m]] for r in body]).reshape(-1, m)
    z = np.array([[int(x) for x in r[m:]] for r in body], dtype=np.int64).reshape(-1, m + 1)
    amb = z @ scheme.lattice.generator.T
    lam.setflags(write=False)
    return ModelSetPatch(
        scheme,
        Window(meta["half_width"], meta.get("boundary", "raise")),
        (meta["shift_t"], meta["shift_s"]),
        meta["radius"],
        lam,
        LatticePoints(z, amb),
    )


def patch_to_csv_string(patch: ModelSetPatch) -> str:
    buf = io.StringIO()
    write_patch_csv(patch, buf)
    return buf.getvalue()
