"""Full-rank lattices ``A @ Z^d``, their duals, and exact box enumeration."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .errors import BudgetExceededError, EmptyBoxError, InvalidLatticeError

DEFAULT_POINT_BUDGET = 20_000_000
_INT_LIMIT = 2**62


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Lattice:
    """Lattice generated by the columns of ``generator``.

    Parameters
    ----------
    generator : array_like, shape (d, d)
        Invertible matrix ``A``; lattice points are ``A @ z`` for integer ``z``.
    """

    generator: np.ndarray
    _inverse: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        a = _frozen(self.generator)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 2:
            raise InvalidLatticeError(f"generator must be a square d x d matrix with d >= 2, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise InvalidLatticeError("generator has non-finite entries")
        det = np.linalg.det(a)
        scale = np.prod(np.linalg.norm(a, axis=0))
        if scale == 0 or abs(det) <= 1e-12 * scale:
            raise InvalidLatticeError(f"singular generator (det={det:g})")
        object.__setattr__(self, "generator", a)
        object.__setattr__(self, "_inverse", _frozen(np.linalg.inv(a)))

    @property
    def dim(self) -> int:
        return self.generator.shape[0]

    @property
    def covolume(self) -> float:
        return float(abs(np.linalg.det(self.generator)))

    @property
    def inverse(self) -> np.ndarray:
        return self._inverse

    def point(self, z) -> "LatticePoint":
        z = np.asarray(z, dtype=np.int64)
        return LatticePoint(z, self.generator @ z)

    def dual(self) -> "Lattice":
        return dual_lattice(self)


@dataclass(frozen=True)
class LatticePoint:
    integer_coords: np.ndarray
    ambient: np.ndarray


@dataclass(frozen=True)
class LatticePoints:
    """Batch of lattice points stored as two aligned arrays."""

    integer_coords: np.ndarray  # (N, d) int64
    ambient: np.ndarray  # (N, d) float

    def __len__(self) -> int:
        return self.integer_coords.shape[0]

    def __iter__(self) -> Iterator[LatticePoint]:
        for z, g in zip(self.integer_coords, self.ambient):
            yield LatticePoint(z, g)

    def __getitem__(self, idx) -> "LatticePoints":
        return LatticePoints(self.integer_coords[idx], self.ambient[idx])


def dual_lattice(lattice: Lattice) -> Lattice:
    """Return the dual lattice, generated by ``A^{-T}``."""
    return Lattice(lattice.inverse.T)


def _as_box(box, d: int) -> np.ndarray:
    b = np.array(box, dtype=float)
    if b.shape != (d, 2):
        raise ValueError(f"box must have shape ({d}, 2), got {b.shape}")
    if not np.all(np.isfinite(b)):
        raise ValueError("box bounds must be finite")
    if np.any(b[:, 1] < b[:, 0]):
        bad = int(np.argmax(b[:, 1] < b[:, 0]))
        raise EmptyBoxError(f"box axis {bad} has upper < lower ({b[bad, 1]} < {b[bad, 0]})")
    return b


def estimated_count(lattice: Lattice, box) -> float:
    b = _as_box(box, lattice.dim)
    return float(np.prod(b[:, 1] - b[:, 0]) / lattice.covolume)


def enumerate_in_box(lattice: Lattice, box: Sequence[Sequence[float]], budget: int = DEFAULT_POINT_BUDGET) -> LatticePoints:
    """All lattice points ``A z`` inside the closed box.

    Box corners are mapped through ``A^{-1}`` to get an integer bounding box.
    One coordinate (the one giving the smallest remaining search) is then
    solved exactly from the linear box constraints instead of scanned, which
    keeps thin slabs (model-set strips) cheap. The result is filtered against
    the box, so it is complete and exact up to float rounding of ``A z``.

    Raises
    ------
    EmptyBoxError
        If some axis has ``upper < lower``.
    BudgetExceededError
        If the search would exceed ``budget`` candidate points.
    """
    d = lattice.dim
    b = _as_box(box, d)
    a = lattice.generator
    ainv = lattice.inverse

    corners = np.array(list(itertools.product(*b)))  # (2^d, d)
    zc = corners @ ainv.T
    # widen a hair so float rounding never drops a boundary point
    pad = 1e-9 * (1.0 + np.max(np.abs(zc), axis=0))
    zlo = np.floor(zc.min(axis=0) - pad)
    zhi = np.ceil(zc.max(axis=0) + pad)
    if np.any(np.abs(zlo) > _INT_LIMIT) or np.any(np.abs(zhi) > _INT_LIMIT):
        raise BudgetExceededError("integer bounding box overflows int64", estimated_count(lattice, b))
    spans = (zhi - zlo + 1).astype(float)

    # pivot coordinate: solved in closed form, never scanned
    scan_sizes = [np.prod(np.delete(spans, j)) for j in range(d)]
    j = int(np.argmin(scan_sizes))
    scan = scan_sizes[j]
    est = estimated_count(lattice, b)
    if scan > budget or est > budget:
        raise BudgetExceededError(
            f"enumeration needs {scan:.3g} candidates (estimated {est:.3g} points) > budget {budget}",
            est,
        )

    others = [k for k in range(d) if k != j]
    axes = [np.arange(int(zlo[k]), int(zhi[k]) + 1, dtype=np.int64) for k in others]
    grids = np.meshgrid(*axes, indexing="ij")
    zrest = np.stack([g.ravel() for g in grids], axis=1)  # (M, d-1)
    base = zrest @ a[:, others].T  # (M, d) contribution of scanned coords
    col = a[:, j]

    lo = np.full(len(zrest), -np.inf)
    hi = np.full(len(zrest), np.inf)
    slack = 1e-9 * (1.0 + np.abs(b).max())
    for i in range(d):
        c = col[i]
        low_i = b[i, 0] - base[:, i] - slack
        up_i = b[i, 1] - base[:, i] + slack
        if abs(c) < 1e-300:
            ok = (low_i <= 0) & (up_i >= 0)
            hi = np.where(ok, hi, -np.inf)
            continue
        l1, u1 = low_i / c, up_i / c
        if c < 0:
            l1, u1 = u1, l1
        lo = np.maximum(lo, l1)
        hi = np.minimum(hi, u1)
    lo = np.maximum(np.ceil(lo), zlo[j])
    hi = np.minimum(np.floor(hi), zhi[j])
    counts = np.where(hi >= lo, hi - lo + 1, 0).astype(np.int64)
    total = int(counts.sum())
    if total > budget:
        raise BudgetExceededError(f"box holds {total} candidates > budget {budget}", est)

    rep = np.repeat(np.arange(len(zrest)), counts)
    offsets = np.arange(total, dtype=np.int64) - np.repeat(np.cumsum(counts) - counts, counts)
    zj = lo[rep].astype(np.int64) + offsets
    z = np.empty((total, d), dtype=np.int64)
    z[:, others] = zrest[rep]
    z[:, j] = zj
    amb = z @ a.T
    inside = np.all((amb >= b[:, 0]) & (amb <= b[:, 1]), axis=1)
    z, amb = z[inside], amb[inside]
    order = np.lexsort(z.T[::-1])
    return LatticePoints(z[order], amb[order])


def brute_force_in_box(lattice: Lattice, box, zmax: int) -> LatticePoints:
    """Reference enumeration scanning every ``|z_i| <= zmax``; for tests."""
    d = lattice.dim
    b = _as_box(box, d)
    rng = np.arange(-zmax, zmax + 1, dtype=np.int64)
    grids = np.meshgrid(*([rng] * d), indexing="ij")
    z = np.stack([g.ravel() for g in grids], axis=1)
    amb = z @ lattice.generator.T
    inside = np.all((amb >= b[:, 0]) & (amb <= b[:, 1]), axis=1)
    z, amb = z[inside], amb[inside]
    order = np.lexsort(z.T[::-1])
    return LatticePoints(z[order], amb[order])


def cut_project_generator(alpha, beta) -> np.ndarray:
    """Generator of the lattice ``{((I + beta alpha^T) k - beta l, l - alpha^T k)}``.

    Columns are ordered as the ``m`` entries of ``k`` followed by ``l``.
    """
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    m = alpha.size
    if beta.size != m:
        raise ValueError("alpha and beta must have the same length")
    g = np.zeros((m + 1, m + 1))
    g[:m, :m] = np.eye(m) + np.outer(beta, alpha)
    g[:m, m] = -beta
    g[m, :m] = -alpha
    g[m, m] = 1.0
    return g


def is_integer_pairing(lattice: Lattice, dual: Lattice, z, w, tol: float = 1e-8) -> bool:
    """Whether ``(A z) . (A* w)`` is an integer to ``tol``."""
    v = float(np.dot(lattice.generator @ np.asarray(z), dual.generator @ np.asarray(w)))
    return math.isclose(v, round(v), abs_tol=tol * max(1.0, abs(v)))
