"""Probability densities on a uniform cell grid of an interval and of its square.

All integrals use the midpoint (piecewise-constant) rule: a density is the
constant ``values[i]`` on cell ``[origin + i*dx, origin + (i+1)*dx)``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import GridMismatchError

MASS_TOL_1D = 1e-12
MASS_TOL_2D = 1e-10


def _frozen_array(values, ndim):
    arr = np.array(values, dtype=np.float64, copy=True)
    if arr.ndim != ndim:
        raise ValueError(f"expected a {ndim}-d array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


def xlogx(v):
    """Elementwise ``v*log(v)`` with ``0*log(0) = 0``."""
    v = np.asarray(v, dtype=np.float64)
    out = np.zeros_like(v)
    pos = v > 0
    out[pos] = v[pos] * np.log(v[pos])
    return out


@dataclass(frozen=True, eq=False)
class GridDensity:
    """Piecewise-constant density on ``[origin, origin + L]``.

    ``normalized=False`` marks a sub-probability density (escaped or
    overflowing mass); the unit-mass invariant is then not enforced.
    """

    L: float
    values: np.ndarray
    origin: float = 0.0
    normalized: bool = True

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_array(self.values, 1))
        object.__setattr__(self, "L", float(self.L))
        object.__setattr__(self, "origin", float(self.origin))
        if not self.L > 0:
            raise ValueError("interval length L must be positive")
        if self.values.size < 2:
            raise ValueError("a GridDensity needs at least 2 cells")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("density values must be finite")
        if np.any(self.values < 0):
            raise ValueError("density values must be nonnegative")
        if self.normalized and abs(self.mass() - 1.0) > MASS_TOL_1D:
            raise ValueError(f"density mass {self.mass()!r} differs from 1 by more than {MASS_TOL_1D}")

    @classmethod
    def from_function(cls, f, L=1.0, n_cells=256, origin=0.0, normalize=True):
        """Sample ``f`` at cell midpoints; optionally rescale to unit mass."""
        dx = L / n_cells
        x = origin + (np.arange(n_cells) + 0.5) * dx
        v = np.asarray(f(x), dtype=np.float64) * np.ones(n_cells)
        if normalize:
            v = v / (v.sum() * dx)
        return cls(L, v, origin=origin, normalized=normalize)

    @classmethod
    def uniform(cls, L=1.0, n_cells=256, origin=0.0):
        return cls(L, np.full(n_cells, 1.0 / L), origin=origin)

    @property
    def n_cells(self) -> int:
        return self.values.size

    @property
    def dx(self) -> float:
        return self.L / self.n_cells

    @property
    def centers(self) -> np.ndarray:
        return self.origin + (np.arange(self.n_cells) + 0.5) * self.dx

    @property
    def edges(self) -> np.ndarray:
        return self.origin + np.arange(self.n_cells + 1) * self.dx

    def mass(self) -> float:
        return float(self.values.sum() * self.dx)

    def cdf_edges(self) -> np.ndarray:
        """CDF at the cell edges (piecewise linear in between)."""
        c = np.empty(self.n_cells + 1)
        c[0] = 0.0
        np.cumsum(self.values * self.dx, out=c[1:])
        return c

    def cdf(self, x):
        return np.interp(x, self.edges, self.cdf_edges(), left=0.0, right=self.mass())

    def interp(self, x):
        """Linear interpolation of the midpoint samples (constant beyond the end midpoints)."""
        return np.interp(x, self.centers, self.values)

    def mean(self) -> float:
        return float(np.sum(self.centers * self.values) * self.dx / self.mass())

    def variance(self) -> float:
        mu = self.mean()
        return float(np.sum((self.centers - mu) ** 2 * self.values) * self.dx / self.mass())

    def renormalized(self) -> "GridDensity":
        return GridDensity(self.L, self.values / self.mass(), origin=self.origin)

    def same_grid(self, other) -> bool:
        return (self.n_cells == other.n_cells and np.isclose(self.L, other.L, rtol=1e-12, atol=0)
                and np.isclose(self.origin, other.origin, rtol=0, atol=1e-12 * self.L))


@dataclass(frozen=True, eq=False)
class PairDensity:
    """Piecewise-constant density on the square ``[origin, origin+L]^2``.

    ``values[i, j]`` is the density on (x-cell ``i``) x (y-cell ``j``).
    """

    L: float
    values: np.ndarray
    origin: float = 0.0
    normalized: bool = True

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_array(self.values, 2))
        object.__setattr__(self, "L", float(self.L))
        object.__setattr__(self, "origin", float(self.origin))
        n, m = self.values.shape
        if n != m:
            raise ValueError("PairDensity must be square")
        if n < 2:
            raise ValueError("a PairDensity needs at least 2 cells per axis")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("density values must be finite")
        if np.any(self.values < 0):
            raise ValueError("density values must be nonnegative")
        if self.normalized and abs(self.mass() - 1.0) > MASS_TOL_2D:
            raise ValueError(f"pair density mass {self.mass()!r} differs from 1 by more than {MASS_TOL_2D}")

    @classmethod
    def product(cls, rho: GridDensity, sigma: GridDensity) -> "PairDensity":
        _check_same(rho, sigma)
        return cls(rho.L, np.outer(rho.values, sigma.values), origin=rho.origin,
                   normalized=rho.normalized and sigma.normalized)

    @property
    def n_cells(self) -> int:
        return self.values.shape[0]

    @property
    def dx(self) -> float:
        return self.L / self.n_cells

    @property
    def centers(self) -> np.ndarray:
        return self.origin + (np.arange(self.n_cells) + 0.5) * self.dx

    def mass(self) -> float:
        return float(self.values.sum() * self.dx * self.dx)

    def renormalized(self) -> "PairDensity":
        return PairDensity(self.L, self.values / self.mass(), origin=self.origin)


@dataclass(frozen=True)
class ADeltaSpec:
    """Parameters of the set of densities uniformly within ``delta`` of ``1/L``."""

    delta: float
    L: float = 1.0

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if not self.L > 0:
            raise ValueError("L must be positive")


def _check_same(a, b):
    if a.values.shape != b.values.shape or not np.isclose(a.L, b.L, rtol=1e-12, atol=0) \
            or not np.isclose(a.origin, b.origin, rtol=0, atol=1e-12 * a.L):
        raise GridMismatchError(
            f"grid mismatch: shapes {a.values.shape} vs {b.values.shape}, "
            f"L {a.L} vs {b.L}, origin {a.origin} vs {b.origin}")


def entropy(rho: GridDensity) -> float:
    """``sum rho log rho dx`` with ``0 log 0 = 0``."""
    return float(xlogx(rho.values).sum() * rho.dx)


def pair_entropy(q: PairDensity) -> float:
    return float(xlogx(q.values).sum() * q.dx * q.dx)


def relative_entropy(q: PairDensity, p: PairDensity) -> float:
    """``H(q|p) = sum q log(q/p) dx^2``; ``+inf`` if ``q`` charges a cell where ``p = 0``.

    ``p`` may be a sub-probability reference (e.g. an unnormalized heat coupling).
    """
    _check_same(q, p)
    qv, pv = q.values, p.values
    support = qv > 0
    if np.any(pv[support] == 0):
        return float("inf")
    qs = qv[support]
    return float(np.sum(qs * (np.log(qs) - np.log(pv[support]))) * q.dx * q.dx)


def marginals(q: PairDensity) -> tuple[GridDensity, GridDensity]:
    """First (x) and second (y) marginals by row/column sums times ``dx``."""
    dx = q.dx
    return (GridDensity(q.L, q.values.sum(axis=1) * dx, origin=q.origin, normalized=q.normalized),
            GridDensity(q.L, q.values.sum(axis=0) * dx, origin=q.origin, normalized=q.normalized))


def _levy_violation(F, G, pts, h):
    # sup over x of the amount by which F(x-h)-h <= G(x) <= F(x+h)+h fails
    return max(np.max(F(pts - h) - h - G(pts)), np.max(G(pts) - F(pts + h) - h))


def levy_distance(rho: GridDensity, sigma: GridDensity, tol: float = 1e-6) -> float:
    """Levy distance between the CDFs of two grid densities, by bisection on ``h``.

    Both CDFs are piecewise linear, so the defining inequalities are checked
    at the union of both edge sets shifted by ``0, +h, -h``, which contains
    every breakpoint of the difference.  The condition is tested in both
    orders, which makes the result exactly symmetric.
    """
    if not np.isclose(rho.L, sigma.L):
        raise GridMismatchError("levy_distance requires equal interval lengths")
    F, G = rho.cdf, sigma.cdf
    base = np.union1d(rho.edges, sigma.edges)

    def ok(h):
        pts = np.concatenate([base, base + h, base - h])
        return max(_levy_violation(F, G, pts, h), _levy_violation(G, F, pts, h)) <= 1e-14

    if ok(0.0):
        return 0.0
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def in_A_delta(rho: GridDensity, spec: ADeltaSpec) -> bool:
    """True iff every cell value is strictly within ``delta`` of ``1/L``."""
    return bool(np.max(np.abs(rho.values - 1.0 / spec.L)) < spec.delta)


# --- CSV -----------------------------------------------------------------

def _fmt(v) -> str:
    return format(float(v), ".17g")


def write_grid_csv(path, rho: GridDensity, header_comment: str | None = None) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "value"])
        for x, v in zip(rho.centers, rho.values):
            w.writerow([_fmt(x), _fmt(v)])


def _read_rows(path):
    with Path(path).open(newline="", encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.reader(lines)
    header = next(reader)
    return header, [row for row in reader if row]


def read_grid_csv(path, normalized: bool = True) -> GridDensity:
    """Read an ``x,value`` file of cell midpoints (uniform spacing)."""
    header, rows = _read_rows(path)
    if header != ["x", "value"]:
        raise ValueError(f"expected header x,value, got {header}")
    x = np.array([float(r[0]) for r in rows])
    v = np.array([float(r[1]) for r in rows])
    dx = (x[-1] - x[0]) / (len(x) - 1)
    return GridDensity(dx * len(x), v, origin=x[0] - 0.5 * dx, normalized=normalized)


def write_pair_csv(path, q: PairDensity) -> None:
    xs = q.centers
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y", "value"])
        for i, x in enumerate(xs):
            for j, y in enumerate(xs):
                w.writerow([_fmt(x), _fmt(y), _fmt(q.values[i, j])])


def read_pair_csv(path, normalized: bool = True) -> PairDensity:
    header, rows = _read_rows(path)
    if header != ["x", "y", "value"]:
        raise ValueError(f"expected header x,y,value, got {header}")
    n = int(round(np.sqrt(len(rows))))
    if n * n != len(rows):
        raise ValueError("pair CSV does not describe a square grid")
    v = np.array([float(r[2]) for r in rows]).reshape(n, n)
    xs = np.array([float(rows[i * n][0]) for i in range(n)])
    dx = (xs[-1] - xs[0]) / (n - 1)
    return PairDensity(dx * n, v, origin=xs[0] - 0.5 * dx, normalized=normalized)
