"""Exact one-dimensional quadratic optimal transport on grid densities.

A grid density has a piecewise-linear CDF, so the monotone map
``T = Q1 o F0`` is piecewise linear with knots at the cell edges of
``rho0`` and at the preimages of the cell edges of ``rho1``.  The potentials
``phi = int T`` and ``phi* = int T^{-1}`` are then piecewise quadratic and are
evaluated exactly, which keeps the Fenchel equality at rounding level.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import UndefinedQuantileError
from .grid import GridDensity, PairDensity, _check_same, _fmt

_LEVEL_TOL = 1e-13


def _support_table(rho: GridDensity):
    cdf = rho.cdf_edges()
    cdf = cdf / cdf[-1]
    pos = np.flatnonzero(rho.values > 0)
    if pos.size == 0:
        raise UndefinedQuantileError("density has no mass")
    return rho.edges[pos], cdf[pos], cdf[pos + 1], cdf


def _plateau_levels(rho: GridDensity, cdf):
    """CDF levels of zero cells lying strictly between charged cells."""
    pos = np.flatnonzero(rho.values > 0)
    zero = np.flatnonzero(rho.values == 0)
    interior = zero[(zero > pos[0]) & (zero < pos[-1])]
    return cdf[interior]


def _nearest_gap(s, sorted_levels):
    """Distance from each ``s`` to the closest entry of ``sorted_levels``."""
    i = np.searchsorted(sorted_levels, s)
    lo = sorted_levels[np.clip(i - 1, 0, sorted_levels.size - 1)]
    hi = sorted_levels[np.clip(i, 0, sorted_levels.size - 1)]
    return np.minimum(np.abs(s - lo), np.abs(s - hi))


def quantiles(rho: GridDensity, s) -> np.ndarray:
    """Vectorized quantile function of the piecewise-linear CDF.

    Levels in ``[0, 1]``; ``s = 0`` and ``s = 1`` give the ends of the support.
    Raises :class:`UndefinedQuantileError` if a level hits a flat interior
    stretch of the CDF.
    """
    s = np.asarray(s, dtype=np.float64)
    if np.any((s < 0) | (s > 1)):
        raise ValueError("quantile levels must lie in [0, 1]")
    left, f_lo, f_hi, cdf = _support_table(rho)
    plateaus = _plateau_levels(rho, cdf)
    if plateaus.size and np.any(_nearest_gap(s, plateaus) <= _LEVEL_TOL):
        raise UndefinedQuantileError("quantile level falls on a flat stretch of the CDF")
    c = np.clip(np.searchsorted(f_hi, s, side="left"), 0, left.size - 1)
    frac = (s - f_lo[c]) / (f_hi[c] - f_lo[c])
    return left[c] + np.clip(frac, 0.0, 1.0) * rho.dx


def quantile(rho: GridDensity, s: float) -> float:
    return float(quantiles(rho, np.array([s]))[0])


def _midpoint_levels(m: int) -> np.ndarray:
    return (np.arange(m) + 0.5) / m


def w2_distance(rho0: GridDensity, rho1: GridDensity, m: int | None = None) -> float:
    """``sqrt(int_0^1 (Q0 - Q1)^2 ds)`` by the ``m``-point midpoint rule, ``m = 4 n_cells``."""
    if m is None:
        m = 4 * max(rho0.n_cells, rho1.n_cells)
    s = _midpoint_levels(m)
    diff = quantiles(rho0, s) - quantiles(rho1, s)
    return float(np.sqrt(np.mean(diff * diff)))


@dataclass(frozen=True, eq=False)
class TransportPotentials:
    """Kantorovich potentials of a 1D quadratic transport problem.

    ``phi`` and ``map`` are sampled at the ``x`` grid (cell midpoints of
    ``rho0``), ``phi_star`` at the ``y`` grid (midpoints of ``rho1``).  The
    knot arrays describe the exact piecewise-linear map used by the
    ``*_at`` evaluators; ``phi`` is anchored by ``phi(x_left) = 0``.
    """

    x: np.ndarray
    phi: np.ndarray
    map: np.ndarray
    y: np.ndarray
    phi_star: np.ndarray
    knots_x: np.ndarray
    knots_y: np.ndarray
    knots_phi: np.ndarray

    @property
    def knots_phi_star(self):
        return self.knots_x * self.knots_y - self.knots_phi

    @staticmethod
    def _eval_quadratic(t, knots, slopes_at_knots, values_at_knots):
        # piecewise quadratic with piecewise-linear derivative; linear beyond the ends
        t = np.asarray(t, dtype=np.float64)
        c = np.clip(np.searchsorted(knots, t, side="right") - 1, 0, knots.size - 2)
        h = t - knots[c]
        curv = (slopes_at_knots[c + 1] - slopes_at_knots[c]) / (knots[c + 1] - knots[c])
        inside = values_at_knots[c] + slopes_at_knots[c] * h + 0.5 * curv * h * h
        left = values_at_knots[0] + slopes_at_knots[0] * (t - knots[0])
        right = values_at_knots[-1] + slopes_at_knots[-1] * (t - knots[-1])
        return np.where(t < knots[0], left, np.where(t > knots[-1], right, inside))

    def phi_at(self, x):
        return self._eval_quadratic(x, self.knots_x, self.knots_y, self.knots_phi)

    def phi_star_at(self, y):
        return self._eval_quadratic(y, self.knots_y, self.knots_x, self.knots_phi_star)

    def map_at(self, x):
        """``T = phi'``, held constant beyond the ends of the interval."""
        return np.interp(x, self.knots_x, self.knots_y)

    def inverse_map_at(self, y):
        return np.interp(y, self.knots_y, self.knots_x)

    def phi_second_fd(self, x, step):
        """Central second difference of ``phi`` with stencil width ``2*step``."""
        x = np.asarray(x, dtype=np.float64)
        return (self.phi_at(x + step) - 2.0 * self.phi_at(x) + self.phi_at(x - step)) / step ** 2

    def phi_star_second_fd(self, y, step):
        y = np.asarray(y, dtype=np.float64)
        return (self.phi_star_at(y + step) - 2.0 * self.phi_star_at(y)
                + self.phi_star_at(y - step)) / step ** 2

    def fenchel_residual(self) -> float:
        """Max over the x grid of ``|phi(x) + phi*(T(x)) - x T(x)|``."""
        t = self.map
        return float(np.max(np.abs(self.phi + self.phi_star_at(t) - self.x * t)))

    def young_min(self) -> float:
        """Min over the product grid of ``phi(x) + phi*(y) - x y`` (nonnegative up to rounding)."""
        return float(np.min(self.phi[:, None] + self.phi_star[None, :] - np.outer(self.x, self.y)))

    def write_csv(self, phi_path, phi_star_path) -> None:
        with Path(phi_path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "phi", "map"])
            for row in zip(self.x, self.phi, self.map):
                w.writerow([_fmt(v) for v in row])
        with Path(phi_star_path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["y", "phi_star"])
            for row in zip(self.y, self.phi_star):
                w.writerow([_fmt(v) for v in row])


def _merge_levels(a, b):
    levels = np.union1d(a, b)
    keep = np.concatenate([[True], np.diff(levels) > 1e-14])
    levels = levels[keep]
    levels[0], levels[-1] = 0.0, 1.0
    return np.clip(levels, 0.0, 1.0)


def potentials(rho0: GridDensity, rho1: GridDensity) -> TransportPotentials:
    """Optimal map and convex potentials for ``W2(rho0, rho1)``.

    Both densities must be strictly positive (no flat CDF stretches).
    """
    for name, r in (("rho0", rho0), ("rho1", rho1)):
        if np.any(r.values <= 0):
            raise UndefinedQuantileError(f"{name} must be strictly positive for transport potentials")
    c0 = rho0.cdf_edges() / rho0.mass()
    c1 = rho1.cdf_edges() / rho1.mass()
    levels = _merge_levels(c0, c1)
    kx = quantiles(rho0, levels)
    ky = quantiles(rho1, levels)
    kphi = np.concatenate([[0.0], np.cumsum(0.5 * (ky[1:] + ky[:-1]) * np.diff(kx))])
    pot = TransportPotentials(
        x=rho0.centers, phi=np.empty(0), map=np.empty(0), y=rho1.centers,
        phi_star=np.empty(0), knots_x=kx, knots_y=ky, knots_phi=kphi)
    object.__setattr__(pot, "phi", pot.phi_at(pot.x))
    object.__setattr__(pot, "map", pot.map_at(pot.x))
    object.__setattr__(pot, "phi_star", pot.phi_star_at(pot.y))
    return pot


def coupling_cost(q: PairDensity) -> float:
    """``d(q)^2 = sum (x - y)^2 q dx^2``."""
    x = q.centers
    return float(np.sum((x[:, None] - x[None, :]) ** 2 * q.values) * q.dx * q.dx)


def duality_gap(q: PairDensity, pot: TransportPotentials) -> float:
    """``2 sum (phi(x) + phi*(y) - x y) q dx^2``, i.e. ``d(q)^2 - W2^2`` for couplings of the marginals."""
    x = q.centers
    integrand = pot.phi_at(x)[:, None] + pot.phi_star_at(x)[None, :] - np.outer(x, x)
    return float(2.0 * np.sum(integrand * q.values) * q.dx * q.dx)


def monotone_coupling(rho0: GridDensity, rho1: GridDensity) -> PairDensity:
    """Band discretization of ``(id, T)#rho0`` on the product grid.

    Cell ``i`` of ``rho0`` is sent onto ``[T(a_i), T(b_i)]``; because
    ``T#rho0 = rho1`` exactly, its image is ``rho1`` restricted to that
    interval.  Both marginals are reproduced exactly.
    """
    _check_same(rho0, rho1)
    pot = potentials(rho0, rho1)
    edges = rho0.edges
    t_lo = pot.map_at(edges[:-1])
    t_hi = pot.map_at(edges[1:])
    y_lo = edges[:-1]
    y_hi = edges[1:]
    lo = np.maximum(t_lo[:, None], y_lo[None, :])
    hi = np.minimum(t_hi[:, None], y_hi[None, :])
    mass = np.clip(rho1.cdf(hi) - rho1.cdf(lo), 0.0, None)
    mass *= np.where(hi > lo, 1.0, 0.0)
    vals = mass / rho0.dx ** 2
    # rows carry rho0_i dx exactly up to rounding; rescale to absorb it
    row = vals.sum(axis=1) * rho0.dx
    vals *= (rho0.values / row)[:, None]
    return PairDensity(rho0.L, vals, origin=rho0.origin)
