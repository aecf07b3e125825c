"""Independent Brownian particles (generator Delta), their empirical measures
and the typical-behavior (hydrodynamic) check against the heat semigroup.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grid import GridDensity, PairDensity, _fmt
from .heat import KernelParams, evolve


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator: the stream depends on the seed only."""
    return np.random.Generator(np.random.Philox(seed))


@dataclass(frozen=True, eq=False)
class ParticleEnsemble:
    x0: np.ndarray
    xh: np.ndarray
    seed: int
    h: float

    def __post_init__(self):
        x0 = np.array(self.x0, dtype=np.float64, copy=True)
        xh = np.array(self.xh, dtype=np.float64, copy=True)
        if x0.shape != xh.shape or x0.ndim != 1:
            raise ValueError("x0 and xh must be 1-d arrays of equal length")
        x0.setflags(write=False)
        xh.setflags(write=False)
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "xh", xh)

    @property
    def n(self) -> int:
        return self.x0.size

    @property
    def increments(self) -> np.ndarray:
        return self.xh - self.x0


def sample_density(rho: GridDensity, n: int, rng: np.random.Generator) -> np.ndarray:
    """Inverse-CDF sampling from the piecewise-linear CDF of ``rho``."""
    u = rng.random(n)
    cdf = rho.cdf_edges() / rho.mass()
    c = np.clip(np.searchsorted(cdf, u, side="right") - 1, 0, rho.n_cells - 1)
    # skip empty cells: searchsorted on a flat stretch lands at its right end already
    frac = (u - cdf[c]) / np.where(cdf[c + 1] > cdf[c], cdf[c + 1] - cdf[c], 1.0)
    return rho.edges[c] + np.clip(frac, 0.0, 1.0) * rho.dx


def simulate(rho0: GridDensity, n: int, h: float, seed: int) -> ParticleEnsemble:
    """``x0 ~ rho0`` i.i.d. and ``xh = x0 + sqrt(2h) N(0, 1)``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if not h > 0:
        raise ValueError("h must be positive")
    rng = make_rng(seed)
    x0 = sample_density(rho0, n, rng)
    xh = x0 + math.sqrt(2.0 * h) * rng.standard_normal(n)
    return ParticleEnsemble(x0, xh, seed, h)


def bin_index(positions, L: float, n_cells: int, origin: float = 0.0):
    """Cell index of each position and a mask of positions inside ``[origin, origin + L)``."""
    x = np.asarray(positions, dtype=np.float64)
    idx = np.floor((x - origin) * (n_cells / L)).astype(np.int64)
    inside = (idx >= 0) & (idx < n_cells)
    return idx, inside


@dataclass(frozen=True, eq=False)
class Histogram:
    density: GridDensity
    overflow: int
    n: int

    @property
    def overflow_fraction(self) -> float:
        return self.overflow / self.n


def empirical_density(positions, L: float, n_cells: int, origin: float = 0.0) -> Histogram:
    """Histogram scaled so that each particle carries mass ``1/n``.

    Particles outside the interval are counted in ``overflow``; the density
    then has mass ``1 - overflow/n``.
    """
    x = np.asarray(positions, dtype=np.float64)
    if x.size == 0:
        raise ValueError("no positions")
    idx, inside = bin_index(x, L, n_cells, origin)
    counts = np.bincount(idx[inside], minlength=n_cells)
    dx = L / n_cells
    overflow = int(x.size - inside.sum())
    rho = GridDensity(L, counts / (x.size * dx), origin=origin, normalized=overflow == 0)
    return Histogram(rho, overflow, x.size)


@dataclass(frozen=True, eq=False)
class PairHistogram:
    counts: np.ndarray
    n: int
    L: float
    origin: float

    @property
    def n_cells(self) -> int:
        return self.counts.shape[0]

    @property
    def dx(self) -> float:
        return self.L / self.n_cells

    @property
    def kept(self) -> int:
        return int(self.counts.sum())

    def density(self) -> PairDensity:
        """Pair density of the kept particles (those with both endpoints in range)."""
        return PairDensity(self.L, self.counts / (self.kept * self.dx ** 2), origin=self.origin)

    def marginal_counts(self):
        return self.counts.sum(axis=1), self.counts.sum(axis=0)


def empirical_pair(ens: ParticleEnsemble, L: float, n_cells: int, origin: float = 0.0) -> PairHistogram:
    """2D histogram of ``(x0, xh)``; particles with either endpoint out of range are dropped.

    Integer counts go through the same binning as :func:`empirical_density`,
    so the marginals match the 1D histograms of the kept particles exactly.
    """
    i, in0 = bin_index(ens.x0, L, n_cells, origin)
    j, inh = bin_index(ens.xh, L, n_cells, origin)
    keep = in0 & inh
    flat = np.bincount(i[keep] * n_cells + j[keep], minlength=n_cells * n_cells)
    return PairHistogram(flat.reshape(n_cells, n_cells), ens.n, L, origin)


def kept_particles(ens: ParticleEnsemble, L: float, n_cells: int, origin: float = 0.0):
    _, in0 = bin_index(ens.x0, L, n_cells, origin)
    _, inh = bin_index(ens.xh, L, n_cells, origin)
    keep = in0 & inh
    return ens.x0[keep], ens.xh[keep]


@dataclass(frozen=True)
class HydroReport:
    n: int
    h: float
    seed: int
    l1_error: float
    overflow: int
    threshold: float
    skipped: bool

    @property
    def passed(self) -> bool:
        return self.skipped or self.l1_error <= self.threshold

    def row(self):
        return (self.n, self.h, self.l1_error, self.overflow)


MIN_PARTICLES_PER_CELL = 1.0


def hydrodynamic_check(rho0: GridDensity, n: int, h: float, seed: int, n_cells: int | None = None,
                       c1: float = 1.0, c2: float = 1.0) -> HydroReport:
    """L1 distance between the histogram of ``xh`` and ``evolve(rho0)`` on a shared grid.

    The histogram grid is the enlarged grid of ``evolve`` coarsened to
    ``n_cells`` per unit ``rho0.L``.  Passes when the distance is at most
    ``c1 / sqrt(n dx) + c2 dx``.  With fewer than one particle per cell on
    average the statistical check is skipped.
    """
    n_cells = n_cells or rho0.n_cells
    p = KernelParams.from_h(h)
    ens = simulate(rho0, n, h, seed)
    dx = rho0.L / n_cells
    # reference on a grid aligned with the histogram cells
    fine = rho0 if rho0.n_cells == n_cells else GridDensity.from_function(rho0.interp, rho0.L, n_cells, rho0.origin)
    ref = evolve(fine, p).density
    hist = empirical_density(ens.xh, ref.L, ref.n_cells, ref.origin)
    l1 = float(np.sum(np.abs(hist.density.values - ref.values)) * dx) + hist.overflow_fraction
    threshold = c1 / math.sqrt(n * dx) + c2 * dx
    skipped = n < MIN_PARTICLES_PER_CELL * n_cells
    return HydroReport(n, h, seed, l1, hist.overflow, threshold, skipped)


def write_ensemble_csv(path, ens: ParticleEnsemble, header_comment: str | None = None) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "x0", "xh"])
        for i, (a, b) in enumerate(zip(ens.x0, ens.xh)):
            w.writerow([str(i), _fmt(a), _fmt(b)])


def write_report_csv(path, reports, header_comment: str | None = None) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "h", "l1_error", "overflow"])
        for r in reports:
            w.writerow([str(r.n), _fmt(r.h), _fmt(r.l1_error), str(r.overflow)])
