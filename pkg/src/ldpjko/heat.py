"""Gaussian transition kernel, heat evolution with zero extension, and the reference coupling.

Throughout, ``epsilon**2 = 4*h``: the kernel
``p(x, y) = exp(-(y - x)**2 / epsilon**2) / (epsilon * sqrt(pi))``
is the time-``h`` transition density of Brownian motion with generator
``d^2/dx^2`` (increment variance ``2h``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import GridDensity, PairDensity

PAD_WIDTHS = 4.0


@dataclass(frozen=True)
class KernelParams:
    epsilon: float

    def __post_init__(self):
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise ValueError("epsilon must be a positive finite number")

    @classmethod
    def from_h(cls, h: float) -> "KernelParams":
        if not h > 0:
            raise ValueError("time step h must be positive")
        return cls(math.sqrt(4.0 * h))

    @property
    def h(self) -> float:
        return self.epsilon ** 2 / 4.0


def log_kernel(x, y, p: KernelParams):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    eps = p.epsilon
    return -((y - x) ** 2) / eps ** 2 - math.log(eps * math.sqrt(math.pi))


def kernel_value(x, y, p: KernelParams):
    """Heat kernel ``p_eps(x, y)``; broadcasts over array arguments."""
    return np.exp(log_kernel(x, y, p))


@dataclass(frozen=True)
class EvolveResult:
    """Output of :func:`evolve`.

    ``density`` lives on the enlarged grid and has unit mass.  ``escaped_mass``
    is the fraction of it lying outside the input interval; ``truncated_mass``
    is what fell beyond the padding before renormalization.
    """

    density: GridDensity
    escaped_mass: float
    truncated_mass: float
    pad_cells: int

    def restricted(self, renormalize: bool = True) -> GridDensity:
        """The part of the evolved density on the original interval."""
        d = self.density
        n = d.n_cells - 2 * self.pad_cells
        vals = d.values[self.pad_cells:self.pad_cells + n]
        out = GridDensity(n * d.dx, vals, origin=d.origin + self.pad_cells * d.dx, normalized=False)
        return out.renormalized() if renormalize else out


def evolve(rho0: GridDensity, p: KernelParams, pad_widths: float = PAD_WIDTHS) -> EvolveResult:
    """Heat-evolve ``rho0`` (zero outside its interval) for time ``h = eps^2/4``.

    Direct discrete convolution on an enlarged grid covering
    ``[origin - 4 eps, origin + L + 4 eps]`` with the same cell width.
    """
    dx = rho0.dx
    n = rho0.n_cells
    pad = int(math.ceil(pad_widths * p.epsilon / dx))
    kmax = n + pad
    k = np.arange(-kmax, kmax + 1)
    taps = kernel_value(0.0, k * dx, p)
    full = np.convolve(rho0.values, taps) * dx
    out = full[kmax - pad:kmax - pad + n + 2 * pad]
    mass = out.sum() * dx
    out = out / mass
    inner = out[pad:pad + n].sum() * dx
    density = GridDensity((n + 2 * pad) * dx, out, origin=rho0.origin - pad * dx)
    return EvolveResult(density, float(1.0 - inner), float(rho0.mass() - mass), pad)


def reference_coupling(rho0: GridDensity, p: KernelParams, renormalized: bool = False) -> PairDensity:
    """Cellwise ``q0(x_i, y_j) = rho0(x_i) p_eps(x_i, y_j)`` on the square of ``rho0``'s interval.

    Not renormalized by default: its mass is one minus the kernel leakage
    out of the interval.
    """
    x = rho0.centers
    vals = rho0.values[:, None] * kernel_value(x[:, None], x[None, :], p)
    q0 = PairDensity(rho0.L, vals, origin=rho0.origin, normalized=False)
    return q0.renormalized() if renormalized else q0
