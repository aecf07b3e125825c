"""The explicit Gaussian-ridge pair measure ``q~``, its normalization ``Z``,
the marginal correction ``chi`` and the recovery coupling ``q_rec = chi q~``.

``q~(x, y)`` is proportional to
``sqrt(rho0(x) rho1(y)) exp(2 (x y - phi(x) - phi*(y)) / eps^2) / (eps sqrt(pi))``
with ``phi`` the Kantorovich potential of ``W2(rho0, rho1)``.  All integrals
use the midpoint rule on the grid of ``rho0``, so ``chi * pi0(q~) = rho0``
holds exactly on the grid.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grid import GridDensity, PairDensity, _check_same, _fmt
from .heat import KernelParams
from .wasserstein import TransportPotentials

BOUNDARY_WIDTHS = 3.0


@dataclass(frozen=True, eq=False)
class TildeQBundle:
    q_tilde: PairDensity
    z_epsilon: float
    chi: np.ndarray
    q_recovery: PairDensity
    epsilon: float
    chi_bound: float = 3.0

    def chi_within_bounds(self) -> bool:
        c = self.chi_bound
        return bool(np.all(self.chi >= 1.0 / c) and np.all(self.chi <= c))


def _log_ridge(x, y, pot: TransportPotentials, phi_x, phi_star_y, eps):
    return (2.0 / eps ** 2) * (np.outer(x, y) - phi_x[:, None] - phi_star_y[None, :])


def build_tilde_q(rho0: GridDensity, rho1: GridDensity, pot: TransportPotentials,
                  p: KernelParams, chi_bound: float = 3.0) -> TildeQBundle:
    """Assemble ``q~``, ``Z``, ``chi`` and ``q_rec`` on the product grid.

    Raises ``ValueError`` if the first marginal of ``q~`` vanishes on a cell.
    """
    _check_same(rho0, rho1)
    eps = p.epsilon
    x, y = rho0.centers, rho1.centers
    dx = rho0.dx
    expo = _log_ridge(x, y, pot, pot.phi, pot.phi_star, eps)
    raw = np.sqrt(rho0.values)[:, None] * np.sqrt(rho1.values)[None, :] * np.exp(expo)
    raw /= eps * math.sqrt(math.pi)
    z = float(raw.sum() * dx * dx)
    if not z > 0:
        raise ValueError("normalization Z vanished")
    qt = raw / z
    pi0 = qt.sum(axis=1) * dx
    if np.any(pi0 <= 0):
        raise ValueError("first marginal of q~ vanishes on some cell; inputs too far from A_delta")
    chi = rho0.values / pi0
    qrec = chi[:, None] * qt
    return TildeQBundle(PairDensity(rho0.L, qt, origin=rho0.origin), z, chi,
                        PairDensity(rho0.L, qrec, origin=rho0.origin, normalized=False), eps, chi_bound)


def z_uniform_closed_form(epsilon: float, L: float = 1.0) -> float:
    """``Z`` for uniform/uniform on ``[0, L]`` (then ``phi = x^2/2``).

    ``(1/(eps sqrt(pi) L^2)) int int exp(-(x-y)^2/eps^2)`` reduces to
    ``erf(L/eps) - eps (1 - exp(-L^2/eps^2)) / (L sqrt(pi))``.
    """
    r = L / epsilon
    return math.erf(r) - (1.0 - math.exp(-r * r)) / (r * math.sqrt(math.pi))


def exponent_bound_residual(pot: TransportPotentials, factor: float = 1.0 / 6.0) -> float:
    """Max over the product grid of ``x y - phi - phi* + factor (y - T(x))^2`` (should be <= 0)."""
    x, y = pot.x, pot.y
    val = np.outer(x, y) - pot.phi[:, None] - pot.phi_star[None, :]
    val += factor * (y[None, :] - pot.map[:, None]) ** 2
    return float(val.max())


def watson_pointwise(rho0: GridDensity, rho1: GridDensity, pot: TransportPotentials,
                     p: KernelParams, x: float) -> float:
    """Ratio of ``(1/eps) int sqrt(rho1(y)) exp(2(x y - phi(x) - phi*(y))/eps^2) dy``
    to its small-``eps`` limit ``sqrt(pi) sqrt(rho0(x))``.

    Tends to 1 at interior points; near an endpoint only half the Gaussian
    fits in the interval and the ratio tends to 1/2.
    """
    eps = p.epsilon
    y = rho1.centers
    phi_x = float(pot.phi_at(x))
    expo = (2.0 / eps ** 2) * (x * y - phi_x - pot.phi_star)
    integral = np.sum(np.sqrt(rho1.values) * np.exp(expo)) * rho1.dx / eps
    return float(integral / (math.sqrt(math.pi) * math.sqrt(float(rho0.interp(x)))))


@dataclass(frozen=True)
class MarginalReport:
    epsilon: float
    z: float
    l1_pi0: float
    l1_pi1: float
    pi0_min: float
    pi0_max: float
    pi1_min: float
    pi1_max: float
    chi_min: float
    chi_max: float
    boundary_chi_min: float
    boundary_chi_max: float

    def row(self):
        return (self.epsilon, self.z, self.l1_pi0, self.l1_pi1, self.chi_min, self.chi_max)


def marginal_convergence_report(bundle: TildeQBundle, rho0: GridDensity, rho1: GridDensity,
                                boundary_widths: float = BOUNDARY_WIDTHS) -> MarginalReport:
    """L1 marginal defects of ``q~`` and ``q_rec`` plus interior/boundary ranges.

    Cells within ``boundary_widths * eps`` of an endpoint are excluded from
    the interior ranges and summarized separately for ``chi``.
    """
    dx = rho0.dx
    qt = bundle.q_tilde.values
    pi0 = qt.sum(axis=1) * dx
    pi1 = qt.sum(axis=0) * dx
    pi1_rec = bundle.q_recovery.values.sum(axis=0) * dx
    x = rho0.centers
    layer = boundary_widths * bundle.epsilon
    inner = (x >= rho0.origin + layer) & (x <= rho0.origin + rho0.L - layer)
    if not inner.any():
        inner = np.zeros_like(x, dtype=bool)
        inner[x.size // 2] = True
    outer = ~inner
    chi = bundle.chi
    return MarginalReport(
        epsilon=bundle.epsilon,
        z=bundle.z_epsilon,
        l1_pi0=float(np.sum(np.abs(pi0 - rho0.values)) * dx),
        l1_pi1=float(np.sum(np.abs(pi1_rec - rho1.values)) * dx),
        pi0_min=float(pi0[inner].min()), pi0_max=float(pi0[inner].max()),
        pi1_min=float(pi1[inner].min()), pi1_max=float(pi1[inner].max()),
        chi_min=float(chi[inner].min()), chi_max=float(chi[inner].max()),
        boundary_chi_min=float(chi[outer].min()) if outer.any() else float("nan"),
        boundary_chi_max=float(chi[outer].max()) if outer.any() else float("nan"),
    )


def write_report_csv(path, reports, header_comment: str | None = None) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epsilon", "Z", "l1_pi0", "l1_pi1", "chi_min", "chi_max"])
        for r in reports:
            w.writerow([_fmt(v) for v in r.row()])
