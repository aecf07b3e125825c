"""Static Schroedinger bridge: the rate functional ``J_eps(rho1; rho0)``.

``J_eps`` is the minimum of ``H(q | q0)`` over couplings ``q`` of ``rho0`` and
``rho1``, where ``q0(x, y) = rho0(x) p_eps(x, y)`` is the (unnormalized on the
grid) heat coupling.  The minimizer has the form
``q = exp(alpha(x)) p_eps(x, y) exp(beta(y))`` and is found by alternating
marginal fitting in the log domain.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _accel
from .errors import ConfigError, NonConvergenceError, OverflowGuardError
from .grid import (ADeltaSpec, GridDensity, PairDensity, _check_same, entropy, in_A_delta,
                   pair_entropy, relative_entropy)
from .heat import KernelParams, log_kernel
from .wasserstein import coupling_cost, potentials, w2_distance

MIN_CELLS_PER_EPSILON = 4.0
DELTA_CEILING = 1.0 / 3.0


@dataclass(frozen=True, eq=False)
class BridgeSolution:
    """Optimal coupling and value of the bridge problem.

    ``potentials_a_b`` holds the log-scalings ``(alpha, beta)`` with
    ``q = exp(alpha_i) p_eps(x_i, y_j) exp(beta_j)``.
    """

    q: PairDensity
    j_value: float
    marginal_error: float
    iterations: int
    potentials_a_b: tuple
    epsilon: float


def check_resolution(rho: GridDensity, p: KernelParams) -> None:
    """Refuse ``eps < 4 dx``: the grid cannot resolve the kernel there."""
    if p.epsilon < MIN_CELLS_PER_EPSILON * rho.dx * (1 - 1e-12):
        raise ConfigError(
            f"epsilon={p.epsilon:g} is below {MIN_CELLS_PER_EPSILON:g}*dx={MIN_CELLS_PER_EPSILON * rho.dx:g}; "
            f"refine the grid (n_cells >= {math.ceil(MIN_CELLS_PER_EPSILON * rho.L / p.epsilon)})")


def _l1_defect(log_marg, target, dx):
    return float(np.sum(np.abs(np.exp(log_marg) - target)) * dx)


def warm_start(rho0: GridDensity, rho1: GridDensity, p: KernelParams):
    """Log-scalings of the explicit Gaussian-ridge coupling built from the transport potentials."""
    pot = potentials(rho0, rho1)
    eps2 = p.epsilon ** 2
    alpha = (pot.x ** 2 - 2.0 * pot.phi) / eps2 + 0.5 * np.log(rho0.values)
    beta = (pot.y ** 2 - 2.0 * pot.phi_star) / eps2 + 0.5 * np.log(rho1.values)
    return alpha, beta


def solve_bridge(rho0: GridDensity, rho1: GridDensity, p: KernelParams, tol: float = 1e-9,
                 max_iter: int = 200_000, potential_bound: float = 1e12,
                 init: str | tuple | None = "potentials", resolution_check: bool = True) -> BridgeSolution:
    """Minimize ``H(q | q0)`` over couplings of ``rho0`` and ``rho1``.

    Alternates exact column and row fitting until the column L1 defect is at
    most ``tol``; the last half-step fits the rows, so the first marginal is
    exact to rounding.  ``init`` is ``"potentials"`` (start from the transport
    potentials), ``None`` (zero start) or an ``(alpha, beta)`` pair.

    Raises :class:`NonConvergenceError` after ``max_iter`` sweeps and
    :class:`OverflowGuardError` if a log-scaling exceeds ``potential_bound``.
    """
    _check_same(rho0, rho1)
    if not tol > 0:
        raise ValueError("tol must be positive")
    for name, r in (("rho0", rho0), ("rho1", rho1)):
        if np.any(r.values <= 0):
            raise ValueError(f"{name} must be strictly positive")
    if resolution_check:
        check_resolution(rho0, p)

    dx = rho0.dx
    x = rho0.centers
    logk = np.ascontiguousarray(log_kernel(x[:, None], x[None, :], p))
    # same grid on both axes, so the kernel is symmetric and rows double as columns
    lr0 = np.log(rho0.values) - math.log(dx)
    lr1 = np.log(rho1.values) - math.log(dx)

    if init is None:
        alpha = np.zeros(rho0.n_cells)
    elif isinstance(init, str):
        if init != "potentials":
            raise ValueError(f"unknown init {init!r}")
        alpha, _ = warm_start(rho0, rho1, p)
    else:
        alpha = np.array(init[0], dtype=np.float64)
    beta = np.zeros(rho1.n_cells)

    lse = _accel.lse_rows
    s_col = np.empty(rho1.n_cells)
    s_row = np.empty(rho0.n_cells)
    err = math.inf
    it = 0
    while True:
        lse(logk, alpha, s_col)
        if it > 0:
            err = _l1_defect(beta + s_col + math.log(dx), rho1.values, dx)
            if err <= tol:
                break
        if it >= max_iter:
            raise NonConvergenceError(
                f"bridge solver did not reach tol={tol:g} in {max_iter} sweeps "
                f"(marginal error {err:.3e})", last_error=err, iterations=it)
        beta = lr1 - s_col
        lse(logk, beta, s_row)
        alpha = lr0 - s_row
        it += 1
        bound = max(np.max(np.abs(alpha)), np.max(np.abs(beta)))
        if not bound <= potential_bound:
            raise OverflowGuardError(
                f"log-scaling magnitude {bound:.3e} exceeds {potential_bound:.3e} after {it} sweeps; "
                f"epsilon={p.epsilon:g} is too small for this grid")

    logq = alpha[:, None] + logk + beta[None, :]
    q = np.exp(logq)
    row = q.sum(axis=1) * dx
    col = q.sum(axis=0) * dx
    row_err = float(np.sum(np.abs(row - rho0.values)) * dx)
    col_err = float(np.sum(np.abs(col - rho1.values)) * dx)
    # log q - log q0 = alpha_i + beta_j - log rho0_i
    j_value = float((np.sum(row * (alpha - np.log(rho0.values))) + np.sum(col * beta)) * dx)
    qd = PairDensity(rho0.L, q, origin=rho0.origin)
    return BridgeSolution(qd, j_value, max(row_err, col_err), it, (alpha, beta), p.epsilon)


def rate_functional(sol: BridgeSolution, rho0: GridDensity, p: KernelParams) -> float:
    """``J`` recomputed as ``E(q) - E(rho0) + log(eps^2 pi)/2 + d(q)^2/eps^2``."""
    eps = p.epsilon
    return (pair_entropy(sol.q) - entropy(rho0) + 0.5 * math.log(eps * eps * math.pi)
            + coupling_cost(sol.q) / (eps * eps))


def _check_delta(rho0, rho1, delta):
    if delta is None:
        return
    if delta > DELTA_CEILING:
        raise ConfigError(f"delta={delta:g} exceeds the ceiling 1/3")
    spec = ADeltaSpec(delta, rho0.L)
    for name, r in (("rho0", rho0), ("rho1", rho1)):
        if not in_A_delta(r, spec):
            raise ValueError(f"{name} is not within delta={delta:g} of the uniform density")


@dataclass(frozen=True)
class GammaPoint:
    epsilon: float
    j_value: float
    w2_sq: float
    F_eps: float
    target: float
    marginal_error: float
    iterations: int

    @property
    def abs_gap(self) -> float:
        return abs(self.F_eps - self.target)


def gamma_point(rho0: GridDensity, rho1: GridDensity, p: KernelParams, tol: float = 1e-9,
                delta: float | None = 0.2, **solver_kw) -> GammaPoint:
    """Evaluate ``F_eps = J_eps(rho1; rho0) - W2^2/eps^2`` and its limit ``E(rho1)/2 - E(rho0)/2``."""
    _check_delta(rho0, rho1, delta)
    sol = solve_bridge(rho0, rho1, p, tol=tol, **solver_kw)
    w2sq = w2_distance(rho0, rho1) ** 2
    f_eps = sol.j_value - w2sq / p.epsilon ** 2
    target = 0.5 * entropy(rho1) - 0.5 * entropy(rho0)
    return GammaPoint(p.epsilon, sol.j_value, w2sq, f_eps, target, sol.marginal_error, sol.iterations)


def gamma_functional(rho0: GridDensity, rho1: GridDensity, p: KernelParams, tol: float = 1e-9,
                     delta: float | None = 0.2, **solver_kw) -> float:
    return gamma_point(rho0, rho1, p, tol=tol, delta=delta, **solver_kw).F_eps


@dataclass(frozen=True)
class LowerBoundReport:
    """Both sides of ``H(q|q~) = J - W2^2/eps^2 - E(rho1)/2 + E(rho0)/2 + log Z``."""

    epsilon: float
    j_value: float
    w2_sq: float
    entropy0: float
    entropy1: float
    log_z: float
    rhs: float
    h_rel: float
    identity_gap: float
    passed: bool

    @property
    def gap(self) -> float:
        return self.h_rel - self.rhs


def lower_bound_check(rho0: GridDensity, rho1: GridDensity, p: KernelParams, tol: float = 1e-10,
                      slack: float = 1e-4, delta: float | None = 0.2, **solver_kw) -> LowerBoundReport:
    """Evaluate the lower-bound identity with the optimal coupling and the explicit ``q~``.

    Passes when the right-hand side is at least ``-slack`` and both sides
    agree within ``slack``.
    """
    from .tildeq import build_tilde_q

    _check_delta(rho0, rho1, delta)
    sol = solve_bridge(rho0, rho1, p, tol=tol, **solver_kw)
    pot = potentials(rho0, rho1)
    bundle = build_tilde_q(rho0, rho1, pot, p)
    w2sq = w2_distance(rho0, rho1) ** 2
    e0, e1 = entropy(rho0), entropy(rho1)
    log_z = math.log(bundle.z_epsilon)
    rhs = sol.j_value - w2sq / p.epsilon ** 2 - 0.5 * e1 + 0.5 * e0 + log_z
    h_rel = relative_entropy(sol.q, bundle.q_tilde)
    gap = abs(h_rel - rhs)
    passed = bool(rhs >= -slack and gap <= slack and h_rel >= 0)
    return LowerBoundReport(p.epsilon, sol.j_value, w2sq, e0, e1, log_z, rhs, h_rel, gap, passed)


def write_solution_csv(path, rows, header_comment: str | None = None) -> None:
    """Rows of ``epsilon,j_value,w2_sq,F_eps,marginal_error,iterations`` from :class:`GammaPoint`s."""
    from .grid import _fmt

    with open(path, "w", encoding="utf-8", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        fh.write("epsilon,j_value,w2_sq,F_eps,marginal_error,iterations\n")
        for g in rows:
            fh.write(",".join([_fmt(g.epsilon), _fmt(g.j_value), _fmt(g.w2_sq), _fmt(g.F_eps),
                               _fmt(g.marginal_error), str(g.iterations)]) + "\n")
