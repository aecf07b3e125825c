"""Torus Fourier seminorm, the tent kernel ``kappa_eps^z`` and numerical
checks of the finite-difference, ``uksq`` and scaling lemmas built on them.

Functions on the unit torus are held as Fourier coefficients
``u(x) = sum_k u_k exp(2 pi i k x)`` with ``k = -N/2 .. N/2-1``.  Integrals in
``x`` are evaluated exactly by Parseval; integrals in ``z`` against
``exp(-z^2)`` use a composite Gauss-Legendre rule on ``[-8, 8]``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy import integrate, special

from .grid import _fmt
from .wasserstein import TransportPotentials

Z_CUTOFF = 8.0
TAYLOR_SWITCH = 1e-3
SQRT_PI = math.sqrt(math.pi)


@lru_cache(maxsize=8)
def _gl_rule(a: float, b: float, panels: int, order: int):
    t, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * t[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def gaussian_rule(panels: int = 128, order: int = 16):
    """Nodes and weights for ``int_R exp(-z^2) f(z) dz`` (truncated to ``|z| <= 8``)."""
    z, w = _gl_rule(-Z_CUTOFF, Z_CUTOFF, panels, order)
    return z, w * np.exp(-z * z)


@dataclass(frozen=True, eq=False)
class TorusFunction:
    """Fourier coefficients in centered order ``k = -N/2 .. N/2-1``.

    ``real=True`` enforces conjugate symmetry (the unpaired ``-N/2`` mode
    must then be real).
    """

    coefficients: np.ndarray
    real: bool = True

    def __post_init__(self):
        c = np.array(self.coefficients, dtype=np.complex128, copy=True)
        n = c.size
        if c.ndim != 1 or n < 2 or n & (n - 1):
            raise ValueError("n_modes must be a power of two >= 2")
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)
        if self.real:
            err = self.symmetry_error()
            if err > 1e-12 * max(1.0, float(np.max(np.abs(c)))):
                raise ValueError(f"coefficients are not conjugate-symmetric (defect {err:.3e})")

    @property
    def n_modes(self) -> int:
        return self.coefficients.size

    @property
    def modes(self) -> np.ndarray:
        n = self.n_modes
        return np.arange(-n // 2, n // 2)

    def coefficient(self, k: int) -> complex:
        return complex(self.coefficients[k + self.n_modes // 2])

    def symmetry_error(self) -> float:
        c = self.coefficients
        h = self.n_modes // 2
        pos = c[h + 1:]
        neg = c[1:h][::-1]
        err = np.max(np.abs(pos - np.conj(neg))) if pos.size else 0.0
        return float(max(err, abs(c[h].imag), abs(c[0].imag)))

    @classmethod
    def from_samples(cls, values, real: bool | None = None) -> "TorusFunction":
        """Coefficients of the trigonometric interpolant of samples at ``j/N``."""
        values = np.asarray(values)
        if real is None:
            real = not np.iscomplexobj(values)
        c = np.fft.fftshift(np.fft.fft(values)) / values.size
        if real:
            h = values.size // 2
            c[h + 1:] = 0.5 * (c[h + 1:] + np.conj(c[1:h][::-1]))
            c[1:h] = np.conj(c[h + 1:][::-1])
            c[0] = c[0].real
            c[h] = c[h].real
        return cls(c, real=real)

    @classmethod
    def from_modes(cls, modes: dict, n_modes: int, real: bool = True) -> "TorusFunction":
        c = np.zeros(n_modes, dtype=np.complex128)
        for k, v in modes.items():
            c[k + n_modes // 2] = v
        return cls(c, real=real)

    @classmethod
    def random(cls, rng: np.random.Generator, n_modes: int = 64, max_mode: int = 8,
               decay: float = 1.0) -> "TorusFunction":
        """Random real function with modes ``|k| <= max_mode``."""
        c = np.zeros(n_modes, dtype=np.complex128)
        h = n_modes // 2
        for k in range(1, max_mode + 1):
            v = (rng.standard_normal() + 1j * rng.standard_normal()) / k ** decay
            c[h + k] = v
            c[h - k] = np.conj(v)
        c[h] = rng.standard_normal()
        return cls(c, real=True)

    def samples(self) -> np.ndarray:
        v = np.fft.ifft(np.fft.ifftshift(self.coefficients)) * self.n_modes
        return v.real if self.real else v

    def eval(self, x):
        x = np.asarray(x, dtype=np.float64)
        v = np.exp(2j * np.pi * np.multiply.outer(x, self.modes)) @ self.coefficients
        return v.real if self.real else v

    def shift(self, a: float) -> "TorusFunction":
        """``x -> u(x + a)``."""
        return TorusFunction(self.coefficients * np.exp(2j * np.pi * self.modes * a), real=self.real)

    def with_coefficients(self, c) -> "TorusFunction":
        return TorusFunction(c, real=self.real)


def seminorm_weights(modes, epsilon: float) -> np.ndarray:
    k = np.asarray(modes, dtype=np.float64)
    return -np.expm1(-(math.pi * epsilon) ** 2 * k * k)


def seminorm_sq(u: TorusFunction, epsilon: float) -> float:
    """``sum_k |u_k|^2 (1 - exp(-pi^2 k^2 eps^2))``."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    return float(np.sum(np.abs(u.coefficients) ** 2 * seminorm_weights(u.modes, epsilon)))


def fd_identity_check(u: TorusFunction, epsilon: float) -> tuple[float, float]:
    """``int exp(-z^2) int_T (u(x + eps z) - u(x))^2 dx dz`` against ``2 sqrt(pi) ||u||_eps^2``."""
    z, w = gaussian_rule()
    a2 = np.abs(u.coefficients) ** 2
    # Parseval for the shifted difference: |exp(2 pi i k eps z) - 1|^2 = 2 - 2 cos(2 pi k eps z)
    phase = 2.0 * np.pi * epsilon * np.multiply.outer(z, u.modes)
    inner = (2.0 - 2.0 * np.cos(phase)) @ a2
    lhs = float(w @ inner)
    return lhs, 2.0 * SQRT_PI * seminorm_sq(u, epsilon)


def kappa_multiplier(theta) -> np.ndarray:
    """``-2 (exp(i theta) - 1 - i theta) / theta^2`` with ``theta = 2 pi k eps z``."""
    theta = np.asarray(theta, dtype=np.float64)
    out = np.empty(theta.shape, dtype=np.complex128)
    small = np.abs(theta) < TAYLOR_SWITCH
    t = theta[small]
    out[small] = 1 + 1j * t / 3 - t ** 2 / 12 - 1j * t ** 3 / 60 + t ** 4 / 360
    t = theta[~small]
    out[~small] = -2.0 * (np.expm1(1j * t) - 1j * t) / (t * t)
    return out


@dataclass(frozen=True)
class KappaKernel:
    """Tent of mass one on ``[-eps z, 0]`` (``z > 0``) or ``[0, -eps z]`` (``z < 0``).

    Convolving ``phi''`` with it and scaling by ``z^2 eps^2 / 2`` gives
    ``phi(xi + eps z) - phi(xi) - eps z phi'(xi)``.
    """

    z: float
    epsilon: float

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")

    @property
    def support(self) -> tuple[float, float]:
        a = -self.epsilon * self.z
        return (min(a, 0.0), max(a, 0.0))

    def density(self, s):
        """``kappa_eps^z(s) = kappa^z(s / eps) / eps``."""
        z, eps = self.z, self.epsilon
        if z == 0:
            raise ValueError("the z = 0 kernel is a Dirac mass")
        sigma = np.asarray(s, dtype=np.float64) / eps
        val = (2.0 / z ** 2) * (z + sigma)
        if z > 0:
            inside = (sigma >= -z) & (sigma <= 0)
        else:
            val = -val
            inside = (sigma >= 0) & (sigma <= -z)
        return np.where(inside, val, 0.0) / eps

    def mass(self) -> float:
        if self.z == 0:
            return 1.0
        base = abs(self.z) * self.epsilon
        height = 2.0 / base
        return 0.5 * base * height

    def multiplier(self, modes) -> np.ndarray:
        return kappa_multiplier(2.0 * np.pi * self.epsilon * self.z * np.asarray(modes, dtype=np.float64))

    def convolve_function(self, f, xi, order: int = 32):
        """``(kappa * f)(xi) = int kappa(t) f(xi - t) dt`` by Gauss-Legendre on the support."""
        xi = np.asarray(xi, dtype=np.float64)
        if self.z == 0:
            return np.asarray(f(xi), dtype=np.float64)
        a, b = self.support
        t, w = np.polynomial.legendre.leggauss(order)
        ts = 0.5 * (b - a) * t + 0.5 * (a + b)
        ws = 0.5 * (b - a) * w * self.density(ts)
        vals = f(np.subtract.outer(xi, ts))
        return vals @ ws


def kappa_convolve(u: TorusFunction, z: float, epsilon: float) -> TorusFunction:
    """``kappa_eps^z * u`` as a Fourier multiplier; ``z = 0`` returns ``u``."""
    if z == 0:
        return u
    return u.with_coefficients(u.coefficients * KappaKernel(z, epsilon).multiplier(u.modes))


def uksq_integrand(modes, coeff_sq, z, epsilon):
    """``z^4 int_T (u - kappa_eps^z * u)^2 dx`` at each node ``z``."""
    theta = 2.0 * np.pi * epsilon * np.multiply.outer(z, np.asarray(modes, dtype=np.float64))
    return (z ** 4) * (np.abs(1.0 - kappa_multiplier(theta)) ** 2 @ coeff_sq)


def uksq_bound_check(u: TorusFunction, epsilon: float) -> tuple[float, float]:
    """``int int exp(-z^2) (u - kappa * u)^2 z^4`` against ``(5/6) sqrt(pi) ||u||_eps^2``."""
    z, w = gaussian_rule()
    lhs = float(w @ uksq_integrand(u.modes, np.abs(u.coefficients) ** 2, z, epsilon))
    return lhs, (5.0 / 6.0) * SQRT_PI * seminorm_sq(u, epsilon)


def uksq_single_mode(omega: float) -> float:
    """Closed form of the ``uksq`` left side for one unit mode, ``omega = 2 pi k eps``."""
    e = math.exp(-omega * omega / 4)
    w2, w4 = omega ** 2, omega ** 4
    return (4 * SQRT_PI / w4) * (2 - 2 * e + 3 * w4 / 16 - 0.5 * w2 * e - 0.25 * w4 * e)


def uksq_scalar(s):
    """``2(1-e^-s) - s^2/3 - 2 s e^-s - (2/3) s^2 e^-s``; nonpositive for ``s >= 0``."""
    s = np.asarray(s, dtype=np.float64)
    e = np.exp(-s)
    return 2 * (-np.expm1(-s)) - s * s / 3 - 2 * s * e - (2.0 / 3.0) * s * s * e


def xee_scaling_check(u: TorusFunction, epsilon: float, alpha: float, tol: float = 1e-10) -> bool:
    """``||u||_{eps/alpha} <= ||u||_eps`` for ``alpha >= 1`` and ``<= ||u||_eps / alpha`` otherwise."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    a = math.sqrt(seminorm_sq(u, epsilon / alpha))
    b = math.sqrt(seminorm_sq(u, epsilon))
    bound = b if alpha >= 1 else b / alpha
    return a <= bound + tol


@dataclass(frozen=True)
class ExponentReport:
    xi: np.ndarray
    z: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray

    @property
    def rel_errors(self) -> np.ndarray:
        return np.abs(self.lhs - self.rhs) / np.maximum(np.abs(self.lhs), 1e-300)

    @property
    def max_rel_error(self) -> float:
        return float(self.rel_errors.max())

    def passed(self, tol: float = 1e-4) -> bool:
        return self.max_rel_error <= tol


def exponent_identity_check(pot: TransportPotentials, epsilon: float, samples, fd_step: float | None = None,
                            order: int = 64) -> ExponentReport:
    """Compare ``phi(xi + eps z) + phi*(phi'(xi)) - (xi + eps z) phi'(xi)`` with
    ``(z^2 eps^2 / 2) (kappa_eps^z * phi'')(xi)``.

    ``phi''`` on the right is a central second difference of width
    ``2 fd_step`` (default: twice the grid spacing), so the two sides are
    computed by independent routes.
    """
    samples = np.asarray(samples, dtype=np.float64).reshape(-1, 2)
    xi, z = samples[:, 0], samples[:, 1]
    if fd_step is None:
        fd_step = 2.0 * (pot.x[1] - pot.x[0])
    lo, hi = pot.knots_x[0] + fd_step, pot.knots_x[-1] - fd_step
    x = xi + epsilon * z
    for name, v in (("xi", xi), ("xi + eps z", x)):
        if np.any(v < lo) or np.any(v > hi):
            raise ValueError(f"sample {name} outside the interior range [{lo:g}, {hi:g}]")
    t = pot.map_at(xi)
    lhs = pot.phi_at(x) + pot.phi_star_at(t) - x * t
    rhs = np.empty_like(lhs)
    for i, (a, b) in enumerate(zip(xi, z)):
        if b == 0:
            rhs[i] = 0.0
            continue
        kern = KappaKernel(float(b), epsilon)
        conv = kern.convolve_function(lambda s: pot.phi_second_fd(s, fd_step), np.array([a]), order=order)[0]
        rhs[i] = 0.5 * b * b * epsilon * epsilon * conv
    return ExponentReport(xi, z, lhs, rhs)


def h_function(s: float) -> float:
    """``h(s) = (1/sqrt(s)) int_{sqrt(s)}^inf exp(-zeta^2) (zeta - sqrt(s)) dzeta`` by quadrature.

    Substituting ``zeta = sqrt(s) + t`` factors out ``exp(-s)`` so large ``s``
    does not underflow before the final product.
    """
    if not s > 0:
        raise ValueError("h(s) is defined for s > 0 only")
    r = math.sqrt(s)
    val, _ = integrate.quad(lambda t: t * math.exp(-2.0 * r * t - t * t), 0.0, math.inf,
                            epsabs=0.0, epsrel=1e-13, limit=200)
    return math.exp(-s) * val / r


def h_closed_form(s: float) -> float:
    r = math.sqrt(s)
    return math.exp(-s) / (2 * r) - 0.5 * SQRT_PI * special.erfc(r)


def h_bound(s: float) -> float:
    return math.exp(-s) / (2 * math.sqrt(s))


def gaussian_moments(omega: float):
    """``(name, quadrature, closed form)`` for the Gaussian integrals behind the lemmas."""
    z, w = gaussian_rule()
    e = math.exp(-omega * omega / 4)
    return [
        ("int exp(-z^2)", float(w.sum()), SQRT_PI),
        ("int exp(-z^2) z^4", float(w @ z ** 4), 0.75 * SQRT_PI),
        ("int exp(-z^2) cos(wz)", float(w @ np.cos(omega * z)), SQRT_PI * e),
        ("int exp(-z^2) z sin(wz)", float(w @ (z * np.sin(omega * z))), 0.5 * omega * SQRT_PI * e),
        ("int exp(-z^2) z^2 cos(wz)", float(w @ (z * z * np.cos(omega * z))), SQRT_PI * e * (0.5 - omega ** 2 / 4)),
    ]


# --- batch report ---------------------------------------------------------

@dataclass(frozen=True)
class CheckRow:
    case: str
    lhs: float
    rhs: float
    passed: bool


def run_checks(seed: int = 0, n_random: int = 50, n_modes: int = 64, max_mode: int = 8,
               omegas=None) -> list[CheckRow]:
    """All seminorm checks with the default tolerances, in a fixed order."""
    rng = np.random.default_rng(seed)
    rows: list[CheckRow] = []
    for i in range(n_random):
        u = TorusFunction.random(rng, n_modes, max_mode)
        eps = float(rng.uniform(0.05, 1.0))
        lhs, rhs = fd_identity_check(u, eps)
        rows.append(CheckRow(f"fd_identity[{i}]", lhs, rhs, abs(lhs - rhs) <= 1e-8))
    if omegas is None:
        omegas = np.linspace(0.1, 20.0, 30)
    for om in omegas:
        eps = float(om) / (2 * math.pi)
        u = TorusFunction.from_modes({1: 1.0}, 8, real=False)
        lhs, rhs = uksq_bound_check(u, eps)
        closed = uksq_single_mode(float(om))
        rows.append(CheckRow(f"uksq_closed_form[w={om:.4g}]", lhs, closed, abs(lhs - closed) <= 1e-8))
        rows.append(CheckRow(f"uksq_bound[w={om:.4g}]", lhs, rhs, lhs <= rhs + 1e-8))
    for i in range(n_random):
        u = TorusFunction.random(rng, n_modes, max_mode)
        eps = float(rng.uniform(0.05, 1.0))
        alpha = float(np.exp(rng.uniform(-2.0, 2.0)))
        a = math.sqrt(seminorm_sq(u, eps / alpha))
        b = math.sqrt(seminorm_sq(u, eps))
        rows.append(CheckRow(f"xee[{i},alpha={alpha:.4g}]", a, b if alpha >= 1 else b / alpha,
                             xee_scaling_check(u, eps, alpha)))
    for om in (0.0, 0.5, 2.0, 5.0):
        for name, q, c in gaussian_moments(om):
            rows.append(CheckRow(f"moment[{name},w={om:g}]", q, c, abs(q - c) <= 1e-12))
    s = np.linspace(0.0, 50.0, 5001)
    rows.append(CheckRow("uksq_scalar_max", float(uksq_scalar(s).max()), 0.0, float(uksq_scalar(s).max()) <= 1e-14))
    for sv in (0.25, 1.0, 4.0, 25.0):
        h = h_function(sv)
        rows.append(CheckRow(f"h_bound[s={sv:g}]", h, h_bound(sv), h <= h_bound(sv)))
    return rows


def write_checks_csv(path, rows, header_comment: str | None = None) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["case", "lhs", "rhs", "pass"])
        for r in rows:
            w.writerow([r.case, _fmt(r.lhs), _fmt(r.rhs), "1" if r.passed else "0"])
