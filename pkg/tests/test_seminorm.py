import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import smooth_a_delta
from ldpjko.grid import GridDensity
from ldpjko.seminorm import (KappaKernel, TorusFunction, exponent_identity_check, fd_identity_check,
                             gaussian_moments, gaussian_rule, h_bound, h_closed_form, h_function, kappa_convolve,
                             kappa_multiplier, run_checks, seminorm_sq, uksq_bound_check, uksq_scalar,
                             uksq_single_mode, write_checks_csv, xee_scaling_check)
from ldpjko.wasserstein import potentials
from oracles import H_VALUES, SEMINORM_COS_EPS1

SQRT_PI = math.sqrt(math.pi)

seeds = st.integers(0, 2 ** 32 - 1)
eps_values = st.floats(0.02, 2.0)


def random_u(seed, n_modes=64, max_mode=8):
    return TorusFunction.random(np.random.default_rng(seed), n_modes, max_mode)


def constant(c=1.7, n=16):
    return TorusFunction.from_modes({0: c}, n)


def unit_mode(k=1, n=16):
    return TorusFunction.from_modes({k: 1.0}, n, real=False)


# --- TorusFunction --------------------------------------------------------------

def test_torus_validation():
    with pytest.raises(ValueError, match="power of two"):
        TorusFunction(np.zeros(6))
    with pytest.raises(ValueError, match="conjugate"):
        TorusFunction.from_modes({1: 1.0}, 8, real=True)
    TorusFunction.from_modes({1: 1.0}, 8, real=False)


@given(seeds)
def test_torus_round_trip_and_symmetry(seed):
    u = random_u(seed)
    assert u.symmetry_error() <= 1e-12
    back = TorusFunction.from_samples(u.samples())
    np.testing.assert_allclose(back.coefficients, u.coefficients, atol=1e-10)
    x = np.arange(u.n_modes) / u.n_modes
    np.testing.assert_allclose(u.eval(x), u.samples(), atol=1e-10)


def test_cosine_coefficients():
    x = np.arange(32) / 32
    u = TorusFunction.from_samples(np.cos(2 * np.pi * x))
    assert u.coefficient(1) == pytest.approx(0.5)
    assert u.coefficient(-1) == pytest.approx(0.5)


def test_shift():
    u = random_u(1)
    np.testing.assert_allclose(u.shift(0.1).eval([0.0, 0.3]), u.eval([0.1, 0.4]), atol=1e-12)


# --- seminorm -----------------------------------------------------------------

def test_seminorm_constant_is_zero():
    assert seminorm_sq(constant(), 0.3) == 0.0


@pytest.mark.parametrize("k, eps", [(1, 0.5), (3, 0.1), (-2, 1.0)])
def test_seminorm_single_mode(k, eps):
    assert seminorm_sq(unit_mode(k), eps) == pytest.approx(1 - math.exp(-(math.pi * k * eps) ** 2), rel=1e-14)


def test_seminorm_cosine():
    x = np.arange(16) / 16
    u = TorusFunction.from_samples(np.cos(2 * np.pi * x))
    assert seminorm_sq(u, 1.0) == pytest.approx(SEMINORM_COS_EPS1, abs=1e-15)


def test_seminorm_requires_positive_eps():
    with pytest.raises(ValueError):
        seminorm_sq(constant(), 0.0)


@given(seeds, eps_values, eps_values)
def test_seminorm_monotone_in_eps(seed, e1, e2):
    u = random_u(seed)
    lo, hi = sorted((e1, e2))
    assert seminorm_sq(u, lo) <= seminorm_sq(u, hi) + 1e-15


@given(seeds, eps_values)
def test_seminorm_below_centered_l2(seed, eps):
    u = random_u(seed)
    c = u.coefficients.copy()
    c[u.n_modes // 2] = 0
    l2 = float(np.sum(np.abs(c) ** 2))
    assert seminorm_sq(u, eps) <= l2 * (1 + 1e-15)


def test_seminorm_large_eps_limit():
    u = random_u(3)
    c = u.coefficients.copy()
    c[u.n_modes // 2] = 0
    assert seminorm_sq(u, 50.0) == pytest.approx(float(np.sum(np.abs(c) ** 2)), rel=1e-14)


# --- FD identity ----------------------------------------------------------------

def test_fd_single_mode():
    lhs, rhs = fd_identity_check(unit_mode(1), 0.5)
    exact = 2 * SQRT_PI * (1 - math.exp(-math.pi ** 2 / 4))
    assert lhs == pytest.approx(exact, abs=1e-12)
    assert rhs == pytest.approx(exact, abs=1e-14)


def test_fd_constant():
    assert fd_identity_check(constant(), 0.4) == (0.0, 0.0)


def test_fd_real_space_oracle():
    # independent route: sample (u(x + eps z) - u(x))^2 on a fine x grid
    u = random_u(5, 64, 8)
    eps = 0.3
    z, w = gaussian_rule()
    x = np.arange(256) / 256
    base = u.eval(x)
    inner = np.array([np.mean((u.eval(x + eps * zz) - base) ** 2) for zz in z])
    lhs, rhs = fd_identity_check(u, eps)
    assert float(w @ inner) == pytest.approx(lhs, abs=1e-8)
    assert lhs == pytest.approx(rhs, abs=1e-8)


@given(seeds, st.floats(0.05, 1.0))
def test_fd_identity_random(seed, eps):
    lhs, rhs = fd_identity_check(random_u(seed), eps)
    assert abs(lhs - rhs) <= 1e-8


# --- kappa -------------------------------------------------------------------

@pytest.mark.parametrize("z", [1.3, -0.7, 2.5])
def test_kappa_mass_and_support(z):
    k = KappaKernel(z, 0.2)
    assert k.mass() == pytest.approx(1.0, abs=1e-15)
    a, b = k.support
    s = np.linspace(a, b, 200_001)
    numeric = np.sum(0.5 * (k.density(s[1:]) + k.density(s[:-1])) * np.diff(s))
    assert numeric == pytest.approx(1.0, abs=1e-8)
    assert k.density(np.array([a - 0.01, b + 0.01])).tolist() == [0.0, 0.0]


def test_kappa_constant_unchanged():
    u = constant()
    np.testing.assert_allclose(kappa_convolve(u, 1.1, 0.3).coefficients, u.coefficients, atol=1e-15)


def test_kappa_zero_z_is_identity():
    u = random_u(2)
    assert kappa_convolve(u, 0.0, 0.3) is u


@pytest.mark.parametrize("k, z, eps", [(1, 1.2, 0.3), (3, -0.8, 0.1), (5, 2.0, 0.05), (2, -2.5, 0.2)])
def test_kappa_multiplier_vs_real_space(k, z, eps):
    u = TorusFunction.from_modes({k: 0.5, -k: 0.5}, 32)
    conv = kappa_convolve(u, z, eps)
    xi = np.linspace(0, 1, 17)
    direct = KappaKernel(z, eps).convolve_function(u.eval, xi, order=64)
    np.testing.assert_allclose(conv.eval(xi), direct, atol=1e-8)


def test_kappa_taylor_branch_continuous():
    # just inside the Taylor region, compare with the direct formula at the same point
    t = np.array([0.999e-3, -0.999e-3])
    direct = -2.0 * (np.expm1(1j * t) - 1j * t) / (t * t)
    np.testing.assert_allclose(kappa_multiplier(t), direct, atol=1e-11)
    np.testing.assert_allclose(kappa_multiplier(np.array([1e-9, 0.0])), 1.0, atol=1e-9)
    big = kappa_multiplier(np.array([2 * math.pi]))
    assert big[0] == pytest.approx(-2 * (-1j * 2 * math.pi) / (2 * math.pi) ** 2)


def test_kappa_small_z_tends_to_identity():
    u = random_u(4)
    errs = [np.max(np.abs(kappa_convolve(u, z, 0.1).coefficients - u.coefficients)) for z in (1e-1, 1e-2, 1e-3)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-2


def test_kappa_requires_positive_eps():
    with pytest.raises(ValueError):
        KappaKernel(1.0, 0.0)


# --- uksq -------------------------------------------------------------------

def test_uksq_single_mode_k1_eps1():
    lhs, rhs = uksq_bound_check(unit_mode(1), 1.0)
    assert lhs == pytest.approx(uksq_single_mode(2 * math.pi), abs=1e-8)
    assert lhs <= rhs


def test_uksq_constant():
    assert uksq_bound_check(constant(), 0.5) == (0.0, 0.0)


@pytest.mark.parametrize("omega", np.linspace(0.1, 20, 30))
def test_uksq_sweep(omega):
    eps = omega / (2 * math.pi)
    lhs, rhs = uksq_bound_check(unit_mode(1), eps)
    assert lhs == pytest.approx(uksq_single_mode(omega), abs=1e-8)
    assert lhs / rhs <= 1.0


def test_uksq_ratio_sup_below_one():
    om = np.linspace(0.1, 40, 400)
    ratio = [uksq_single_mode(w) / ((5 / 6) * SQRT_PI * (1 - math.exp(-w * w / 4))) for w in om]
    assert max(ratio) < 1


@given(seeds, st.floats(0.05, 1.0))
def test_uksq_bound_random(seed, eps):
    lhs, rhs = uksq_bound_check(random_u(seed), eps)
    assert lhs <= rhs + 1e-8


def test_uksq_scalar_nonpositive():
    s = np.linspace(0, 50, 50_001)
    assert uksq_scalar(s).max() <= 1e-14


# --- Xee --------------------------------------------------------------------

def test_xee_alpha_one_equality():
    u = random_u(8)
    assert xee_scaling_check(u, 0.3, 1.0, tol=0.0)


def test_xee_single_mode_alpha_two():
    eps = 0.2
    lhs = math.sqrt(1 - math.exp(-(math.pi * eps / 2) ** 2))
    rhs = math.sqrt(1 - math.exp(-(math.pi * eps) ** 2))
    assert lhs <= rhs
    assert xee_scaling_check(unit_mode(1), eps, 2.0)


@given(seeds, st.floats(0.05, 1.0), st.floats(0.05, 20.0))
def test_xee_random(seed, eps, alpha):
    assert xee_scaling_check(random_u(seed), eps, alpha)


def test_xee_half_uses_factor_two():
    u = random_u(9)
    a = math.sqrt(seminorm_sq(u, 0.6))
    b = math.sqrt(seminorm_sq(u, 0.3))
    assert a <= 2 * b
    assert xee_scaling_check(u, 0.3, 0.5)
    with pytest.raises(ValueError):
        xee_scaling_check(u, 0.3, 0.0)


# --- exponent identity ----------------------------------------------------------

def test_exponent_identity_quadratic_potential():
    u = GridDensity.uniform(1.0, 512)
    pot = potentials(u, u)
    samples = [(0.5, 1.0), (0.3, -2.0), (0.6, 0.5)]
    rep = exponent_identity_check(pot, 0.05, samples)
    np.testing.assert_allclose(rep.lhs, 0.5 * 0.05 ** 2 * np.array([1.0, 4.0, 0.25]), rtol=1e-10)
    np.testing.assert_allclose(rep.rhs, rep.lhs, rtol=1e-8)


def test_exponent_identity_translation():
    def f0(x):
        return np.where((x > 0.05) & (x < 0.75), 1.0, 1e-9)

    rho0 = GridDensity.from_function(f0, 1.0, 1000)
    rho1 = GridDensity.from_function(lambda x: f0(x - 0.1), 1.0, 1000)
    rep = exponent_identity_check(potentials(rho0, rho1), 0.02, [(0.3, 1.0), (0.5, -1.5)])
    np.testing.assert_allclose(rep.lhs, 0.5 * 0.02 ** 2 * np.array([1.0, 2.25]), rtol=1e-6)
    assert rep.passed(1e-4)


def test_exponent_identity_generic_pair():
    r = np.random.default_rng(12)
    rho0, rho1 = smooth_a_delta(r, 2048), smooth_a_delta(r, 2048)
    samples = np.column_stack([r.uniform(0.3, 0.7, 100), r.uniform(-2.5, 2.5, 100)])
    rep = exponent_identity_check(potentials(rho0, rho1), 0.1, samples)
    assert rep.max_rel_error <= 1e-3


def test_exponent_identity_out_of_range():
    u = GridDensity.uniform(1.0, 64)
    with pytest.raises(ValueError, match="interior"):
        exponent_identity_check(potentials(u, u), 0.1, [(0.95, 2.0)])


# --- h(s) -----------------------------------------------------------------------

@pytest.mark.parametrize("s", sorted(H_VALUES))
def test_h_frozen_values(s):
    assert h_function(s) == pytest.approx(H_VALUES[s], rel=1e-10)
    assert h_function(s) <= h_bound(s)


def test_h_at_one_bound():
    assert h_function(1.0) <= math.exp(-1) / 2


def test_h_matches_closed_form():
    for s in (0.01, 0.5, 3.0, 12.0):
        assert h_function(s) == pytest.approx(h_closed_form(s), rel=1e-8)


def test_h_large_s_ratio_bounded():
    ratios = [h_function(s) / h_bound(s) for s in (10.0, 100.0, 400.0)]
    assert all(r <= 1 for r in ratios)
    assert ratios[0] > ratios[1] > ratios[2]


def test_h_domain():
    with pytest.raises(ValueError):
        h_function(0.0)


# --- moments and batch report ------------------------------------------------------

@pytest.mark.parametrize("omega", [0.0, 0.5, 2.0, 5.0])
def test_gaussian_moments(omega):
    for name, quad, closed in gaussian_moments(omega):
        assert quad == pytest.approx(closed, abs=1e-12), name


def test_run_checks_all_pass(tmp_path):
    rows = run_checks()
    assert len(rows) == 185
    assert all(r.passed for r in rows)
    path = tmp_path / "c.csv"
    write_checks_csv(path, rows, "hdr")
    lines = path.read_text().splitlines()
    assert lines[1] == "case,lhs,rhs,pass"
    assert all(line.endswith(",1") for line in lines[2:])
