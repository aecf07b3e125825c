import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import smooth_a_delta
from ldpjko.errors import GridMismatchError
from ldpjko.grid import (ADeltaSpec, GridDensity, PairDensity, entropy, in_A_delta, levy_distance, marginals,
                         pair_entropy, read_grid_csv, read_pair_csv, relative_entropy, write_grid_csv,
                         write_pair_csv)
from ldpjko.heat import KernelParams, reference_coupling
from oracles import ENTROPY_2X


def linear_density(n):
    return GridDensity.from_function(lambda x: 2 * x, 1.0, n)


def random_density(seed, n=32, floor=0.0):
    r = np.random.default_rng(seed)
    v = r.uniform(floor, 1.0, n)
    return GridDensity(1.0, v / (v.sum() / n))


# --- construction -----------------------------------------------------------

def test_uniform_has_unit_mass_and_centers():
    rho = GridDensity.uniform(2.0, 8)
    assert rho.mass() == pytest.approx(1.0, abs=1e-15)
    assert rho.dx == 0.25
    np.testing.assert_allclose(rho.centers, 0.125 + 0.25 * np.arange(8))


@pytest.mark.parametrize("values, msg", [
    ([0.5, 0.5], "mass"),
    ([3.0, -1.0], "nonnegative"),
    ([1.0], "at least 2"),
    ([np.nan, 1.0], "finite"),
])
def test_invalid_grid_density(values, msg):
    with pytest.raises(ValueError, match=msg):
        GridDensity(1.0, values)


def test_values_are_frozen():
    rho = GridDensity.uniform(1.0, 4)
    with pytest.raises(ValueError):
        rho.values[0] = 2.0


def test_pair_density_validation():
    with pytest.raises(ValueError, match="square"):
        PairDensity(1.0, np.ones((2, 3)))
    with pytest.raises(ValueError, match="mass"):
        PairDensity(1.0, np.full((4, 4), 2.0))
    PairDensity(1.0, np.full((4, 4), 2.0), normalized=False)


def test_a_delta_spec_bounds():
    with pytest.raises(ValueError):
        ADeltaSpec(1.0)
    with pytest.raises(ValueError):
        ADeltaSpec(0.0)


# --- entropy ----------------------------------------------------------------

def test_entropy_uniform_unit_interval():
    assert entropy(GridDensity.uniform(1.0, 64)) == pytest.approx(0.0, abs=1e-15)


def test_entropy_uniform_length_two():
    assert entropy(GridDensity.uniform(2.0, 64)) == pytest.approx(-math.log(2), abs=1e-14)


def test_entropy_linear_density():
    assert entropy(linear_density(4096)) == pytest.approx(ENTROPY_2X, abs=1e-4)


def test_entropy_zero_cells_follow_convention():
    rho = GridDensity(1.0, [2.0, 0.0, 2.0, 0.0])
    assert entropy(rho) == pytest.approx(math.log(2))


def test_pair_entropy_examples():
    assert pair_entropy(PairDensity(1.0, np.ones((8, 8)))) == pytest.approx(0.0, abs=1e-15)
    u2 = GridDensity.uniform(2.0, 8)
    assert pair_entropy(PairDensity.product(u2, u2)) == pytest.approx(-2 * math.log(2), abs=1e-13)
    lin = linear_density(4096)
    assert pair_entropy(PairDensity.product(lin, lin)) == pytest.approx(2 * ENTROPY_2X, abs=2e-4)
    assert pair_entropy(PairDensity.product(lin, lin)) == pytest.approx(2 * entropy(lin), rel=1e-12)


# --- relative entropy ---------------------------------------------------------

def test_relative_entropy_self_is_zero():
    r = random_density(1, 16, floor=0.1)
    q = PairDensity.product(r, r)
    assert relative_entropy(q, q) == pytest.approx(0.0, abs=1e-14)


def test_relative_entropy_infinite_outside_support():
    q = PairDensity(1.0, np.full((2, 2), 1.0))
    p = PairDensity(1.0, np.array([[2.0, 0.0], [1.0, 1.0]]))
    assert relative_entropy(q, p) == math.inf


def test_relative_entropy_two_by_two_hand_sum():
    dx = 0.5
    cells = np.array([[0.3, 0.2], [0.2, 0.3]])
    q = PairDensity(1.0, cells / dx ** 2)
    p = PairDensity(1.0, np.ones((2, 2)))
    hand = sum(c * math.log(4 * c) for c in (0.3, 0.2, 0.2, 0.3))
    assert relative_entropy(q, p) == pytest.approx(hand, abs=1e-15)


def test_relative_entropy_grid_mismatch():
    q = PairDensity(1.0, np.ones((4, 4)))
    with pytest.raises(GridMismatchError):
        relative_entropy(q, PairDensity(1.0, np.ones((2, 2))))
    with pytest.raises(GridMismatchError):
        relative_entropy(q, PairDensity(2.0, np.full((4, 4), 0.25)))


# --- marginals ----------------------------------------------------------------

def test_marginals_of_product():
    a, b = random_density(2, 16, 0.1), random_density(3, 16, 0.1)
    m0, m1 = marginals(PairDensity.product(a, b))
    np.testing.assert_allclose(m0.values, a.values, rtol=1e-13)
    np.testing.assert_allclose(m1.values, b.values, rtol=1e-13)


def test_marginals_of_uniform_square():
    m0, m1 = marginals(PairDensity(1.0, np.ones((8, 8))))
    np.testing.assert_allclose(m0.values, 1.0)
    np.testing.assert_allclose(m1.values, 1.0)


def test_reference_coupling_first_marginal_within_leakage():
    eps = 0.05
    rho0 = GridDensity.uniform(1.0, 512)
    q0 = reference_coupling(rho0, KernelParams(eps))
    m0, _ = marginals(q0)
    x = rho0.centers
    # Gaussian mass of row x that falls outside [0, 1]
    leak = 0.5 * (np.vectorize(math.erfc)(x / eps) + np.vectorize(math.erfc)((1 - x) / eps))
    defect = rho0.values - m0.values
    assert np.all(defect >= -1e-3)
    np.testing.assert_allclose(defect, rho0.values * leak, atol=2e-3)
    assert abs(m0.mass() - 1) <= np.sum(leak) * rho0.dx + 1e-3


# --- Levy distance --------------------------------------------------------------

def test_levy_zero_for_equal():
    r = random_density(4)
    assert levy_distance(r, r) == 0.0


def test_levy_symmetric():
    a, b = random_density(5), random_density(6)
    assert levy_distance(a, b) == levy_distance(b, a)
    assert levy_distance(a, b) > 0


@pytest.mark.parametrize("a", [0.1, 0.3, 0.6])
def test_levy_near_diracs(a):
    n = 1000
    dx = 1.0 / n
    v0 = np.zeros(n)
    v0[0] = 1 / dx
    va = np.zeros(n)
    va[int(round(a / dx))] = 1 / dx
    d = levy_distance(GridDensity(1.0, v0), GridDensity(1.0, va))
    assert abs(d - min(a, 1.0)) <= dx + 1e-6


@given(st.integers(0, 10_000))
def test_levy_triangle_inequality(seed):
    a, b, c = (random_density(seed + k, 16) for k in range(3))
    assert levy_distance(a, c) <= levy_distance(a, b) + levy_distance(b, c) + 3e-6


# --- A_delta ------------------------------------------------------------------

def test_in_a_delta_uniform():
    assert in_A_delta(GridDensity.uniform(3.0, 16), ADeltaSpec(0.01, 3.0))


def test_in_a_delta_rejects_spike():
    n, delta = 16, 0.1
    v = np.full(n, 1.0)
    v[3] = 1 + 2 * delta
    v[4] = 1 - 2 * delta
    assert not in_A_delta(GridDensity(1.0, v), ADeltaSpec(delta))


def test_in_a_delta_cosine():
    rho = GridDensity.from_function(lambda x: 1 + 0.2 * np.cos(2 * np.pi * x), 1.0, 1024)
    assert in_A_delta(rho, ADeltaSpec(0.25))
    assert not in_A_delta(rho, ADeltaSpec(0.15))


# --- properties ---------------------------------------------------------------

@given(st.integers(0, 10_000), st.sampled_from([0.25, 0.5, 0.75]))
def test_entropy_convex_under_mixing(seed, t):
    a, b = random_density(seed, 32), random_density(seed + 1, 32)
    mix = GridDensity(1.0, t * a.values + (1 - t) * b.values)
    assert entropy(mix) <= t * entropy(a) + (1 - t) * entropy(b) + 1e-13


@given(st.integers(0, 10_000))
def test_gibbs_inequality(seed):
    r = np.random.default_rng(seed)
    n = 6
    q = r.uniform(0.01, 1, (n, n))
    p = r.uniform(0.01, 1, (n, n))
    dx = 1.0 / n
    q = PairDensity(1.0, q / (q.sum() * dx * dx))
    p = PairDensity(1.0, p / (p.sum() * dx * dx))
    assert relative_entropy(q, p) >= 0
    assert relative_entropy(q, q) == pytest.approx(0.0, abs=1e-15)


@given(st.integers(0, 10_000), st.integers(2, 24))
def test_marginals_have_unit_mass(seed, n):
    r = np.random.default_rng(seed)
    v = r.exponential(1.0, (n, n))
    dx = 1.0 / n
    q = PairDensity(1.0, v / (v.sum() * dx * dx))
    for m in marginals(q):
        assert abs(m.mass() - 1.0) <= 1e-10


def test_smooth_a_delta_helper_is_in_a_delta(rng):
    for _ in range(10):
        assert in_A_delta(smooth_a_delta(rng, 128, 0.2), ADeltaSpec(0.2))


# --- CSV ------------------------------------------------------------------------

def test_grid_csv_round_trip(tmp_path):
    rho = GridDensity.from_function(lambda x: 1 + 0.3 * np.sin(5 * x), 2.0, 64, origin=-1.0)
    path = tmp_path / "rho.csv"
    write_grid_csv(path, rho, header_comment="test")
    text = path.read_text()
    assert text.startswith("# test\nx,value\n")
    back = read_grid_csv(path)
    np.testing.assert_array_equal(back.values, rho.values)
    assert back.L == pytest.approx(rho.L, rel=1e-14)
    assert back.origin == pytest.approx(rho.origin, abs=1e-14)


def test_pair_csv_round_trip(tmp_path):
    a = random_density(7, 8, 0.1)
    q = PairDensity.product(a, a)
    path = tmp_path / "q.csv"
    write_pair_csv(path, q)
    lines = path.read_text().splitlines()
    assert lines[0] == "x,y,value"
    assert len(lines) == 65
    np.testing.assert_array_equal(read_pair_csv(path).values, q.values)


def test_csv_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b\n0.25,1\n0.75,1\n")
    with pytest.raises(ValueError, match="header"):
        read_grid_csv(path)
