import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ldpjko.grid import GridDensity

settings.register_profile("ldpjko", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ldpjko")


def smooth_a_delta(rng, n_cells, delta=0.2, L=1.0, n_terms=3):
    """Random trigonometric density on [0, L] whose sup deviation from 1/L is below ``delta``."""
    k = rng.integers(1, 4, size=n_terms)
    a = rng.uniform(-1, 1, n_terms)
    ph = rng.uniform(0, 2 * np.pi, n_terms)

    def g(x):
        return sum(a[i] * np.cos(2 * np.pi * k[i] * x / L + ph[i]) for i in range(n_terms))

    x = (np.arange(n_cells) + 0.5) * L / n_cells
    amp = rng.uniform(0.25, 0.85) * delta * L / np.abs(g(x)).max()
    return GridDensity.from_function(lambda t: 1 / L + amp * g(t) / L, L, n_cells)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_ACCEPTANCE_LINES = []


def record_acceptance(line: str) -> None:
    _ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_four_point(rng, grain=100, spacing=0.01):
    """Random 4-point measures with positions on a 1e-3 lattice and weights in multiples of 1/grain."""
    while True:
        pa = np.round(rng.uniform(0.05, 0.95, 4), 3)
        pb = np.round(rng.uniform(0.05, 0.95, 4), 3)
        if min(np.diff(np.sort(pa))) > spacing and min(np.diff(np.sort(pb))) > spacing:
            break
    wa = (rng.multinomial(grain - 4, np.full(4, 0.25)) + 1) / grain
    wb = (rng.multinomial(grain - 4, np.full(4, 0.25)) + 1) / grain
    return pa, wa, pb, wb


def bump_density(points, weights, width, n_cells=10_000):
    """Uniform bumps of the given width on [0, 1], aligned with the cell edges."""
    dx = 1.0 / n_cells
    k = int(round(width / dx))
    v = np.zeros(n_cells)
    for c, w in zip(points, weights):
        i0 = int(round(c / dx)) - k // 2
        v[i0:i0 + k] += w / width
    return GridDensity(1.0, v / (v.sum() * dx))


def extrapolated_bump_w2sq(pa, wa, pb, wb, widths=(0.004, 0.002, 0.001), n_cells=10_000):
    """W2^2 of the bump embeddings, extrapolated to zero width.

    For cell-aligned bumps and cumulative weights on the quadrature lattice
    the embedded value is exactly quadratic in the width, so a three-point
    fit recovers the discrete value to rounding.
    """
    from ldpjko.wasserstein import w2_distance

    d = [w2_distance(bump_density(pa, wa, w, n_cells), bump_density(pb, wb, w, n_cells), m=4 * n_cells) ** 2
         for w in widths]
    return float(np.linalg.solve(np.vander(widths, 3, increasing=True), d)[0])
