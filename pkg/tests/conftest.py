import numpy as np
import pytest

from fracns import spectral as sp


def random_real_field(grid, seed=0, *, project=False, mean_zero=True):
    """Band-limited real vector field built from physical noise."""
    rng = np.random.default_rng(seed)
    vals = rng.standard_normal((grid.dimension,) + grid.shape)
    u = sp.SpectralVectorField.from_physical(grid, vals)
    coeffs = sp.dealias(grid, u.coeffs)
    if mean_zero:
        coeffs[(slice(None),) + (0,) * grid.dimension] = 0.0
    if project:
        coeffs = sp.project_coeffs(grid, coeffs)
    return sp.SpectralVectorField(grid, coeffs, mean_zero, project)


@pytest.fixture
def grid2():
    return sp.make_grid(2, 32)


ACCEPTANCE_LINES: list[str] = []


def record_verdict(label, passed, detail):
    """Store and print one acceptance line; return the verdict."""
    line = f"{'PASS' if passed else 'FAIL'} {label}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
