import numpy as np
import pytest

from nahmkn import kempfness, kernels, liecore


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Compile the hot kernels once so timed tests measure the algorithms."""
    t = liecore.su2_basis()
    x = np.ascontiguousarray(0.3 * t)
    kernels.expm(np.ascontiguousarray(t[0]))
    kernels.reduced_flow(x, 64, 1e6)
    kernels.full_flow(
        np.zeros((65, 2, 2), dtype=np.complex128),
        np.zeros((64, 2, 2), dtype=np.complex128), x, 1e6,
    )
    kernels.gauge_flow(
        np.zeros((65, 2, 2), dtype=np.complex128),
        np.zeros((64, 2, 2), dtype=np.complex128),
    )
    kernels.chart_flow(np.ascontiguousarray(t[0]), x, 64)
    kernels.chart_h_flow(x, np.zeros((1, 3, 2, 2), dtype=np.complex128), 64)
    kernels.chart_h_flow(x, np.zeros((0, 3, 2, 2), dtype=np.complex128), 64)
    kempfness.kn_minimize(kempfness.torus_problem([[1], [-1]], [0]), [1.0, 1.0])


@pytest.fixture
def rng():
    return np.random.default_rng(2024)
