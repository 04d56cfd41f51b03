import pytest

from vortexarea.optimize import OptimizeOptions, optimize_profile


@pytest.fixture(scope="session")
def optimum_04():
    """Optimal profile and minimal graph at l = 0.4 on the default 65-node grid."""
    return optimize_profile(0.4, 17, OptimizeOptions(grid=65))
