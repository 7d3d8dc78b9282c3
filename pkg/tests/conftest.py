import pytest

from gdcover import schema
from gdcover.spectral import solve_s0

BUNDLED_NAMES = (
    "cantor",
    "cantor_point",
    "cantor_segment",
    "dust2d_edge",
    "rotated2d",
    "sierpinski",
    "two_ratio",
    "two_vertex",
)


@pytest.fixture(scope="session")
def bundled():
    """All bundled systems, parsed once."""
    return {name: schema.load_bundled(name) for name in BUNDLED_NAMES}


@pytest.fixture(scope="session")
def cantor(bundled):
    return bundled["cantor"]


@pytest.fixture(scope="session")
def two_vertex(bundled):
    return bundled["two_vertex"]


@pytest.fixture(scope="session")
def two_ratio(bundled):
    return bundled["two_ratio"]


@pytest.fixture(scope="session")
def cantor_point(bundled):
    return bundled["cantor_point"]


@pytest.fixture(scope="session")
def cantor_segment(bundled):
    return bundled["cantor_segment"]


@pytest.fixture(scope="session")
def spectral_cache(bundled):
    """Perron data per bundled system, solved once."""
    return {name: solve_s0(graph) for name, graph in bundled.items()}
