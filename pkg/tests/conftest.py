import numpy as np
import pytest

from edgempc.geometry import HighCostRegion, MapWorld, Obstacle, generate_map
from edgempc.planner import plan_reference
from edgempc.vehicle import generate_library

# a map seed known to admit a reference path, used wherever a real map is needed
PLANNABLE_SEED = 878


@pytest.fixture(scope="session")
def library():
    return generate_library()


@pytest.fixture(scope="session")
def seeded_world():
    return generate_map(PLANNABLE_SEED)


@pytest.fixture(scope="session")
def seeded_path(seeded_world):
    return plan_reference(seeded_world)


@pytest.fixture(scope="session")
def box_world():
    """One 0.2 x 0.2 box in the middle of the map."""
    return MapWorld(seed=0, obstacles=(Obstacle((0.5, 0.5), (0.1, 0.1)),),
                    start=(0.1, 0.1), goal=(0.9, 0.9))


@pytest.fixture(scope="session")
def empty_world():
    return MapWorld(seed=7, obstacles=(), start=(0.1, 0.5), goal=(0.9, 0.5))


@pytest.fixture(scope="session")
def hidden_region_world(seeded_world, seeded_path):
    """The seeded map with one icy and one mud region placed on the reference path."""
    pts = [seeded_path.point_at(f * seeded_path.length) for f in (0.3, 0.7)]
    regions = (
        HighCostRegion(tuple(map(float, pts[0])), (0.05, 0.05), "icy", 1.5, 4.0, hidden=True),
        HighCostRegion(tuple(map(float, pts[1])), (0.05, 0.05), "mud", 0.5, 6.0, hidden=True),
    )
    return seeded_world.with_regions(regions)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed after the run whatever the outcome
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
