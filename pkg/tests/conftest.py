from datetime import datetime

import pytest

from pv_resiliency.milp import SolverLimits
from pv_resiliency.plant import PlantState, SystemConfig, TraceDriven, discretize_fridge
from pv_resiliency.scenario import ScenarioConfig

DT = 1.0 / 6.0
START = datetime(2017, 9, 10)


@pytest.fixture(scope="session")
def system():
    """Size A with the default component parameters."""
    return SystemConfig()


@pytest.fixture(scope="session")
def disc(system):
    return discretize_fridge(system, DT)


@pytest.fixture
def house():
    return TraceDriven()


@pytest.fixture
def full_state(system, house):
    return PlantState.initial(system, house, 27.0)


@pytest.fixture(scope="session")
def short_scenario():
    """Half a day from the start of the bundled storm week, quick enough for every controller."""
    return ScenarioConfig(start=START, duration_days=0.5, solver=SolverLimits(node_limit=20000, time_limit=5.0))


@pytest.fixture(scope="session")
def app():
    """
    Provides a test instance of the Flask application.
    """
    from pv_resiliency.mcp_server import app as flask_app

    flask_app.config.update({"TESTING": True})
    return flask_app


@pytest.fixture(scope="module")
def client(app):
    """A test client for the app."""
    return app.test_client()
