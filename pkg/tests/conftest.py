from pathlib import Path

import pytest

from rospect.pipeline import PipelineOptions, run_analysis

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def fictibot_ws() -> Path:
    return FIXTURES / "fictibot_ws"


@pytest.fixture(scope="session")
def fictibot_project() -> Path:
    return FIXTURES / "fictibot.yaml"


@pytest.fixture(scope="session")
def fictibot_state(fictibot_project, fictibot_ws):
    """One full pipeline run over the Fictibot workspace, shared by read-only tests."""
    return run_analysis(
        PipelineOptions(
            project_file=fictibot_project,
            workspace=fictibot_ws,
            properties_file=FIXTURES / "fictibot.hpl",
            queries_file=FIXTURES / "queries.yaml",
        )
    )


@pytest.fixture(scope="session")
def fictibot_graph(fictibot_state):
    return fictibot_state.graphs["multiplex"]
