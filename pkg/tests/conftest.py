import asyncio
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from scenarios import ScenarioRun, run_all  # noqa: E402


@pytest.fixture
def anyio_backend():
    return "asyncio"


@pytest.fixture(scope="session")
def corpus(tmp_path_factory) -> dict[str, ScenarioRun]:
    """Run the full scenario corpus once and share the artifacts."""
    base = tmp_path_factory.mktemp("corpus")
    return asyncio.run(run_all(base))
