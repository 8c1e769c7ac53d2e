import pytest

from convedit.harness import RunConfig, default_setup


@pytest.fixture(scope="session")
def setup():
    config = RunConfig()
    return default_setup(config)


@pytest.fixture(scope="session")
def ontology(setup):
    return setup[0]


@pytest.fixture(scope="session")
def dataset(setup):
    return setup[1]


@pytest.fixture()
def config():
    return RunConfig()
