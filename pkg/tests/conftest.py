import pytest

from cosm.ecampus import build_fixture
from cosm.runtime import launch


@pytest.fixture
def fixture():
    return build_fixture()


@pytest.fixture
def rt(fixture):
    return launch(fixture.doc, fixture.factories, fixture.entities)
