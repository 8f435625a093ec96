import pytest

from aadd import Context


@pytest.fixture
def ctx() -> Context:
    return Context()
