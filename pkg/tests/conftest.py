import pytest

from blowup.acceptance import Context


@pytest.fixture(scope="session")
def ctx():
    """Shared stage objects (interior states, hierarchy, scattering table, ...)."""
    return Context()
