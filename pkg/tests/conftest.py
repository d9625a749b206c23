import pytest

from azema import _backend


@pytest.fixture(params=["numba", "numpy"])
def backend(request):
    """Run a test under each kernel backend, restoring the default afterwards."""
    previous = _backend.backend()
    _backend.set_backend(request.param)
    yield request.param
    _backend.set_backend(previous)


@pytest.fixture
def numpy_backend():
    previous = _backend.backend()
    _backend.set_backend("numpy")
    yield
    _backend.set_backend(previous)
