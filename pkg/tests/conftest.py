import pytest

from lattice_frames.catalog import get_example


@pytest.fixture(scope="session")
def toda():
    return get_example("toda")


@pytest.fixture(scope="session")
def ex81():
    return get_example("ex81")


@pytest.fixture(scope="session")
def nls():
    return get_example("nls")


@pytest.fixture(scope="session")
def toda_plan(toda):
    return toda.plan()


@pytest.fixture(scope="session")
def ex81_plan(ex81):
    return ex81.plan()


@pytest.fixture(scope="session")
def nls_plan(nls):
    return nls.plan()
