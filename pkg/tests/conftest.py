import pytest

from nmrqsim.spinsys import bundled_system_path, load_spin_system_file


@pytest.fixture(scope="session")
def sys7():
    """Packaged seven-spin register."""
    return load_spin_system_file(bundled_system_path())


@pytest.fixture(scope="session")
def pair(sys7):
    """Two-spin carbon subsystem used by gate and spectrum tests."""
    return sys7.subsystem(["C1", "C2"])
