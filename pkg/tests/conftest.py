import numpy as np
import pytest

from qmllab import sim

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def digits_csv(tmp_path_factory):
    """The UCI 8x8 digits (1797 rows) written in the 65-column CSV layout."""
    datasets = pytest.importorskip("sklearn.datasets")
    bunch = datasets.load_digits()
    rows = np.column_stack([bunch.data.astype(int), bunch.target.astype(int)])
    path = tmp_path_factory.mktemp("data") / "digits.csv"
    np.savetxt(path, rows, fmt="%d", delimiter=",")
    return path


def _backends():
    names = ["numpy"]
    try:
        import numba  # noqa: F401

        names.append("numba")
    except ImportError:
        pass
    return names


@pytest.fixture(params=_backends())
def backend(request):
    old = sim.get_backend()
    sim.set_backend(request.param)
    yield request.param
    sim.set_backend(old)


@pytest.fixture
def acceptance():
    """Collects one PASS/FAIL line per acceptance criterion for the run summary."""
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
