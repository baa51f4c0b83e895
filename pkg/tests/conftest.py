import pytest

from specenc.core import PotentialSpec


@pytest.fixture
def well_1d():
    return PotentialSpec.square_well(1, -2.0, 0.5)


@pytest.fixture
def gauss_3d():
    return PotentialSpec.gaussian(3, 1.0, 0.5)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = next((m for name, m in sys.modules.items() if name.endswith("test_acceptance")), None)
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    order = sorted(results, key=lambda k: (int(k.rstrip("ab")), k))
    for key in order:
        terminalreporter.write_line(results[key])
