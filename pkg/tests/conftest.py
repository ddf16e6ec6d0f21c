import pytest

from fluxlat.circuit import ElementParams, build_element


@pytest.fixture(scope="session")
def fluxonium_a():
    return build_element(ElementParams("fluxonium", 1.0, 4.0, 0.9, keep_levels=5))


@pytest.fixture(scope="session")
def transmon_c():
    return build_element(ElementParams("transmon", 0.3, 8.5, keep_levels=3))


def pytest_terminal_summary(terminalreporter):
    from _acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
