import pytest

from magnon_duet.pipeline import simulate
from magnon_duet.scenario import Scenario, reference_path


@pytest.fixture(scope="session")
def crossing_scenario():
    return Scenario.load(reference_path("selftrap_crossing"))


@pytest.fixture(scope="session")
def crossing_traj(crossing_scenario):
    return simulate(crossing_scenario)


ACCEPTANCE_KEY = pytest.StashKey[dict]()


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line per acceptance criterion and assert it."""
    lines = request.config.stash.setdefault(ACCEPTANCE_KEY, {})

    def verdict(number, title, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'}  criterion {number}: {title} | {detail}"
        lines[number] = line
        print(line)
        assert ok, line

    return verdict


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE_KEY, None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for number in sorted(lines):
            terminalreporter.write_line(lines[number])
