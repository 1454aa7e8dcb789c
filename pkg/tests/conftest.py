from pathlib import Path

import pytest

from wavereconf.scenario_io import parse_scenario

SCENARIO_DIR = Path(__file__).resolve().parents[1] / "scenarios"


def load_scenario(name: str):
    return parse_scenario((SCENARIO_DIR / f"{name}.scn").read_text())


@pytest.fixture
def w1():
    return load_scenario("w1_direct_swap")


@pytest.fixture
def w2():
    return load_scenario("w2_transitive")


@pytest.fixture
def w3():
    return load_scenario("w3_backtracking")


@pytest.fixture
def w4():
    return load_scenario("w4_infeasible")


# One line per acceptance criterion, printed in the terminal summary so the
# verdicts are visible even with output capture on.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
