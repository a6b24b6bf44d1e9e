import numpy as np
import pytest

from mostackelberg.experiments import fixed_game
from mostackelberg.game import Game, UtilityModel


@pytest.fixture
def high_risk():
    return fixed_game("high-risk")


@pytest.fixture
def play_safe():
    return fixed_game("play-safe")


def make_game(xl, xf, wl, wf, constraint="c1", kind="linear", name="t"):
    return Game(np.asarray(xl, float), np.asarray(xf, float), wl, UtilityModel(kind, wf), constraint, name=name)


ACCEPTANCE_LINES = []


def report(number, title, ok, detail=""):
    line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}" + (f"  [{detail}]" if detail else "")
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
