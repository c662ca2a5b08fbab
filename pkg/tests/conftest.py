from __future__ import annotations

import numpy as np
import pytest

from hypertrack.system import builtin


@pytest.fixture(scope="session")
def burgers():
    return builtin("burgers")


@pytest.fixture(scope="session")
def cubic():
    return builtin("cubic")


@pytest.fixture(scope="session")
def p_system():
    return builtin("p_system")


@pytest.fixture(scope="session")
def shallow_water():
    return builtin("shallow_water")


def ball_states(system, count: int, seed: int, radius: float | None = None) -> list[np.ndarray]:
    """Uniform random states in the working ball (radius defaults to ``delta2``)."""
    r = system.delta2 if radius is None else radius
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        v = rng.uniform(-1.0, 1.0, system.n)
        if np.linalg.norm(v) <= 1.0:
            out.append(system.base_state + r * v)
    return out


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter) -> None:
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
