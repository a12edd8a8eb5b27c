from __future__ import annotations

import sys

import numpy as np
import pytest

from evoclust.geometry import Dataset, build_table


@pytest.fixture
def line4():
    """The four-point line {0, 1, 10, 11}."""
    return Dataset(np.array([0.0, 1.0, 10.0, 11.0]))


@pytest.fixture
def line4_table(line4):
    return build_table(line4)


@pytest.fixture
def line4_sq():
    return Dataset(np.array([0.0, 1.0, 10.0, 11.0]), distance_kind="squared_euclidean")


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for num in sorted(mod.RESULTS):
            terminalreporter.write_line(mod.RESULTS[num])
