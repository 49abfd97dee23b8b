"""Shared fixtures: the published six-region population and a tiny 2x4 frame."""

import os
import sys

import pandas as pd
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from stratexp.stats import PopulationFrame, load_aggregated  # noqa: E402

REPO_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
TABLE_FILE = os.path.join(REPO_ROOT, "data", "table_6_1.yml")

TINY_UNITS = [
    ("1", 10.0, 4.0), ("1", 12.0, 5.0), ("1", 15.0, 7.0), ("1", 19.0, 8.0),
    ("2", 20.0, 9.0), ("2", 26.0, 11.0), ("2", 30.0, 14.0), ("2", 35.0, 15.0),
]


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: Monte Carlo acceptance checks (deselect with -m 'not slow')")


@pytest.fixture
def table_file():
    return TABLE_FILE


@pytest.fixture
def table_population():
    return load_aggregated(TABLE_FILE).population()


@pytest.fixture
def tiny_frame():
    units = pd.DataFrame(TINY_UNITS, columns=["stratum", "y", "x"])
    return PopulationFrame(units)


@pytest.fixture
def tiny_design():
    return {"1": 2, "2": 2}


def write_units(path, units=TINY_UNITS):
    lines = ["stratum,y,x"] + [f"{s},{y!r},{x!r}" for s, y, x in units]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
