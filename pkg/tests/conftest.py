import os

import pytest

import mmlake
from mmlake.dsl import parse_program
from mmlake.lake import load_manifest

NBA_DIR = os.path.join(os.path.dirname(mmlake.__file__), "data", "nba")


def nba_path(name: str) -> str:
    return os.path.join(NBA_DIR, name)


def read_program(name: str) -> str:
    with open(nba_path(name), encoding="utf-8") as fh:
        return fh.read()


@pytest.fixture(scope="session")
def nba_dir():
    return NBA_DIR


@pytest.fixture(scope="session")
def manifest_path():
    return nba_path("manifest.json")


@pytest.fixture
def nba_lake(manifest_path):
    return load_manifest(manifest_path)


@pytest.fixture(scope="session")
def shared_lake(manifest_path):
    """Read-only lake shared across tests that never mutate configuration."""
    return load_manifest(manifest_path)


@pytest.fixture
def fig4_ir():
    return parse_program(read_program("fig4.mmq"))


@pytest.fixture
def fig5_ir():
    return parse_program(read_program("fig5.mmq"))


@pytest.fixture
def ex33_ir():
    return parse_program(read_program("ex33.mmq"))


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
