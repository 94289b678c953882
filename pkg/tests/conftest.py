import json

import pytest

from layoutforge.config import load_config, parse_config, shipped_config_dir

CONFIG_DIR = shipped_config_dir()
SMALL_NM = 10_000


def pytest_addoption(parser):
    parser.addoption("--full", action="store_true", default=False,
                     help="also run the 100x100 um cell checks")


@pytest.fixture
def full(request):
    return request.config.getoption("--full")


def shipped(name):
    return load_config(CONFIG_DIR / f"{name}.json")


def small(name, size=SMALL_NM):
    return shipped(name).with_size(size, size)


def config_from(doc):
    return parse_config(json.loads(json.dumps(doc)))


@pytest.fixture
def write_config(tmp_path):
    def _write(doc, name="cfg.json"):
        p = tmp_path / name
        p.write_text(json.dumps(doc))
        return p
    return _write


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
