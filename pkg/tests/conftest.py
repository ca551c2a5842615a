import sys
from pathlib import Path

import pytest

from pctcheck.cfg import parse_program
from pctcheck.corpus import get_example

DATA = Path(__file__).resolve().parents[1] / "src" / "pctcheck" / "data"


@pytest.fixture
def data_dir() -> Path:
    return DATA


def program(name: str):
    return get_example(name).program


def cert(name: str, filename: str):
    return get_example(name).certificate(filename)


def prog(text: str):
    return parse_program(text)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n])
