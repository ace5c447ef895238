from __future__ import annotations

from fractions import Fraction
from pathlib import Path

import pytest

from deidner.synthetic import generate_corpus

DATA = Path(__file__).parent / "data"

_ACCEPTANCE: dict[str, str] = {}


def record_acceptance(key: str, ok: bool, detail: str) -> None:
    _ACCEPTANCE[key] = f"{key} {'PASS' if ok else 'FAIL'}  {detail}"
    print(_ACCEPTANCE[key])


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE, key=lambda k: int(k.split("-")[1])):
        terminalreporter.write_line(_ACCEPTANCE[key])


def frac(x) -> float:
    return float(Fraction(x))


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA


@pytest.fixture(scope="session")
def small_corpus():
    return generate_corpus(3, 30)
