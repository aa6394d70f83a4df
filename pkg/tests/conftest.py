import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

ROOT = Path(__file__).resolve().parent.parent
SCENARIOS = ROOT / "scenarios"


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def scenarios_dir():
    return SCENARIOS


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import CRITERIA
    except ImportError:
        return

    reports = {}
    for status in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(status, []):
            if rep.when == "call" or status == "error":
                reports.setdefault(rep.nodeid, status)
    lines = []
    for number, title in CRITERIA.items():
        ids = [n for n in reports if "test_acceptance.py::" in n and f"criterion_{number:02d}_" in n]
        if not ids:
            continue
        ok = all(reports[n] == "passed" for n in ids)
        lines.append(f"{'PASS' if ok else 'FAIL'}  criterion {number:2d}: {title}")
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
