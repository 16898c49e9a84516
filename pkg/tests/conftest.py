from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def tiny_spec():
    return str(FIXTURES / "tiny_synth.yaml")


@pytest.fixture
def tiny_raw(tiny_spec):
    """Small, fast experiment config on the tiny synthetic corpus."""
    return {
        "encoder": {"family": "ort", "d_model": 8, "num_heads": 2, "num_layers": 1, "dropout": 0.0},
        "optim": {"epochs": 3, "batch_size": 8, "lr": 0.01},
        "data": {"synth": tiny_spec},
        "noisy_k": [1],
    }


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""
    def record(number, ok: bool, detail: str):
        label = f"criterion {number}" if isinstance(number, int) else number
        line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
