import json
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

FIXTURES = Path(__file__).parent / "fixtures"
SAMPLE_LOG = Path(__file__).parents[1] / "src" / "honeyseq" / "data" / "sample_cowrie.json"

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def fixtures_dir():
    return FIXTURES


@pytest.fixture
def figure_lines():
    return (FIXTURES / "figure_events.jsonl").read_text(encoding="utf-8").splitlines()


@pytest.fixture
def hash_pins():
    return json.loads((FIXTURES / "hashes.json").read_text(encoding="utf-8"))


@pytest.fixture
def sample_store():
    from honeyseq.ingest import read_log
    from honeyseq.tahoe import ingest_events

    events, errors = read_log(SAMPLE_LOG)
    assert not errors
    return ingest_events(events)


# one pass/fail line per acceptance criterion, printed after the run
ACCEPTANCE: dict[int, str] = {}


def record(criterion: int, ok: bool, detail: str = "") -> None:
    ACCEPTANCE[criterion] = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}" + (f"  ({detail})" if detail else "")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
