from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from glidebench.domain import (
    ALLOWED_TRANSITIONS,
    BenchmarkResult,
    EntryConfig,
    NodeInfo,
    PilotRecord,
    PilotState,
    Purpose,
    TransitionError,
    hardware_fingerprint,
    transition,
    validate_benchmark_result,
    validate_entry_config,
)


def make_entry(**overrides) -> EntryConfig:
    base = dict(entry_id="e1", price_per_hour=1.0, max_pilots=10)
    base.update(overrides)
    return EntryConfig(**base)


def test_valid_entry_has_no_violations():
    assert validate_entry_config(make_entry()) == []


def test_empty_entry_id_reported():
    assert validate_entry_config(make_entry(entry_id="")) == ["entry_id empty"]


def test_negative_price_reported():
    assert validate_entry_config(make_entry(price_per_hour=-0.5)) == [
        "price_per_hour negative"
    ]


def test_bad_entry_id_pattern_reported():
    violations = validate_entry_config(make_entry(entry_id="Upper Case"))
    assert len(violations) == 1
    assert "entry_id invalid" in violations[0]


def test_negative_max_pilots_reported():
    assert validate_entry_config(make_entry(max_pilots=-1)) == ["max_pilots negative"]


def test_multiple_violations_all_reported():
    violations = validate_entry_config(
        make_entry(entry_id="", price_per_hour=-1.0, max_pilots=-2)
    )
    assert violations == ["entry_id empty", "price_per_hour negative", "max_pilots negative"]


@pytest.mark.parametrize(
    "raw,expected",
    [
        (" Intel(R)  Xeon(R) Gold 6148 ", "intel(r) xeon(r) gold 6148"),
        ("AMD EPYC 7763", "amd epyc 7763"),
        ("", ""),
        ("one\ttwo\n three", "one two three"),
    ],
)
def test_hardware_fingerprint(raw, expected):
    assert hardware_fingerprint(raw) == expected


@given(st.text())
def test_hardware_fingerprint_idempotent(raw):
    once = hardware_fingerprint(raw)
    assert hardware_fingerprint(once) == once


def make_pilot(state=PilotState.SUBMITTED, **overrides) -> PilotRecord:
    base = dict(pilot_id="p-00000001", entry_id="e1", purpose=Purpose.USER, state=state)
    base.update(overrides)
    return PilotRecord(**base)


def test_lifecycle_happy_path_stamps_timestamps():
    record = make_pilot(submitted_at=0.0)
    record = transition(record, PilotState.QUEUED, 0.0)
    record = transition(record, PilotState.RUNNING, 5.0)
    record = transition(record, PilotState.COMPLETED, 9.0)
    assert record.submitted_at == 0.0
    assert record.started_at == 5.0
    assert record.finished_at == 9.0


def test_queued_to_failed_keeps_started_at_empty():
    record = make_pilot(submitted_at=0.0)
    record = transition(record, PilotState.QUEUED, 0.0)
    record = transition(record, PilotState.FAILED, 3.0)
    assert record.started_at is None
    assert record.finished_at == 3.0


@pytest.mark.parametrize("start", list(PilotState))
@pytest.mark.parametrize("end", list(PilotState))
def test_only_listed_edges_allowed(start, end):
    record = make_pilot(
        state=start,
        submitted_at=0.0,
        started_at=1.0 if start is PilotState.RUNNING else None,
    )
    if (start, end) in ALLOWED_TRANSITIONS:
        assert transition(record, end, 10.0).state is end
    else:
        with pytest.raises(TransitionError):
            transition(record, end, 10.0)


def test_timestamps_may_not_run_backwards():
    record = make_pilot(submitted_at=10.0)
    record = transition(record, PilotState.QUEUED, 10.0)
    with pytest.raises(TransitionError):
        transition(record, PilotState.RUNNING, 5.0)


def make_result(**overrides) -> BenchmarkResult:
    base = dict(
        pilot_id="p-00000001",
        entry_id="e1",
        spec_id="s1",
        score=50.0,
        duration_s=20.0,
        started_at=0.0,
        node=NodeInfo(cores=8, memory_mb=16384, disk_mb=0, gpus=0, cpu_model="x"),
        exit_code=0,
    )
    base.update(overrides)
    return BenchmarkResult(**base)


def test_valid_result_passes():
    assert validate_benchmark_result(make_result()) == []


def test_zero_score_with_success_exit_invalid():
    assert validate_benchmark_result(make_result(score=0.0))


def test_positive_score_with_failure_exit_invalid():
    assert validate_benchmark_result(make_result(exit_code=1))


def test_failure_result_with_zero_score_valid():
    assert validate_benchmark_result(make_result(score=0.0, exit_code=1)) == []
