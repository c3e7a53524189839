from __future__ import annotations

import hashlib
import re

import pytest

from glidebench.collector import parse_stream
from glidebench.domain import BenchmarkResult, BenchmarkSpec, NodeInfo, PilotState, Purpose
from glidebench.fabric import FabricProfile, RngStream
from glidebench.pilot import PilotContext, detect_resources, emit_result_block, run

SPEC = BenchmarkSpec(spec_id="s1", name="unit", image_ref="img://x", work_units=1000, timeout_s=100)
NODE = NodeInfo(cores=8, memory_mb=16384, disk_mb=2048, gpus=2, cpu_model="AMD EPYC 7763")
SENTINEL_RE = re.compile(r"^=GLIDEBENCH:(BEGIN v1|END [0-9a-f]{64})=$")


def make_ctx(**overrides) -> PilotContext:
    base = dict(
        pilot_id="p-00000001",
        entry_id="e1",
        purpose=Purpose.BENCHMARK,
        spec=SPEC,
        node=NODE,
        container_available=True,
    )
    base.update(overrides)
    return PilotContext(**base)


def make_result(**overrides) -> BenchmarkResult:
    base = dict(
        pilot_id="p-00000001",
        entry_id="e1",
        spec_id="s1",
        score=50.0,
        duration_s=20.0,
        started_at=120.0,
        node=NODE,
        exit_code=0,
    )
    base.update(overrides)
    return BenchmarkResult(**base)


def test_detect_resources_passthrough():
    descriptor = {"cores": 8, "memory_mb": 16384, "gpus": 2, "cpu_model": "AMD EPYC 7763"}
    node = detect_resources(descriptor)
    assert node == NodeInfo(cores=8, memory_mb=16384, disk_mb=0, gpus=2, cpu_model="AMD EPYC 7763")


def test_detect_resources_defaults_missing_fields():
    assert detect_resources({"cores": 4}).gpus == 0
    assert detect_resources(None) == NodeInfo(cores=1, memory_mb=1, disk_mb=0, gpus=0, cpu_model="unknown")


def test_result_block_sentinels_match_grammar():
    lines = emit_result_block(make_result())
    assert len(lines) == 3
    assert SENTINEL_RE.match(lines[0])
    assert SENTINEL_RE.match(lines[2])
    assert "\n" not in lines[1]


def test_result_block_checksum_matches_independent_sha256():
    lines = emit_result_block(make_result())
    digest = hashlib.sha256(lines[1].encode("utf-8")).hexdigest()
    assert lines[2] == f"=GLIDEBENCH:END {digest}="


def test_result_block_round_trips_through_parser():
    result = make_result(score=49.73210123, duration_s=20.107754321)
    parsed, diagnostics = parse_stream(emit_result_block(result))
    assert diagnostics == []
    assert parsed == [result]


def test_payload_key_order_is_fixed():
    payload = emit_result_block(make_result())[1]
    keys = re.findall(r'"(\w+)":', payload)
    assert keys[:8] == [
        "schema_version",
        "pilot_id",
        "entry_id",
        "spec_id",
        "score",
        "duration_s",
        "started_at",
        "node",
    ]
    assert keys[-1] == "exit_code"


def test_container_unavailable_fails_validation():
    outcome = run(
        make_ctx(container_available=False),
        FabricProfile("e1", true_perf=50.0),
        RngStream(1, "p"),
        started_at=0.0,
    )
    assert outcome.state is PilotState.FAILED
    assert outcome.stderr_lines[-1] == "GLIDEBENCH:ERROR container_unavailable"
    assert outcome.result is None


def test_noiseless_benchmark_completes_with_result_block():
    outcome = run(
        make_ctx(), FabricProfile("e1", true_perf=50.0), RngStream(1, "p"), started_at=7.0
    )
    assert outcome.state is PilotState.COMPLETED
    assert outcome.payload_elapsed_s == 20.0
    assert outcome.result is not None
    assert outcome.result.score == 50.0
    assert outcome.result.duration_s == 20.0
    assert outcome.result.started_at == 7.0
    parsed, _ = parse_stream(outcome.stderr_lines)
    assert parsed == [outcome.result]


def test_slow_entry_times_out_with_diagnostic():
    outcome = run(
        make_ctx(), FabricProfile("e1", true_perf=5.0), RngStream(1, "p"), started_at=0.0
    )
    assert outcome.state is PilotState.TIMED_OUT
    assert outcome.payload_elapsed_s == 100.0
    assert outcome.stderr_lines[-1] == "GLIDEBENCH:ERROR timeout"


def test_payload_failure_reports_diagnostic():
    outcome = run(
        make_ctx(),
        FabricProfile("e1", true_perf=50.0, failure_prob=1.0),
        RngStream(1, "p"),
        started_at=0.0,
    )
    assert outcome.state is PilotState.FAILED
    assert outcome.stderr_lines[-1].startswith("GLIDEBENCH:ERROR payload_failed")


def test_user_pilot_runs_noop_payload():
    outcome = run(
        make_ctx(purpose=Purpose.USER, spec=None),
        FabricProfile("e1", true_perf=50.0),
        RngStream(1, "p"),
        started_at=0.0,
        user_payload_s=3600.0,
    )
    assert outcome.state is PilotState.COMPLETED
    assert outcome.payload_elapsed_s == 3600.0
    assert outcome.result is None


@pytest.mark.parametrize(
    "profile",
    [
        FabricProfile("e1", true_perf=50.0),
        FabricProfile("e1", true_perf=5.0),
        FabricProfile("e1", true_perf=50.0, failure_prob=1.0),
    ],
)
def test_benchmark_stderr_ends_with_block_xor_error(profile):
    outcome = run(make_ctx(), profile, RngStream(1, "p"), started_at=0.0)
    ends_with_block = bool(SENTINEL_RE.match(outcome.stderr_lines[-1]))
    ends_with_error = outcome.stderr_lines[-1].startswith("GLIDEBENCH:ERROR ")
    assert ends_with_block != ends_with_error
    block_count = sum(1 for line in outcome.stderr_lines if line == "=GLIDEBENCH:BEGIN v1=")
    error_count = sum(
        1 for line in outcome.stderr_lines if line.startswith("GLIDEBENCH:ERROR ")
    )
    assert block_count + error_count == 1
