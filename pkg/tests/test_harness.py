from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from glidebench.domain import BenchmarkSpec
from glidebench.fabric import FabricProfile, RngStream
from glidebench.harness import (
    EXIT_FAILED,
    EXIT_OK,
    EXIT_TIMEOUT,
    LocalExecutor,
    RawMeasurement,
    SimulatedExecutor,
    compute_score,
    execute,
)

SPEC = BenchmarkSpec(spec_id="s1", name="unit", image_ref="img://x", work_units=1000, timeout_s=100)


def test_simulated_noiseless_measurement():
    executor = SimulatedExecutor(FabricProfile("e1", true_perf=50.0), RngStream(1, "p"))
    m = execute(SPEC, executor)
    assert (m.elapsed_s, m.completed_units, m.exit_code) == (20.0, 1000, EXIT_OK)


def test_simulated_certain_failure():
    executor = SimulatedExecutor(
        FabricProfile("e1", true_perf=50.0, failure_prob=1.0), RngStream(1, "p")
    )
    m = execute(SPEC, executor)
    assert m.exit_code == EXIT_FAILED
    assert m.completed_units < 1000


def test_simulated_timeout_reports_partial_progress():
    executor = SimulatedExecutor(FabricProfile("e1", true_perf=5.0), RngStream(1, "p"))
    m = execute(SPEC, executor)
    assert m.exit_code == EXIT_TIMEOUT
    assert m.elapsed_s == 100.0
    assert 0 <= m.completed_units < 1000


@pytest.mark.parametrize("true_perf", [50.0, 7.3, 3.0, 0.123456789])
def test_simulated_noiseless_score_is_exact(true_perf):
    executor = SimulatedExecutor(
        FabricProfile("e1", true_perf=true_perf), RngStream(5, "p")
    )
    spec = BenchmarkSpec("s1", "unit", "img://x", work_units=1000, timeout_s=10**9)
    assert compute_score(execute(spec, executor), spec) == true_perf


def test_compute_score_examples():
    assert compute_score(RawMeasurement(20.0, 1000, EXIT_OK), SPEC) == 50.0
    assert compute_score(RawMeasurement(1000.0, 1000, EXIT_OK), SPEC) == 1.0


def test_compute_score_refuses_failures():
    with pytest.raises(ValueError):
        compute_score(RawMeasurement(20.0, 500, 1), SPEC)
    with pytest.raises(ValueError):
        compute_score(RawMeasurement(0.0, 1000, EXIT_OK), SPEC)


@given(st.floats(min_value=0.1, max_value=1e6), st.floats(min_value=1e-9, max_value=1e6))
def test_score_strictly_decreasing_in_elapsed(elapsed, bump):
    slow = compute_score(RawMeasurement(elapsed + bump, 1000, EXIT_OK), SPEC)
    fast = compute_score(RawMeasurement(elapsed, 1000, EXIT_OK), SPEC)
    assert fast > slow


def test_local_kernel_repeatable():
    spec = BenchmarkSpec("s1", "unit", "", work_units=1000, timeout_s=60)
    executor = LocalExecutor(ops_per_unit=2000)
    execute(spec, executor)  # warm-up: cache and frequency settle
    first = compute_score(execute(spec, executor), spec)
    second = compute_score(execute(spec, executor), spec)
    assert abs(first - second) / max(first, second) < 0.2


def test_local_kernel_times_out():
    spec = BenchmarkSpec("s1", "unit", "", work_units=10**7, timeout_s=1)
    m = execute(spec, LocalExecutor(ops_per_unit=2000))
    assert m.exit_code == EXIT_TIMEOUT
    assert m.completed_units < spec.work_units
