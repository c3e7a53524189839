from __future__ import annotations

import math
import statistics

import pytest
from hypothesis import given
from hypothesis import strategies as st

from glidebench.domain import BenchmarkSpec
from glidebench.fabric import (
    EventKind,
    EventQueue,
    FabricProfile,
    RngStream,
    SimulationDrained,
    sample_queue_delay,
    sample_run_outcome,
    validate_fabric_profile,
)

SPEC = BenchmarkSpec(spec_id="s1", name="unit", image_ref="img://x", work_units=1000, timeout_s=100)


def make_profile(**overrides) -> FabricProfile:
    base = dict(entry_id="e1", true_perf=50.0)
    base.update(overrides)
    return FabricProfile(**base)


def test_profile_validation():
    assert validate_fabric_profile(make_profile()) == []
    assert validate_fabric_profile(make_profile(true_perf=0.0))
    assert validate_fabric_profile(make_profile(failure_prob=1.5))


def test_delay_sigma_zero_is_exactly_the_median():
    assert sample_queue_delay(make_profile(queue_delay_median_s=300.0), RngStream(1, "d")) == 300.0


def test_delay_zero_median_is_zero():
    profile = make_profile(queue_delay_median_s=0.0, queue_delay_sigma=1.5)
    assert sample_queue_delay(profile, RngStream(1, "d")) == 0.0


def test_delay_reproducible_for_same_seed_and_label():
    profile = make_profile(queue_delay_median_s=300.0, queue_delay_sigma=0.5)
    first = [sample_queue_delay(profile, RngStream(7, "delay/e1")) for _ in range(1)]
    second = [sample_queue_delay(profile, RngStream(7, "delay/e1")) for _ in range(1)]
    assert first == second
    stream_a = RngStream(7, "delay/e1")
    stream_b = RngStream(7, "delay/e1")
    assert [stream_a.normal() for _ in range(10)] == [stream_b.normal() for _ in range(10)]


def test_streams_with_different_labels_differ():
    a = RngStream(7, "delay/e1")
    b = RngStream(7, "delay/e2")
    assert [a.uniform() for _ in range(4)] != [b.uniform() for _ in range(4)]


def test_certain_failure():
    outcome = sample_run_outcome(make_profile(failure_prob=1.0), SPEC, RngStream(1, "p"))
    assert not outcome.success
    assert not outcome.timed_out


def test_noiseless_outcome_is_exact():
    outcome = sample_run_outcome(make_profile(), SPEC, RngStream(1, "p"))
    assert outcome.success
    assert outcome.measured_score == 50.0
    assert outcome.duration_s == 20.0


@pytest.mark.parametrize("true_perf", [50.0, 7.3, 3.0, 123.456])
def test_noiseless_score_equals_true_perf_exactly(true_perf):
    outcome = sample_run_outcome(make_profile(true_perf=true_perf), SPEC, RngStream(3, "p"))
    assert outcome.measured_score == true_perf


def test_slow_entry_times_out():
    profile = make_profile(true_perf=5.0)  # duration 200 > timeout 100
    outcome = sample_run_outcome(profile, SPEC, RngStream(1, "p"))
    assert not outcome.success
    assert outcome.timed_out
    assert outcome.duration_s == 200.0


def test_score_multiplier_mean_is_one():
    # Monte-Carlo oracle: the -sigma^2/2 shift makes the multiplier mean 1,
    # so the sample mean must sit within 3 standard errors of true_perf
    # (and comfortably within 1%).
    profile = make_profile(perf_noise_cv=0.1)
    stream = RngStream(123, "perf/e1")
    draws = [
        sample_run_outcome(profile, SPEC, stream).measured_score for _ in range(10000)
    ]
    mean = statistics.fmean(draws)
    se = statistics.stdev(draws) / math.sqrt(len(draws))
    assert abs(mean - profile.true_perf) < 3 * se
    assert abs(mean - profile.true_perf) / profile.true_perf < 0.01


def test_queue_orders_by_time_then_seq():
    queue = EventQueue()
    queue.push(5.0, EventKind.PILOT_START, {"n": 1})
    queue.push(5.0, EventKind.PILOT_START, {"n": 2})
    queue.push(3.0, EventKind.PILOT_START, {"n": 3})
    assert queue.advance().payload["n"] == 3
    assert queue.advance().payload["n"] == 1
    assert queue.advance().payload["n"] == 2


def test_insert_during_processing_goes_after_same_time_events():
    queue = EventQueue()
    queue.push(3.0, EventKind.PILOT_START, {"n": 1})
    queue.push(3.0, EventKind.PILOT_START, {"n": 2})
    first = queue.advance()
    assert first.payload["n"] == 1
    queue.push(3.0, EventKind.PILOT_START, {"n": 3})
    assert queue.advance().payload["n"] == 2
    assert queue.advance().payload["n"] == 3


def test_drained_queue_signals_end_of_run():
    queue = EventQueue()
    with pytest.raises(SimulationDrained):
        queue.advance()


@given(st.lists(st.floats(min_value=0, max_value=1000), max_size=50))
def test_dequeue_times_never_decrease(times):
    queue = EventQueue()
    for t in times:
        queue.push(t, EventKind.FACTORY_CYCLE)
    popped = []
    while len(queue):
        popped.append((queue.advance().time))
    assert popped == sorted(popped)
