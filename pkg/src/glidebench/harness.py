"""Benchmark payload executors.

One interface, two backends: a simulated executor that asks the fabric for
an outcome, and a local executor that really burns CPU on the developer's
machine. The local kernel is a development aid for sanity-checking scoring,
not an acceptance target.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional, Protocol

from .domain import BenchmarkSpec
from .fabric import FabricProfile, RngStream, sample_run_outcome

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_TIMEOUT = 124


@dataclass(frozen=True)
class RawMeasurement:
    """What an executor hands back: wall time, progress, exit code.

    rate_hint carries the exact sampled work rate on the simulated path;
    recomputing it from elapsed_s would lose up to one ulp per division
    and break noiseless-score exactness.
    """

    elapsed_s: float
    completed_units: int
    exit_code: int
    rate_hint: Optional[float] = None


class Executor(Protocol):
    def run(self, spec: BenchmarkSpec) -> RawMeasurement: ...


class SimulatedExecutor:
    """Delegates the run to the fabric's hidden ground truth."""

    def __init__(self, profile: FabricProfile, rng: RngStream):
        self.profile = profile
        self.rng = rng

    def run(self, spec: BenchmarkSpec) -> RawMeasurement:
        outcome = sample_run_outcome(self.profile, spec, self.rng)
        if outcome.success:
            return RawMeasurement(
                elapsed_s=outcome.duration_s,
                completed_units=spec.work_units,
                exit_code=EXIT_OK,
                rate_hint=outcome.measured_score,
            )
        if outcome.timed_out:
            completed = min(
                spec.work_units - 1,
                int(outcome.measured_score * spec.timeout_s),
            )
            return RawMeasurement(
                elapsed_s=float(spec.timeout_s),
                completed_units=max(completed, 0),
                exit_code=EXIT_TIMEOUT,
            )
        return RawMeasurement(elapsed_s=0.0, completed_units=0, exit_code=EXIT_FAILED)


class LocalExecutor:
    """Runs the fixed CPU kernel for real and measures wall time.

    Kernel: per work unit, `ops_per_unit` iterations of the integer mix
    x = (x * 6364136223846793005 + 1442695040888963407) mod 2^64 followed
    by a xor-shift, i.e. a 64-bit LCG step plus x ^= x >> 33. Deterministic
    and unoptimizable-away, so scores are comparable across runs on one
    machine.
    """

    def __init__(self, ops_per_unit: int = 1000):
        self.ops_per_unit = ops_per_unit

    def run(self, spec: BenchmarkSpec) -> RawMeasurement:
        mask = (1 << 64) - 1
        x = 0x9E3779B97F4A7C15
        started = time.perf_counter()
        deadline = started + spec.timeout_s
        completed = 0
        for unit in range(spec.work_units):
            for _ in range(self.ops_per_unit):
                x = (x * 6364136223846793005 + 1442695040888963407) & mask
                x ^= x >> 33
            completed = unit + 1
            if time.perf_counter() > deadline:
                return RawMeasurement(
                    elapsed_s=time.perf_counter() - started,
                    completed_units=completed,
                    exit_code=EXIT_TIMEOUT,
                )
        elapsed = time.perf_counter() - started
        return RawMeasurement(elapsed_s=elapsed, completed_units=completed, exit_code=EXIT_OK)


def execute(spec: BenchmarkSpec, executor: Executor) -> RawMeasurement:
    """Run one benchmark spec on the given backend."""
    return executor.run(spec)


def compute_score(measurement: RawMeasurement, spec: BenchmarkSpec) -> float:
    """Work units per second for a successful measurement.

    Prefers the executor's exact rate hint when present; otherwise divides
    work_units by elapsed wall time.
    """
    if measurement.exit_code != EXIT_OK:
        raise ValueError(f"no score for exit_code {measurement.exit_code}")
    if measurement.elapsed_s <= 0:
        raise ValueError("no score for non-positive elapsed time")
    if measurement.rate_hint is not None:
        return measurement.rate_hint
    return spec.work_units / measurement.elapsed_s
