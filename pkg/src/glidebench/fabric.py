"""Deterministic simulation of the compute fabric.

Hidden per-entry ground truth (true performance, queue-delay and noise
distributions), reproducible random streams, and the global event queue.

Randomness contract: every stream is a numpy PCG64 generator seeded from
SHA-256(seed "/" label), so the same (seed, label) pair yields the same
draw sequence on every platform and run. Platform-default generators are
never used.
"""

from __future__ import annotations

import hashlib
import heapq
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional

import numpy as np

from .domain import BenchmarkSpec


class SimulationDrained(Exception):
    """Advancing an empty event queue: the run is over."""


class EventKind(str, Enum):
    PILOT_START = "PILOT_START"
    PILOT_FINISH = "PILOT_FINISH"
    FACTORY_CYCLE = "FACTORY_CYCLE"
    RUNNER_WAKE = "RUNNER_WAKE"


@dataclass(frozen=True)
class FabricProfile:
    """Ground truth for one entry, invisible to every consumer but the sim."""

    entry_id: str
    true_perf: float
    perf_noise_cv: float = 0.0
    queue_delay_median_s: float = 0.0
    queue_delay_sigma: float = 0.0
    failure_prob: float = 0.0


def validate_fabric_profile(profile: FabricProfile) -> list[str]:
    violations = []
    if profile.true_perf <= 0:
        violations.append("true_perf not positive")
    if profile.perf_noise_cv < 0:
        violations.append("perf_noise_cv negative")
    if profile.queue_delay_median_s < 0:
        violations.append("queue_delay_median_s negative")
    if profile.queue_delay_sigma < 0:
        violations.append("queue_delay_sigma negative")
    if not 0.0 <= profile.failure_prob <= 1.0:
        violations.append("failure_prob outside [0, 1]")
    return violations


class RngStream:
    """Reproducible random stream identified by (seed, label).

    Labels partition the randomness ("delay/e42", "perf/e42", ...) so adding
    streams never perturbs draws on existing ones.
    """

    def __init__(self, seed: int, label: str):
        self.seed = seed
        self.label = label
        digest = hashlib.sha256(f"{seed}/{label}".encode("utf-8")).digest()
        self._gen = np.random.Generator(
            np.random.PCG64(int.from_bytes(digest[:16], "little"))
        )

    def uniform(self) -> float:
        """One draw in [0, 1)."""
        return float(self._gen.random())

    def normal(self) -> float:
        """One standard-normal draw."""
        return float(self._gen.standard_normal())

    def integer(self, low: int, high: int) -> int:
        """One integer draw in [low, high] inclusive."""
        return int(self._gen.integers(low, high + 1))


@dataclass(frozen=True)
class SimEvent:
    time: float
    seq: int
    kind: EventKind
    payload: dict[str, Any] = field(default_factory=dict)


class EventQueue:
    """Event queue ordered by (time, seq); seq breaks same-time ties in
    insertion order."""

    def __init__(self):
        self._heap: list[tuple[float, int, SimEvent]] = []
        self._next_seq = 0

    def __len__(self) -> int:
        return len(self._heap)

    def push(self, time: float, kind: EventKind, payload: Optional[dict] = None) -> SimEvent:
        event = SimEvent(time=time, seq=self._next_seq, kind=kind, payload=payload or {})
        self._next_seq += 1
        heapq.heappush(self._heap, (event.time, event.seq, event))
        return event

    def peek_time(self) -> Optional[float]:
        return self._heap[0][0] if self._heap else None

    def advance(self) -> SimEvent:
        """Remove and return the event minimal under (time, seq)."""
        if not self._heap:
            raise SimulationDrained("simulation drained")
        return heapq.heappop(self._heap)[2]


def sample_queue_delay(profile: FabricProfile, rng: RngStream) -> float:
    """Lognormal batch-queue wait: median * exp(sigma * z).

    sigma 0 degenerates to exactly the median; median 0 to exactly 0.
    """
    if profile.queue_delay_median_s == 0.0:
        return 0.0
    if profile.queue_delay_sigma == 0.0:
        return profile.queue_delay_median_s
    return profile.queue_delay_median_s * math.exp(profile.queue_delay_sigma * rng.normal())


@dataclass(frozen=True)
class RunOutcome:
    success: bool
    measured_score: float
    duration_s: float
    timed_out: bool = False


def sample_run_outcome(
    profile: FabricProfile, spec: BenchmarkSpec, rng: RngStream
) -> RunOutcome:
    """Sample one benchmark execution against the hidden ground truth.

    Fails outright with probability failure_prob. Otherwise the measured
    score is true_perf times a lognormal multiplier exp(eps - sl^2/2) with
    eps ~ N(0, sl) and sl = sqrt(ln(1 + cv^2)), which makes the multiplier's
    mean exactly 1 and its coefficient of variation equal to perf_noise_cv.
    A run whose duration would exceed the spec timeout is reported as a
    timeout instead of a success.

    The failure draw is consumed before the noise draw, unconditionally, so
    a stream yields the same noise sequence whatever the failure outcomes.
    """
    failure_draw = rng.uniform()
    noise_draw = rng.normal()
    if failure_draw < profile.failure_prob:
        return RunOutcome(success=False, measured_score=0.0, duration_s=0.0)
    if profile.perf_noise_cv == 0.0:
        measured = profile.true_perf
    else:
        sigma_log = math.sqrt(math.log(1.0 + profile.perf_noise_cv**2))
        measured = profile.true_perf * math.exp(sigma_log * noise_draw - sigma_log**2 / 2.0)
    duration = spec.work_units / measured
    if duration > spec.timeout_s:
        return RunOutcome(success=False, measured_score=measured, duration_s=duration, timed_out=True)
    return RunOutcome(success=True, measured_score=measured, duration_s=duration)
