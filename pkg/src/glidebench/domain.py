"""Shared vocabulary types for the pilot/benchmark system.

Everything here is an immutable value object; the stateful components
(factory, runner, collector) hold and replace these records, they never
mutate them in place. Timestamps are decimal seconds on the simulation
clock, with epoch 0 at scenario start.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional

ENTRY_ID_RE = re.compile(r"^[a-z0-9_.-]+$")

PILOT_ID_FORMAT = "p-{:08d}"


class Purpose(str, Enum):
    USER = "user"
    BENCHMARK = "benchmark"


class PilotState(str, Enum):
    SUBMITTED = "SUBMITTED"
    QUEUED = "QUEUED"
    RUNNING = "RUNNING"
    COMPLETED = "COMPLETED"
    FAILED = "FAILED"
    TIMED_OUT = "TIMED_OUT"


TERMINAL_STATES = frozenset(
    {PilotState.COMPLETED, PilotState.FAILED, PilotState.TIMED_OUT}
)

# Full edge set of the pilot lifecycle. QUEUED -> FAILED covers submission
# rejections that happen after queueing.
ALLOWED_TRANSITIONS = frozenset(
    {
        (PilotState.SUBMITTED, PilotState.QUEUED),
        (PilotState.QUEUED, PilotState.RUNNING),
        (PilotState.QUEUED, PilotState.FAILED),
        (PilotState.RUNNING, PilotState.COMPLETED),
        (PilotState.RUNNING, PilotState.FAILED),
        (PilotState.RUNNING, PilotState.TIMED_OUT),
    }
)


class TransitionError(Exception):
    """Raised on a pilot state edge outside the allowed transition set."""


@dataclass(frozen=True)
class EntryConfig:
    """Publicly visible description of one compute entrypoint."""

    entry_id: str
    site_name: str = ""
    cpu_model: str = "unknown"
    price_per_hour: float = 0.0
    max_pilots: int = 10
    supports_containers: bool = True
    enabled: bool = True


@dataclass(frozen=True)
class NodeInfo:
    """Resources auto-detected by a pilot on its worker node."""

    cores: int = 1
    memory_mb: int = 1
    disk_mb: int = 0
    gpus: int = 0
    cpu_model: str = "unknown"


@dataclass(frozen=True)
class BenchmarkSpec:
    """One benchmark definition: container image plus a fixed workload size."""

    spec_id: str
    name: str
    image_ref: str
    work_units: int
    timeout_s: int


@dataclass(frozen=True)
class PilotRecord:
    """Lifecycle state of one pilot, purpose user or benchmark."""

    pilot_id: str
    entry_id: str
    purpose: Purpose
    spec_id: Optional[str] = None
    state: PilotState = PilotState.SUBMITTED
    submitted_at: Optional[float] = None
    started_at: Optional[float] = None
    finished_at: Optional[float] = None
    stderr_lines: tuple[str, ...] = field(default_factory=tuple)


@dataclass(frozen=True)
class BenchmarkResult:
    """One measured benchmark score, as shipped home by a pilot."""

    pilot_id: str
    entry_id: str
    spec_id: str
    score: float
    duration_s: float
    started_at: float
    node: NodeInfo
    exit_code: int
    schema_version: int = 1


def validate_entry_config(cfg: EntryConfig) -> list[str]:
    """Return every violated entry invariant as a human-readable string.

    A valid config yields an empty list; violations are data, not failures.
    """
    violations = []
    if not cfg.entry_id:
        violations.append("entry_id empty")
    elif not ENTRY_ID_RE.match(cfg.entry_id):
        violations.append(f"entry_id invalid: {cfg.entry_id!r}")
    if cfg.price_per_hour < 0:
        violations.append("price_per_hour negative")
    if cfg.max_pilots < 0:
        violations.append("max_pilots negative")
    return violations


def validate_node_info(node: NodeInfo) -> list[str]:
    violations = []
    if node.cores < 1:
        violations.append("cores < 1")
    if node.memory_mb < 1:
        violations.append("memory_mb < 1")
    if node.disk_mb < 0:
        violations.append("disk_mb negative")
    if node.gpus < 0:
        violations.append("gpus negative")
    return violations


def validate_benchmark_spec(spec: BenchmarkSpec) -> list[str]:
    violations = []
    if not spec.spec_id:
        violations.append("spec_id empty")
    if spec.work_units < 1:
        violations.append("work_units < 1")
    if spec.timeout_s < 1:
        violations.append("timeout_s < 1")
    return violations


def validate_benchmark_result(result: BenchmarkResult) -> list[str]:
    """Check result invariants; score must be positive exactly on success."""
    violations = []
    if result.schema_version != 1:
        violations.append(f"schema_version unsupported: {result.schema_version}")
    if result.exit_code == 0:
        if result.score <= 0:
            violations.append("score not positive with exit_code 0")
        if result.duration_s <= 0:
            violations.append("duration_s not positive with exit_code 0")
    elif result.score > 0:
        violations.append("score positive with nonzero exit_code")
    violations.extend(validate_node_info(result.node))
    return violations


def hardware_fingerprint(cpu_model: str) -> str:
    """Normalize a raw CPU model string into a hardware-class key.

    Lowercases, trims, and collapses internal whitespace runs to one space;
    idempotent by construction.
    """
    return " ".join(cpu_model.split()).lower()


def transition(record: PilotRecord, new_state: PilotState, now: float) -> PilotRecord:
    """Move a pilot along one lifecycle edge, stamping the matching timestamp.

    Rejects any edge not in ALLOWED_TRANSITIONS and any timestamp that would
    run backwards.
    """
    edge = (record.state, new_state)
    if edge not in ALLOWED_TRANSITIONS:
        raise TransitionError(f"{record.pilot_id}: {record.state.value} -> {new_state.value}")
    updates: dict = {"state": new_state}
    if new_state is PilotState.QUEUED:
        if record.submitted_at is not None and now < record.submitted_at:
            raise TransitionError(f"{record.pilot_id}: queue time before submit time")
        updates["submitted_at"] = record.submitted_at if record.submitted_at is not None else now
    elif new_state is PilotState.RUNNING:
        if record.submitted_at is not None and now < record.submitted_at:
            raise TransitionError(f"{record.pilot_id}: start time before submit time")
        updates["started_at"] = now
    elif new_state in TERMINAL_STATES:
        reference = record.started_at if record.started_at is not None else record.submitted_at
        if reference is not None and now < reference:
            raise TransitionError(f"{record.pilot_id}: finish time runs backwards")
        updates["finished_at"] = now
    return replace(record, **updates)


def with_stderr(record: PilotRecord, lines: list[str]) -> PilotRecord:
    return replace(record, stderr_lines=record.stderr_lines + tuple(lines))
