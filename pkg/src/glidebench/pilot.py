"""The pilot lifecycle as executed on a fabric node.

A pilot validates its environment, detects node resources, runs its payload
(the benchmark, or a no-op for user pilots), and reports home over stderr.
Errors never escape: they end up encoded in the terminal state plus a
GLIDEBENCH:ERROR diagnostic line.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional

from .domain import (
    BenchmarkResult,
    BenchmarkSpec,
    NodeInfo,
    PilotState,
    Purpose,
)
from .fabric import FabricProfile, RngStream
from .harness import EXIT_OK, EXIT_TIMEOUT, SimulatedExecutor, compute_score, execute
from .wire import BEGIN_LINE, ERROR_PREFIX, end_line, payload_line


@dataclass(frozen=True)
class PilotContext:
    pilot_id: str
    entry_id: str
    purpose: Purpose
    spec: Optional[BenchmarkSpec] = None
    node: NodeInfo = NodeInfo()
    container_available: bool = True


@dataclass(frozen=True)
class PilotRunOutcome:
    """What the sim needs to schedule and record a pilot's payload phase."""

    state: PilotState
    stderr_lines: tuple[str, ...]
    payload_elapsed_s: float
    result: Optional[BenchmarkResult] = None


def detect_resources(descriptor: Optional[Mapping]) -> NodeInfo:
    """Echo the node descriptor, defaulting any missing field.

    cpu_model passes through raw; normalization happens at fingerprint time.
    """
    descriptor = descriptor or {}
    return NodeInfo(
        cores=int(descriptor.get("cores", 1)),
        memory_mb=int(descriptor.get("memory_mb", 1)),
        disk_mb=int(descriptor.get("disk_mb", 0)),
        gpus=int(descriptor.get("gpus", 0)),
        cpu_model=str(descriptor.get("cpu_model", "unknown")),
    )


def emit_result_block(result: BenchmarkResult) -> list[str]:
    """The three checksummed stderr lines that carry one result home."""
    payload = payload_line(result)
    return [BEGIN_LINE, payload, end_line(payload)]


def run(
    ctx: PilotContext,
    profile: FabricProfile,
    rng: RngStream,
    started_at: float,
    user_payload_s: float = 0.0,
) -> PilotRunOutcome:
    """Execute the pilot sequence: validate, detect, run payload, report.

    Returns the terminal state, the full stderr transcript, and how much
    simulated time the payload phase consumed (the sim schedules the finish
    event that far after the start).
    """
    stderr = [f"pilot {ctx.pilot_id} starting on {ctx.entry_id} purpose={ctx.purpose.value}"]

    if ctx.purpose is Purpose.BENCHMARK:
        if ctx.spec is None:
            stderr.append(ERROR_PREFIX + "missing_spec")
            return PilotRunOutcome(PilotState.FAILED, tuple(stderr), 0.0)
        if ctx.spec.image_ref and not ctx.container_available:
            stderr.append(ERROR_PREFIX + "container_unavailable")
            return PilotRunOutcome(PilotState.FAILED, tuple(stderr), 0.0)

    node = detect_resources(
        {
            "cores": ctx.node.cores,
            "memory_mb": ctx.node.memory_mb,
            "disk_mb": ctx.node.disk_mb,
            "gpus": ctx.node.gpus,
            "cpu_model": ctx.node.cpu_model,
        }
    )
    stderr.append(
        f"node: cores={node.cores} memory_mb={node.memory_mb} "
        f"disk_mb={node.disk_mb} gpus={node.gpus} cpu_model={node.cpu_model}"
    )

    if ctx.purpose is Purpose.USER:
        # User payloads are no-ops; the pilot just occupies its slot.
        stderr.append("payload complete purpose=user")
        return PilotRunOutcome(PilotState.COMPLETED, tuple(stderr), user_payload_s)

    assert ctx.spec is not None
    measurement = execute(ctx.spec, SimulatedExecutor(profile, rng))
    if measurement.exit_code == EXIT_TIMEOUT:
        stderr.append(ERROR_PREFIX + "timeout")
        return PilotRunOutcome(PilotState.TIMED_OUT, tuple(stderr), float(ctx.spec.timeout_s))
    if measurement.exit_code != EXIT_OK:
        stderr.append(ERROR_PREFIX + f"payload_failed exit_code={measurement.exit_code}")
        return PilotRunOutcome(PilotState.FAILED, tuple(stderr), measurement.elapsed_s)

    result = BenchmarkResult(
        pilot_id=ctx.pilot_id,
        entry_id=ctx.entry_id,
        spec_id=ctx.spec.spec_id,
        score=compute_score(measurement, ctx.spec),
        duration_s=measurement.elapsed_s,
        started_at=started_at,
        node=node,
        exit_code=EXIT_OK,
    )
    stderr.extend(emit_result_block(result))
    return PilotRunOutcome(PilotState.COMPLETED, tuple(stderr), measurement.elapsed_s, result)
