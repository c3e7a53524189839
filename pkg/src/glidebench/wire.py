"""Stderr result-block wire format, shared by emitter and parser.

A block is exactly three lines:

    =GLIDEBENCH:BEGIN v1=
    {"schema_version":1,"pilot_id":...,"node":{...},"exit_code":0}
    =GLIDEBENCH:END <sha256 of the payload line, lowercase hex>=

The payload is a single-line JSON object with keys in a fixed order, so
the checksum is well-defined without any canonicalization machinery.
"""

from __future__ import annotations

import hashlib
import json
import re
from typing import Any

from .domain import BenchmarkResult, NodeInfo

BEGIN_LINE = "=GLIDEBENCH:BEGIN v1="
END_RE = re.compile(r"^=GLIDEBENCH:END ([0-9a-f]{64})=$")
ERROR_PREFIX = "GLIDEBENCH:ERROR "

PAYLOAD_KEYS = (
    "schema_version",
    "pilot_id",
    "entry_id",
    "spec_id",
    "score",
    "duration_s",
    "started_at",
    "node",
    "exit_code",
)
NODE_KEYS = ("cores", "memory_mb", "disk_mb", "gpus", "cpu_model")


def result_to_dict(result: BenchmarkResult) -> dict[str, Any]:
    """Wire representation with keys in the fixed payload order."""
    node = result.node
    return {
        "schema_version": result.schema_version,
        "pilot_id": result.pilot_id,
        "entry_id": result.entry_id,
        "spec_id": result.spec_id,
        "score": result.score,
        "duration_s": result.duration_s,
        "started_at": result.started_at,
        "node": {
            "cores": node.cores,
            "memory_mb": node.memory_mb,
            "disk_mb": node.disk_mb,
            "gpus": node.gpus,
            "cpu_model": node.cpu_model,
        },
        "exit_code": result.exit_code,
    }


def payload_line(result: BenchmarkResult) -> str:
    """Serialize one result as its single-line wire payload."""
    return json.dumps(result_to_dict(result), separators=(",", ":"))


def checksum(payload: str) -> str:
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def end_line(payload: str) -> str:
    return f"=GLIDEBENCH:END {checksum(payload)}="


class WireFormatError(ValueError):
    """Payload line does not decode to a well-formed result."""


def parse_payload_line(line: str) -> BenchmarkResult:
    """Decode one payload line back into a BenchmarkResult.

    Raises WireFormatError on anything other than a JSON object carrying
    exactly the expected keys with the expected shapes.
    """
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise WireFormatError(f"payload not JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise WireFormatError("payload not a JSON object")
    missing = [k for k in PAYLOAD_KEYS if k not in obj]
    if missing:
        raise WireFormatError(f"payload missing keys: {missing}")
    node_obj = obj["node"]
    if not isinstance(node_obj, dict):
        raise WireFormatError("node not a JSON object")
    node_missing = [k for k in NODE_KEYS if k not in node_obj]
    if node_missing:
        raise WireFormatError(f"node missing keys: {node_missing}")
    try:
        node = NodeInfo(
            cores=int(node_obj["cores"]),
            memory_mb=int(node_obj["memory_mb"]),
            disk_mb=int(node_obj["disk_mb"]),
            gpus=int(node_obj["gpus"]),
            cpu_model=str(node_obj["cpu_model"]),
        )
        return BenchmarkResult(
            schema_version=int(obj["schema_version"]),
            pilot_id=str(obj["pilot_id"]),
            entry_id=str(obj["entry_id"]),
            spec_id=str(obj["spec_id"]),
            score=float(obj["score"]),
            duration_s=float(obj["duration_s"]),
            started_at=float(obj["started_at"]),
            node=node,
            exit_code=int(obj["exit_code"]),
        )
    except (TypeError, ValueError) as exc:
        raise WireFormatError(f"payload field malformed: {exc}") from exc
