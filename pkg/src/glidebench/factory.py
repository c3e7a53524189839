"""Pressure-based pilot factory.

Holds the active configuration, one live pressure request per
(client, entry) pair, and every pilot record. Each cycle it fills the gap
between requested pressure and queued-plus-running pilots, subject to the
per-entry cap and a shared per-cycle budget. It also accepts single ad-hoc
benchmark pilots and hosts a plain in-process mailbox.

All mutation happens through serialized command application; queries hand
out immutable snapshots.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Optional

from .domain import (
    EntryConfig,
    PILOT_ID_FORMAT,
    PilotRecord,
    PilotState,
    Purpose,
    transition,
    validate_entry_config,
    with_stderr,
)

DEFAULT_CYCLE_PERIOD_S = 60.0
DEFAULT_MAX_SUBMIT_PER_CYCLE = 100

CONFIG_INPUT_KEYS = frozenset(
    {"entries", "benchmarks_enabled", "cycle_period_s", "max_submit_per_cycle"}
)
ENTRY_KEYS = frozenset(
    {
        "entry_id",
        "site_name",
        "cpu_model",
        "price_per_hour",
        "max_pilots",
        "supports_containers",
        "enabled",
    }
)


class ConfigError(ValueError):
    """Configuration document rejected; .violations lists every problem."""

    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = violations


class FactoryRejection(Exception):
    """A factory command was refused; .reason is a stable code."""

    def __init__(self, reason: str, detail: str = ""):
        super().__init__(f"{reason}: {detail}" if detail else reason)
        self.reason = reason
        self.detail = detail


@dataclass(frozen=True)
class FactoryConfig:
    version: int
    entries: tuple[EntryConfig, ...]
    benchmarks_enabled: bool = False
    cycle_period_s: float = DEFAULT_CYCLE_PERIOD_S
    max_submit_per_cycle: int = DEFAULT_MAX_SUBMIT_PER_CYCLE

    def entry(self, entry_id: str) -> Optional[EntryConfig]:
        for entry in self.entries:
            if entry.entry_id == entry_id:
                return entry
        return None


@dataclass(frozen=True)
class PressureRequest:
    client_id: str
    entry_id: str
    requested: int


@dataclass(frozen=True)
class MailboxMessage:
    msg_id: str
    sender: str
    recipient: str
    kind: str  # pressure_request | status_report | campaign_notice
    body: str  # opaque JSON text
    posted_at: float


def parse_entry_config(obj: dict, violations: list[str]) -> Optional[EntryConfig]:
    if not isinstance(obj, dict):
        violations.append("entry not an object")
        return None
    unknown = sorted(set(obj) - ENTRY_KEYS)
    if unknown:
        violations.append(f"entry has unknown keys: {unknown}")
        return None
    if "entry_id" not in obj:
        violations.append("entry missing entry_id")
        return None
    try:
        entry = EntryConfig(
            entry_id=str(obj["entry_id"]),
            site_name=str(obj.get("site_name", "")),
            cpu_model=str(obj.get("cpu_model", "unknown")),
            price_per_hour=float(obj.get("price_per_hour", 0.0)),
            max_pilots=int(obj.get("max_pilots", 10)),
            supports_containers=bool(obj.get("supports_containers", True)),
            enabled=bool(obj.get("enabled", True)),
        )
    except (TypeError, ValueError) as exc:
        violations.append(f"entry field malformed: {exc}")
        return None
    entry_violations = validate_entry_config(entry)
    if entry_violations:
        violations.extend(f"{entry.entry_id or '<empty>'}: {v}" for v in entry_violations)
        return None
    return entry


def parse_config_document(document: str, version: int = 1) -> FactoryConfig:
    """Parse and validate a factory configuration JSON document.

    Collects every violation before rejecting; "version" is output-only and
    therefore an unknown input key.
    """
    try:
        obj = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            [f"parse error at line {exc.lineno} column {exc.colno}: {exc.msg}"]
        ) from exc
    if not isinstance(obj, dict):
        raise ConfigError(["document not a JSON object"])
    violations: list[str] = []
    unknown = sorted(set(obj) - CONFIG_INPUT_KEYS)
    if unknown:
        violations.append(f"unknown keys: {unknown}")
    raw_entries = obj.get("entries", [])
    if not isinstance(raw_entries, list):
        violations.append("entries not an array")
        raw_entries = []
    entries = []
    seen_ids = set()
    for raw in raw_entries:
        entry = parse_entry_config(raw, violations)
        if entry is None:
            continue
        if entry.entry_id in seen_ids:
            violations.append(f"duplicate entry_id: {entry.entry_id}")
            continue
        seen_ids.add(entry.entry_id)
        entries.append(entry)
    try:
        cycle_period = float(obj.get("cycle_period_s", DEFAULT_CYCLE_PERIOD_S))
        max_submit = int(obj.get("max_submit_per_cycle", DEFAULT_MAX_SUBMIT_PER_CYCLE))
    except (TypeError, ValueError) as exc:
        raise ConfigError(violations + [f"field malformed: {exc}"]) from exc
    if cycle_period <= 0:
        violations.append("cycle_period_s not positive")
    if max_submit < 1:
        violations.append("max_submit_per_cycle < 1")
    if violations:
        raise ConfigError(violations)
    return FactoryConfig(
        version=version,
        entries=tuple(entries),
        benchmarks_enabled=bool(obj.get("benchmarks_enabled", False)),
        cycle_period_s=cycle_period,
        max_submit_per_cycle=max_submit,
    )


def load_config(document: str) -> FactoryConfig:
    """Parse a fresh configuration; versions always start at 1."""
    return parse_config_document(document, version=1)


def config_to_dict(config: FactoryConfig) -> dict[str, Any]:
    return {
        "version": config.version,
        "entries": [
            {
                "entry_id": e.entry_id,
                "site_name": e.site_name,
                "cpu_model": e.cpu_model,
                "price_per_hour": e.price_per_hour,
                "max_pilots": e.max_pilots,
                "supports_containers": e.supports_containers,
                "enabled": e.enabled,
            }
            for e in config.entries
        ],
        "benchmarks_enabled": config.benchmarks_enabled,
        "cycle_period_s": config.cycle_period_s,
        "max_submit_per_cycle": config.max_submit_per_cycle,
    }


def config_input_document(config: FactoryConfig, **overrides: Any) -> str:
    """Serialize the active config back into input form, with overrides.

    This is how the runner rewrites the configuration: same document the
    operator would submit, minus the output-only version field.
    """
    doc = config_to_dict(config)
    del doc["version"]
    doc.update(overrides)
    return json.dumps(doc)


class Factory:
    """The pilot submission service. One instance per simulated factory."""

    def __init__(
        self,
        config: FactoryConfig,
        delay_sampler: Optional[Callable[[str], float]] = None,
        known_specs: Optional[Iterable[str]] = None,
    ):
        self._config = config
        self._entry_map = {e.entry_id: e for e in config.entries}
        self._delay_sampler = delay_sampler or (lambda entry_id: 0.0)
        self._known_specs = set(known_specs or [])
        self._pilots: dict[str, PilotRecord] = {}
        self._next_pilot_seq = 1
        self._pressure: dict[tuple[str, str], int] = {}
        self._requested_totals: dict[str, int] = {}
        self._in_flight_counts: dict[str, int] = {}
        self._live_benchmarks = 0
        self._mailbox: dict[str, list[MailboxMessage]] = {}
        self._next_msg_seq = 1
        # (pilot_id, scheduled_start_at) pairs not yet claimed by the event loop.
        self._new_submissions: list[tuple[str, float]] = []

    @property
    def config(self) -> FactoryConfig:
        return self._config

    @property
    def version(self) -> int:
        return self._config.version

    def register_spec(self, spec_id: str) -> None:
        self._known_specs.add(spec_id)

    def entry(self, entry_id: str) -> Optional[EntryConfig]:
        return self._entry_map.get(entry_id)

    # -- configuration ------------------------------------------------

    def reconfig(self, document: str) -> int:
        """Atomically swap in a new configuration and bump the version.

        A rejected document leaves the active configuration untouched;
        in-flight pilots always keep the entry parameters they started with.
        """
        new_config = parse_config_document(document, version=self._config.version + 1)
        self._config = new_config
        self._entry_map = {e.entry_id: e for e in new_config.entries}
        return self._config.version

    # -- pressure -----------------------------------------------------

    def set_pressure(self, client_id: str, entry_id: str, requested: int) -> None:
        """Replace the live (client, entry) request; applied at next cycle."""
        entry = self._entry_map.get(entry_id)
        if entry is None:
            raise FactoryRejection("unknown_entry", entry_id)
        if not entry.enabled:
            raise FactoryRejection("entry_disabled", entry_id)
        if requested < 0:
            raise FactoryRejection("negative_request", str(requested))
        previous = self._pressure.get((client_id, entry_id), 0)
        self._pressure[(client_id, entry_id)] = requested
        self._requested_totals[entry_id] = (
            self._requested_totals.get(entry_id, 0) - previous + requested
        )

    def total_requested(self, entry_id: str) -> int:
        return self._requested_totals.get(entry_id, 0)

    # -- pilots -------------------------------------------------------

    def in_flight(self, entry_id: str) -> int:
        """Queued plus running pilots on one entry, any purpose."""
        return self._in_flight_counts.get(entry_id, 0)

    def live_benchmark_count(self) -> int:
        return self._live_benchmarks

    def _submit(self, entry_id: str, purpose: Purpose, spec_id: Optional[str], now: float) -> str:
        pilot_id = PILOT_ID_FORMAT.format(self._next_pilot_seq)
        self._next_pilot_seq += 1
        record = PilotRecord(
            pilot_id=pilot_id,
            entry_id=entry_id,
            purpose=purpose,
            spec_id=spec_id,
            submitted_at=now,
        )
        record = transition(record, PilotState.QUEUED, now)
        self._pilots[pilot_id] = record
        self._in_flight_counts[entry_id] = self._in_flight_counts.get(entry_id, 0) + 1
        if purpose is Purpose.BENCHMARK:
            self._live_benchmarks += 1
        delay = max(0.0, float(self._delay_sampler(entry_id)))
        self._new_submissions.append((pilot_id, now + delay))
        return pilot_id

    def submit_single(
        self,
        entry_id: str,
        purpose: Purpose,
        spec_id: Optional[str] = None,
        now: float = 0.0,
    ) -> str:
        """Submit one ad-hoc pilot, subject to gating and the entry cap."""
        entry = self._entry_map.get(entry_id)
        if entry is None:
            raise FactoryRejection("unknown_entry", entry_id)
        if not entry.enabled:
            raise FactoryRejection("entry_disabled", entry_id)
        if purpose is Purpose.BENCHMARK:
            if not self._config.benchmarks_enabled:
                raise FactoryRejection("benchmarks_disabled")
            if spec_id is None or spec_id not in self._known_specs:
                raise FactoryRejection("unknown_spec", str(spec_id))
        if self.in_flight(entry_id) >= entry.max_pilots:
            raise FactoryRejection("entry_full", entry_id)
        return self._submit(entry_id, purpose, spec_id, now)

    def cycle(self, now: float) -> list[dict[str, Any]]:
        """Fill per-entry pressure deficits with user pilots.

        Entries share the per-cycle budget in entry_id lexicographic order.
        A negative deficit never cancels anything.
        """
        budget = self._config.max_submit_per_cycle
        submissions = []
        for entry in sorted(self._config.entries, key=lambda e: e.entry_id):
            if budget <= 0:
                break
            if not entry.enabled:
                continue
            in_flight = self.in_flight(entry.entry_id)
            deficit = max(0, self.total_requested(entry.entry_id) - in_flight)
            headroom = max(0, entry.max_pilots - in_flight)
            count = min(deficit, headroom, budget)
            if count <= 0:
                continue
            for _ in range(count):
                self._submit(entry.entry_id, Purpose.USER, None, now)
            budget -= count
            submissions.append({"entry_id": entry.entry_id, "count": count})
        return submissions

    def drain_new_submissions(self) -> list[tuple[str, float]]:
        """Hand the event loop every submission since the last drain."""
        drained = self._new_submissions
        self._new_submissions = []
        return drained

    def mark_running(self, pilot_id: str, now: float) -> PilotRecord:
        record = transition(self._pilots[pilot_id], PilotState.RUNNING, now)
        self._pilots[pilot_id] = record
        return record

    def mark_terminal(
        self,
        pilot_id: str,
        state: PilotState,
        now: float,
        stderr_lines: Optional[list[str]] = None,
    ) -> PilotRecord:
        record = self._pilots[pilot_id]
        if stderr_lines:
            record = with_stderr(record, stderr_lines)
        record = transition(record, state, now)
        self._pilots[pilot_id] = record
        self._in_flight_counts[record.entry_id] -= 1
        if record.purpose is Purpose.BENCHMARK:
            self._live_benchmarks -= 1
        return record

    def get_pilot(self, pilot_id: str) -> Optional[PilotRecord]:
        return self._pilots.get(pilot_id)

    def query_pilots(
        self,
        entry_id: Optional[str] = None,
        purpose: Optional[Purpose] = None,
        states: Optional[Iterable[PilotState]] = None,
    ) -> list[PilotRecord]:
        """Point-in-time snapshot ordered by pilot_id."""
        state_set = set(states) if states is not None else None
        return [
            p
            for pilot_id, p in sorted(self._pilots.items())
            if (entry_id is None or p.entry_id == entry_id)
            and (purpose is None or p.purpose is purpose)
            and (state_set is None or p.state in state_set)
        ]

    # -- mailbox --------------------------------------------------------

    def mailbox_post(
        self, sender: str, recipient: str, kind: str, body: str, now: float
    ) -> MailboxMessage:
        message = MailboxMessage(
            msg_id=f"m-{self._next_msg_seq:08d}",
            sender=sender,
            recipient=recipient,
            kind=kind,
            body=body,
            posted_at=now,
        )
        self._next_msg_seq += 1
        self._mailbox.setdefault(recipient, []).append(message)
        return message

    def mailbox_fetch(self, recipient: str) -> list[MailboxMessage]:
        """Drain the recipient's queue in posted order; at-most-once."""
        return self._mailbox.pop(recipient, [])
