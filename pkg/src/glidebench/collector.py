"""Result collection: parse pilot stderr, ingest, persist, aggregate.

The parser is the trust boundary: nothing enters the store unless its
block checksum verifies, and nothing stays unless the result invariants
hold. Parse problems become diagnostics, never exceptions.
"""

from __future__ import annotations

import json
import statistics
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

from .domain import BenchmarkResult, validate_benchmark_result
from .wire import (
    BEGIN_LINE,
    END_RE,
    WireFormatError,
    checksum,
    parse_payload_line,
    payload_line,
)

DEFAULT_WINDOW = 5
DEFAULT_HALF_LIFE_S = 259200.0  # 72 h


@dataclass(frozen=True)
class Diagnostic:
    line_no: int
    code: str
    detail: str = ""


@dataclass(frozen=True)
class EntryScore:
    """Per-(entry, spec) aggregate over the freshest successful samples."""

    entry_id: str
    spec_id: str
    median_score: float
    n_samples: int
    last_ts: float
    age_s: float
    staleness_weight: float


def parse_stream(lines: Iterable[str]) -> tuple[list[BenchmarkResult], list[Diagnostic]]:
    """Scan a stderr transcript for checksummed result blocks.

    A block is BEGIN sentinel, payload line, END sentinel whose digest
    matches the payload bytes. On any violation a diagnostic is recorded
    and scanning resumes at the line after the BEGIN, so an overlapping
    genuine block is never skipped. Non-block lines are ignored.
    """
    lines = [line.rstrip("\n") for line in lines]
    results: list[BenchmarkResult] = []
    diagnostics: list[Diagnostic] = []
    i = 0
    while i < len(lines):
        if lines[i] != BEGIN_LINE:
            i += 1
            continue
        if i + 2 >= len(lines):
            diagnostics.append(Diagnostic(i + 1, "truncated_block"))
            break
        payload = lines[i + 1]
        end_match = END_RE.match(lines[i + 2])
        if end_match is None:
            diagnostics.append(Diagnostic(i + 3, "missing_end"))
            i += 1
            continue
        if end_match.group(1) != checksum(payload):
            diagnostics.append(Diagnostic(i + 3, "checksum_mismatch"))
            i += 1
            continue
        try:
            results.append(parse_payload_line(payload))
            i += 3
        except WireFormatError as exc:
            diagnostics.append(Diagnostic(i + 2, "invalid_payload", str(exc)))
            i += 1
    return results, diagnostics


class ResultStore:
    """Append-only result store with (pilot_id, spec_id) dedupe."""

    def __init__(self):
        self._results: list[BenchmarkResult] = []
        self._by_key: dict[tuple[str, str], list[int]] = {}
        self._seen: set[tuple[str, str]] = set()

    def __len__(self) -> int:
        return len(self._results)

    @property
    def results(self) -> tuple[BenchmarkResult, ...]:
        return tuple(self._results)

    def ingest(self, result: BenchmarkResult) -> str:
        """Returns one of "accepted", "duplicate", "invalid"."""
        if validate_benchmark_result(result):
            return "invalid"
        dedupe_key = (result.pilot_id, result.spec_id)
        if dedupe_key in self._seen:
            return "duplicate"
        self._seen.add(dedupe_key)
        index_key = (result.entry_id, result.spec_id)
        self._by_key.setdefault(index_key, []).append(len(self._results))
        self._results.append(result)
        return "accepted"

    def for_entry(self, entry_id: str, spec_id: str) -> list[BenchmarkResult]:
        return [self._results[i] for i in self._by_key.get((entry_id, spec_id), [])]

    def entry_keys(self) -> list[tuple[str, str]]:
        return sorted(self._by_key)

    def recent(
        self,
        entry_id: Optional[str] = None,
        spec_id: Optional[str] = None,
        limit: int = 100,
    ) -> list[BenchmarkResult]:
        """Newest-first slice, filtered; recency = started_at, then ingest order."""
        selected = [
            (r.started_at, i, r)
            for i, r in enumerate(self._results)
            if (entry_id is None or r.entry_id == entry_id)
            and (spec_id is None or r.spec_id == spec_id)
        ]
        selected.sort(key=lambda t: (t[0], t[1]), reverse=True)
        return [r for _, _, r in selected[:limit]]


def aggregate(
    store: ResultStore,
    entry_id: str,
    spec_id: str,
    now: float,
    window: int = DEFAULT_WINDOW,
    half_life_s: float = DEFAULT_HALF_LIFE_S,
) -> Optional[EntryScore]:
    """Median of the most recent `window` successful samples, or None.

    Even counts take the mean of the two middle elements. The staleness
    weight halves every half_life_s of age; it models confidence decay and
    never touches the score magnitude.
    """
    successes = [
        (r.started_at, i, r.score)
        for i, r in enumerate(store.for_entry(entry_id, spec_id))
        if r.exit_code == 0
    ]
    if not successes:
        return None
    successes.sort(key=lambda t: (t[0], t[1]))
    recent = successes[-window:]
    last_ts = recent[-1][0]
    age_s = now - last_ts
    return EntryScore(
        entry_id=entry_id,
        spec_id=spec_id,
        median_score=statistics.median(score for _, _, score in recent),
        n_samples=len(recent),
        last_ts=last_ts,
        age_s=age_s,
        staleness_weight=2.0 ** (-age_s / half_life_s),
    )


def aggregate_all(
    store: ResultStore,
    spec_id: str,
    now: float,
    window: int = DEFAULT_WINDOW,
    half_life_s: float = DEFAULT_HALF_LIFE_S,
) -> list[EntryScore]:
    """Aggregates for every entry with results for spec_id, entry-sorted."""
    scores = []
    for entry_id, stored_spec in store.entry_keys():
        if stored_spec != spec_id:
            continue
        score = aggregate(store, entry_id, spec_id, now, window, half_life_s)
        if score is not None:
            scores.append(score)
    return scores


def persist(store: ResultStore, path: str | Path) -> None:
    """Write the store as JSON-Lines, one wire-format payload per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for result in store.results:
            fh.write(payload_line(result) + "\n")


def load(path: str | Path) -> tuple[ResultStore, list[Diagnostic]]:
    """Replay a JSON-Lines file through ingest; bad lines become diagnostics."""
    store = ResultStore()
    diagnostics = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            try:
                result = parse_payload_line(line)
            except WireFormatError as exc:
                diagnostics.append(Diagnostic(line_no, "unreadable_line", str(exc)))
                continue
            status = store.ingest(result)
            if status != "accepted":
                diagnostics.append(Diagnostic(line_no, status, json.dumps(result.pilot_id)))
    return store, diagnostics
