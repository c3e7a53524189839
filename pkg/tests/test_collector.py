from __future__ import annotations

import string

import pytest
from hypothesis import given
from hypothesis import strategies as st

from glidebench.collector import (
    ResultStore,
    aggregate,
    load,
    parse_stream,
    persist,
)
from glidebench.domain import BenchmarkResult, NodeInfo
from glidebench.pilot import emit_result_block

NODE = NodeInfo(cores=4, memory_mb=8192, disk_mb=0, gpus=0, cpu_model="test cpu")


def make_result(pilot_seq=1, score=50.0, started_at=0.0, **overrides) -> BenchmarkResult:
    base = dict(
        pilot_id=f"p-{pilot_seq:08d}",
        entry_id="e1",
        spec_id="s1",
        score=score,
        duration_s=20.0,
        started_at=started_at,
        node=NODE,
        exit_code=0,
    )
    base.update(overrides)
    return BenchmarkResult(**base)


# -- parsing ---------------------------------------------------------------


def test_round_trip_single_block():
    result = make_result()
    parsed, diagnostics = parse_stream(emit_result_block(result))
    assert parsed == [result]
    assert diagnostics == []


def test_altered_checksum_digit_rejected():
    lines = emit_result_block(make_result())
    digest = lines[2][len("=GLIDEBENCH:END "):-1]
    flipped = ("0" if digest[0] != "0" else "1") + digest[1:]
    lines[2] = f"=GLIDEBENCH:END {flipped}="
    parsed, diagnostics = parse_stream(lines)
    assert parsed == []
    assert [d.code for d in diagnostics] == ["checksum_mismatch"]


def test_corrupted_payload_rejected():
    lines = emit_result_block(make_result())
    lines[1] = lines[1].replace("50.0", "51.0", 1)
    parsed, diagnostics = parse_stream(lines)
    assert parsed == []
    assert diagnostics[0].code == "checksum_mismatch"


def test_missing_end_line_reported():
    lines = emit_result_block(make_result())[:2]
    parsed, diagnostics = parse_stream(lines)
    assert parsed == []
    assert diagnostics[0].code == "truncated_block"


def test_noise_between_blocks_ignored():
    first = make_result(pilot_seq=1)
    second = make_result(pilot_seq=2)
    lines = (
        ["boot log line"] * 100
        + emit_result_block(first)
        + ["more noise", "GLIDEBENCH:ERROR not_a_block_header"]
        + emit_result_block(second)
    )
    parsed, diagnostics = parse_stream(lines)
    assert parsed == [first, second]
    assert diagnostics == []


def test_back_to_back_dangling_begin_does_not_mask_real_block():
    real = emit_result_block(make_result())
    lines = ["=GLIDEBENCH:BEGIN v1="] + real
    parsed, diagnostics = parse_stream(lines)
    assert len(parsed) == 1
    assert len(diagnostics) == 1


def test_valid_json_payload_that_is_not_a_result_is_diagnosed():
    payload = '{"hello": "world"}'
    import hashlib

    digest = hashlib.sha256(payload.encode()).hexdigest()
    lines = ["=GLIDEBENCH:BEGIN v1=", payload, f"=GLIDEBENCH:END {digest}="]
    parsed, diagnostics = parse_stream(lines)
    assert parsed == []
    assert diagnostics[0].code == "invalid_payload"


_noise_line = st.text(
    alphabet=string.ascii_letters + string.digits + " .:_-[](){}",
    min_size=0,
    max_size=60,
).filter(lambda s: not s.startswith("=GLIDEBENCH:"))


@given(
    noise=st.lists(_noise_line, max_size=60),
    positions=st.lists(st.integers(min_value=0, max_value=60), min_size=1, max_size=5),
)
def test_all_valid_blocks_recovered_from_noise(noise, positions):
    # fuzz property: interleave valid blocks with non-sentinel noise at
    # arbitrary positions; every block must come back, in order.
    blocks = [emit_result_block(make_result(pilot_seq=i + 1)) for i in range(len(positions))]
    lines = list(noise)
    for block, pos in sorted(zip(blocks, positions), key=lambda t: -t[1]):
        insert_at = min(t[1] if False else pos, len(lines))  # clamp
        lines[insert_at:insert_at] = block
    parsed, _ = parse_stream(lines)
    assert len(parsed) == len(blocks)
    assert {r.pilot_id for r in parsed} == {f"p-{i + 1:08d}" for i in range(len(blocks))}


# -- store -----------------------------------------------------------------


def test_ingest_accepts_then_dedupes():
    store = ResultStore()
    result = make_result()
    assert store.ingest(result) == "accepted"
    assert store.ingest(result) == "duplicate"
    assert len(store) == 1


def test_ingest_rejects_invalid():
    store = ResultStore()
    assert store.ingest(make_result(score=0.0)) == "invalid"
    assert len(store) == 0


def test_recent_is_newest_first_and_filtered():
    store = ResultStore()
    for i in range(5):
        store.ingest(make_result(pilot_seq=i + 1, started_at=float(i)))
    store.ingest(make_result(pilot_seq=6, entry_id="e2", started_at=10.0))
    recent = store.recent(entry_id="e1", limit=3)
    assert [r.started_at for r in recent] == [4.0, 3.0, 2.0]


# -- aggregation -------------------------------------------------------------


def test_aggregate_singleton():
    store = ResultStore()
    store.ingest(make_result(score=50.0))
    score = aggregate(store, "e1", "s1", now=0.0)
    assert score.median_score == 50.0
    assert score.n_samples == 1


def test_aggregate_odd_median():
    store = ResultStore()
    for i, value in enumerate([1.0, 9.0, 5.0]):
        store.ingest(make_result(pilot_seq=i + 1, score=value, started_at=float(i)))
    assert aggregate(store, "e1", "s1", now=10.0).median_score == 5.0


def test_aggregate_even_median_is_mean_of_middle_two():
    store = ResultStore()
    for i, value in enumerate([1.0, 2.0, 10.0, 20.0]):
        store.ingest(make_result(pilot_seq=i + 1, score=value, started_at=float(i)))
    assert aggregate(store, "e1", "s1", now=10.0).median_score == 6.0


def test_aggregate_takes_most_recent_window():
    store = ResultStore()
    for i in range(8):
        store.ingest(make_result(pilot_seq=i + 1, score=float(i + 1), started_at=float(i)))
    score = aggregate(store, "e1", "s1", now=10.0, window=5)
    # window holds scores 4..8, median 6
    assert score.n_samples == 5
    assert score.median_score == 6.0
    assert score.last_ts == 7.0


def test_aggregate_ignores_failures_and_returns_none_when_empty():
    store = ResultStore()
    store.ingest(make_result(score=0.0, exit_code=1))
    assert aggregate(store, "e1", "s1", now=0.0) is None


def test_staleness_weight_definition():
    store = ResultStore()
    store.ingest(make_result(started_at=0.0))
    assert aggregate(store, "e1", "s1", now=0.0).staleness_weight == 1.0
    assert aggregate(store, "e1", "s1", now=259200.0).staleness_weight == 0.5
    older = aggregate(store, "e1", "s1", now=500000.0).staleness_weight
    newer = aggregate(store, "e1", "s1", now=100000.0).staleness_weight
    assert older < newer


@given(st.lists(st.floats(min_value=0.001, max_value=1e6), min_size=1, max_size=12))
def test_median_lies_between_window_min_and_max(scores):
    store = ResultStore()
    for i, value in enumerate(scores):
        store.ingest(make_result(pilot_seq=i + 1, score=value, started_at=float(i)))
    aggregated = aggregate(store, "e1", "s1", now=100.0)
    window = scores[-5:]
    assert min(window) <= aggregated.median_score <= max(window)


# -- persistence --------------------------------------------------------------


def test_persist_writes_one_line_per_result(tmp_path):
    store = ResultStore()
    store.ingest(make_result(pilot_seq=1))
    store.ingest(make_result(pilot_seq=2))
    path = tmp_path / "results.jsonl"
    persist(store, path)
    assert len(path.read_text().splitlines()) == 2


def test_load_skips_corrupt_lines(tmp_path):
    store = ResultStore()
    for i in range(3):
        store.ingest(make_result(pilot_seq=i + 1))
    path = tmp_path / "results.jsonl"
    persist(store, path)
    lines = path.read_text().splitlines()
    lines[1] = lines[1][:-10]  # truncate one record
    path.write_text("\n".join(lines) + "\n")
    loaded, diagnostics = load(path)
    assert len(loaded) == 2
    assert len(diagnostics) == 1
    assert diagnostics[0].line_no == 2


def test_persist_load_persist_is_byte_identical(tmp_path):
    store = ResultStore()
    for i in range(100):
        store.ingest(
            make_result(
                pilot_seq=i + 1,
                score=50.0 + i * 0.137,
                started_at=i * 61.7,
                entry_id=f"e{i % 7}",
            )
        )
    first = tmp_path / "a.jsonl"
    second = tmp_path / "b.jsonl"
    persist(store, first)
    loaded, diagnostics = load(first)
    assert diagnostics == []
    persist(loaded, second)
    assert first.read_bytes() == second.read_bytes()
