"""Operator command line.

Subcommands: run a deterministic scenario, query a result store (scores,
results), build provisioning plans with the oracle gap, render report
figures, and serve the REST API. Exit codes are a stable contract:
0 success, 2 validation problem, 3 I/O problem.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from .collector import ResultStore, aggregate_all, load, persist
from .decision import (
    ORACLE_SEARCH_BOUND,
    eligible_candidates,
    plan_greedy,
    plan_oracle,
    price_performance,
)
from .engine import SimEngine
from .scenario import Scenario, ScenarioError, load_scenario

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_IO = 3


def fmt_num(value) -> str:
    """One canonical rendering per number, shared by tables and CSV."""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return repr(value)
    return str(value)


def print_table(headers: list[str], rows: list[list[str]], out=None) -> None:
    out = out or sys.stdout
    widths = [len(h) for h in headers]
    for row in rows:
        widths = [max(w, len(cell)) for w, cell in zip(widths, row)]
    line = "  ".join(h.ljust(w) for h, w in zip(headers, widths))
    print(line, file=out)
    print("  ".join("-" * w for w in widths), file=out)
    for row in rows:
        print("  ".join(cell.ljust(w) for cell, w in zip(row, widths)), file=out)


def write_csv(path: str, headers: list[str], rows: list[list[str]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(headers)
        writer.writerows(rows)


def store_now(store: ResultStore) -> float:
    """Headless queries measure age relative to the newest stored sample."""
    return max((r.started_at for r in store.results), default=0.0)


def build_summary(engine: SimEngine, duration_s: float) -> dict:
    scenario = engine.scenario
    spec_id = scenario.policies.runner.spec_id
    scores = engine.scores(spec_id)
    campaigns = []
    for campaign in engine.runner.campaigns():
        campaigns.append(
            {
                "campaign_id": campaign.campaign_id,
                "created_at": campaign.created_at,
                "spec_id": campaign.policy.spec_id,
                "mode": campaign.policy.mode,
                "selected": len(campaign.selected),
                "counts": engine.campaign_status(campaign.campaign_id),
            }
        )
    summary = {
        "schema_version": 1,
        "seed": scenario.seed,
        "duration_s": duration_s,
        "sim_time": engine.clock,
        "pilot_counts": engine.pilot_counts(),
        "campaigns": campaigns,
        "scores": [
            {
                "entry_id": s.entry_id,
                "spec_id": s.spec_id,
                "median_score": s.median_score,
                "n_samples": s.n_samples,
                "last_ts": s.last_ts,
                "age_s": s.age_s,
                "staleness_weight": s.staleness_weight,
            }
            for s in scores
        ],
        "plan": None,
        "unknown_entries": [],
    }
    demand = scenario.policies.demand
    if demand is not None and demand > 0:
        plan, unknown = engine.plan(demand, spec_id)
        summary["plan"] = {
            "demand": demand,
            "allocation": plan.allocation,
            "total_cost": plan.total_cost,
            "achieved_throughput": plan.achieved_throughput,
            "feasible": plan.feasible,
        }
        summary["unknown_entries"] = unknown
    return summary


def run_scenario(
    scenario_path: str,
    duration_s: float,
    out_dir: str,
    seed_override: Optional[int] = None,
) -> int:
    try:
        scenario = load_scenario(scenario_path)
    except ScenarioError as exc:
        print("scenario validation failed:", file=sys.stderr)
        for violation in exc.violations:
            print(f"  - {violation}", file=sys.stderr)
        return EXIT_VALIDATION
    if seed_override is not None:
        scenario = replace(scenario, seed=seed_override)
    engine = SimEngine(scenario)
    engine.run_until(duration_s)
    try:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        persist(engine.store, out / "results.jsonl")
        with open(out / "trace.jsonl", "w", encoding="utf-8") as fh:
            for record in engine.trace:
                fh.write(json.dumps(record.to_dict(), separators=(",", ":")) + "\n")
        summary = build_summary(engine, duration_s)
        with open(out / "summary.json", "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=2)
            fh.write("\n")
    except OSError as exc:
        print(f"cannot write outputs: {exc}", file=sys.stderr)
        return EXIT_IO
    print(
        f"simulated {engine.clock}s: {len(engine.store)} results, "
        f"{len(engine.trace)} events -> {out_dir}"
    )
    return EXIT_OK


def _load_store(store_path: str) -> ResultStore:
    store, diagnostics = load(store_path)
    for diagnostic in diagnostics:
        print(
            f"store line {diagnostic.line_no}: {diagnostic.code} {diagnostic.detail}",
            file=sys.stderr,
        )
    return store


def _load_scenario_opt(path: Optional[str]) -> Optional[Scenario]:
    if path is None:
        return None
    return load_scenario(path)


def cmd_scores(args) -> int:
    try:
        store = _load_store(args.store)
        scenario = _load_scenario_opt(args.scenario)
    except OSError as exc:
        print(f"cannot read store: {exc}", file=sys.stderr)
        return EXIT_IO
    except ScenarioError as exc:
        print(f"scenario invalid: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    now = store_now(store)
    spec_ids = sorted({r.spec_id for r in store.results})
    if args.spec:
        spec_ids = [args.spec]
    prices = {}
    if scenario is not None:
        prices = {e.entry_id: e.price_per_hour for e in scenario.entries}
    headers = ["entry_id", "spec_id", "median_score", "n_samples", "last_ts", "age_s", "staleness"]
    if prices:
        headers.append("price_perf")
    rows = []
    for spec_id in spec_ids:
        for score in aggregate_all(store, spec_id, now):
            row = [
                score.entry_id,
                score.spec_id,
                fmt_num(score.median_score),
                fmt_num(score.n_samples),
                fmt_num(score.last_ts),
                fmt_num(score.age_s),
                fmt_num(score.staleness_weight),
            ]
            if prices:
                ratio = (
                    price_performance(prices[score.entry_id], score.median_score)
                    if score.entry_id in prices
                    else float("inf")
                )
                row.append(fmt_num(ratio))
            rows.append(row)
    if prices:
        rows.sort(key=lambda r: (float(r[-1]), r[0]))
    print_table(headers, rows)
    if args.csv:
        write_csv(args.csv, headers, rows)
    return EXIT_OK


def cmd_results(args) -> int:
    try:
        store = _load_store(args.store)
    except OSError as exc:
        print(f"cannot read store: {exc}", file=sys.stderr)
        return EXIT_IO
    records = store.recent(entry_id=args.entry, spec_id=args.spec, limit=args.limit)
    headers = ["pilot_id", "entry_id", "spec_id", "score", "duration_s", "started_at", "exit_code"]
    rows = [
        [
            r.pilot_id,
            r.entry_id,
            r.spec_id,
            fmt_num(r.score),
            fmt_num(r.duration_s),
            fmt_num(r.started_at),
            fmt_num(r.exit_code),
        ]
        for r in records
    ]
    print_table(headers, rows)
    if args.csv:
        write_csv(args.csv, headers, rows)
    return EXIT_OK


def cmd_plan(args) -> int:
    if args.demand is None or args.demand <= 0:
        print("--demand must be a positive number", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        store = _load_store(args.store)
        scenario = load_scenario(args.scenario)
    except OSError as exc:
        print(f"cannot read inputs: {exc}", file=sys.stderr)
        return EXIT_IO
    except ScenarioError as exc:
        print(f"scenario invalid: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    spec_id = args.spec or scenario.policies.runner.spec_id
    now = store_now(store)
    scores = aggregate_all(store, spec_id, now)
    candidates, unknown = eligible_candidates(
        scores, list(scenario.entries), now, ttl_s=scenario.policies.ttl_s
    )
    greedy = plan_greedy(args.demand, candidates)
    space = 1
    for candidate in candidates:
        space *= candidate.cap + 1
    oracle = None
    if 0 < space <= ORACLE_SEARCH_BOUND and candidates:
        oracle = plan_oracle(args.demand, candidates)

    by_id = {c.entry_id: c for c in candidates}
    headers = ["entry_id", "count", "score", "price_per_hour", "price_perf"]
    rows = []
    for entry_id, count in greedy.allocation.items():
        candidate = by_id[entry_id]
        rows.append(
            [
                entry_id,
                fmt_num(count),
                fmt_num(candidate.score),
                fmt_num(candidate.price_per_hour),
                fmt_num(price_performance(candidate.price_per_hour, candidate.score)),
            ]
        )
    print_table(headers, rows)
    print(f"demand: {fmt_num(args.demand)}")
    print(f"greedy cost: {fmt_num(greedy.total_cost)}")
    print(f"greedy throughput: {fmt_num(greedy.achieved_throughput)}")
    print(f"feasible: {fmt_num(greedy.feasible)}")
    if oracle is not None:
        gap_pct = (
            (greedy.total_cost - oracle.total_cost) / oracle.total_cost * 100.0
            if oracle.total_cost > 0
            else 0.0
        )
        print(f"oracle cost: {fmt_num(oracle.total_cost)}")
        print(f"gap: {fmt_num(round(gap_pct, 1))}%")
    if unknown:
        print(f"unknown entries (need benchmarking): {' '.join(unknown)}")
    if args.csv:
        write_csv(args.csv, headers, rows)
    return EXIT_OK


def cmd_report(args) -> int:
    from .report import render_report

    try:
        store = _load_store(args.store)
        scenario = _load_scenario_opt(args.scenario)
    except OSError as exc:
        print(f"cannot read inputs: {exc}", file=sys.stderr)
        return EXIT_IO
    except ScenarioError as exc:
        print(f"scenario invalid: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        written = render_report(store, scenario, args.spec, args.out)
    except OSError as exc:
        print(f"cannot write report: {exc}", file=sys.stderr)
        return EXIT_IO
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .api import create_app

    try:
        scenario = load_scenario(args.scenario)
    except ScenarioError as exc:
        print(f"scenario invalid: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    engine = SimEngine(scenario)
    app = create_app(engine)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="glidebench",
        description="pressure-based pilot factory simulator and benchmark toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario and write artifacts")
    p_run.add_argument("--scenario", required=True)
    p_run.add_argument("--duration", type=float, required=True, help="simulated seconds")
    p_run.add_argument("--seed", type=int, default=None, help="override scenario seed")
    p_run.add_argument("--out", required=True, help="output directory")

    p_scores = sub.add_parser("scores", help="aggregate scores from a result store")
    p_scores.add_argument("--store", required=True)
    p_scores.add_argument("--spec", default=None)
    p_scores.add_argument("--scenario", default=None, help="supplies prices for ranking")
    p_scores.add_argument("--csv", default=None)

    p_results = sub.add_parser("results", help="list raw results, newest first")
    p_results.add_argument("--store", required=True)
    p_results.add_argument("--entry", default=None)
    p_results.add_argument("--spec", default=None)
    p_results.add_argument("--limit", type=int, default=100)
    p_results.add_argument("--csv", default=None)

    p_plan = sub.add_parser("plan", help="compute a provisioning plan")
    p_plan.add_argument("--store", required=True)
    p_plan.add_argument("--scenario", required=True, help="supplies prices and caps")
    p_plan.add_argument("--demand", type=float, required=True)
    p_plan.add_argument("--spec", default=None)
    p_plan.add_argument("--csv", default=None)

    p_report = sub.add_parser("report", help="render score figures and CSV")
    p_report.add_argument("--store", required=True)
    p_report.add_argument("--scenario", default=None)
    p_report.add_argument("--spec", default=None)
    p_report.add_argument("--out", required=True)

    p_serve = sub.add_parser("serve", help="serve the REST API over a scenario")
    p_serve.add_argument("--scenario", required=True)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8321)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return run_scenario(args.scenario, args.duration, args.out, args.seed)
    if args.command == "scores":
        return cmd_scores(args)
    if args.command == "results":
        return cmd_results(args)
    if args.command == "plan":
        return cmd_plan(args)
    if args.command == "report":
        return cmd_report(args)
    if args.command == "serve":
        return cmd_serve(args)
    return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
