"""Static report rendering: score figures plus their CSV backing data.

Figures go to files next to the delimited output; nothing interactive.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .collector import ResultStore, aggregate_all
from .decision import price_performance
from .scenario import Scenario

MAX_BAR_ENTRIES = 40


def render_report(
    store: ResultStore,
    scenario: Optional[Scenario],
    spec_id: Optional[str],
    out_dir: str | Path,
) -> list[str]:
    """Write scores.csv, a median-score bar chart, and (when prices are
    available) a price-versus-score scatter. Returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    now = max((r.started_at for r in store.results), default=0.0)
    spec_ids = sorted({r.spec_id for r in store.results})
    if spec_id is not None:
        spec_ids = [spec_id]
    scores = []
    for sid in spec_ids:
        scores.extend(aggregate_all(store, sid, now))
    prices = {}
    if scenario is not None:
        prices = {e.entry_id: e.price_per_hour for e in scenario.entries}

    written = []
    csv_path = out / "scores.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["entry_id", "spec_id", "median_score", "n_samples", "last_ts", "price_per_hour", "price_perf"]
        )
        for s in scores:
            price = prices.get(s.entry_id)
            ratio = price_performance(price, s.median_score) if price is not None else None
            writer.writerow(
                [
                    s.entry_id,
                    s.spec_id,
                    repr(s.median_score),
                    s.n_samples,
                    repr(s.last_ts),
                    "" if price is None else repr(price),
                    "" if ratio is None else repr(ratio),
                ]
            )
    written.append(str(csv_path))

    if scores:
        top = sorted(scores, key=lambda s: -s.median_score)[:MAX_BAR_ENTRIES]
        fig, ax = plt.subplots(figsize=(8, max(2.0, 0.25 * len(top))))
        ax.barh(
            [s.entry_id for s in reversed(top)],
            [s.median_score for s in reversed(top)],
            color="#4878a8",
        )
        ax.set_xlabel("median score (work units / s)")
        ax.set_title("benchmark scores by entry")
        fig.tight_layout()
        bar_path = out / "scores_by_entry.png"
        fig.savefig(bar_path, dpi=120)
        plt.close(fig)
        written.append(str(bar_path))

    priced = [s for s in scores if s.entry_id in prices]
    if priced:
        fig, ax = plt.subplots(figsize=(7, 5))
        xs = [s.median_score for s in priced]
        ys = [prices[s.entry_id] for s in priced]
        ax.scatter(xs, ys, color="#a84848")
        for s, x, y in zip(priced, xs, ys):
            ax.annotate(s.entry_id, (x, y), fontsize=7, xytext=(3, 3), textcoords="offset points")
        ax.set_xlabel("median score (work units / s)")
        ax.set_ylabel("price (USD / h)")
        ax.set_title("price versus performance")
        fig.tight_layout()
        scatter_path = out / "price_performance.png"
        fig.savefig(scatter_path, dpi=120)
        plt.close(fig)
        written.append(str(scatter_path))

    return written
