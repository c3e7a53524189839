"""Cost-aware provisioning: scores plus prices into a minimum-cost plan.

The planner is a greedy covering heuristic ranked by price-performance
ratio; plan_oracle is the exhaustive ground truth used to measure the
heuristic gap on small instances. Everything here is a pure function.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

from .collector import EntryScore
from .domain import EntryConfig

DEFAULT_TTL_S = 604800.0  # 7 days

ORACLE_SEARCH_BOUND = 10**6


@dataclass(frozen=True)
class Candidate:
    entry_id: str
    score: float
    price_per_hour: float
    cap: int


@dataclass(frozen=True)
class ProvisionPlan:
    allocation: dict[str, int] = field(default_factory=dict)
    total_cost: float = 0.0
    achieved_throughput: float = 0.0
    feasible: bool = False


@dataclass(frozen=True)
class FlipReport:
    """Score and ratio orderings for a pair of candidate generations."""

    score_winner: str  # "first" | "second" | "tie"
    ratio_winner: str
    first_ratio: float
    second_ratio: float


def price_performance(price: float, score: float) -> float:
    """Dollars per hour per unit of throughput; lower is better."""
    if score <= 0:
        raise ValueError("price_performance undefined for non-positive score")
    return price / score


def eligible_candidates(
    scores: Iterable[EntryScore],
    entries: Iterable[EntryConfig],
    now: float,
    ttl_s: float = DEFAULT_TTL_S,
    in_flight: Optional[Mapping[str, int]] = None,
) -> tuple[list[Candidate], list[str]]:
    """Split enabled entries into plan candidates and unknowns.

    A candidate needs a score fresher than ttl_s and spare pilot capacity.
    Enabled entries without a fresh score come back in the unknown list:
    they are what the runner should benchmark next.
    """
    in_flight = in_flight or {}
    by_entry = {s.entry_id: s for s in scores}
    candidates = []
    unknown = []
    for entry in sorted(entries, key=lambda e: e.entry_id):
        if not entry.enabled:
            continue
        score = by_entry.get(entry.entry_id)
        if score is None or (now - score.last_ts) > ttl_s:
            unknown.append(entry.entry_id)
            continue
        cap = entry.max_pilots - in_flight.get(entry.entry_id, 0)
        if cap <= 0:
            continue
        candidates.append(
            Candidate(
                entry_id=entry.entry_id,
                score=score.median_score,
                price_per_hour=entry.price_per_hour,
                cap=cap,
            )
        )
    return candidates, unknown


def _plan_from_allocation(counts: Mapping[str, int], by_id: Mapping[str, Candidate], demand: float) -> ProvisionPlan:
    allocation = {e: n for e, n in sorted(counts.items()) if n > 0}
    cost = sum(n * by_id[e].price_per_hour for e, n in allocation.items())
    throughput = sum(n * by_id[e].score for e, n in allocation.items())
    return ProvisionPlan(
        allocation=allocation,
        total_cost=cost,
        achieved_throughput=throughput,
        feasible=throughput >= demand,
    )


def plan_greedy(demand: float, candidates: Iterable[Candidate]) -> ProvisionPlan:
    """Fill the demand from the best price-performance ratio downward.

    Takes ceil(remaining / score) pilots (capped) from each candidate in
    ratio order, ties broken by entry_id. When capacity runs out first the
    plan is infeasible and carries the full partial allocation.
    """
    if demand <= 0:
        raise ValueError("demand must be positive")
    ranked = sorted(
        (c for c in candidates if c.cap > 0),
        key=lambda c: (price_performance(c.price_per_hour, c.score), c.entry_id),
    )
    by_id = {c.entry_id: c for c in ranked}
    counts: dict[str, int] = {}
    remaining = demand
    for candidate in ranked:
        if remaining <= 0:
            break
        take = min(candidate.cap, math.ceil(remaining / candidate.score))
        counts[candidate.entry_id] = take
        remaining -= take * candidate.score
    return _plan_from_allocation(counts, by_id, demand)


def plan_oracle(demand: float, candidates: Iterable[Candidate]) -> ProvisionPlan:
    """Exhaustive minimum-cost covering plan for small instances.

    Enumerates every allocation within caps; among feasible ones minimizes
    cost, then maximizes throughput, then takes the lexicographically
    smallest allocation vector in entry_id order. Refuses instances whose
    search space exceeds ORACLE_SEARCH_BOUND.
    """
    if demand <= 0:
        raise ValueError("demand must be positive")
    ranked = sorted((c for c in candidates if c.cap > 0), key=lambda c: c.entry_id)
    by_id = {c.entry_id: c for c in ranked}
    space = 1
    for candidate in ranked:
        space *= candidate.cap + 1
        if space > ORACLE_SEARCH_BOUND:
            raise ValueError(
                f"oracle search space exceeds bound {ORACLE_SEARCH_BOUND}"
            )
    best_key = None
    best_counts = None
    for vector in itertools.product(*(range(c.cap + 1) for c in ranked)):
        throughput = sum(n * c.score for n, c in zip(vector, ranked))
        if throughput < demand:
            continue
        cost = sum(n * c.price_per_hour for n, c in zip(vector, ranked))
        key = (cost, -throughput, vector)
        if best_key is None or key < best_key:
            best_key = key
            best_counts = vector
    if best_counts is None:
        # Nothing covers the demand; report the max-throughput allocation.
        return _plan_from_allocation({c.entry_id: c.cap for c in ranked}, by_id, demand)
    counts = {c.entry_id: n for c, n in zip(ranked, best_counts)}
    return _plan_from_allocation(counts, by_id, demand)


def preference_flip_check(first: Candidate, second: Candidate) -> FlipReport:
    """Report which of two candidates wins on raw score and on ratio.

    Demonstrates that a higher-priced but sufficiently faster generation
    can win outright once price-performance is considered.
    """

    def ordering(a: float, b: float, lower_wins: bool) -> str:
        if a == b:
            return "tie"
        if (a < b) == lower_wins:
            return "first"
        return "second"

    first_ratio = price_performance(first.price_per_hour, first.score)
    second_ratio = price_performance(second.price_per_hour, second.score)
    return FlipReport(
        score_winner=ordering(first.score, second.score, lower_wins=False),
        ratio_winner=ordering(first_ratio, second_ratio, lower_wins=True),
        first_ratio=first_ratio,
        second_ratio=second_ratio,
    )
