"""Benchmark campaign control.

Decides which entries are due, applies the sampling policy, flips the
factory's benchmark gate when needed, launches pilots through the single
submission API under a concurrency throttle, and tracks campaign status.

Cadence is keyed on benchmark start times. To keep consecutive starts at
least min_interval_s apart even while pilots sit in queue, the runner
claims an (entry, spec) pair from selection until its pilot reaches a
terminal state; claimed pairs are never selected again in the meantime.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional

from .domain import EntryConfig, PilotState, Purpose
from .factory import Factory, FactoryRejection, config_input_document

DEFAULT_MIN_INTERVAL_S = 86400.0
DEFAULT_MAX_CONCURRENT = 200
DEFAULT_WAKE_PERIOD_S = 300.0

MODES = ("all_due", "representative_per_class", "new_only")

CAMPAIGN_ID_FORMAT = "c-{:08d}"


class CampaignError(Exception):
    pass


class UnknownCampaign(KeyError):
    pass


@dataclass(frozen=True)
class RunnerPolicy:
    spec_id: str
    mode: str = "all_due"
    min_interval_s: float = DEFAULT_MIN_INTERVAL_S
    max_concurrent_benchmarks: int = DEFAULT_MAX_CONCURRENT


def validate_policy(policy: RunnerPolicy) -> list[str]:
    violations = []
    if policy.mode not in MODES:
        violations.append(f"mode unknown: {policy.mode}")
    if policy.min_interval_s <= 0:
        violations.append("min_interval_s not positive")
    if policy.max_concurrent_benchmarks < 1:
        violations.append("max_concurrent_benchmarks < 1")
    return violations


@dataclass
class CampaignRecord:
    campaign_id: str
    created_at: float
    policy: RunnerPolicy
    selected: tuple[str, ...]
    pilot_map: dict[str, str] = field(default_factory=dict)
    terminal_counts: dict[str, int] = field(
        default_factory=lambda: {"completed": 0, "failed": 0, "timed_out": 0}
    )
    pending: list[str] = field(default_factory=list)


def due_entries(
    entries: list[EntryConfig],
    history: Mapping[tuple[str, str], float],
    now: float,
    policy: RunnerPolicy,
) -> list[str]:
    """Entries eligible for a new benchmark under the cadence rule.

    Never-benchmarked entries are always due; others once their last start
    is at least min_interval_s old. Sorted by entry_id.
    """
    due = []
    for entry in entries:
        if not entry.enabled:
            continue
        last_start = history.get((entry.entry_id, policy.spec_id))
        if last_start is None or now - last_start >= policy.min_interval_s:
            due.append(entry.entry_id)
    return sorted(due)


def sample_representatives(
    due: list[str],
    fingerprints: Mapping[str, str],
    history: Mapping[tuple[str, str], float],
    policy: RunnerPolicy,
) -> list[str]:
    """Shrink the due list according to the sampling mode.

    representative_per_class keeps, per hardware class, the entry whose
    last benchmark start is oldest (lexicographic tie-break) plus every
    never-benchmarked entry regardless of class.
    """
    if policy.mode == "all_due":
        return sorted(due)
    never = [e for e in due if (e, policy.spec_id) not in history]
    if policy.mode == "new_only":
        return sorted(never)
    if policy.mode != "representative_per_class":
        raise CampaignError(f"mode unknown: {policy.mode}")
    by_class: dict[str, list[str]] = {}
    for entry_id in due:
        by_class.setdefault(fingerprints.get(entry_id, ""), []).append(entry_id)
    selected = set(never)
    for members in by_class.values():
        representative = min(
            members,
            key=lambda e: (history.get((e, policy.spec_id), -math.inf), e),
        )
        selected.add(representative)
    return sorted(selected)


class Runner:
    """Campaign orchestration state: history, claims, open campaigns."""

    def __init__(self, policy: RunnerPolicy):
        self.policy = policy
        self._campaigns: dict[str, CampaignRecord] = {}
        self._next_campaign_seq = 1
        # Last benchmark start per (entry_id, spec_id).
        self._history: dict[tuple[str, str], float] = {}
        # (entry_id, spec_id) pairs selected and not yet terminal.
        self._claims: set[tuple[str, str]] = set()
        # pilot_id -> (campaign_id, entry_id, spec_id)
        self._pilot_owner: dict[str, tuple[str, str, str]] = {}

    @property
    def history(self) -> dict[tuple[str, str], float]:
        return dict(self._history)

    def campaigns(self) -> list[CampaignRecord]:
        return [self._campaigns[c] for c in sorted(self._campaigns)]

    def get_campaign(self, campaign_id: str) -> CampaignRecord:
        try:
            return self._campaigns[campaign_id]
        except KeyError:
            raise UnknownCampaign(campaign_id) from None

    # -- selection ------------------------------------------------------

    def select_entries(self, entries: list[EntryConfig], now: float, policy: RunnerPolicy) -> list[str]:
        """due -> unclaimed -> sampling policy, in that order."""
        from .domain import hardware_fingerprint

        due = due_entries(entries, self._history, now, policy)
        due = [e for e in due if (e, policy.spec_id) not in self._claims]
        fingerprints = {e.entry_id: hardware_fingerprint(e.cpu_model) for e in entries}
        return sample_representatives(due, fingerprints, self._history, policy)

    # -- campaign lifecycle ----------------------------------------------

    def launch_campaign(
        self,
        factory: Factory,
        selected: list[str],
        spec_id: str,
        now: float,
        policy: Optional[RunnerPolicy] = None,
    ) -> CampaignRecord:
        """Enable benchmarks if needed, then submit pilots under the throttle.

        Entries that do not fit under max_concurrent_benchmarks, or whose
        submission is rejected because the entry is full, stay pending and
        are retried on every wake. A reconfig failure aborts the campaign
        before any pilot is submitted.
        """
        if not selected:
            raise CampaignError("selected entries empty")
        policy = policy or self.policy
        if not factory.config.benchmarks_enabled:
            # One reconfig per campaign at most; failure propagates before
            # any submission happens.
            factory.reconfig(
                config_input_document(factory.config, benchmarks_enabled=True)
            )
        campaign = CampaignRecord(
            campaign_id=CAMPAIGN_ID_FORMAT.format(self._next_campaign_seq),
            created_at=now,
            policy=policy,
            selected=tuple(sorted(set(selected))),
            pending=sorted(set(selected)),
        )
        self._next_campaign_seq += 1
        self._campaigns[campaign.campaign_id] = campaign
        for entry_id in campaign.selected:
            self._claims.add((entry_id, policy.spec_id))
        self._drain_campaign(factory, campaign, now)
        factory.mailbox_post(
            sender="runner",
            recipient="viewer",
            kind="campaign_notice",
            body=json.dumps(
                {"campaign_id": campaign.campaign_id, "selected": len(campaign.selected)}
            ),
            now=now,
        )
        return campaign

    def trigger_campaign(
        self,
        factory: Factory,
        entries: list[EntryConfig],
        now: float,
        policy: Optional[RunnerPolicy] = None,
    ) -> CampaignRecord:
        """Select per policy and launch; an empty selection still records a
        campaign so callers can observe that nothing was due."""
        policy = policy or self.policy
        selected = self.select_entries(entries, now, policy)
        if not selected:
            campaign = CampaignRecord(
                campaign_id=CAMPAIGN_ID_FORMAT.format(self._next_campaign_seq),
                created_at=now,
                policy=policy,
                selected=(),
            )
            self._next_campaign_seq += 1
            self._campaigns[campaign.campaign_id] = campaign
            return campaign
        return self.launch_campaign(factory, selected, policy.spec_id, now, policy)

    def _drain_campaign(self, factory: Factory, campaign: CampaignRecord, now: float) -> int:
        budget = campaign.policy.max_concurrent_benchmarks - factory.live_benchmark_count()
        submitted = 0
        still_pending = []
        for entry_id in campaign.pending:
            if budget <= 0:
                still_pending.append(entry_id)
                continue
            try:
                pilot_id = factory.submit_single(
                    entry_id, Purpose.BENCHMARK, campaign.policy.spec_id, now
                )
            except FactoryRejection as exc:
                if exc.reason == "entry_full":
                    still_pending.append(entry_id)
                    continue
                # Entry vanished or was disabled by a reconfig: drop it and
                # release the claim so it can be reconsidered later.
                self._claims.discard((entry_id, campaign.policy.spec_id))
                campaign.terminal_counts["failed"] += 1
                campaign.pilot_map[entry_id] = ""
                continue
            campaign.pilot_map[entry_id] = pilot_id
            self._pilot_owner[pilot_id] = (
                campaign.campaign_id,
                entry_id,
                campaign.policy.spec_id,
            )
            budget -= 1
            submitted += 1
        campaign.pending = still_pending
        return submitted

    def on_wake(self, factory: Factory, now: float) -> int:
        """Retry pending submissions for every open campaign."""
        submitted = 0
        for campaign_id in sorted(self._campaigns):
            campaign = self._campaigns[campaign_id]
            if campaign.pending:
                submitted += self._drain_campaign(factory, campaign, now)
        return submitted

    # -- pilot feedback ---------------------------------------------------

    def on_pilot_started(self, pilot_id: str, now: float) -> None:
        owner = self._pilot_owner.get(pilot_id)
        if owner is None:
            return
        _, entry_id, spec_id = owner
        self._history[(entry_id, spec_id)] = now

    def on_pilot_terminal(self, pilot_id: str, state: PilotState) -> None:
        owner = self._pilot_owner.pop(pilot_id, None)
        if owner is None:
            return
        campaign_id, entry_id, spec_id = owner
        self._claims.discard((entry_id, spec_id))
        counts = self._campaigns[campaign_id].terminal_counts
        if state is PilotState.COMPLETED:
            counts["completed"] += 1
        elif state is PilotState.TIMED_OUT:
            counts["timed_out"] += 1
        else:
            counts["failed"] += 1

    # -- status -----------------------------------------------------------

    def campaign_status(self, campaign_id: str, factory: Factory) -> dict[str, int]:
        """Counts over the selected entries; always sums to len(selected)."""
        campaign = self.get_campaign(campaign_id)
        counts = {
            "queued": 0,
            "running": 0,
            "completed": 0,
            "failed": 0,
            "timed_out": 0,
            "pending_submit": len(campaign.pending),
        }
        bucket = {
            PilotState.QUEUED: "queued",
            PilotState.RUNNING: "running",
            PilotState.COMPLETED: "completed",
            PilotState.FAILED: "failed",
            PilotState.TIMED_OUT: "timed_out",
            PilotState.SUBMITTED: "queued",
        }
        for entry_id in campaign.selected:
            pilot_id = campaign.pilot_map.get(entry_id)
            if pilot_id is None:
                continue  # pending_submit already counted
            if pilot_id == "":
                counts["failed"] += 1
                continue
            pilot = factory.get_pilot(pilot_id)
            if pilot is None:
                counts["failed"] += 1
                continue
            counts[bucket[pilot.state]] += 1
        return counts

    def open_campaigns(self) -> list[str]:
        return [c.campaign_id for c in self.campaigns() if c.pending]


def policy_with_overrides(policy: RunnerPolicy, **overrides) -> RunnerPolicy:
    return replace(policy, **{k: v for k, v in overrides.items() if v is not None})
