"""The simulation engine: one timeline driving factory, runner, collector.

Every mutation flows through the event loop, so two runs of the same
scenario and seed replay the identical event sequence. The engine also
exposes the query surface (status, scores, plans) that the API and CLI
serve, each answered from a snapshot taken between events.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable, Optional

from . import pilot as pilot_mod
from .collector import EntryScore, ResultStore, aggregate_all, parse_stream
from .decision import ProvisionPlan, eligible_candidates, plan_greedy
from .domain import NodeInfo, PilotState, Purpose
from .fabric import EventKind, EventQueue, RngStream, SimEvent, sample_queue_delay
from .factory import Factory, FactoryConfig, config_to_dict
from .pilot import PilotContext, PilotRunOutcome
from .runner import CampaignRecord, Runner, RunnerPolicy, policy_with_overrides
from .scenario import Scenario


@dataclass
class TraceRecord:
    time: float
    seq: int
    kind: str
    detail: dict[str, Any]

    def to_dict(self) -> dict[str, Any]:
        return {"time": self.time, "seq": self.seq, "kind": self.kind, **self.detail}


class SimEngine:
    """Deterministic composition of the whole loop for one scenario."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        policies = scenario.policies
        self.clock = 0.0
        self.queue = EventQueue()
        self.store = ResultStore()
        self.trace: list[TraceRecord] = []
        self._streams: dict[str, RngStream] = {}
        self._profiles = {p.entry_id: p for p in scenario.profiles}
        self._specs = {s.spec_id: s for s in scenario.specs}
        # Context snapshot taken at submission so in-flight pilots keep the
        # entry parameters they were submitted under.
        self._pilot_ctx: dict[str, PilotContext] = {}
        self._pilot_outcome: dict[str, PilotRunOutcome] = {}
        self.cycle_observers: list[Callable[[float, list[dict]], None]] = []

        config = FactoryConfig(
            version=1,
            entries=scenario.entries,
            benchmarks_enabled=policies.benchmarks_enabled,
            cycle_period_s=policies.cycle_period_s,
            max_submit_per_cycle=policies.max_submit_per_cycle,
        )
        self.factory = Factory(
            config,
            delay_sampler=self._sample_delay,
            known_specs=[s.spec_id for s in scenario.specs],
        )
        self.runner = Runner(policies.runner)
        self._next_campaign_at = 0.0
        self._next_pressure_at = 0.0 if policies.user_pressure else math.inf

        self.queue.push(0.0, EventKind.FACTORY_CYCLE)
        self.queue.push(0.0, EventKind.RUNNER_WAKE)

    # -- randomness ------------------------------------------------------

    def _stream(self, label: str) -> RngStream:
        stream = self._streams.get(label)
        if stream is None:
            stream = RngStream(self.scenario.seed, label)
            self._streams[label] = stream
        return stream

    def _sample_delay(self, entry_id: str) -> float:
        return sample_queue_delay(
            self._profiles[entry_id], self._stream(f"delay/{entry_id}")
        )

    # -- event processing --------------------------------------------------

    def run_until(self, t_end: float) -> None:
        """Process every event with time <= t_end, then park the clock there."""
        while len(self.queue) > 0:
            peek = self.queue.peek_time()
            if peek is None or peek > t_end:
                break
            event = self.queue.advance()
            self.clock = max(self.clock, event.time)
            self._dispatch(event)
        self.clock = max(self.clock, t_end)

    def _dispatch(self, event: SimEvent) -> None:
        if event.kind is EventKind.FACTORY_CYCLE:
            detail = self._on_cycle(event.time)
        elif event.kind is EventKind.RUNNER_WAKE:
            detail = self._on_wake(event.time)
        elif event.kind is EventKind.PILOT_START:
            detail = self._on_pilot_start(event.time, event.payload["pilot_id"])
        else:
            detail = self._on_pilot_finish(event.time, event.payload["pilot_id"])
        self.trace.append(
            TraceRecord(time=event.time, seq=event.seq, kind=event.kind.value, detail=detail)
        )

    def _schedule_new_submissions(self) -> None:
        for pilot_id, start_at in self.factory.drain_new_submissions():
            record = self.factory.get_pilot(pilot_id)
            assert record is not None
            entry = self.factory.entry(record.entry_id)
            assert entry is not None
            self._pilot_ctx[pilot_id] = PilotContext(
                pilot_id=pilot_id,
                entry_id=record.entry_id,
                purpose=record.purpose,
                spec=self._specs.get(record.spec_id) if record.spec_id else None,
                node=NodeInfo(
                    cores=1,
                    memory_mb=4096,
                    disk_mb=10240,
                    gpus=0,
                    cpu_model=entry.cpu_model,
                ),
                container_available=entry.supports_containers,
            )
            self.queue.push(start_at, EventKind.PILOT_START, {"pilot_id": pilot_id})

    def _on_cycle(self, now: float) -> dict[str, Any]:
        policies = self.scenario.policies
        if policies.user_pressure and now >= self._next_pressure_at:
            self._redraw_pressure(now)
            while self._next_pressure_at <= now:
                self._next_pressure_at += policies.user_pressure.period_s
        submissions = self.factory.cycle(now)
        self._schedule_new_submissions()
        for observer in self.cycle_observers:
            observer(now, submissions)
        self.queue.push(now + policies.cycle_period_s, EventKind.FACTORY_CYCLE)
        return {"submitted": [[s["entry_id"], s["count"]] for s in submissions]}

    def _redraw_pressure(self, now: float) -> None:
        pressure = self.scenario.policies.user_pressure
        assert pressure is not None
        for client_index in range(pressure.clients):
            client_id = f"fe{client_index + 1}"
            stream = self._stream(f"pressure/{client_id}")
            for entry in sorted(self.factory.config.entries, key=lambda e: e.entry_id):
                if not entry.enabled:
                    continue
                self.factory.set_pressure(
                    client_id, entry.entry_id, stream.integer(0, pressure.max_request)
                )

    def _on_wake(self, now: float) -> dict[str, Any]:
        policies = self.scenario.policies
        detail: dict[str, Any] = {}
        campaigns = []
        while now >= self._next_campaign_at:
            campaign = self.runner.trigger_campaign(
                self.factory, list(self.factory.config.entries), now
            )
            campaigns.append([campaign.campaign_id, len(campaign.selected)])
            if policies.campaign_period_s is None:
                self._next_campaign_at = math.inf
            else:
                self._next_campaign_at += policies.campaign_period_s
        if campaigns:
            detail["campaigns"] = campaigns
        retried = self.runner.on_wake(self.factory, now)
        if retried:
            detail["retried"] = retried
        self._schedule_new_submissions()
        self.queue.push(now + policies.runner_wake_period_s, EventKind.RUNNER_WAKE)
        return detail

    def _on_pilot_start(self, now: float, pilot_id: str) -> dict[str, Any]:
        record = self.factory.mark_running(pilot_id, now)
        if record.purpose is Purpose.BENCHMARK:
            self.runner.on_pilot_started(pilot_id, now)
        ctx = self._pilot_ctx.pop(pilot_id)
        outcome = pilot_mod.run(
            ctx,
            self._profiles[ctx.entry_id],
            self._stream(f"perf/{ctx.entry_id}"),
            started_at=now,
            user_payload_s=self.scenario.policies.user_payload_duration_s,
        )
        self._pilot_outcome[pilot_id] = outcome
        self.queue.push(
            now + outcome.payload_elapsed_s, EventKind.PILOT_FINISH, {"pilot_id": pilot_id}
        )
        return {"pilot_id": pilot_id, "entry_id": ctx.entry_id}

    def _on_pilot_finish(self, now: float, pilot_id: str) -> dict[str, Any]:
        outcome = self._pilot_outcome.pop(pilot_id)
        record = self.factory.mark_terminal(
            pilot_id, outcome.state, now, list(outcome.stderr_lines)
        )
        ingested = []
        results, _ = parse_stream(record.stderr_lines)
        for result in results:
            ingested.append(self.store.ingest(result))
        if record.purpose is Purpose.BENCHMARK:
            self.runner.on_pilot_terminal(pilot_id, outcome.state)
        detail: dict[str, Any] = {
            "pilot_id": pilot_id,
            "entry_id": record.entry_id,
            "state": outcome.state.value,
        }
        if ingested:
            detail["ingested"] = ingested
        return detail

    # -- query surface -----------------------------------------------------

    def status(self) -> dict[str, Any]:
        queued = len(
            self.factory.query_pilots(purpose=Purpose.BENCHMARK, states=[PilotState.QUEUED])
        )
        running = len(
            self.factory.query_pilots(purpose=Purpose.BENCHMARK, states=[PilotState.RUNNING])
        )
        return {
            "benchmark_pilots": {"queued": queued, "running": running},
            "factory_version": self.factory.version,
            "sim_time": self.clock,
        }

    def scores(self, spec_id: str) -> list[EntryScore]:
        policies = self.scenario.policies
        return aggregate_all(
            self.store,
            spec_id,
            now=self.clock,
            window=policies.aggregate_window,
            half_life_s=policies.half_life_s,
        )

    def plan(self, demand: float, spec_id: str) -> tuple[ProvisionPlan, list[str]]:
        in_flight = {
            e.entry_id: self.factory.in_flight(e.entry_id)
            for e in self.factory.config.entries
        }
        candidates, unknown = eligible_candidates(
            self.scores(spec_id),
            list(self.factory.config.entries),
            now=self.clock,
            ttl_s=self.scenario.policies.ttl_s,
            in_flight=in_flight,
        )
        return plan_greedy(demand, candidates), unknown

    def trigger_campaign(self, **overrides: Any) -> CampaignRecord:
        policy = policy_with_overrides(self.runner.policy, **overrides)
        campaign = self.runner.trigger_campaign(
            self.factory, list(self.factory.config.entries), self.clock, policy
        )
        self._schedule_new_submissions()
        return campaign

    def campaign_status(self, campaign_id: str) -> dict[str, int]:
        return self.runner.campaign_status(campaign_id, self.factory)

    def reconfig(self, document: str) -> int:
        return self.factory.reconfig(document)

    def config_dict(self) -> dict[str, Any]:
        return config_to_dict(self.factory.config)

    def pilot_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for record in self.factory.query_pilots():
            key = f"{record.purpose.value}/{record.state.value}"
            counts[key] = counts.get(key, 0) + 1
        return dict(sorted(counts.items()))

    def default_policy(self) -> RunnerPolicy:
        return self.runner.policy
