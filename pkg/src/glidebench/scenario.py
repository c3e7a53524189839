"""Scenario files: the single JSON document that drives a simulation.

Top-level keys are exactly "seed", "entries", "specs", "policies". Each
entry object merges the public entry configuration with its hidden fabric
profile; the policies block carries the runner policy plus the scenario's
orchestration knobs. Unknown keys anywhere are load errors: scenarios are
fixtures, silent typos would poison them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from .collector import DEFAULT_HALF_LIFE_S, DEFAULT_WINDOW
from .decision import DEFAULT_TTL_S
from .domain import BenchmarkSpec, EntryConfig, validate_benchmark_spec
from .fabric import FabricProfile, validate_fabric_profile
from .factory import (
    DEFAULT_CYCLE_PERIOD_S,
    DEFAULT_MAX_SUBMIT_PER_CYCLE,
    parse_entry_config,
)
from .runner import (
    DEFAULT_MAX_CONCURRENT,
    DEFAULT_MIN_INTERVAL_S,
    DEFAULT_WAKE_PERIOD_S,
    RunnerPolicy,
    validate_policy,
)

TOP_LEVEL_KEYS = frozenset({"seed", "entries", "specs", "policies"})

PROFILE_KEYS = frozenset(
    {
        "true_perf",
        "perf_noise_cv",
        "queue_delay_median_s",
        "queue_delay_sigma",
        "failure_prob",
    }
)
ENTRY_CONFIG_KEYS = frozenset(
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
SPEC_KEYS = frozenset({"spec_id", "name", "image_ref", "work_units", "timeout_s"})
POLICY_KEYS = frozenset(
    {
        "spec_id",
        "mode",
        "min_interval_s",
        "max_concurrent_benchmarks",
        "campaign_period_s",
        "runner_wake_period_s",
        "cycle_period_s",
        "max_submit_per_cycle",
        "benchmarks_enabled",
        "demand",
        "ttl_s",
        "aggregate_window",
        "half_life_s",
        "user_pressure",
        "user_payload_duration_s",
    }
)
USER_PRESSURE_KEYS = frozenset({"clients", "max_request", "period_s"})


class ScenarioError(ValueError):
    """Scenario document rejected; .violations lists every problem."""

    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = violations


@dataclass(frozen=True)
class UserPressurePolicy:
    """Synthetic client demand: every period_s each client redraws, per
    entry, a random pressure in [0, max_request]."""

    clients: int = 1
    max_request: int = 10
    period_s: float = 1800.0


@dataclass(frozen=True)
class ScenarioPolicies:
    runner: RunnerPolicy
    campaign_period_s: Optional[float] = None
    runner_wake_period_s: float = DEFAULT_WAKE_PERIOD_S
    cycle_period_s: float = DEFAULT_CYCLE_PERIOD_S
    max_submit_per_cycle: int = DEFAULT_MAX_SUBMIT_PER_CYCLE
    benchmarks_enabled: bool = False
    demand: Optional[float] = None
    ttl_s: float = DEFAULT_TTL_S
    aggregate_window: int = DEFAULT_WINDOW
    half_life_s: float = DEFAULT_HALF_LIFE_S
    user_pressure: Optional[UserPressurePolicy] = None
    user_payload_duration_s: float = 3600.0


@dataclass(frozen=True)
class Scenario:
    seed: int
    entries: tuple[EntryConfig, ...]
    profiles: tuple[FabricProfile, ...] = field(default_factory=tuple)
    specs: tuple[BenchmarkSpec, ...] = field(default_factory=tuple)
    policies: ScenarioPolicies = None  # type: ignore[assignment]

    def profile(self, entry_id: str) -> FabricProfile:
        for profile in self.profiles:
            if profile.entry_id == entry_id:
                return profile
        raise KeyError(entry_id)

    def spec(self, spec_id: str) -> Optional[BenchmarkSpec]:
        for spec in self.specs:
            if spec.spec_id == spec_id:
                return spec
        return None


def _parse_entry(obj: Any, violations: list[str]) -> Optional[tuple[EntryConfig, FabricProfile]]:
    if not isinstance(obj, dict):
        violations.append("entry not an object")
        return None
    unknown = sorted(set(obj) - ENTRY_CONFIG_KEYS - PROFILE_KEYS)
    if unknown:
        violations.append(f"entry has unknown keys: {unknown}")
        return None
    config_part = {k: v for k, v in obj.items() if k in ENTRY_CONFIG_KEYS}
    entry = parse_entry_config(config_part, violations)
    if entry is None:
        return None
    if "true_perf" not in obj:
        violations.append(f"{entry.entry_id}: missing true_perf")
        return None
    try:
        profile = FabricProfile(
            entry_id=entry.entry_id,
            true_perf=float(obj["true_perf"]),
            perf_noise_cv=float(obj.get("perf_noise_cv", 0.0)),
            queue_delay_median_s=float(obj.get("queue_delay_median_s", 0.0)),
            queue_delay_sigma=float(obj.get("queue_delay_sigma", 0.0)),
            failure_prob=float(obj.get("failure_prob", 0.0)),
        )
    except (TypeError, ValueError) as exc:
        violations.append(f"{entry.entry_id}: profile field malformed: {exc}")
        return None
    profile_violations = validate_fabric_profile(profile)
    if profile_violations:
        violations.extend(f"{entry.entry_id}: {v}" for v in profile_violations)
        return None
    return entry, profile


def _parse_spec(obj: Any, violations: list[str]) -> Optional[BenchmarkSpec]:
    if not isinstance(obj, dict):
        violations.append("spec not an object")
        return None
    unknown = sorted(set(obj) - SPEC_KEYS)
    if unknown:
        violations.append(f"spec has unknown keys: {unknown}")
        return None
    if "spec_id" not in obj:
        violations.append("spec missing spec_id")
        return None
    try:
        spec = BenchmarkSpec(
            spec_id=str(obj["spec_id"]),
            name=str(obj.get("name", obj["spec_id"])),
            image_ref=str(obj.get("image_ref", "")),
            work_units=int(obj.get("work_units", 1)),
            timeout_s=int(obj.get("timeout_s", 3600)),
        )
    except (TypeError, ValueError) as exc:
        violations.append(f"spec field malformed: {exc}")
        return None
    spec_violations = validate_benchmark_spec(spec)
    if spec_violations:
        violations.extend(f"{spec.spec_id}: {v}" for v in spec_violations)
        return None
    return spec


def _parse_policies(
    obj: Any, spec_ids: list[str], violations: list[str]
) -> Optional[ScenarioPolicies]:
    if obj is None:
        obj = {}
    if not isinstance(obj, dict):
        violations.append("policies not an object")
        return None
    unknown = sorted(set(obj) - POLICY_KEYS)
    if unknown:
        violations.append(f"policies has unknown keys: {unknown}")
        return None
    spec_id = obj.get("spec_id", spec_ids[0] if spec_ids else None)
    if spec_id is None:
        violations.append("policies.spec_id missing and no specs defined")
        return None
    if spec_id not in spec_ids:
        violations.append(f"policies.spec_id unknown: {spec_id}")
        return None
    runner = RunnerPolicy(
        spec_id=str(spec_id),
        mode=str(obj.get("mode", "all_due")),
        min_interval_s=float(obj.get("min_interval_s", DEFAULT_MIN_INTERVAL_S)),
        max_concurrent_benchmarks=int(
            obj.get("max_concurrent_benchmarks", DEFAULT_MAX_CONCURRENT)
        ),
    )
    policy_violations = validate_policy(runner)
    if policy_violations:
        violations.extend(policy_violations)
        return None
    user_pressure = None
    if obj.get("user_pressure") is not None:
        raw = obj["user_pressure"]
        if not isinstance(raw, dict) or (set(raw) - USER_PRESSURE_KEYS):
            violations.append("user_pressure malformed")
            return None
        user_pressure = UserPressurePolicy(
            clients=int(raw.get("clients", 1)),
            max_request=int(raw.get("max_request", 10)),
            period_s=float(raw.get("period_s", 1800.0)),
        )
        if user_pressure.clients < 1 or user_pressure.max_request < 0 or user_pressure.period_s <= 0:
            violations.append("user_pressure values out of range")
            return None
    campaign_period = obj.get("campaign_period_s")
    demand = obj.get("demand")
    policies = ScenarioPolicies(
        runner=runner,
        campaign_period_s=float(campaign_period) if campaign_period is not None else None,
        runner_wake_period_s=float(obj.get("runner_wake_period_s", DEFAULT_WAKE_PERIOD_S)),
        cycle_period_s=float(obj.get("cycle_period_s", DEFAULT_CYCLE_PERIOD_S)),
        max_submit_per_cycle=int(obj.get("max_submit_per_cycle", DEFAULT_MAX_SUBMIT_PER_CYCLE)),
        benchmarks_enabled=bool(obj.get("benchmarks_enabled", False)),
        demand=float(demand) if demand is not None else None,
        ttl_s=float(obj.get("ttl_s", DEFAULT_TTL_S)),
        aggregate_window=int(obj.get("aggregate_window", DEFAULT_WINDOW)),
        half_life_s=float(obj.get("half_life_s", DEFAULT_HALF_LIFE_S)),
        user_pressure=user_pressure,
        user_payload_duration_s=float(obj.get("user_payload_duration_s", 3600.0)),
    )
    if policies.cycle_period_s <= 0 or policies.runner_wake_period_s <= 0:
        violations.append("periods must be positive")
        return None
    if policies.campaign_period_s is not None and policies.campaign_period_s <= 0:
        violations.append("campaign_period_s must be positive")
        return None
    return policies


def parse_scenario(document: str) -> Scenario:
    try:
        obj = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ScenarioError(
            [f"parse error at line {exc.lineno} column {exc.colno}: {exc.msg}"]
        ) from exc
    if not isinstance(obj, dict):
        raise ScenarioError(["document not a JSON object"])
    violations: list[str] = []
    unknown = sorted(set(obj) - TOP_LEVEL_KEYS)
    if unknown:
        violations.append(f"unknown keys: {unknown}")
    if "seed" not in obj or not isinstance(obj["seed"], int) or isinstance(obj["seed"], bool):
        violations.append("seed missing or not an integer")
    raw_entries = obj.get("entries", [])
    if not isinstance(raw_entries, list) or not raw_entries:
        violations.append("entries missing or empty")
        raw_entries = []
    entries: list[EntryConfig] = []
    profiles: list[FabricProfile] = []
    seen = set()
    for raw in raw_entries:
        parsed = _parse_entry(raw, violations)
        if parsed is None:
            continue
        entry, profile = parsed
        if entry.entry_id in seen:
            violations.append(f"duplicate entry_id: {entry.entry_id}")
            continue
        seen.add(entry.entry_id)
        entries.append(entry)
        profiles.append(profile)
    raw_specs = obj.get("specs", [])
    if not isinstance(raw_specs, list):
        violations.append("specs not an array")
        raw_specs = []
    specs = []
    seen_specs = set()
    for raw in raw_specs:
        spec = _parse_spec(raw, violations)
        if spec is None:
            continue
        if spec.spec_id in seen_specs:
            violations.append(f"duplicate spec_id: {spec.spec_id}")
            continue
        seen_specs.add(spec.spec_id)
        specs.append(spec)
    policies = _parse_policies(obj.get("policies"), [s.spec_id for s in specs], violations)
    if violations or policies is None:
        raise ScenarioError(violations)
    return Scenario(
        seed=int(obj["seed"]),
        entries=tuple(entries),
        profiles=tuple(profiles),
        specs=tuple(specs),
        policies=policies,
    )


def load_scenario(path: str | Path) -> Scenario:
    try:
        document = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError([f"cannot read scenario: {exc}"]) from exc
    return parse_scenario(document)


def scenario_to_document(scenario: Scenario) -> str:
    """Serialize a programmatically built scenario back to JSON."""
    profiles = {p.entry_id: p for p in scenario.profiles}
    entries = []
    for e in scenario.entries:
        p = profiles[e.entry_id]
        entries.append(
            {
                "entry_id": e.entry_id,
                "site_name": e.site_name,
                "cpu_model": e.cpu_model,
                "price_per_hour": e.price_per_hour,
                "max_pilots": e.max_pilots,
                "supports_containers": e.supports_containers,
                "enabled": e.enabled,
                "true_perf": p.true_perf,
                "perf_noise_cv": p.perf_noise_cv,
                "queue_delay_median_s": p.queue_delay_median_s,
                "queue_delay_sigma": p.queue_delay_sigma,
                "failure_prob": p.failure_prob,
            }
        )
    pol = scenario.policies
    policies: dict[str, Any] = {
        "spec_id": pol.runner.spec_id,
        "mode": pol.runner.mode,
        "min_interval_s": pol.runner.min_interval_s,
        "max_concurrent_benchmarks": pol.runner.max_concurrent_benchmarks,
        "runner_wake_period_s": pol.runner_wake_period_s,
        "cycle_period_s": pol.cycle_period_s,
        "max_submit_per_cycle": pol.max_submit_per_cycle,
        "benchmarks_enabled": pol.benchmarks_enabled,
        "ttl_s": pol.ttl_s,
        "aggregate_window": pol.aggregate_window,
        "half_life_s": pol.half_life_s,
        "user_payload_duration_s": pol.user_payload_duration_s,
    }
    if pol.campaign_period_s is not None:
        policies["campaign_period_s"] = pol.campaign_period_s
    if pol.demand is not None:
        policies["demand"] = pol.demand
    if pol.user_pressure is not None:
        policies["user_pressure"] = {
            "clients": pol.user_pressure.clients,
            "max_request": pol.user_pressure.max_request,
            "period_s": pol.user_pressure.period_s,
        }
    document = {
        "seed": scenario.seed,
        "entries": entries,
        "specs": [
            {
                "spec_id": s.spec_id,
                "name": s.name,
                "image_ref": s.image_ref,
                "work_units": s.work_units,
                "timeout_s": s.timeout_s,
            }
            for s in scenario.specs
        ],
        "policies": policies,
    }
    return json.dumps(document, indent=2)
