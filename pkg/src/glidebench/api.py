"""REST surface over a simulation engine.

All routes live under /api/v1 and speak JSON only. Error bodies are
{"error": <code>} plus an optional "detail". The simulation clock only
moves when something calls POST /sim/advance, which is how the UI and
tests drive time. A process-wide lock serializes handlers onto the
engine's single timeline.
"""

from __future__ import annotations

import json
import threading
from typing import Any, Optional

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from starlette.exceptions import HTTPException as StarletteHTTPException

from .collector import EntryScore
from .factory import ConfigError
from .runner import MODES, UnknownCampaign
from .wire import result_to_dict
from .engine import SimEngine

API_PREFIX = "/api/v1"


def error_response(status: int, code: str, detail: Any = None) -> JSONResponse:
    body: dict[str, Any] = {"error": code}
    if detail is not None:
        body["detail"] = detail
    return JSONResponse(body, status_code=status)


def score_to_dict(score: EntryScore) -> dict[str, Any]:
    return {
        "entry_id": score.entry_id,
        "spec_id": score.spec_id,
        "median_score": score.median_score,
        "n_samples": score.n_samples,
        "last_ts": score.last_ts,
        "age_s": score.age_s,
        "staleness_weight": score.staleness_weight,
    }


def campaign_summary(engine: SimEngine, campaign) -> dict[str, Any]:
    return {
        "campaign_id": campaign.campaign_id,
        "created_at": campaign.created_at,
        "spec_id": campaign.policy.spec_id,
        "mode": campaign.policy.mode,
        "min_interval_s": campaign.policy.min_interval_s,
        "selected": list(campaign.selected),
        "counts": engine.campaign_status(campaign.campaign_id),
    }


async def read_json_body(request: Request) -> Any:
    raw = await request.body()
    try:
        return json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ValueError(f"body not valid JSON: {exc.msg}") from exc


def create_app(engine: SimEngine) -> FastAPI:
    app = FastAPI(title="glidebench", docs_url=None, redoc_url=None)
    lock = threading.Lock()

    @app.exception_handler(StarletteHTTPException)
    async def http_exception_handler(request: Request, exc: StarletteHTTPException):
        code = "not_found" if exc.status_code == 404 else "http_error"
        return error_response(exc.status_code, code, exc.detail if exc.status_code != 404 else None)

    @app.get(API_PREFIX + "/status")
    def get_status():
        with lock:
            return engine.status()

    @app.get(API_PREFIX + "/scores")
    def get_scores(spec: Optional[str] = None):
        if not spec:
            return error_response(400, "missing_param", "query parameter 'spec' is required")
        with lock:
            return [score_to_dict(s) for s in engine.scores(spec)]

    @app.get(API_PREFIX + "/results")
    def get_results(
        entry: Optional[str] = None, spec: Optional[str] = None, limit: str = "100"
    ):
        try:
            limit_n = int(limit)
        except ValueError:
            return error_response(400, "bad_param", f"limit not an integer: {limit!r}")
        if limit_n < 1:
            return error_response(400, "bad_param", "limit must be >= 1")
        with lock:
            records = engine.store.recent(entry_id=entry, spec_id=spec, limit=limit_n)
            return [result_to_dict(r) for r in records]

    @app.post(API_PREFIX + "/campaigns", status_code=201)
    async def post_campaign(request: Request):
        try:
            body = await read_json_body(request)
        except ValueError as exc:
            return error_response(400, "bad_body", str(exc))
        if not isinstance(body, dict):
            return error_response(400, "bad_body", "body must be a JSON object")
        spec_id = body.get("spec_id")
        mode = body.get("mode")
        min_interval_s = body.get("min_interval_s")
        if not isinstance(spec_id, str) or engine.scenario.spec(spec_id) is None:
            return error_response(400, "unknown_spec", spec_id)
        if mode is not None and mode not in MODES:
            return error_response(400, "unknown_mode", mode)
        if min_interval_s is not None:
            try:
                min_interval_s = float(min_interval_s)
            except (TypeError, ValueError):
                return error_response(400, "bad_param", "min_interval_s not a number")
            if min_interval_s <= 0:
                return error_response(400, "bad_param", "min_interval_s must be positive")
        with lock:
            campaign = engine.trigger_campaign(
                spec_id=spec_id, mode=mode, min_interval_s=min_interval_s
            )
            return campaign_summary(engine, campaign)

    @app.get(API_PREFIX + "/campaigns/{campaign_id}")
    def get_campaign(campaign_id: str):
        with lock:
            try:
                return engine.campaign_status(campaign_id)
            except UnknownCampaign:
                return error_response(404, "campaign_not_found", campaign_id)

    @app.get(API_PREFIX + "/plan")
    def get_plan(demand: Optional[str] = None, spec: Optional[str] = None):
        if demand is None:
            return error_response(400, "missing_param", "query parameter 'demand' is required")
        try:
            demand_value = float(demand)
        except ValueError:
            return error_response(400, "bad_param", f"demand not a number: {demand!r}")
        if demand_value <= 0:
            return error_response(400, "bad_param", "demand must be positive")
        if not spec:
            return error_response(400, "missing_param", "query parameter 'spec' is required")
        with lock:
            plan, unknown = engine.plan(demand_value, spec)
            return {
                "demand": demand_value,
                "spec_id": spec,
                "allocation": plan.allocation,
                "total_cost": plan.total_cost,
                "achieved_throughput": plan.achieved_throughput,
                "feasible": plan.feasible,
                "unknown_entries": unknown,
            }

    @app.post(API_PREFIX + "/reconfig")
    async def post_reconfig(request: Request):
        raw = await request.body()
        try:
            json.loads(raw)
        except json.JSONDecodeError as exc:
            return error_response(400, "bad_body", f"body not valid JSON: {exc.msg}")
        with lock:
            try:
                version = engine.reconfig(raw.decode("utf-8"))
            except ConfigError as exc:
                return error_response(422, "validation_failed", exc.violations)
            return {"version": version}

    @app.get(API_PREFIX + "/config")
    def get_config():
        with lock:
            return engine.config_dict()

    @app.post(API_PREFIX + "/sim/advance")
    async def post_advance(request: Request):
        try:
            body = await read_json_body(request)
        except ValueError as exc:
            return error_response(400, "bad_body", str(exc))
        if not isinstance(body, dict) or "seconds" not in body:
            return error_response(400, "bad_body", "body must be {\"seconds\": number}")
        try:
            seconds = float(body["seconds"])
        except (TypeError, ValueError):
            return error_response(400, "bad_param", "seconds not a number")
        if seconds < 0:
            return error_response(400, "bad_param", "seconds must be non-negative")
        with lock:
            engine.run_until(engine.clock + seconds)
            return {"sim_time": engine.clock}

    return app
