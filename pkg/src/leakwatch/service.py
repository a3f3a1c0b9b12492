"""JSON HTTP API over the engine: ingestion, leak review, labeling, rules,
retraining, metrics, and model inspection."""
from __future__ import annotations

import json
import threading
from typing import Optional

from fastapi import Depends, FastAPI, HTTPException, Query, Request
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from .engine import Engine, EngineConfig, LabelSubmission, UnknownPrediction, now_ms
from .flows import FlowParseError
from .rewriter import RewriteRule


class LabelBody(BaseModel):
    prediction_id: str
    verdict: str = Field(pattern="(?i)^(correct|wrong|unknown)$")
    user: str = "anonymous"


class RuleBody(BaseModel):
    rule_id: str = ""
    scope: dict
    action: dict
    pii_filter: Optional[dict] = None
    enabled: bool = True
    created_by: str = ""


class RulePatch(BaseModel):
    enabled: bool


class FlowBatch(BaseModel):
    records: list[dict]


def create_app(engine: Engine | None = None, ui_dir: Optional[str] = None) -> FastAPI:
    engine = engine or Engine()
    app = FastAPI(title="leakwatch", version="0.1.0")
    app.state.engine = engine
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    def check_token(request: Request):
        token = engine.config.auth_token
        if token and request.headers.get("x-auth-token") != token:
            raise HTTPException(status_code=401, detail="invalid or missing auth token")

    guarded = Depends(check_token)

    @app.get("/v1/health")
    def health():
        return {"ok": True, "models": len(engine.registry.models)}

    @app.post("/v1/flows", dependencies=[guarded])
    def ingest(batch: FlowBatch):
        results = []
        for record in batch.records:
            try:
                prediction, outcome = engine.ingest_line(json.dumps(record))
            except FlowParseError as exc:
                results.append({"error": str(exc), "field": exc.fieldname})
                continue
            row = prediction.to_json()
            row["outcome"] = {
                "decision": outcome.decision.value,
                "applied_rules": outcome.applied_rules,
            }
            results.append(row)
        return {"results": results}

    @app.get("/v1/leaks")
    def leaks(
        since: Optional[int] = Query(default=None),
        domain: Optional[str] = Query(default=None),
        pii: Optional[str] = Query(default=None),
        offset: int = Query(default=0, ge=0),
        limit: int = Query(default=100, ge=1, le=1000),
    ):
        rows, total = engine.leaks(since=since, domain=domain, pii=pii,
                                   offset=offset, limit=limit)
        return {"leaks": rows, "total": total, "offset": offset, "limit": limit}

    @app.get("/v1/predictions/{prediction_id}")
    def prediction(prediction_id: str):
        record = engine.predictions.get(prediction_id)
        if record is None:
            raise HTTPException(status_code=404, detail="unknown prediction")
        row = record.to_json()
        row["outcome"] = engine.outcomes.get(prediction_id, {})
        return row

    @app.post("/v1/labels", dependencies=[guarded])
    def submit_label(body: LabelBody):
        submission = LabelSubmission(
            prediction_id=body.prediction_id,
            verdict=body.verdict,
            user=body.user,
            timestamp=now_ms(),
        )
        try:
            return engine.submit_label(submission)
        except UnknownPrediction:
            raise HTTPException(status_code=404, detail="unknown prediction") from None
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from None

    @app.get("/v1/rules")
    def list_rules():
        return {"rules": [rule.to_json() for rule in engine.rules.values()]}

    @app.post("/v1/rules", dependencies=[guarded])
    def create_rule(body: RuleBody):
        try:
            rule = RewriteRule.from_json(body.model_dump())
            rule = engine.add_rule(rule)
        except (KeyError, ValueError) as exc:
            raise HTTPException(status_code=422, detail=f"invalid rule: {exc}") from None
        return rule.to_json()

    @app.patch("/v1/rules/{rule_id}", dependencies=[guarded])
    def patch_rule(rule_id: str, body: RulePatch):
        try:
            rule = engine.set_rule_enabled(rule_id, body.enabled)
        except KeyError:
            raise HTTPException(status_code=404, detail="unknown rule") from None
        return rule.to_json()

    @app.delete("/v1/rules/{rule_id}", dependencies=[guarded])
    def delete_rule(rule_id: str):
        if not engine.delete_rule(rule_id):
            raise HTTPException(status_code=404, detail="unknown rule")
        return {"ok": True}

    @app.post("/v1/retrain", dependencies=[guarded])
    def retrain():
        return engine.retrain()

    @app.get("/v1/metrics")
    def metrics():
        return {"metrics": engine.latest_metrics}

    @app.get("/v1/models")
    def models():
        return {"models": engine.model_summaries()}

    if ui_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app


SCHEDULE_SECONDS = {"daily": 86_400, "weekly": 604_800}


def start_retrain_scheduler(engine: Engine,
                            interval_s: Optional[float] = None) -> threading.Event:
    """Kick off periodic background retraining per the engine's schedule.

    Returns a stop event; setting it ends the loop. No-op (already-set event)
    for manual scheduling.
    """
    if interval_s is None:
        interval_s = SCHEDULE_SECONDS.get(engine.config.retrain_schedule, 0)
    stop = threading.Event()
    if not interval_s:
        stop.set()
        return stop

    def loop():
        while not stop.wait(interval_s):
            try:
                engine.retrain()
            except Exception:  # keep the scheduler alive across bad retrains
                pass

    threading.Thread(target=loop, daemon=True, name="retrain-scheduler").start()
    return stop


def serve(config: EngineConfig, host: str = "127.0.0.1", port: int = 8787,
          engine: Engine | None = None, ui_dir: Optional[str] = None) -> None:
    import uvicorn

    engine = engine or Engine(config)
    app = create_app(engine, ui_dir=ui_dir)
    stop = start_retrain_scheduler(engine)
    try:
        uvicorn.run(app, host=host, port=port, log_level="warning")
    finally:
        stop.set()
