"""FastAPI application exposing the simulator over HTTP.

Endpoints are synchronous: desk-scale runs complete in seconds, so a request
maps to one fully-executed run (or campaign). Run-time failures are reported
in the response body, not as transport errors, so campaign clients can record
them and continue.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from .. import __version__, data, engine
from ..config import RunPlan, parse_config_text, plan_runs
from ..errors import ConfigError, SimulationError
from . import schemas


def execute_plan(plan: RunPlan) -> schemas.RunResultModel:
    """Run one experiment and package the outcome, success or failure."""
    exp = plan.experiment
    base = dict(
        run_index=plan.run_index,
        seed=exp.seed,
        topology=exp.topology,
        aggregation=exp.aggregation.name,
        attack=exp.attack.name,
        malicious_fraction=exp.malicious_fraction,
    )
    try:
        result = engine.run_experiment(exp)
    except SimulationError as e:
        return schemas.RunResultModel(status="error", error=str(e), **base)
    records = [
        schemas.RoundRecordModel(
            round=record.round,
            clients=[
                schemas.ClientMetricsModel(
                    id=c.id, role=c.role, loss=c.loss, accuracy=c.accuracy, macro_f1=c.macro_f1
                )
                for c in record.per_client
            ],
            mean_benign_f1=record.mean_benign_f1,
        )
        for record in result.records
    ]
    summary = schemas.RunSummaryModel(
        final_round=result.summary["final_round"],
        mean_benign_f1=result.summary["mean_benign_f1"],
    )
    return schemas.RunResultModel(status="ok", records=records, summary=summary, **base)


def create_app() -> FastAPI:
    app = FastAPI(title="dflsim", version=__version__)

    @app.get("/health", response_model=schemas.HealthResponse)
    def health():
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.post("/config/validate", response_model=schemas.ValidateResponse)
    def validate(req: schemas.ValidateRequest):
        try:
            cfg = parse_config_text(req.text)
            runs = plan_runs(cfg)
        except ConfigError as e:
            return schemas.ValidateResponse(valid=False, errors=str(e).splitlines())
        return schemas.ValidateResponse(
            valid=True, runs_planned=len(runs), resolved=cfg.model_dump()
        )

    @app.post("/campaigns/plan", response_model=schemas.PlanResponse)
    def plan(req: schemas.PlanRequest):
        try:
            cfg = parse_config_text(req.text)
            runs = plan_runs(cfg, seed=req.seed)
        except ConfigError as e:
            raise HTTPException(status_code=400, detail=str(e)) from e
        return schemas.PlanResponse(runs=runs)

    @app.post("/runs/execute", response_model=schemas.RunResultModel)
    def execute(req: schemas.ExecuteRunRequest):
        return execute_plan(req.run)

    @app.post("/campaigns/execute", response_model=schemas.CampaignResponse)
    def campaign(req: schemas.CampaignRequest):
        try:
            cfg = parse_config_text(req.text)
            runs = plan_runs(cfg, seed=req.seed)
        except ConfigError as e:
            raise HTTPException(status_code=400, detail=str(e)) from e
        results = []
        for plan_item in runs:
            result = execute_plan(plan_item)
            results.append(result)
            if req.fail_fast and result.status == "error":
                break
        return schemas.CampaignResponse(config=cfg.model_dump(), results=results)

    @app.post("/datasets/blobs", response_model=schemas.BlobsResponse)
    def blobs(req: schemas.BlobsRequest):
        try:
            dataset = data.synth_blobs(
                req.classes, req.per_class, req.feature_dim, req.spread, req.seed
            )
        except SimulationError as e:
            raise HTTPException(status_code=400, detail=str(e)) from e
        return schemas.BlobsResponse(
            classes=dataset.classes,
            feature_dim=dataset.features.shape[1],
            features=dataset.features.tolist(),
            labels=dataset.labels.tolist(),
        )

    return app
