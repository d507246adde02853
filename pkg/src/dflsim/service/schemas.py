"""Pydantic request/response models for the service API."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field

from ..config import RunPlan


class HealthResponse(BaseModel):
    status: str
    version: str


class ValidateRequest(BaseModel):
    text: str


class ValidateResponse(BaseModel):
    valid: bool
    errors: list[str] = Field(default_factory=list)
    runs_planned: int = 0
    resolved: Optional[dict] = None


class PlanRequest(BaseModel):
    text: str
    seed: Optional[int] = None


class PlanResponse(BaseModel):
    runs: list[RunPlan]


class ClientMetricsModel(BaseModel):
    id: int
    role: str
    loss: float
    accuracy: float
    macro_f1: float


class RoundRecordModel(BaseModel):
    round: int
    clients: list[ClientMetricsModel]
    mean_benign_f1: float


class RunSummaryModel(BaseModel):
    final_round: Optional[int]
    mean_benign_f1: float


class RunResultModel(BaseModel):
    run_index: int
    seed: int
    topology: str
    aggregation: str
    attack: str
    malicious_fraction: float
    status: Literal["ok", "error"]
    error: Optional[str] = None
    records: list[RoundRecordModel] = Field(default_factory=list)
    summary: Optional[RunSummaryModel] = None


class ExecuteRunRequest(BaseModel):
    run: RunPlan


class CampaignRequest(BaseModel):
    text: str
    seed: Optional[int] = None
    fail_fast: bool = False


class CampaignResponse(BaseModel):
    config: dict
    results: list[RunResultModel]


class BlobsRequest(BaseModel):
    classes: int = Field(default=3, ge=1)
    per_class: int = Field(default=100, ge=1)
    feature_dim: int = Field(default=8, ge=1)
    spread: float = Field(default=0.5, ge=0.0)
    seed: int = 0


class BlobsResponse(BaseModel):
    classes: int
    feature_dim: int
    features: list[list[float]]
    labels: list[int]
