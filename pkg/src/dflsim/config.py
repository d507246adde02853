"""Experiment configuration schema, defaults, and sweep expansion.

Configs are YAML (or JSON) documents with an ``experiment`` section and an
optional ``sweep`` section whose axis lists are cross-multiplied into a run
campaign. Unknown keys are rejected; enum fields validate against the
registered attack/aggregation/topology names.
"""

from __future__ import annotations

import itertools
import math
import zlib
from pathlib import Path
from typing import Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from . import aggregation, attacks, seeding, topology
from .errors import ConfigError


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class TrainSettings(_Strict):
    learning_rate: float = Field(default=0.05, ge=0.0)
    batch_size: int = Field(default=64, ge=1)
    local_epochs: int = Field(default=3, ge=1)


class ModelSettings(_Strict):
    hidden: list[int] = Field(default_factory=lambda: [16])

    @field_validator("hidden")
    @classmethod
    def _positive(cls, hidden):
        if any(h < 1 for h in hidden):
            raise ValueError(f"hidden layer sizes must be positive, got {hidden}")
        return hidden


class BlobsDataset(_Strict):
    kind: Literal["blobs"] = "blobs"
    classes: int = Field(default=3, ge=2)
    train_per_class: int = Field(default=300, ge=1)
    test_per_class: int = Field(default=100, ge=1)
    feature_dim: int = Field(default=8, ge=1)
    spread: float = Field(default=0.5, ge=0.0)
    seed: Optional[int] = None


class IdxDataset(_Strict):
    kind: Literal["idx"]
    train_images: str
    train_labels: str
    test_images: str
    test_labels: str


DatasetSettings = Union[BlobsDataset, IdxDataset]


class PartitionSettings(_Strict):
    kind: Literal["iid", "dirichlet"] = "iid"
    alpha: float = 100.0

    @model_validator(mode="after")
    def _near_uniform_only(self):
        if self.kind == "dirichlet" and self.alpha < 100.0:
            raise ValueError(
                "dirichlet partitioning supports only the near-uniform regime "
                "(alpha >= 100, equivalent to iid); use kind: iid"
            )
        return self


class AttackSettings(_Strict):
    name: str = "none"
    top_percent: float = Field(default=10.0, gt=0.0, le=100.0)
    per_client_masks: bool = False

    @field_validator("name")
    @classmethod
    def _known(cls, name):
        if name not in attacks.ATTACKS:
            raise ValueError(f"unknown attack '{name}'; valid options: {sorted(attacks.ATTACKS)}")
        return name


class AggregationSettings(_Strict):
    name: str = "fed_avg"
    trim_ratio: float = Field(default=0.2, ge=0.0, lt=0.5)
    f: Optional[int] = Field(default=None, ge=0)

    @field_validator("name")
    @classmethod
    def _known(cls, name):
        if name not in aggregation.AGGREGATIONS:
            raise ValueError(
                f"unknown aggregation '{name}'; valid options: {sorted(aggregation.AGGREGATIONS)}"
            )
        return name


def malicious_count(clients: int, fraction: float) -> int:
    """Number of attacker-controlled clients: round-half-up of K * fraction."""
    return int(math.floor(clients * fraction + 0.5))


class ExperimentSettings(_Strict):
    topology: str = "fully"
    clients: int = Field(default=10, ge=2)
    rounds: int = Field(default=10, ge=0)
    malicious_fraction: float = Field(default=0.0, ge=0.0, le=1.0)
    seed: int = 0
    attack: AttackSettings = Field(default_factory=AttackSettings)
    aggregation: AggregationSettings = Field(default_factory=AggregationSettings)
    train: TrainSettings = Field(default_factory=TrainSettings)
    model: ModelSettings = Field(default_factory=ModelSettings)
    dataset: DatasetSettings = Field(default_factory=BlobsDataset, discriminator="kind")
    partition: PartitionSettings = Field(default_factory=PartitionSettings)
    exclude_hub: bool = False
    malicious_adopt_poison: bool = False
    f1_average: Literal["macro", "weighted"] = "macro"

    @field_validator("topology")
    @classmethod
    def _known_topology(cls, kind):
        if kind not in topology.KINDS:
            raise ValueError(f"unknown topology '{kind}'; valid options: {list(topology.KINDS)}")
        return kind

    @model_validator(mode="after")
    def _consistent(self):
        if self.topology == "ring" and self.clients < 3:
            raise ValueError("ring topology needs at least 3 clients")
        m = malicious_count(self.clients, self.malicious_fraction)
        if m >= self.clients:
            raise ValueError(
                f"malicious fraction {self.malicious_fraction} leaves no benign client "
                f"(m={m} of {self.clients})"
            )
        return self


class SweepSettings(_Strict):
    topology: Optional[list[str]] = None
    aggregation: Optional[list[str]] = None
    attack: Optional[list[str]] = None
    malicious_fraction: Optional[list[float]] = None


class ConfigFile(_Strict):
    experiment: ExperimentSettings = Field(default_factory=ExperimentSettings)
    sweep: Optional[SweepSettings] = None


class RunPlan(BaseModel):
    """One fully-resolved run of a campaign; ``experiment.seed`` is final."""

    run_index: int
    experiment: ExperimentSettings


def _format_validation_error(err: ValidationError) -> str:
    lines = []
    for item in err.errors():
        loc = ".".join(str(part) for part in item["loc"]) or "<root>"
        lines.append(f"{loc}: {item['msg']}")
    return "\n".join(lines)


def parse_config_text(text: str) -> ConfigFile:
    """Parse and validate a YAML/JSON config document."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError(f"config is not valid YAML: {e}") from e
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError(f"config root must be a mapping, got {type(doc).__name__}")
    try:
        return ConfigFile.model_validate(doc)
    except ValidationError as e:
        raise ConfigError(_format_validation_error(e)) from e


def parse_config(path) -> ConfigFile:
    """Load and validate a config file from disk."""
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    return parse_config_text(p.read_text())


def _axis_code(value) -> int:
    if isinstance(value, float):
        return int(round(value * 1_000_000))
    return zlib.crc32(str(value).encode())


def plan_runs(cfg: ConfigFile, seed: Optional[int] = None) -> list[RunPlan]:
    """Expand the sweep cross-product into fully-resolved run plans.

    Per-run seeds are mixed from the global seed and the axis values, so a
    combination keeps its seed no matter how the sweep lists are ordered.
    """
    base = cfg.experiment
    if seed is not None:
        base = base.model_copy(update={"seed": seed})
    if cfg.sweep is None:
        return [RunPlan(run_index=0, experiment=base)]

    sweep = cfg.sweep
    topologies = sweep.topology or [base.topology]
    aggregations = sweep.aggregation or [base.aggregation.name]
    attack_names = sweep.attack or [base.attack.name]
    fractions = sweep.malicious_fraction if sweep.malicious_fraction is not None else [
        base.malicious_fraction
    ]

    plans = []
    combos = itertools.product(topologies, aggregations, attack_names, fractions)
    for index, (topo, agg, atk, fraction) in enumerate(combos):
        run_seed = seeding.mix(
            base.seed,
            seeding.RUN_STREAM,
            _axis_code(topo),
            _axis_code(agg),
            _axis_code(atk),
            _axis_code(float(fraction)),
        )
        doc = base.model_dump()
        doc.update(topology=topo, malicious_fraction=fraction, seed=run_seed)
        doc["aggregation"] = {**doc["aggregation"], "name": agg}
        doc["attack"] = {**doc["attack"], "name": atk}
        try:
            resolved = ExperimentSettings.model_validate(doc)
        except ValidationError as e:
            raise ConfigError(
                f"sweep combination (topology={topo}, aggregation={agg}, attack={atk}, "
                f"fraction={fraction}) is invalid:\n{_format_validation_error(e)}"
            ) from e
        plans.append(RunPlan(run_index=index, experiment=resolved))
    return plans
