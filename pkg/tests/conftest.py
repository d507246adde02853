"""Shared test helpers."""

from __future__ import annotations

from dflsim import config


def make_experiment(**overrides) -> config.ExperimentSettings:
    """Small, fast experiment settings; override any field per test."""
    base = dict(
        topology="fully",
        clients=5,
        rounds=2,
        malicious_fraction=0.0,
        seed=0,
        attack={"name": "none"},
        aggregation={"name": "fed_avg"},
        train={"learning_rate": 0.05, "batch_size": 32, "local_epochs": 2},
        model={"hidden": [8]},
        dataset={
            "kind": "blobs",
            "classes": 3,
            "train_per_class": 40,
            "test_per_class": 20,
            "feature_dim": 4,
            "spread": 0.4,
        },
    )
    base.update(overrides)
    return config.ExperimentSettings.model_validate(base)


def acceptance_experiment(**overrides) -> config.ExperimentSettings:
    """The desk-scale reference scenario used by the acceptance suite."""
    base = dict(
        topology="fully",
        clients=10,
        rounds=10,
        malicious_fraction=0.0,
        seed=0,
        attack={"name": "none"},
        aggregation={"name": "fed_avg"},
        train={"learning_rate": 0.05, "batch_size": 64, "local_epochs": 3},
        model={"hidden": [16]},
        dataset={
            "kind": "blobs",
            "classes": 3,
            "train_per_class": 300,
            "test_per_class": 100,
            "feature_dim": 8,
            "spread": 0.5,
        },
    )
    base.update(overrides)
    return config.ExperimentSettings.model_validate(base)
