"""Model poisoning strategies computed jointly by the colluding clients.

Every strategy sees only the malicious clients' own trained updates plus
public protocol constants; benign model state never enters this module. A
strategy returns either one shared vector that every malicious client
broadcasts, or a d x n matrix whose columns are per-client broadcasts.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

from . import linalg
from .errors import InputError

log = logging.getLogger(__name__)

_BISECTION_STEPS = 50
_NORM_EPS = 1e-12


@dataclass(frozen=True)
class AttackContext:
    """Everything the collusion knows: its own trained updates (columns
    ordered by malicious client id) and the protocol constants."""

    updates: np.ndarray
    total_clients: int
    malicious_count: int
    round_index: int

    def __post_init__(self):
        U = linalg.as_update_matrix(self.updates)
        object.__setattr__(self, "updates", U)
        if U.shape[1] != self.malicious_count:
            raise InputError(
                f"update matrix has {U.shape[1]} columns for {self.malicious_count} malicious clients"
            )
        if self.malicious_count < 1:
            raise InputError("attack context needs at least one malicious client")


def _top_k_mask(values: np.ndarray, k: int) -> np.ndarray:
    """Boolean mask of the k largest entries; ties prefer lower indices."""
    order = np.argsort(-values, kind="stable")
    mask = np.zeros(values.shape[0], dtype=bool)
    mask[order[:k]] = True
    return mask


def dmpa(ctx: AttackContext, top_percent: float = 10.0, per_client: bool = False) -> np.ndarray:
    """Eigen-projection poisoning: negate the updates, add back their rank-1
    component along the principal client-correlation direction, average, and
    refill each client's top-magnitude coordinates into the average.

    With one malicious client the correlation stage degenerates and the
    result is a pure sign flip. ``per_client=True`` skips the sequential
    refill fold and gives every client its own masked variant instead.
    """
    U = ctx.updates
    d, n = U.shape
    mu = linalg.column_mean(U)
    centered = linalg.center(U, mu)
    if n >= 2:
        cov = linalg.client_covariance(centered)
        corr = linalg.correlation_from_covariance(cov)
        pair = linalg.principal_eigenpair(corr)
        projection = linalg.project_onto_client_direction(U, pair.vector)
    else:
        projection = np.zeros_like(U)
    modified = -U + projection
    base = modified.mean(axis=1)

    k = int(math.floor(d * top_percent / 100.0))
    masks = [_top_k_mask(U[:, i] ** 2, k) for i in range(n)]
    if per_client:
        columns = np.empty_like(U)
        for i in range(n):
            columns[:, i] = np.where(masks[i], modified[:, i], base)
        return columns
    poisoned = base
    for i in range(n):
        poisoned = np.where(masks[i], modified[:, i], poisoned)
    return poisoned


def lie(ctx: AttackContext) -> np.ndarray:
    """Shift the malicious mean by z per-coordinate standard deviations,
    where z comes from the inverse normal CDF of the supporter fraction."""
    U = ctx.updates
    K, m = ctx.total_clients, ctx.malicious_count
    if K <= m:
        raise InputError(f"need more clients than attackers, got K={K}, m={m}")
    mu = linalg.column_mean(U)
    sigma = np.std(U, axis=1)
    supporters = K // 2 + 1 - m
    quantile = (K - m - supporters) / (K - m)
    if 0.0 < quantile < 1.0:
        z = NormalDist().inv_cdf(quantile)
    else:
        z = 0.5
        log.warning("lie quantile %.4f outside (0, 1); defaulting z to 0.5", quantile)
    return mu - z * sigma


def _perturbation_direction(U: np.ndarray, mu: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(mu)
    if norm >= _NORM_EPS:
        return -mu / norm
    # Mean is numerically zero: point along the coordinate of largest spread.
    sigma = np.std(U, axis=1)
    direction = np.zeros(U.shape[0])
    direction[int(np.argmax(np.abs(sigma)))] = 1.0
    return direction


def _bounded_perturbation(ctx: AttackContext, mode: str) -> np.ndarray:
    U = ctx.updates
    _, n = U.shape
    if n == 1:
        log.warning("%s attack with a single malicious client degenerates to a sign flip", mode)
        return -U[:, 0].copy()
    mu = linalg.column_mean(U)
    direction = _perturbation_direction(U, mu)

    diffs = U[:, :, None] - U[:, None, :]
    dist_sq = np.sum(diffs * diffs, axis=0)
    if mode == "min_max":
        bound = float(np.sqrt(dist_sq.max()))

        def feasible(gamma: float) -> bool:
            point = mu + gamma * direction
            deltas = point[:, None] - U
            return float(np.sqrt(np.sum(deltas * deltas, axis=0).max())) <= bound

    else:
        bound = float(dist_sq.sum(axis=1).max())

        def feasible(gamma: float) -> bool:
            point = mu + gamma * direction
            deltas = point[:, None] - U
            return float(np.sum(deltas * deltas)) <= bound

    if bound <= 0.0:
        return mu
    gamma_max = 100.0 * bound / max(np.linalg.norm(direction), _NORM_EPS)
    if feasible(gamma_max):
        return mu + gamma_max * direction
    lo, hi = 0.0, gamma_max
    for _ in range(_BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    return mu + lo * direction


def min_max(ctx: AttackContext) -> np.ndarray:
    """Push opposite the malicious mean as far as the largest pairwise
    distance among the colluding updates allows."""
    return _bounded_perturbation(ctx, "min_max")


def min_sum(ctx: AttackContext) -> np.ndarray:
    """Like min_max, but bounded by the worst sum of squared distances from
    any one colluding update to all the others."""
    return _bounded_perturbation(ctx, "min_sum")


def no_attack(ctx: AttackContext) -> np.ndarray:
    """Identity: each malicious client broadcasts its own trained update."""
    return ctx.updates.copy()


ATTACKS = {
    "dmpa": dmpa,
    "lie": lie,
    "min_max": min_max,
    "min_sum": min_sum,
    "none": no_attack,
}


def make_attack(name: str, top_percent: float = 10.0, per_client_masks: bool = False):
    """Bind attack parameters from config into a single-argument callable."""
    if name not in ATTACKS:
        raise InputError(f"unknown attack '{name}'; valid options: {sorted(ATTACKS)}")
    if name == "dmpa":
        return lambda ctx: dmpa(ctx, top_percent=top_percent, per_client=per_client_masks)
    return ATTACKS[name]
