"""Robust aggregation rules a client applies to its own and received models.

Each client aggregates over its local view only: its own parameter vector
plus whatever its one-hop neighbors broadcast this round.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError


@dataclass
class AggregationInput:
    """A client's own vector plus (sender id, vector) pairs from neighbors.

    Received entries are re-sorted by sender id on construction so rule
    outputs never depend on arrival order.
    """

    own_id: int
    own: np.ndarray
    received: list[tuple[int, np.ndarray]] = field(default_factory=list)

    def __post_init__(self):
        self.own = np.asarray(self.own, dtype=np.float64)
        if self.own.ndim != 1:
            raise InputError("own model must be a flat vector")
        entries = [(int(i), np.asarray(v, dtype=np.float64)) for i, v in self.received]
        entries.sort(key=lambda item: item[0])
        ids = [i for i, _ in entries]
        if len(set(ids)) != len(ids) or self.own_id in ids:
            raise InputError("sender ids must be distinct and differ from the receiver")
        for i, v in entries:
            if v.shape != self.own.shape:
                raise InputError(f"vector from client {i} has mismatched length")
        self.received = entries

    def stacked(self) -> tuple[list[int], np.ndarray]:
        """All vectors (own included) as matrix rows, ascending by client id."""
        entries = sorted([(self.own_id, self.own)] + self.received, key=lambda e: e[0])
        ids = [i for i, _ in entries]
        return ids, np.stack([v for _, v in entries])


def fed_avg(inp: AggregationInput) -> np.ndarray:
    """Unweighted coordinate-wise mean over own and received vectors."""
    _, M = inp.stacked()
    return M.mean(axis=0)


def coordinate_median(inp: AggregationInput) -> np.ndarray:
    """Per-coordinate median; even counts average the two central values."""
    _, M = inp.stacked()
    return np.median(M, axis=0)


def trimmed_mean(inp: AggregationInput, trim_ratio: float = 0.2) -> np.ndarray:
    """Per-coordinate mean after dropping the t largest and t smallest values,
    t = floor(trim_ratio * m)."""
    if not 0.0 <= trim_ratio < 0.5:
        raise InputError(f"trim ratio must lie in [0, 0.5), got {trim_ratio}")
    _, M = inp.stacked()
    m = M.shape[0]
    t = int(math.floor(trim_ratio * m))
    if m - 2 * t < 1:
        raise InputError(f"trimming {t} from each end leaves no values out of {m}")
    if t == 0:
        return fed_avg(inp)
    return np.sort(M, axis=0)[t : m - t].mean(axis=0)


def default_krum_f(m: int) -> int:
    """Largest tolerated Byzantine count keeping at least one scored neighbor."""
    return max(0, (m - 3) // 2)


def krum(inp: AggregationInput, f: int | None = None) -> np.ndarray:
    """Select the vector with the smallest sum of squared distances to its
    c = m - f - 2 nearest peers; ties break toward the smallest client id.

    Views of one or two vectors are too small to score and resolve to the
    lowest-id vector (for a lone vector that is the client's own model).
    """
    ids, M = inp.stacked()
    m = M.shape[0]
    if m <= 2:
        return M[0].copy()
    if f is None:
        f = default_krum_f(m)
    if f < 0:
        raise InputError(f"byzantine count must be non-negative, got {f}")
    closest = m - f - 2
    if closest < 1:
        raise InputError(f"krum needs m - f - 2 >= 1, got m={m}, f={f}")

    diffs = M[:, None, :] - M[None, :, :]
    dist_sq = np.sum(diffs * diffs, axis=2)
    best_idx = None
    best_score = None
    for i in range(m):
        others = np.delete(dist_sq[i], i)
        score = float(np.sort(others)[:closest].sum())
        if best_score is None or score < best_score:
            best_score = score
            best_idx = i
    return M[best_idx].copy()


AGGREGATIONS = {
    "fed_avg": fed_avg,
    "median": coordinate_median,
    "trimmed_mean": trimmed_mean,
    "krum": krum,
}


def make_rule(name: str, trim_ratio: float = 0.2, f: int | None = None):
    """Bind rule parameters from config into a single-argument callable."""
    if name not in AGGREGATIONS:
        raise InputError(f"unknown aggregation '{name}'; valid options: {sorted(AGGREGATIONS)}")
    if name == "trimmed_mean":
        return lambda inp: trimmed_mean(inp, trim_ratio=trim_ratio)
    if name == "krum":
        return lambda inp: krum(inp, f=f)
    return AGGREGATIONS[name]
