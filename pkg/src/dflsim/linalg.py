"""Small dense matrix statistics behind the poisoning attack math.

Updates from colluding clients are stacked column-wise into a d x n matrix.
This module centers them, builds the n x n client-space correlation matrix,
extracts its principal eigenpair with cyclic Jacobi sweeps, and projects the
updates onto the dominant client direction. Everything is float64, pure, and
deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateMatrixError, InputError, NumericError

# A client column with standard deviation below this carries no directional
# information and is excluded from correlation normalization.
VARIANCE_EPS = 1e-12

# Eigenvalues closer than this to the maximum share the top spot and go
# through the deterministic tie-break.
EIGEN_TIE_TOL = 1e-10

JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100


@dataclass(frozen=True)
class EigenPair:
    """Principal eigenvalue and its unit-norm eigenvector."""

    value: float
    vector: np.ndarray


def as_update_matrix(data) -> np.ndarray:
    """Validate a d x n stack of update columns (d >= 1, n >= 1, finite)."""
    U = np.asarray(data, dtype=np.float64)
    if U.ndim != 2 or U.shape[0] < 1 or U.shape[1] < 1:
        raise InputError(f"update matrix must be 2-D and non-empty, got shape {U.shape}")
    if not np.all(np.isfinite(U)):
        raise InputError("update matrix contains non-finite entries")
    return U


def column_mean(U: np.ndarray) -> np.ndarray:
    """Per-coordinate mean over the n update columns."""
    U = as_update_matrix(U)
    return U.sum(axis=1) / U.shape[1]


def center(U: np.ndarray, mu: np.ndarray) -> np.ndarray:
    """Subtract the column mean from every update column."""
    U = as_update_matrix(U)
    mu = np.asarray(mu, dtype=np.float64)
    if mu.shape != (U.shape[0],):
        raise InputError(f"mean length {mu.shape} does not match {U.shape[0]} rows")
    return U - mu[:, None]


def client_covariance(V: np.ndarray) -> np.ndarray:
    """Client-space covariance C = V^T V / (n - 1) of centered columns.

    Accumulates rank-1 row contributions sequentially over the parameter
    coordinates, so each entry equals the naive double-loop sum bit for bit.
    """
    V = as_update_matrix(V)
    d, n = V.shape
    if n < 2:
        raise DegenerateMatrixError("covariance needs at least two columns")
    C = np.zeros((n, n), dtype=np.float64)
    for j in range(d):
        row = V[j]
        C += np.outer(row, row)
    C /= n - 1
    return C


def correlation_from_covariance(C: np.ndarray) -> np.ndarray:
    """Normalize a covariance matrix to correlations, guarding zero variance.

    Rows whose standard deviation falls below ``VARIANCE_EPS`` get zero
    off-diagonals; every diagonal entry is set to exactly 1.
    """
    C = np.asarray(C, dtype=np.float64)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise InputError(f"covariance must be square, got shape {C.shape}")
    T = np.sqrt(np.maximum(np.diag(C), 0.0))
    active = T >= VARIANCE_EPS
    Y = np.zeros_like(C)
    if active.any():
        np.divide(C, np.outer(T, T), out=Y, where=np.outer(active, active))
    np.fill_diagonal(Y, 1.0)
    return Y


def _off_diagonal_norm(A: np.ndarray) -> float:
    mask = ~np.eye(A.shape[0], dtype=bool)
    return float(np.sqrt(np.sum(A[mask] ** 2)))


def principal_eigenpair(Y: np.ndarray, max_sweeps: int = JACOBI_MAX_SWEEPS) -> EigenPair:
    """Largest eigenvalue and eigenvector of a symmetric matrix.

    Cyclic Jacobi rotations run until the off-diagonal Frobenius norm drops
    below ``JACOBI_TOL``. Ties within ``EIGEN_TIE_TOL`` of the top eigenvalue
    resolve to the eigenvector whose largest-magnitude component has the
    smallest index; the sign convention makes that component non-negative.
    """
    A = np.array(Y, dtype=np.float64, copy=True)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise InputError(f"matrix must be square and non-empty, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InputError("matrix contains non-finite entries")
    n = A.shape[0]
    if n == 1:
        return EigenPair(float(A[0, 0]), np.ones(1))

    V = np.eye(n)
    indices = np.arange(n)
    sweeps = 0
    while _off_diagonal_norm(A) >= JACOBI_TOL:
        if sweeps >= max_sweeps:
            raise NumericError(
                f"Jacobi iteration did not converge after {sweeps} sweeps",
                iterations=sweeps,
            )
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                tau = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, tau) / (abs(tau) + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                app, aqq = A[p, p], A[q, q]
                A[p, p] = app - t * apq
                A[q, q] = aqq + t * apq
                A[p, q] = A[q, p] = 0.0
                others = (indices != p) & (indices != q)
                akp = A[others, p].copy()
                akq = A[others, q].copy()
                A[others, p] = A[p, others] = c * akp - s * akq
                A[others, q] = A[q, others] = s * akp + c * akq
                vkp = V[:, p].copy()
                V[:, p] = c * vkp - s * V[:, q]
                V[:, q] = s * vkp + c * V[:, q]
        sweeps += 1

    values = np.diag(A)
    top = float(values.max())
    candidates = np.flatnonzero(values >= top - EIGEN_TIE_TOL)
    best = min(candidates, key=lambda i: int(np.argmax(np.abs(V[:, i]))))
    vector = V[:, best].copy()
    vector /= np.linalg.norm(vector)
    lead = int(np.argmax(np.abs(vector)))
    if vector[lead] < 0.0:
        vector = -vector
    return EigenPair(float(values[best]), vector)


def project_onto_client_direction(U: np.ndarray, y_max: np.ndarray) -> np.ndarray:
    """Rank-1 projection P = (U y) y^T of the updates onto a client direction."""
    U = as_update_matrix(U)
    y = np.asarray(y_max, dtype=np.float64)
    if y.shape != (U.shape[1],):
        raise InputError(f"direction length {y.shape} does not match {U.shape[1]} columns")
    if abs(np.linalg.norm(y) - 1.0) > 1e-9:
        raise InputError("direction vector must have unit Euclidean norm")
    return np.outer(U @ y, y)
