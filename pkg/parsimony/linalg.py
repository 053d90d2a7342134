# -*- coding: utf-8 -*-
"""Small dense linear-algebra helpers shared by the solvers"""

from typing import Tuple

import numpy as np

from .settings import config

EIGEN_FLOOR = config["procspec"]["eigen-floor"]


def as_matrix(value, name: str = "matrix") -> np.ndarray:
    """Cast scalars, vectors and nested lists into a 2-D float array"""
    matrix = np.atleast_2d(np.asarray(value, dtype=float))
    if matrix.ndim != 2:
        raise ValueError(f"{name} must be two-dimensional, got shape {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise ValueError(f"{name} has non-finite entries")
    return matrix


def sym(matrix: np.ndarray) -> np.ndarray:
    return 0.5 * (matrix + np.swapaxes(matrix, -1, -2))


def spectral_radius(matrix: np.ndarray) -> float:
    matrix = np.atleast_2d(matrix)
    if matrix.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(matrix))))


def psd_sqrt(matrix: np.ndarray, floor: float = EIGEN_FLOOR) -> Tuple[np.ndarray, np.ndarray]:
    """Symmetric square root and inverse square root of a PSD matrix

    Eigenvalues below ``floor`` times the largest one are lifted to that floor.
    """
    values, vectors = np.linalg.eigh(sym(matrix))
    values = np.maximum(values, floor * max(values.max(), floor))
    root = (vectors * np.sqrt(values)) @ vectors.T
    inv_root = (vectors / np.sqrt(values)) @ vectors.T
    return sym(root), sym(inv_root)


def sign_normalize(vector: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Flip a vector so that its first non-negligible component is positive"""
    vector = np.asarray(vector, dtype=float)
    scale = max(np.max(np.abs(vector)), tol)
    nonzero = np.flatnonzero(np.abs(vector) > tol * scale)
    if nonzero.size and vector[nonzero[0]] < 0:
        return -vector
    return vector


def sorted_eigh(matrix: np.ndarray, decimals: int = 12) -> Tuple[np.ndarray, np.ndarray]:
    """Eigenpairs of a symmetric matrix ordered by decreasing magnitude

    Ties in magnitude put the positive eigenvalue first and then the
    lexicographically smallest eigenvector. Eigenvectors follow the
    first-nonzero-positive sign convention.
    """
    values, vectors = np.linalg.eigh(sym(matrix))
    vectors = np.column_stack([sign_normalize(v) for v in vectors.T])

    def key(i):
        return (
            -round(abs(values[i]), decimals),
            0 if values[i] >= 0 else 1,
            tuple(np.round(vectors[:, i], decimals)),
        )

    order = sorted(range(len(values)), key=key)
    return values[order], vectors[:, order]


def condition_number(matrix: np.ndarray) -> float:
    singular_values = np.linalg.svd(matrix, compute_uv=False)
    if singular_values.size == 0 or singular_values[-1] == 0:
        return np.inf
    return float(singular_values[0] / singular_values[-1])

