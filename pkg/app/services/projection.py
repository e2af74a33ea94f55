import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from scipy.spatial.distance import pdist, squareform

from app.core.exceptions import ProjectionError
from app.models.report_models import ProjectionPoint
from app.utils.format_helpers import FormatHelper
from app.utils.seeding import PROJECTION_STREAM, SeedHelper

logger = logging.getLogger(__name__)


class PowerIterationPCA:
    """Top principal components by power iteration with deflation"""

    def __init__(self, n_components: int = 2, max_iter: int = 1000, tol: float = 1e-9, seed: int = 0):
        self.n_components = n_components
        self.max_iter = max_iter
        self.tol = tol
        self.seed = seed
        self.mean: Optional[np.ndarray] = None
        self.components: Optional[np.ndarray] = None
        self.eigenvalues: Optional[np.ndarray] = None

    def _power_iteration(self, A: np.ndarray, previous: List[np.ndarray], rng: np.random.Generator) -> np.ndarray:
        v = self._orthonormalize(rng.standard_normal(A.shape[0]), previous)
        scale = max(float(np.abs(A).max()), 1.0)
        for _ in range(self.max_iter):
            Av = A @ v
            if np.linalg.norm(Av) <= 1e-12 * scale:
                # null space of the deflated matrix: any orthonormal direction is exact
                return v
            v_new = self._orthonormalize(Av, previous)
            # eigenvectors are defined up to sign
            if min(np.linalg.norm(v - v_new), np.linalg.norm(v + v_new)) < self.tol:
                return v_new
            v = v_new
        logger.debug(f"Power iteration hit the {self.max_iter}-iteration cap")
        return v

    @staticmethod
    def _orthonormalize(v: np.ndarray, previous: List[np.ndarray]) -> np.ndarray:
        for component in previous:
            v = v - (component @ v) * component
        norm = np.linalg.norm(v)
        if norm == 0.0:
            raise ProjectionError("Cannot find a direction orthogonal to the previous components")
        return v / norm

    def fit(self, X: np.ndarray) -> "PowerIterationPCA":
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] < 2:
            raise ProjectionError(f"Need at least 2 vectors to project, got shape {X.shape}")
        if self.n_components > X.shape[1]:
            raise ProjectionError(f"Cannot take {self.n_components} components of {X.shape[1]}-dimensional data")

        self.mean = X.mean(axis=0)
        centered = X - self.mean
        covariance = centered.T @ centered / (X.shape[0] - 1)
        if not np.any(np.abs(np.diag(covariance)) > 0.0):
            raise ProjectionError("All vectors are identical; zero variance cannot be projected")

        rng = SeedHelper.rng(self.seed, PROJECTION_STREAM)
        A = covariance.copy()
        components: List[np.ndarray] = []
        eigenvalues = []
        for _ in range(self.n_components):
            v = self._power_iteration(A, components, rng)
            eigenvalue = float(v @ covariance @ v)
            components.append(v)
            eigenvalues.append(eigenvalue)
            A = A - eigenvalue * np.outer(v, v)

        self.components = np.array(components).T
        self.eigenvalues = np.array(eigenvalues)
        return self

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.mean) @ self.components

    def fit_transform(self, X: np.ndarray) -> np.ndarray:
        return self.fit(X).transform(X)


def project_2d(
    vectors: np.ndarray,
    labels: Sequence[str],
    ids: Optional[Sequence[str]] = None,
    seed: int = 0,
) -> List[ProjectionPoint]:
    """
    Center and project embeddings onto their top two principal components

    Args:
        vectors: (N, D) embeddings, N >= 2
        labels: N class labels
        ids: N document ids; row numbers when omitted

    Returns:
        One point per input row, in input order
    """
    vectors = np.asarray(vectors, dtype=np.float64)
    if len(labels) != vectors.shape[0]:
        raise ProjectionError(f"Got {vectors.shape[0]} vectors for {len(labels)} labels")
    ids = list(ids) if ids is not None else [str(row) for row in range(vectors.shape[0])]
    coordinates = PowerIterationPCA(n_components=2, seed=seed).fit_transform(vectors)
    logger.info(f"Projected {vectors.shape[0]} vectors of dimension {vectors.shape[1]} to 2D")
    return [
        ProjectionPoint(doc_id=str(doc_id), x=float(x), y=float(y), label=str(label))
        for doc_id, (x, y), label in zip(ids, coordinates, labels)
    ]


def silhouette_score(points: np.ndarray, labels: Sequence[str]) -> float:
    """Mean silhouette over all points with Euclidean distance; singleton clusters score 0"""
    points = np.asarray(points, dtype=np.float64)
    labels = np.asarray([str(label) for label in labels])
    classes = np.unique(labels)
    if len(classes) < 2:
        raise ProjectionError("Silhouette needs at least two labels")
    distances = squareform(pdist(points))
    scores = np.zeros(len(points))
    for i in range(len(points)):
        same = labels == labels[i]
        if same.sum() == 1:
            continue
        a = distances[i, same].sum() / (same.sum() - 1)
        b = min(distances[i, labels == other].mean() for other in classes if other != labels[i])
        denominator = max(a, b)
        scores[i] = (b - a) / denominator if denominator > 0 else 0.0
    return float(scores.mean())


def write_projection_tsv(points: List[ProjectionPoint], path: Path, config: Optional[Dict[str, Any]] = None) -> Path:
    rows = [[point.doc_id, point.x, point.y, point.label] for point in points]
    return FormatHelper.write_tsv(path, ["id", "x", "y", "label"], rows, config)


def write_raw_tsv(
    ids: Sequence[str],
    vectors: np.ndarray,
    labels: Sequence[str],
    path: Path,
    config: Optional[Dict[str, Any]] = None,
) -> Path:
    """Full-dimensional embeddings with labels, for external visualization tools"""
    vectors = np.asarray(vectors, dtype=np.float64)
    columns = ["id", "label"] + [f"v{index}" for index in range(vectors.shape[1])]
    rows = ([doc_id, label, *row.tolist()] for doc_id, label, row in zip(ids, labels, vectors))
    return FormatHelper.write_tsv(path, columns, rows, config)
