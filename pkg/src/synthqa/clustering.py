"""K-Means over embedding vectors, written for reproducibility.

Initialization is k-means++ driven by a seeded PRNG, Lloyd iterations run
until the largest centroid movement drops below ``tol``, empty clusters are
reseeded to the point currently farthest from its assigned centroid, and
every argmin tie resolves to the lowest index. Fixed ``(vectors, k, seed)``
therefore produce the same model on every run.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .embedding import Vector

CLUSTER_MODEL_VERSION = 1
DEFAULT_RESTARTS = 10

IterationHook = Callable[[int, int, float, float], None]  # (restart, iteration, inertia, max_movement)


class ClusteringError(ValueError):
    pass


@dataclass(frozen=True)
class ClusterModel:
    k: int
    dim: int
    centroids: tuple[Vector, ...]
    assignments: tuple[int, ...]
    inertia: float
    seed: int
    iterations_run: int


def as_matrix(vectors: Sequence[Vector]) -> np.ndarray:
    if not vectors:
        raise ClusteringError("empty vector list")
    dim = vectors[0].dim
    for i, v in enumerate(vectors):
        if v.dim != dim:
            raise ClusteringError(f"vector {i} has dim {v.dim}, expected {dim}")
    return np.array([v.values for v in vectors], dtype=np.float64)


def _squared_distances(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances, shape (n_points, n_centers)."""
    diff = points[:, None, :] - centers[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def pairwise_squared_distances(x: np.ndarray) -> np.ndarray:
    """All-pairs squared distances via the dot-product expansion.

    O(n^2) memory instead of O(n^2 d); small negatives from rounding are
    clamped to zero.
    """
    sq = np.einsum("ij,ij->i", x, x)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.fill_diagonal(d2, 0.0)
    return np.maximum(d2, 0.0)


def _nearest(points: np.ndarray, centers: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    d2 = _squared_distances(points, centers)
    labels = np.argmin(d2, axis=1)  # argmin returns the lowest index on ties
    return labels, d2[np.arange(len(points)), labels]


def _kmeanspp_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]), dtype=np.float64)
    first = int(rng.integers(n))
    centers[0] = x[first]
    d2 = np.einsum("ij,ij->i", x - centers[0], x - centers[0])
    for c in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            # all remaining mass at chosen centers; fall back to uniform choice
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centers[c] = x[idx]
        cand = np.einsum("ij,ij->i", x - centers[c], x - centers[c])
        d2 = np.minimum(d2, cand)
    return centers


def kmeans(
    vectors: Sequence[Vector],
    k: int,
    seed: int,
    max_iter: int = 300,
    tol: float = 1e-6,
    n_init: int = DEFAULT_RESTARTS,
    iteration_hook: IterationHook | None = None,
) -> ClusterModel:
    """Lloyd's algorithm, best of ``n_init`` seeded k-means++ restarts.

    All restarts draw from one PRNG seeded with ``seed``, so the result is
    deterministic for fixed (vectors, k, seed). The winner has the lowest
    final inertia; ties keep the earliest restart.
    """
    x = as_matrix(vectors)
    if k < 1:
        raise ClusteringError("k must be positive")
    if n_init < 1:
        raise ClusteringError("n_init must be positive")
    distinct = len({tuple(row) for row in x})
    if k > distinct:
        raise ClusteringError(f"k={k} exceeds the number of distinct vectors ({distinct})")

    rng = np.random.default_rng(seed)
    best: tuple[float, np.ndarray, np.ndarray, int] | None = None
    for restart in range(n_init):
        centers, labels, inertia, iterations = _lloyd_once(
            x, k, rng, max_iter, tol, restart, iteration_hook
        )
        if best is None or inertia < best[0]:
            best = (inertia, centers, labels, iterations)

    inertia, centers, labels, iterations = best
    return ClusterModel(
        k=k,
        dim=x.shape[1],
        centroids=tuple(
            Vector(dim=x.shape[1], values=tuple(float(v) for v in row), normalized=False)
            for row in centers
        ),
        assignments=tuple(int(c) for c in labels),
        inertia=inertia,
        seed=seed,
        iterations_run=iterations,
    )


def _lloyd_once(
    x: np.ndarray,
    k: int,
    rng: np.random.Generator,
    max_iter: int,
    tol: float,
    restart: int,
    iteration_hook: IterationHook | None,
) -> tuple[np.ndarray, np.ndarray, float, int]:
    centers = _kmeanspp_init(x, k, rng)
    iterations = 0
    for iteration in range(1, max_iter + 1):
        iterations = iteration
        labels, dist2 = _nearest(x, centers)
        labels, dist2 = _repair_empty(x, centers, labels, dist2, k)
        inertia = float(dist2.sum())

        new_centers = centers.copy()
        for c in range(k):
            members = x[labels == c]
            if len(members):
                new_centers[c] = members.mean(axis=0)
        movement = float(np.sqrt(((new_centers - centers) ** 2).sum(axis=1)).max())
        if iteration_hook is not None:
            iteration_hook(restart, iteration, inertia, movement)
        centers = new_centers
        if movement < tol:
            break

    # Final assignment against the final centroids so that the model invariant
    # (every item sits with its nearest centroid) holds exactly.
    labels, dist2 = _nearest(x, centers)
    labels, dist2 = _repair_empty(x, centers, labels, dist2, k)
    return centers, labels, float(dist2.sum()), iterations


def _repair_empty(
    x: np.ndarray,
    centers: np.ndarray,
    labels: np.ndarray,
    dist2: np.ndarray,
    k: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Reseed each empty cluster to the point farthest from its centroid."""
    for c in range(k):
        if np.any(labels == c):
            continue
        worst = int(np.argmax(dist2))
        centers[c] = x[worst]
        labels, dist2 = _nearest(x, centers)
    return labels, dist2


def assign(model: ClusterModel, v: Vector) -> int:
    """Nearest centroid by squared Euclidean distance; ties pick the lowest id."""
    if v.dim != model.dim:
        raise ClusteringError(f"vector dim {v.dim} does not match model dim {model.dim}")
    centers = np.array([c.values for c in model.centroids], dtype=np.float64)
    point = np.array(v.values, dtype=np.float64)
    d2 = ((centers - point) ** 2).sum(axis=1)
    return int(np.argmin(d2))


def silhouette_score(vectors: Sequence[Vector], assignments: Sequence[int]) -> float:
    """Mean silhouette, standard definition; singleton clusters contribute 0."""
    x = as_matrix(vectors)
    labels = np.asarray(assignments, dtype=np.int64)
    if len(labels) != len(x):
        raise ClusteringError("assignments length does not match vectors")
    cluster_ids = np.unique(labels)
    if len(cluster_ids) < 2:
        raise ClusteringError("silhouette requires at least 2 clusters")

    dists = np.sqrt(pairwise_squared_distances(x))
    scores = np.zeros(len(x))
    for i in range(len(x)):
        own = labels[i]
        own_mask = labels == own
        if own_mask.sum() == 1:
            scores[i] = 0.0
            continue
        a = dists[i][own_mask & (np.arange(len(x)) != i)].mean()
        b = min(dists[i][labels == other].mean() for other in cluster_ids if other != own)
        scores[i] = 0.0 if max(a, b) == 0.0 else (b - a) / max(a, b)
    return float(scores.mean())


def choose_k(
    vectors: Sequence[Vector],
    seed: int,
    k_min: int = 2,
    k_max: int = 12,
) -> tuple[int, dict[int, float]]:
    """Scan k in [k_min, min(k_max, n-1)] and pick the max-silhouette k."""
    x = as_matrix(vectors)
    distinct = len({tuple(row) for row in x})
    hi = min(k_max, len(x) - 1, distinct)
    if hi < k_min:
        raise ClusteringError(f"not enough distinct vectors to scan k in [{k_min}, {hi}]")
    scores: dict[int, float] = {}
    for k in range(k_min, hi + 1):
        model = kmeans(vectors, k=k, seed=seed)
        scores[k] = silhouette_score(vectors, model.assignments)
    best = max(scores, key=lambda k: (scores[k], -k))
    return best, scores


def model_to_json(model: ClusterModel, item_ids: Sequence[str] | None = None) -> dict:
    doc = {
        "version": CLUSTER_MODEL_VERSION,
        "k": model.k,
        "dim": model.dim,
        "seed": model.seed,
        "iterations_run": model.iterations_run,
        "inertia": model.inertia,
        "centroids": [list(c.values) for c in model.centroids],
        "assignments": list(model.assignments),
    }
    if item_ids is not None:
        doc["item_ids"] = list(item_ids)
    return doc


def model_from_json(doc: dict) -> ClusterModel:
    if doc.get("version") != CLUSTER_MODEL_VERSION:
        raise ClusteringError(f"unsupported cluster model version: {doc.get('version')!r}")
    dim = doc["dim"]
    return ClusterModel(
        k=doc["k"],
        dim=dim,
        centroids=tuple(
            Vector(dim=dim, values=tuple(float(v) for v in row), normalized=False)
            for row in doc["centroids"]
        ),
        assignments=tuple(int(c) for c in doc["assignments"]),
        inertia=float(doc["inertia"]),
        seed=int(doc["seed"]),
        iterations_run=int(doc["iterations_run"]),
    )


def save_model(model: ClusterModel, path: str | Path, item_ids: Sequence[str] | None = None) -> None:
    Path(path).write_text(json.dumps(model_to_json(model, item_ids), indent=2) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> ClusterModel:
    return model_from_json(json.loads(Path(path).read_text(encoding="utf-8")))
