"""K-Means against an exhaustive-search oracle and hand-computed silhouettes.

The brute-force oracle enumerates every assignment of n points into exactly k
non-empty clusters and minimizes within-cluster squared distance directly, so
it shares no code with the Lloyd implementation it checks.
"""

from __future__ import annotations

import numpy as np
import pytest

from synthqa.clustering import (
    ClusteringError,
    assign,
    choose_k,
    kmeans,
    load_model,
    model_from_json,
    model_to_json,
    save_model,
    silhouette_score,
)
from synthqa.embedding import Vector


def vecs(rows) -> list[Vector]:
    rows = np.asarray(rows, dtype=np.float64)
    return [Vector(dim=rows.shape[1], values=tuple(map(float, r)), normalized=False) for r in rows]


# --- oracle ------------------------------------------------------------------

def brute_force_optimal(x: np.ndarray, k: int) -> tuple[float, np.ndarray]:
    """Minimum inertia over all assignments into exactly k non-empty clusters."""
    n = len(x)
    total = k**n
    sq_total = float((x**2).sum())
    best_inertia = np.inf
    best_labels = None
    radices = k ** np.arange(n, dtype=np.int64)
    for start in range(0, total, 200_000):
        idx = np.arange(start, min(start + 200_000, total), dtype=np.int64)
        digits = (idx[:, None] // radices[None, :]) % k  # (B, n)
        valid = np.ones(len(idx), dtype=bool)
        for c in range(k):
            valid &= (digits == c).any(axis=1)
        digits = digits[valid]
        if not len(digits):
            continue
        inertia = np.full(len(digits), sq_total)
        for c in range(k):
            mask = (digits == c).astype(np.float64)
            counts = mask.sum(axis=1)
            sums = mask @ x
            inertia -= np.einsum("bd,bd->b", sums, sums) / counts
        pos = int(np.argmin(inertia))
        if inertia[pos] < best_inertia:
            best_inertia = float(inertia[pos])
            best_labels = digits[pos].copy()
    return best_inertia, best_labels


def partitions_equal(a, b) -> bool:
    """Same grouping regardless of cluster label names."""
    groups_a = {}
    groups_b = {}
    for i, (la, lb) in enumerate(zip(a, b)):
        groups_a.setdefault(la, set()).add(i)
        groups_b.setdefault(lb, set()).add(i)
    return set(frozenset(g) for g in groups_a.values()) == set(
        frozenset(g) for g in groups_b.values()
    )


def adjusted_rand_index(a, b) -> float:
    from math import comb

    a = np.asarray(a)
    b = np.asarray(b)
    n = len(a)
    labels_a = np.unique(a)
    labels_b = np.unique(b)
    contingency = np.array(
        [[int(((a == la) & (b == lb)).sum()) for lb in labels_b] for la in labels_a]
    )
    sum_comb = sum(comb(int(x), 2) for x in contingency.ravel())
    sum_a = sum(comb(int(x), 2) for x in contingency.sum(axis=1))
    sum_b = sum(comb(int(x), 2) for x in contingency.sum(axis=0))
    expected = sum_a * sum_b / comb(n, 2)
    max_index = (sum_a + sum_b) / 2
    if max_index == expected:
        return 1.0
    return (sum_comb - expected) / (max_index - expected)


def planted(rng, n_per, centers, spread):
    centers = np.asarray(centers, dtype=np.float64)
    points, labels = [], []
    for ci, center in enumerate(centers):
        points.append(center + rng.normal(0.0, spread, size=(n_per, len(center))))
        labels += [ci] * n_per
    return np.vstack(points), np.array(labels)


# --- kmeans ------------------------------------------------------------------

class TestKmeans:
    def test_two_far_points_k2(self):
        model = kmeans(vecs([[0.0, 0.0], [10.0, 0.0]]), k=2, seed=0)
        assert model.inertia == pytest.approx(0.0, abs=1e-12)
        assert sorted(model.assignments) == [0, 1]

    def test_k_equals_n_zero_inertia(self):
        rng = np.random.default_rng(3)
        model = kmeans(vecs(rng.normal(size=(5, 3))), k=5, seed=1)
        assert model.inertia == pytest.approx(0.0, abs=1e-12)
        assert sorted(model.assignments) == [0, 1, 2, 3, 4]

    def test_k_larger_than_distinct_rejected(self):
        with pytest.raises(ClusteringError, match="distinct"):
            kmeans(vecs([[1.0, 0.0], [1.0, 0.0]]), k=2, seed=0)

    def test_dimension_mismatch_rejected(self):
        items = [Vector(dim=2, values=(0.0, 1.0), normalized=False),
                 Vector(dim=3, values=(0.0, 1.0, 0.0), normalized=False)]
        with pytest.raises(ClusteringError, match="dim"):
            kmeans(items, k=2, seed=0)

    def test_planted_12_points_matches_exhaustive_search(self):
        rng = np.random.default_rng(42)
        x, truth = planted(rng, 4, [[0, 0, 0], [40, 0, 0], [0, 40, 0]], spread=0.5)
        optimal_inertia, optimal_labels = brute_force_optimal(x, 3)
        model = kmeans(vecs(x), k=3, seed=7)
        assert partitions_equal(model.assignments, truth)
        assert partitions_equal(optimal_labels, truth)
        assert model.inertia == pytest.approx(optimal_inertia, rel=1e-9)

    def test_inertia_within_ten_percent_of_optimum(self):
        rng = np.random.default_rng(2024)
        for trial in range(20):
            n = int(rng.integers(6, 13))
            k = int(rng.integers(2, 4))
            x = rng.normal(size=(n, 3))
            optimal, _ = brute_force_optimal(x, k)
            model = kmeans(vecs(x), k=k, seed=trial)
            assert model.inertia <= optimal * 1.10 + 1e-12

    def test_inertia_monotone_over_iterations(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=(40, 4))
        traces: dict[int, list[float]] = {}
        kmeans(
            vecs(x), k=4, seed=11,
            iteration_hook=lambda r, it, inertia, mv: traces.setdefault(r, []).append(inertia),
        )
        assert traces
        for trace in traces.values():
            for earlier, later in zip(trace, trace[1:]):
                assert later <= earlier + 1e-12

    def test_determinism(self):
        rng = np.random.default_rng(8)
        items = vecs(rng.normal(size=(30, 5)))
        a = kmeans(items, k=4, seed=123)
        b = kmeans(items, k=4, seed=123)
        assert a == b

    def test_permutation_equivariance_on_separated_data(self):
        rng = np.random.default_rng(6)
        x, _ = planted(rng, 10, [[0, 0], [50, 0], [0, 50]], spread=0.5)
        items = vecs(x)
        base = kmeans(items, k=3, seed=4)
        perm = rng.permutation(len(items))
        permuted = kmeans([items[i] for i in perm], k=3, seed=4)
        # compare partitions through the permutation, ignoring label names
        restored = [None] * len(items)
        for new_pos, old_pos in enumerate(perm):
            restored[old_pos] = permuted.assignments[new_pos]
        assert partitions_equal(base.assignments, restored)

    def test_recomputed_inertia_matches(self):
        rng = np.random.default_rng(9)
        x = rng.normal(size=(25, 3))
        model = kmeans(vecs(x), k=3, seed=2)
        centers = np.array([c.values for c in model.centroids])
        recomputed = sum(
            float(((x[i] - centers[model.assignments[i]]) ** 2).sum()) for i in range(len(x))
        )
        assert model.inertia == pytest.approx(recomputed, rel=1e-9)
        # every point is with its nearest centroid
        for i in range(len(x)):
            d2 = ((centers - x[i]) ** 2).sum(axis=1)
            assert model.assignments[i] == int(np.argmin(d2))

    def test_every_cluster_non_empty(self):
        rng = np.random.default_rng(10)
        x = rng.normal(size=(20, 2))
        model = kmeans(vecs(x), k=6, seed=3)
        assert set(model.assignments) == set(range(6))


class TestAssign:
    def test_exact_centroid_match(self):
        model = kmeans(vecs([[0, 0], [10, 0], [0, 10]]), k=3, seed=0)
        for cid, centroid in enumerate(model.centroids):
            assert assign(model, centroid) == cid

    def test_equidistant_tie_goes_to_lowest_id(self):
        model = kmeans(vecs([[0.0, 0.0], [2.0, 0.0]]), k=2, seed=0)
        centers = sorted(range(2), key=lambda c: model.centroids[c].values)
        midpoint = Vector(dim=2, values=(1.0, 0.0), normalized=False)
        # midpoint is equidistant; argmin must return the lowest cluster id
        assert assign(model, midpoint) == min(centers)

    def test_matches_linear_scan_oracle(self):
        rng = np.random.default_rng(77)
        model = kmeans(vecs(rng.normal(size=(15, 4))), k=4, seed=5)
        centers = np.array([c.values for c in model.centroids])
        for _ in range(50):
            v = rng.normal(size=4)
            expected = 0
            best = np.inf
            for c in range(len(centers)):  # independent linear scan
                d2 = float(((centers[c] - v) ** 2).sum())
                if d2 < best:
                    best = d2
                    expected = c
            assert assign(model, Vector(dim=4, values=tuple(map(float, v)), normalized=False)) == expected

    def test_dimension_mismatch(self):
        model = kmeans(vecs([[0, 0], [5, 5]]), k=2, seed=0)
        with pytest.raises(ClusteringError):
            assign(model, Vector(dim=3, values=(0.0, 0.0, 0.0), normalized=False))


class TestSilhouette:
    def test_two_tight_far_pairs(self):
        items = vecs([[0, 0], [0.1, 0], [50, 0], [50.1, 0]])
        score = silhouette_score(items, [0, 0, 1, 1])
        assert score > 0.9

    def test_hand_formula_on_four_points(self):
        pts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 2.0], [3.0, 1.0]])
        labels = [0, 1, 0, 1]  # deliberately poor split
        dist = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2))

        expected = []
        for i in range(4):
            same = [j for j in range(4) if labels[j] == labels[i] and j != i]
            other = [j for j in range(4) if labels[j] != labels[i]]
            a = float(np.mean([dist[i][j] for j in same]))
            b = float(np.mean([dist[i][j] for j in other]))
            expected.append((b - a) / max(a, b))
        hand = float(np.mean(expected))

        assert silhouette_score(vecs(pts), labels) == pytest.approx(hand, abs=1e-9)

    def test_single_cluster_rejected(self):
        with pytest.raises(ClusteringError):
            silhouette_score(vecs([[0, 0], [1, 1]]), [0, 0])

    def test_singleton_contributes_zero(self):
        items = vecs([[0, 0], [0.2, 0], [9, 9]])
        score = silhouette_score(items, [0, 0, 1])
        by_hand = []
        pts = np.array([[0, 0], [0.2, 0], [9, 9]], dtype=float)
        dist = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2))
        for i in (0, 1):
            a = dist[i][1 - i]
            b = dist[i][2]
            by_hand.append((b - a) / max(a, b))
        by_hand.append(0.0)
        assert score == pytest.approx(float(np.mean(by_hand)), abs=1e-9)


class TestChooseK:
    def test_recovers_planted_k(self):
        rng = np.random.default_rng(12)
        x, _ = planted(rng, 8, [[0, 0], [40, 0], [0, 40]], spread=0.5)
        best, scores = choose_k(vecs(x), seed=1)
        assert best == 3
        assert scores[3] == max(scores.values())


class TestSerialization:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(14)
        model = kmeans(vecs(rng.normal(size=(10, 3))), k=2, seed=6)
        path = tmp_path / "model.json"
        save_model(model, path, item_ids=[f"c{i}" for i in range(10)])
        assert load_model(path) == model

    def test_version_checked(self):
        doc = model_to_json(kmeans(vecs([[0, 0], [9, 9]]), k=2, seed=0))
        doc["version"] = 99
        with pytest.raises(ClusteringError, match="version"):
            model_from_json(doc)


def test_planted_recovery_ari():
    # 3 clusters, n=120, separation 20x spread, 10 seeds
    for seed in range(10):
        rng = np.random.default_rng(1000 + seed)
        x, truth = planted(rng, 40, [[0] * 6, [20] + [0] * 5, [0, 20] + [0] * 4], spread=1.0)
        model = kmeans(vecs(x), k=3, seed=seed)
        assert adjusted_rand_index(model.assignments, truth) >= 0.9
