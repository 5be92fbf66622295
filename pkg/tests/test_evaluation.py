"""Relevance scoring, entropy, diversity projection, and the report."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from synthqa.embedding import EmbedBackendConfig, Vector, local_deterministic_embed
from synthqa.evaluation import (
    BenchmarkSet,
    EvaluationError,
    Histogram,
    build_report,
    cosine_similarity,
    diversity_projection,
    load_benchmark,
    relevance_report,
    report_from_json,
    report_summary_text,
    report_to_json,
    shannon_entropy,
)
from synthqa.gateway import QnaPair
from synthqa.projection import TsneConfig


def vec(*values) -> Vector:
    return Vector(dim=len(values), values=tuple(float(v) for v in values), normalized=False)


def unit_at_cosine(c: float) -> Vector:
    """Unit vector whose cosine against (1, 0) is exactly c."""
    return vec(c, math.sqrt(1.0 - c * c))


def make_pair(pair_id: str, chunk_id: str = "c0", qtype: str = "fundamental_recall") -> QnaPair:
    return QnaPair(pair_id=pair_id, chunk_id=chunk_id, question=f"question {pair_id}",
                   answer="answer", question_type=qtype, source_ref="doc, page 1")


class TestCosine:
    def test_identical_unit_vectors(self):
        assert cosine_similarity(vec(1, 0), vec(1, 0)) == 1.0

    def test_orthogonal(self):
        assert cosine_similarity(vec(1, 0), vec(0, 1)) == 0.0

    def test_forty_five_degrees(self):
        assert cosine_similarity(vec(1, 1), vec(1, 0)) == pytest.approx(
            0.7071067811865475, abs=1e-8
        )

    def test_self_similarity_is_one(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            v = vec(*rng.normal(size=6))
            assert cosine_similarity(v, v) == pytest.approx(1.0, abs=1e-9)

    def test_symmetry(self):
        rng = np.random.default_rng(2)
        u = vec(*rng.normal(size=5))
        v = vec(*rng.normal(size=5))
        assert cosine_similarity(u, v) == cosine_similarity(v, u)

    def test_zero_vector_rejected(self):
        with pytest.raises(EvaluationError):
            cosine_similarity(vec(0, 0), vec(1, 0))

    def test_dim_mismatch_rejected(self):
        with pytest.raises(EvaluationError):
            cosine_similarity(vec(1, 0), vec(1, 0, 0))

    def test_clamped_to_range(self):
        big = vec(*([1e3] * 4))
        assert -1.0 <= cosine_similarity(big, big) <= 1.0


class TestRelevance:
    def test_all_perfect_similarity(self):
        pairs = [make_pair(f"p{i}") for i in range(5)]
        chunk_vecs = {"c0": vec(1, 0)}
        question_vecs = {p.pair_id: vec(1, 0) for p in pairs}
        result = relevance_report(pairs, chunk_vecs, question_vecs)
        assert result.flagged_pair_ids == []
        assert result.histogram.counts[19] == 5
        assert result.histogram.total() == 5
        assert all(p.similarity == 1.0 and p.status == "pending" for p in result.pairs)

    def test_orthogonal_pair_flagged(self):
        pairs = [make_pair("p0")]
        result = relevance_report(pairs, {"c0": vec(1, 0)}, {"p0": vec(0, 1)})
        assert result.flagged_pair_ids == ["p0"]
        assert pairs[0].similarity == 0.0
        assert pairs[0].status == "flagged"

    def test_strict_threshold_on_hand_built_vectors(self):
        # cosines are exact by construction: 0.85, 0.80, 0.79 against (1, 0)
        sims = {"pa": 0.85, "pb": 0.80, "pc": 0.79}
        pairs = [make_pair(pid) for pid in sims]
        chunk_vecs = {"c0": vec(1, 0)}
        question_vecs = {pid: unit_at_cosine(c) for pid, c in sims.items()}
        # oracle: direct cosine recomputation on the same hand-built vectors
        for pid, expected in sims.items():
            assert cosine_similarity(question_vecs[pid], chunk_vecs["c0"]) == pytest.approx(
                expected, abs=1e-12
            )
        result = relevance_report(pairs, chunk_vecs, question_vecs, threshold=0.80)
        assert result.flagged_pair_ids == ["pc"]  # 0.80 itself is not flagged

    def test_flagged_sorted_worst_first(self):
        sims = {"pa": 0.5, "pb": 0.1, "pc": 0.3}
        pairs = [make_pair(pid) for pid in sims]
        result = relevance_report(
            pairs, {"c0": vec(1, 0)}, {pid: unit_at_cosine(c) for pid, c in sims.items()}
        )
        assert result.flagged_pair_ids == ["pb", "pc", "pa"]

    def test_missing_vector_lists_ids(self):
        pairs = [make_pair("p0"), make_pair("p1")]
        with pytest.raises(EvaluationError, match="p1"):
            relevance_report(pairs, {"c0": vec(1, 0)}, {"p0": vec(1, 0)})

    def test_threshold_monotonicity(self):
        rng = np.random.default_rng(5)
        sims = rng.uniform(0.0, 1.0, size=30)
        flagged_sets = []
        for threshold in (0.3, 0.5, 0.8, 0.95):
            pairs = [make_pair(f"p{i}") for i in range(len(sims))]
            result = relevance_report(
                pairs, {"c0": vec(1, 0)},
                {f"p{i}": unit_at_cosine(s) for i, s in enumerate(sims)},
                threshold=threshold,
            )
            flagged_sets.append(set(result.flagged_pair_ids))
        for smaller, larger in zip(flagged_sets, flagged_sets[1:]):
            assert smaller <= larger

    def test_negative_similarity_clamped_into_first_bin(self):
        pairs = [make_pair("p0")]
        result = relevance_report(pairs, {"c0": vec(1, 0)}, {"p0": vec(-1, 0)})
        assert result.histogram.counts[0] == 1
        assert result.histogram.below_zero_clamped == 1
        assert result.flagged_pair_ids == ["p0"]


class TestHistogram:
    def test_right_open_bins(self):
        h = Histogram()
        h.add(0.05)  # [0.05, 0.10) -> bin 1
        assert h.counts[1] == 1

    def test_bin_boundary_goes_right(self):
        h = Histogram()
        h.add(0.10)
        assert h.counts[2] == 1

    def test_last_bin_right_closed(self):
        h = Histogram()
        h.add(1.0)
        assert h.counts[19] == 1

    def test_each_value_in_exactly_one_bin(self):
        rng = np.random.default_rng(9)
        h = Histogram()
        values = rng.uniform(0, 1, size=200)
        for v in values:
            h.add(float(v))
        assert h.total() == 200


class TestEntropy:
    def test_single_token(self):
        assert shannon_entropy(["alpha"]) == (0.0, 1)

    def test_uniform_four_tokens(self):
        entropy, vocab = shannon_entropy(["a b", "c d"])
        assert entropy == pytest.approx(2.0, abs=1e-12)
        assert vocab == 4

    def test_hand_formula_two_one(self):
        entropy, vocab = shannon_entropy(["a a b"])
        assert entropy == pytest.approx(0.91829583, abs=1e-6)
        assert vocab == 2

    def test_no_tokens_rejected(self):
        with pytest.raises(EvaluationError):
            shannon_entropy(["!!!", "---"])

    def test_permutation_invariance(self):
        questions = ["alpha beta", "gamma delta epsilon", "beta beta"]
        assert shannon_entropy(questions) == shannon_entropy(list(reversed(questions)))

    def test_duplication_invariance(self):
        questions = ["valve opens fast", "pump stops slowly"]
        assert shannon_entropy(questions)[0] == pytest.approx(
            shannon_entropy(questions * 2)[0], abs=1e-12
        )

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.text(alphabet="abc xyz", min_size=1), min_size=1, max_size=10))
    def test_entropy_bounded_by_log_vocab(self, questions):
        try:
            entropy, vocab = shannon_entropy(questions)
        except EvaluationError:
            return  # no tokens in any question
        assert 0.0 <= entropy <= math.log2(vocab) + 1e-9


class TestBenchmark:
    def test_bundled_benchmark_shape(self):
        bench = load_benchmark()
        labels = [label for _, label in bench.questions]
        assert labels.count("out_of_domain") == 4
        assert labels.count("in_domain") == 1

    def test_empty_rejected(self):
        with pytest.raises(EvaluationError):
            BenchmarkSet(questions=())

    def test_unknown_label_rejected(self):
        with pytest.raises(EvaluationError):
            BenchmarkSet(questions=(("q", "sideways"),))


class TestDiversityProjection:
    def test_small_union_exports_scatter(self, tmp_path):
        question_vecs = {
            f"p{i}": local_deterministic_embed(text, 64)
            for i, text in enumerate(
                ["reactor coolant flow", "turbine generator speed", "fuel channel power"]
            )
        }
        bench = BenchmarkSet(questions=(("what is mlflow", "out_of_domain"),))
        cfg = EmbedBackendConfig(dim=64)
        result = diversity_projection(
            question_vecs, bench, cfg,
            TsneConfig(perplexity=2, iterations=260, seed=0),
            tmp_path / "div.csv",
        )
        lines = result.scatter_path.read_text().splitlines()
        assert len(lines) == 5  # header + 4 points
        assert set(result.labels) == {"generated", "benchmark_out_of_domain"}
        assert len(result.benchmark_stats) == 1

    def test_requires_three_generated(self, tmp_path):
        question_vecs = {"p0": local_deterministic_embed("one", 32)}
        bench = BenchmarkSet(questions=(("q", "in_domain"),))
        with pytest.raises(EvaluationError, match="at least 3"):
            diversity_projection(question_vecs, bench, EmbedBackendConfig(dim=32),
                                 TsneConfig(), tmp_path / "x.csv")


def scored_pairs(n_flagged: int, n_total: int):
    pairs = [make_pair(f"p{i:02d}") for i in range(n_total)]
    sims = [0.5 if i < n_flagged else 0.9 for i in range(n_total)]
    chunk_vecs = {"c0": vec(1, 0)}
    question_vecs = {f"p{i:02d}": unit_at_cosine(s) for i, s in enumerate(sims)}
    return pairs, relevance_report(pairs, chunk_vecs, question_vecs)


class TestReport:
    def test_zero_pairs_rejected(self):
        pairs, relevance = scored_pairs(0, 1)
        with pytest.raises(EvaluationError, match="nothing to report"):
            build_report("r", [], relevance, 1.0, 2, "s.csv", {})

    def test_counts(self):
        pairs, relevance = scored_pairs(2, 10)
        report = build_report("r", pairs, relevance, 3.5, 40, "s.csv",
                              {"embedding": "local", "generation": "mock"})
        assert report.total_pairs == 10
        assert len(report.flagged_pair_ids) == 2
        assert sum(report.histogram.counts) == 10
        assert report.counts_by_type["fundamental_recall"] == 10

    def test_json_round_trip_byte_identical(self):
        pairs, relevance = scored_pairs(1, 4)
        report = build_report("r", pairs, relevance, 2.0, 7, "s.csv",
                              {"embedding": "local", "generation": "mock"})
        serialized = report_to_json(report)
        assert report_to_json(report_from_json(serialized)) == serialized

    def test_entropy_bound_enforced(self):
        pairs, relevance = scored_pairs(0, 2)
        with pytest.raises(EvaluationError, match="entropy"):
            build_report("r", pairs, relevance, entropy_bits=5.0, vocab_size=2,
                         projection_ref="s.csv", backend_ids={})

    def test_summary_text_mentions_key_numbers(self):
        pairs, relevance = scored_pairs(2, 6)
        report = build_report("r", pairs, relevance, 2.25, 9, "s.csv",
                              {"embedding": "local", "generation": "mock"})
        text = report_summary_text(report)
        assert "2.2500 bits" in text
        assert "2 below threshold 0.80" in text
        assert "similarity histogram:" in text
