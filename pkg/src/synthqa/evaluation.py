"""Dataset quality metrics and the evaluation report.

Three gates run over a generated dataset:

* relevance  -- cosine similarity between each question embedding and its
  source chunk embedding; pairs strictly below the threshold (default 0.80)
  are flagged for human review.
* lexical diversity -- Shannon entropy in bits of the pooled token
  distribution over all question texts, with the vocabulary size. Tokens come
  from the same tokenizer the local embedder uses.
* semantic diversity -- a 2D projection of generated question embeddings
  together with a small benchmark set (out-of-domain probes plus one
  in-domain probe), and each benchmark question's mean cosine similarity to
  its 5 nearest generated questions.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .embedding import EmbedBackendConfig, EmbeddingCache, Vector, embed_texts, tokenize
from .gateway import QUESTION_TYPES, QnaPair
from .projection import TsneConfig, scatter_export, tsne

REPORT_VERSION = 1
HISTOGRAM_BINS = 20
DEFAULT_THRESHOLD = 0.80
BENCHMARK_LABELS = ("out_of_domain", "in_domain")

# Comparison point quoted in reports: question entropy observed on a
# full-scale textbook-derived question set. Desk-scale runs land well below.
REFERENCE_ENTROPY_BITS = 6.63


class EvaluationError(ValueError):
    pass


def cosine_similarity(u: Vector, v: Vector) -> float:
    """dot(u, v) / (|u| |v|), clamped into [-1, 1] against rounding."""
    if u.dim != v.dim:
        raise EvaluationError(f"dimension mismatch: {u.dim} vs {v.dim}")
    a = np.asarray(u.values)
    b = np.asarray(v.values)
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise EvaluationError("cosine similarity is undefined for a zero vector")
    return float(np.clip(float(a @ b) / (na * nb), -1.0, 1.0))


@dataclass
class Histogram:
    """Counts over 20 equal-width bins spanning [0, 1].

    Bins are right-open except the last, which is right-closed so that a
    similarity of exactly 1.0 lands in the top bin. Negative similarities are
    clamped into bin 0 and tallied separately.
    """

    counts: list[int] = field(default_factory=lambda: [0] * HISTOGRAM_BINS)
    below_zero_clamped: int = 0

    def add(self, value: float) -> None:
        if value < 0.0:
            self.below_zero_clamped += 1
            self.counts[0] += 1
            return
        idx = min(int(value * HISTOGRAM_BINS), HISTOGRAM_BINS - 1)
        self.counts[idx] += 1

    def total(self) -> int:
        return sum(self.counts)

    @staticmethod
    def bin_edges() -> list[tuple[float, float]]:
        width = 1.0 / HISTOGRAM_BINS
        return [(i * width, (i + 1) * width) for i in range(HISTOGRAM_BINS)]


@dataclass
class RelevanceResult:
    pairs: list[QnaPair]
    histogram: Histogram
    flagged_pair_ids: list[str]


def relevance_report(
    pairs: Sequence[QnaPair],
    chunk_vecs: Mapping[str, Vector],
    question_vecs: Mapping[str, Vector],
    threshold: float = DEFAULT_THRESHOLD,
) -> RelevanceResult:
    """Score every pair, flag those strictly below the threshold.

    Flagged ids come back ordered by similarity ascending, then pair_id, so
    the human review queue starts with the worst pairs.
    """
    missing = [
        p.pair_id
        for p in pairs
        if p.chunk_id not in chunk_vecs or p.pair_id not in question_vecs
    ]
    if missing:
        raise EvaluationError(f"missing vectors for pairs: {', '.join(sorted(missing))}")

    histogram = Histogram()
    flagged: list[tuple[float, str]] = []
    for pair in pairs:
        sim = cosine_similarity(question_vecs[pair.pair_id], chunk_vecs[pair.chunk_id])
        pair.similarity = sim
        histogram.add(sim)
        if sim < threshold:
            if pair.status == "pending":
                pair.advance_status("flagged")
            flagged.append((sim, pair.pair_id))
    flagged.sort()
    return RelevanceResult(
        pairs=list(pairs),
        histogram=histogram,
        flagged_pair_ids=[pid for _, pid in flagged],
    )


def shannon_entropy(questions: Sequence[str]) -> tuple[float, int]:
    """Entropy in bits of the pooled token distribution, plus vocabulary size."""
    counts: Counter[str] = Counter()
    for question in questions:
        counts.update(tokenize(question))
    total = sum(counts.values())
    if total == 0:
        raise EvaluationError("no tokens in any question")
    entropy = 0.0
    for count in counts.values():
        p = count / total
        entropy -= p * math.log2(p)
    return max(entropy, 0.0), len(counts)


@dataclass(frozen=True)
class BenchmarkSet:
    questions: tuple[tuple[str, str], ...]  # (text, label)

    def __post_init__(self) -> None:
        if not self.questions:
            raise EvaluationError("benchmark set must not be empty")
        for text, label in self.questions:
            if label not in BENCHMARK_LABELS:
                raise EvaluationError(f"unknown benchmark label: {label!r}")
            if not text.strip():
                raise EvaluationError("benchmark question text must be non-empty")


def load_benchmark(path: str | Path | None = None) -> BenchmarkSet:
    """Read a benchmark file (JSON list of {text, label}); None = bundled set."""
    if path is None:
        raw = resources.files("synthqa").joinpath("assets", "benchmark_questions.json").read_text(
            encoding="utf-8"
        )
    else:
        raw = Path(path).read_text(encoding="utf-8")
    items = json.loads(raw)
    return BenchmarkSet(questions=tuple((item["text"], item["label"]) for item in items))


@dataclass
class BenchmarkNeighborStat:
    text: str
    label: str
    mean_top5_cosine: float


@dataclass
class DiversityResult:
    scatter_path: Path
    labels: list[str]
    coords: np.ndarray
    benchmark_stats: list[BenchmarkNeighborStat]
    final_kl: float | None = None


def diversity_projection(
    question_vecs: Mapping[str, Vector],
    benchmark: BenchmarkSet,
    embed_cfg: EmbedBackendConfig,
    tsne_cfg: TsneConfig,
    out_path: str | Path,
    format: str = "csv",
    cache: EmbeddingCache | None = None,
) -> DiversityResult:
    """Project generated + benchmark question embeddings to 2D and report how
    close each benchmark question sits to the generated set."""
    if len(question_vecs) < 3:
        raise EvaluationError("diversity projection needs at least 3 generated questions")

    gen_ids = sorted(question_vecs)
    gen_vectors = [question_vecs[pid] for pid in gen_ids]
    bench_texts = [text for text, _ in benchmark.questions]
    bench_vectors = embed_texts(bench_texts, embed_cfg, cache=cache)

    stats = []
    for (text, label), bvec in zip(benchmark.questions, bench_vectors):
        sims = sorted((cosine_similarity(bvec, gv) for gv in gen_vectors), reverse=True)
        top = sims[:5]
        stats.append(
            BenchmarkNeighborStat(text=text, label=label, mean_top5_cosine=sum(top) / len(top))
        )

    all_vectors = gen_vectors + bench_vectors
    labels = ["generated"] * len(gen_vectors) + [
        f"benchmark_{label}" for _, label in benchmark.questions
    ]
    kl_log: list[float] = []
    coords = tsne(all_vectors, tsne_cfg, trace_hook=lambda it, kl, g: kl_log.append(kl))
    path = scatter_export(coords, labels, out_path, format=format)
    return DiversityResult(
        scatter_path=path, labels=labels, coords=coords, benchmark_stats=stats,
        final_kl=kl_log[-1] if kl_log else None,
    )


@dataclass
class EvaluationReport:
    run_id: str
    threshold: float
    entropy_bits: float
    vocab_size: int
    histogram: Histogram
    flagged_pair_ids: list[str]
    counts_by_type: dict[str, int]
    projection_ref: str
    backend_ids: dict[str, str]
    total_pairs: int

    def __post_init__(self) -> None:
        if self.histogram.total() != self.total_pairs:
            raise EvaluationError("histogram counts must sum to the number of scored pairs")
        if self.entropy_bits > math.log2(max(self.vocab_size, 1)) + 1e-9:
            raise EvaluationError("entropy exceeds log2(vocab_size)")


def build_report(
    run_id: str,
    pairs: Sequence[QnaPair],
    relevance: RelevanceResult,
    entropy_bits: float,
    vocab_size: int,
    projection_ref: str,
    backend_ids: dict[str, str],
    threshold: float = DEFAULT_THRESHOLD,
) -> EvaluationReport:
    if not pairs:
        raise EvaluationError("nothing to report: no pairs were scored")
    counts = {qt: 0 for qt in QUESTION_TYPES}
    for pair in pairs:
        counts[pair.question_type] += 1
    return EvaluationReport(
        run_id=run_id,
        threshold=threshold,
        entropy_bits=entropy_bits,
        vocab_size=vocab_size,
        histogram=relevance.histogram,
        flagged_pair_ids=list(relevance.flagged_pair_ids),
        counts_by_type=counts,
        projection_ref=projection_ref,
        backend_ids=dict(backend_ids),
        total_pairs=len(pairs),
    )


def report_to_json(report: EvaluationReport) -> str:
    doc = {
        "version": REPORT_VERSION,
        "run_id": report.run_id,
        "threshold": report.threshold,
        "entropy_bits": report.entropy_bits,
        "reference_entropy_bits": REFERENCE_ENTROPY_BITS,
        "vocab_size": report.vocab_size,
        "total_pairs": report.total_pairs,
        "histogram": {
            "bins": HISTOGRAM_BINS,
            "range": [0.0, 1.0],
            "counts": report.histogram.counts,
            "below_zero_clamped": report.histogram.below_zero_clamped,
        },
        "flagged_pair_ids": report.flagged_pair_ids,
        "counts_by_type": report.counts_by_type,
        "projection_ref": report.projection_ref,
        "backend_ids": report.backend_ids,
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def report_from_json(raw: str) -> EvaluationReport:
    doc = json.loads(raw)
    if doc.get("version") != REPORT_VERSION:
        raise EvaluationError(f"unsupported report version: {doc.get('version')!r}")
    histogram = Histogram(
        counts=list(doc["histogram"]["counts"]),
        below_zero_clamped=doc["histogram"]["below_zero_clamped"],
    )
    return EvaluationReport(
        run_id=doc["run_id"],
        threshold=doc["threshold"],
        entropy_bits=doc["entropy_bits"],
        vocab_size=doc["vocab_size"],
        histogram=histogram,
        flagged_pair_ids=list(doc["flagged_pair_ids"]),
        counts_by_type=dict(doc["counts_by_type"]),
        projection_ref=doc["projection_ref"],
        backend_ids=dict(doc["backend_ids"]),
        total_pairs=doc["total_pairs"],
    )


def report_summary_text(report: EvaluationReport) -> str:
    """Human-readable summary with an ASCII similarity histogram."""
    lines = [
        f"run:          {report.run_id}",
        f"pairs scored: {report.total_pairs}",
        f"flagged:      {len(report.flagged_pair_ids)} below threshold {report.threshold:.2f}",
        f"entropy:      {report.entropy_bits:.4f} bits over {report.vocab_size} distinct tokens"
        f" (full-scale reference: {REFERENCE_ENTROPY_BITS})",
        "by type:      "
        + ", ".join(f"{qt}={report.counts_by_type.get(qt, 0)}" for qt in QUESTION_TYPES),
        f"projection:   {report.projection_ref}",
        "",
        "similarity histogram:",
    ]
    peak = max(report.histogram.counts) or 1
    for (lo, hi), count in zip(Histogram.bin_edges(), report.histogram.counts):
        bar = "#" * round(40 * count / peak)
        lines.append(f"  [{lo:.2f}, {hi:.2f}) {count:5d} {bar}")
    if report.histogram.below_zero_clamped:
        lines.append(f"  ({report.histogram.below_zero_clamped} negative similarities clamped into the first bin)")
    return "\n".join(lines) + "\n"
