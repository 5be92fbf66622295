"""Pipeline command line: each stage reads its predecessors' files from the
run directory, writes its own outputs, and appends a manifest entry with
input/output hashes so any stage can be re-run and verified exactly.

Stages: ingest -> summarize -> embed -> cluster -> generate -> evaluate,
plus `review serve`, `export`, and `run-all`. With ``--backend mock`` the
whole chain is offline and deterministic: fixed seed, fixed corpus, fixed
config produce byte-identical run directories.

Exit codes: 0 success, 1 validation error, 2 backend error, 3 missing
predecessor outputs.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

from . import clustering, evaluation, figures, projection, review
from .config import (
    ConfigError,
    CorpusInput,
    RunConfig,
    apply_backend_override,
    load_config,
)
from .embedding import (
    EmbeddingBackendError,
    EmbeddingCache,
    EmbeddingError,
    Vector,
    embed_texts,
)
from .gateway import (
    GenBackendError,
    QnaGenerationError,
    generate_qna,
    map_concurrent,
    pair_from_record,
    pair_to_record,
    summarize_chunk,
    Summary,
)
from .hashing import sha256_hex
from .ingest import (
    Chunk,
    DocumentError,
    chunk_document,
    chunk_from_record,
    chunk_to_record,
    load_document,
)

log = logging.getLogger(__name__)

VECTORS_MAGIC = "synthqa-vectors"
VECTORS_VERSION = 1

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_BACKEND = 2
EXIT_MISSING_DEPENDENCY = 3

_FORMAT_BY_SUFFIX = {".md": "markdown", ".markdown": "markdown",
                     ".txt": "plain_text", ".text": "plain_text",
                     ".jsonl": "block_json", ".ndjson": "block_json"}


class MissingStageError(RuntimeError):
    pass


def sample_corpus_path() -> str:
    return str(resources.files("synthqa").joinpath("assets", "sample_corpus.md"))


def _timestamp(mock: bool) -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is not None:
        moment = datetime.fromtimestamp(int(epoch), tz=timezone.utc)
    elif mock:
        # mock runs promise byte-identical outputs, so wall time cannot appear
        moment = datetime.fromtimestamp(0, tz=timezone.utc)
    else:
        moment = datetime.now(timezone.utc)
    return moment.strftime("%Y-%m-%dT%H:%M:%SZ")


class Stage:
    """Shared plumbing: output paths, file hashing, manifest entries."""

    def __init__(self, cfg: RunConfig, out_dir: Path):
        self.cfg = cfg
        self.out = out_dir
        self.out.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path:
        return self.out / name

    def require(self, name: str, produced_by: str) -> Path:
        p = self.path(name)
        if not p.exists():
            raise MissingStageError(
                f"{produced_by} outputs not found (missing {name}; run `synthqa {produced_by}` first)"
            )
        return p

    def cache(self) -> EmbeddingCache:
        path = self.cfg.embedding.cache_path or str(self.path("embedding_cache.jsonl"))
        return EmbeddingCache(path)

    def record_manifest(self, stage: str, inputs: list[Path], outputs: list[Path]) -> None:
        def rel(p: Path) -> str:
            try:
                return str(p.relative_to(self.out))
            except ValueError:
                return str(p)

        entry = {
            "stage": stage,
            "config_hash": self.cfg.config_hash(),
            "seed": self.cfg.seed,
            "timestamp": _timestamp(self.cfg.generation.kind == "mock"),
            "inputs": {rel(p): sha256_hex(p.read_bytes()) for p in sorted(inputs)},
            "outputs": {rel(p): sha256_hex(p.read_bytes()) for p in sorted(outputs)},
        }
        with self.path("manifest.jsonl").open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# Stage implementations


def stage_ingest(st: Stage) -> Path:
    if not st.cfg.corpus:
        raise ConfigError("no corpus inputs configured (use --corpus or the config file)")
    out_path = st.path("chunks.jsonl")
    inputs = []
    with out_path.open("w", encoding="utf-8") as fh:
        for item in st.cfg.corpus:
            doc = load_document(item.path, item.format)
            inputs.append(Path(item.path))
            for chunk in chunk_document(doc, st.cfg.chunking):
                fh.write(json.dumps(chunk_to_record(chunk), ensure_ascii=False) + "\n")
    st.record_manifest("ingest", inputs, [out_path])
    return out_path


def _load_chunks(st: Stage) -> list[Chunk]:
    path = st.require("chunks.jsonl", "ingest")
    chunks = []
    with path.open(encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                chunks.append(chunk_from_record(json.loads(line)))
    if not chunks:
        raise ConfigError("chunks.jsonl is empty; nothing to process")
    return chunks


def stage_summarize(st: Stage) -> Path:
    chunks = _load_chunks(st)
    summaries = map_concurrent(
        lambda c: summarize_chunk(c, st.cfg.generation), chunks, st.cfg.concurrency
    )
    out_path = st.path("summaries.jsonl")
    with out_path.open("w", encoding="utf-8") as fh:
        for s in summaries:
            rec = {"chunk_id": s.chunk_id, "key_concepts": list(s.key_concepts),
                   "summary_text": s.summary_text}
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
    st.record_manifest("summarize", [st.path("chunks.jsonl")], [out_path])
    return out_path


def _load_summaries(st: Stage) -> dict[str, Summary]:
    path = st.require("summaries.jsonl", "summarize")
    out: dict[str, Summary] = {}
    with path.open(encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                out[rec["chunk_id"]] = Summary(
                    chunk_id=rec["chunk_id"],
                    key_concepts=tuple(rec["key_concepts"]),
                    summary_text=rec["summary_text"],
                )
    return out


def _write_vectors(path: Path, ids: list[str], vectors: list[Vector], backend_id: str) -> None:
    with path.open("w", encoding="utf-8") as fh:
        header = {"magic": VECTORS_MAGIC, "version": VECTORS_VERSION,
                  "backend_id": backend_id, "dim": vectors[0].dim if vectors else 0}
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for vid, vec in zip(ids, vectors):
            fh.write(json.dumps({"id": vid, "values": list(vec.values)}) + "\n")


def _read_vectors(path: Path) -> tuple[str, dict[str, Vector]]:
    with path.open(encoding="utf-8") as fh:
        header = json.loads(fh.readline())
        if header.get("magic") != VECTORS_MAGIC or header.get("version") != VECTORS_VERSION:
            raise ConfigError(f"{path} is not a synthqa vectors file")
        dim = header["dim"]
        out: dict[str, Vector] = {}
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                out[rec["id"]] = Vector(dim=dim, values=tuple(float(v) for v in rec["values"]),
                                        normalized=True)
    return header["backend_id"], out


def stage_embed(st: Stage) -> Path:
    chunks = _load_chunks(st)
    cache = st.cache()
    vectors = embed_texts([c.text for c in chunks], st.cfg.embedding, cache=cache)
    out_path = st.path("vectors.jsonl")
    _write_vectors(out_path, [c.chunk_id for c in chunks], vectors, st.cfg.embedding.backend_id)
    st.record_manifest("embed", [st.path("chunks.jsonl")], [out_path])
    return out_path


def stage_cluster(st: Stage) -> Path:
    vectors_path = st.require("vectors.jsonl", "embed")
    _, by_id = _read_vectors(vectors_path)
    ids = sorted(by_id)
    vectors = [by_id[i] for i in ids]
    seed = st.cfg.stage_seed("cluster")

    if st.cfg.k is not None:
        k = st.cfg.k
    else:
        k, _scores = clustering.choose_k(vectors, seed=seed)
    model = clustering.kmeans(vectors, k=k, seed=seed)
    out_path = st.path("cluster.json")
    clustering.save_model(model, out_path, item_ids=ids)

    outputs = [out_path]
    if len(vectors) >= 4:
        tsne_cfg = dataclasses.replace(st.cfg.tsne, seed=st.cfg.stage_seed("cluster-scatter"))
        kl_log: list[float] = []
        coords = projection.tsne(vectors, tsne_cfg,
                                 trace_hook=lambda it, kl, g: kl_log.append(kl))
        labels = [f"cluster {c}" for c in model.assignments]
        outputs.append(projection.scatter_export(coords, labels, st.path("cluster_scatter.csv"), "csv"))
        outputs.append(projection.scatter_export(coords, labels, st.path("cluster_scatter.svg"), "svg"))
        outputs.append(projection.write_projection_sidecar(
            st.path("cluster_scatter.json"), tsne_cfg, len(vectors),
            kl_log[-1] if kl_log else None,
        ))
        outputs.append(figures.scatter_figure(coords, labels, st.path("figures/clusters.png"),
                                              title="Chunk embedding clusters (2D projection)"))
    else:
        log.warning("fewer than 4 vectors; skipping cluster scatter")
    st.record_manifest("cluster", [vectors_path], outputs)
    return out_path


def stage_generate(st: Stage) -> Path:
    chunks = _load_chunks(st)
    summaries = _load_summaries(st)
    missing = [c.chunk_id for c in chunks if c.chunk_id not in summaries]
    if missing:
        raise MissingStageError(
            f"summarize outputs not found for chunks: {', '.join(missing[:5])}"
        )

    def gen(chunk: Chunk):
        return generate_qna(chunk, summaries[chunk.chunk_id], st.cfg.n_pairs, st.cfg.generation)

    pair_lists = map_concurrent(gen, chunks, st.cfg.concurrency)
    out_path = st.path("pairs.jsonl")
    with out_path.open("w", encoding="utf-8") as fh:
        for pairs in pair_lists:
            for pair in pairs:
                fh.write(json.dumps(pair_to_record(pair), ensure_ascii=False) + "\n")
    st.record_manifest("generate", [st.path("chunks.jsonl"), st.path("summaries.jsonl")], [out_path])
    return out_path


def stage_evaluate(st: Stage) -> Path:
    chunks = {c.chunk_id: c for c in _load_chunks(st)}
    vectors_path = st.require("vectors.jsonl", "embed")
    pairs_path = st.require("pairs.jsonl", "generate")
    _, chunk_vecs = _read_vectors(vectors_path)

    pairs = []
    with pairs_path.open(encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                pairs.append(pair_from_record(json.loads(line)))
    if not pairs:
        raise ConfigError("pairs.jsonl is empty; nothing to evaluate")

    cache = st.cache()
    question_vectors = embed_texts([p.question for p in pairs], st.cfg.embedding, cache=cache)
    question_vecs = {p.pair_id: v for p, v in zip(pairs, question_vectors)}

    relevance = evaluation.relevance_report(pairs, chunk_vecs, question_vecs, st.cfg.threshold)
    entropy_bits, vocab_size = evaluation.shannon_entropy([p.question for p in pairs])

    benchmark = evaluation.load_benchmark(st.cfg.benchmark_path)
    tsne_cfg = dataclasses.replace(st.cfg.tsne, seed=st.cfg.stage_seed("diversity"))
    diversity = evaluation.diversity_projection(
        question_vecs, benchmark, st.cfg.embedding, tsne_cfg,
        st.path("diversity_scatter.csv"), format="csv", cache=cache,
    )
    diversity_svg = projection.scatter_export(
        diversity.coords, diversity.labels, st.path("diversity_scatter.svg"), "svg"
    )
    diversity_sidecar = projection.write_projection_sidecar(
        st.path("diversity_scatter.json"), tsne_cfg, len(diversity.labels), diversity.final_kl
    )
    diversity_png = figures.scatter_figure(
        diversity.coords, diversity.labels, st.path("figures/diversity.png"),
        title="Generated vs benchmark questions (2D projection)",
    )

    run_id = f"run-{st.cfg.config_hash()[:12]}-s{st.cfg.seed}"
    report = evaluation.build_report(
        run_id=run_id,
        pairs=pairs,
        relevance=relevance,
        entropy_bits=entropy_bits,
        vocab_size=vocab_size,
        projection_ref="diversity_scatter.csv",
        backend_ids={"embedding": st.cfg.embedding.backend_id,
                     "generation": st.cfg.generation.backend_id},
        threshold=st.cfg.threshold,
    )

    report_path = st.path("report.json")
    report_path.write_text(evaluation.report_to_json(report), encoding="utf-8")
    st.path("report.txt").write_text(evaluation.report_summary_text(report), encoding="utf-8")

    hist_csv = st.path("histogram.csv")
    with hist_csv.open("w", encoding="utf-8") as fh:
        fh.write("bin_start,bin_end,count\n")
        for (lo, hi), count in zip(evaluation.Histogram.bin_edges(), relevance.histogram.counts):
            fh.write(f"{lo:.2f},{hi:.2f},{count}\n")
    hist_png = figures.histogram_figure(
        relevance.histogram.counts, st.path("figures/similarity_histogram.png"),
        threshold=st.cfg.threshold,
    )

    scored_path = st.path("pairs.scored.jsonl")
    with scored_path.open("w", encoding="utf-8") as fh:
        for pair in pairs:
            fh.write(json.dumps(pair_to_record(pair), ensure_ascii=False) + "\n")

    neighbor_path = st.path("benchmark_neighbors.csv")
    with neighbor_path.open("w", encoding="utf-8") as fh:
        fh.write("label,mean_top5_cosine,text\n")
        for stat in diversity.benchmark_stats:
            fh.write(f"{stat.label},{stat.mean_top5_cosine!r},{json.dumps(stat.text)}\n")

    dataset_path = review.write_review_dataset(
        st.path("review_dataset.jsonl"),
        chunks=[chunks[cid] for cid in sorted(chunks)],
        pairs=pairs,
        threshold=st.cfg.threshold,
        entropy_bits=entropy_bits,
    )

    st.record_manifest(
        "evaluate",
        [st.path("chunks.jsonl"), vectors_path, pairs_path],
        [report_path, st.path("report.txt"), hist_csv, hist_png, scored_path,
         st.path("diversity_scatter.csv"), diversity_svg, diversity_sidecar,
         diversity_png, neighbor_path, dataset_path],
    )
    return report_path


STAGE_ORDER = ["ingest", "summarize", "embed", "cluster", "generate", "evaluate"]
STAGE_FNS = {
    "ingest": stage_ingest,
    "summarize": stage_summarize,
    "embed": stage_embed,
    "cluster": stage_cluster,
    "generate": stage_generate,
    "evaluate": stage_evaluate,
}


def stage_export(st: Stage, output: str | None) -> Path:
    dataset_path = st.require("review_dataset.jsonl", "evaluate")
    _, _, pairs = review.load_review_dataset(dataset_path)
    decisions = review.load_decision_log(st.path("decisions.jsonl"))
    lines = review.export_curated(pairs, decisions)
    out_path = Path(output) if output else st.path("curated.jsonl")
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
    print(f"exported {len(lines)} curated pairs to {out_path}")
    return out_path


# ---------------------------------------------------------------------------
# Argument parsing


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="synthqa",
        description="Synthetic QnA dataset pipeline: ingest, generate, evaluate, review.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="path to the run config JSON")
    common.add_argument("--backend", choices=["remote", "mock"],
                        help="override both generation and embedding backends")
    common.add_argument("--seed", type=int, help="global seed override")
    common.add_argument("--out", help="run directory (default from config)")
    common.add_argument("--corpus", action="append", default=None, metavar="PATH",
                        help="add a corpus file (format inferred from extension)")
    common.add_argument("--sample-corpus", action="store_true",
                        help="add the bundled sample corpus as an input")
    common.add_argument("--target-chars", type=int, help="chunking target size override")
    common.add_argument("--max-chars", type=int, help="chunking max size override")
    common.add_argument("--n-pairs", type=int, help="QnA pairs per chunk override")
    common.add_argument("--k", type=int, help="fixed cluster count (default: silhouette scan)")
    common.add_argument("--threshold", type=float, help="relevance flag threshold override")
    common.add_argument("--benchmark", help="benchmark questions file override")
    common.add_argument("--perplexity", type=float, help="t-SNE perplexity override")
    common.add_argument("--iterations", type=int, help="t-SNE iteration count override")

    sub = parser.add_subparsers(dest="command", required=True)
    for name in STAGE_ORDER:
        sub.add_parser(name, parents=[common], help=f"run the {name} stage")
    sub.add_parser("run-all", parents=[common], help="run every stage in order")

    p_review = sub.add_parser("review", help="human review console")
    review_sub = p_review.add_subparsers(dest="review_command", required=True)
    p_serve = review_sub.add_parser("serve", parents=[common], help="start the review service")
    p_serve.add_argument("--dataset", help="review dataset path (default <out>/review_dataset.jsonl)")
    p_serve.add_argument("--decisions", help="decision log path (default <out>/decisions.jsonl)")
    p_serve.add_argument("--bind", default=review.DEFAULT_BIND,
                         help="host:port to bind (loopback by default; exposing the "
                              "dataset on a routable interface is an explicit opt-in)")
    p_serve.add_argument("--static-dir", help="directory of review console assets")

    p_export = sub.add_parser("export", parents=[common], help="write the curated dataset")
    p_export.add_argument("--output", help="curated output path (default <out>/curated.jsonl)")
    return parser


def _resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(args.config)
    if args.backend:
        cfg = apply_backend_override(cfg, args.backend)
    if args.seed is not None:
        cfg.seed = args.seed
        cfg.generation = dataclasses.replace(cfg.generation, seed=args.seed)
    if args.out:
        cfg.output_dir = args.out
    corpus = list(cfg.corpus)
    for path in args.corpus or []:
        suffix = Path(path).suffix.lower()
        corpus.append(CorpusInput(path=path, format=_FORMAT_BY_SUFFIX.get(suffix, "plain_text")))
    if args.sample_corpus:
        corpus.append(CorpusInput(path=sample_corpus_path(), format="markdown"))
    cfg.corpus = corpus
    if args.target_chars or args.max_chars:
        cfg.chunking = dataclasses.replace(
            cfg.chunking,
            target_chars=args.target_chars or cfg.chunking.target_chars,
            max_chars=args.max_chars or cfg.chunking.max_chars,
        )
    if args.n_pairs is not None:
        cfg.n_pairs = args.n_pairs
    if args.k is not None:
        cfg.k = args.k
    if args.threshold is not None:
        cfg.threshold = args.threshold
    if args.benchmark:
        cfg.benchmark_path = args.benchmark
    if args.perplexity or args.iterations:
        cfg.tsne = dataclasses.replace(
            cfg.tsne,
            perplexity=args.perplexity or cfg.tsne.perplexity,
            iterations=args.iterations or cfg.tsne.iterations,
        )
    return cfg


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = _resolve_config(args)
        if args.command == "run-all":
            st = Stage(cfg, Path(cfg.output_dir))
            for name in STAGE_ORDER:
                print(f"[{name}] running...")
                out = STAGE_FNS[name](st)
                print(f"[{name}] wrote {out}")
        elif args.command in STAGE_FNS:
            st = Stage(cfg, Path(cfg.output_dir))
            out = STAGE_FNS[args.command](st)
            print(f"[{args.command}] wrote {out}")
        elif args.command == "export":
            stage_export(Stage(cfg, Path(cfg.output_dir)), args.output)
        elif args.command == "review":
            out_dir = Path(cfg.output_dir)
            dataset = Path(args.dataset) if args.dataset else out_dir / "review_dataset.jsonl"
            decisions = Path(args.decisions) if args.decisions else out_dir / "decisions.jsonl"
            server = review.serve(dataset, decisions, bind_address=args.bind,
                                  static_dir=args.static_dir)
            host, port = server.server_address[:2]
            print(f"review console listening on http://{host}:{port}/ (Ctrl-C to stop)",
                  flush=True)
            try:
                server.serve_forever()
            except KeyboardInterrupt:
                server.shutdown()
        return EXIT_OK
    except MissingStageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING_DEPENDENCY
    except (GenBackendError, QnaGenerationError, EmbeddingBackendError) as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except (ConfigError, DocumentError, EmbeddingError, review.ReviewDataError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
