"""Run configuration: one JSON document drives every pipeline stage.

CLI flags (--backend, --seed, --out) override the corresponding file values.
API keys are referenced by environment-variable name only and never stored.
The per-stage PRNG seeds fan out from the global seed by stable hashing, so
each stage is independently reproducible.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .embedding import LOCAL_DEFAULT_DIM, EmbedBackendConfig
from .gateway import DEFAULT_CONCURRENCY, DEFAULT_N_PAIRS, GenBackendConfig
from .hashing import sha256_hex, stable_seed
from .ingest import ChunkingConfig
from .projection import TsneConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class CorpusInput:
    path: str
    format: str = "markdown"


@dataclass
class RunConfig:
    corpus: list[CorpusInput] = field(default_factory=list)
    chunking: ChunkingConfig = field(default_factory=ChunkingConfig)
    generation: GenBackendConfig = field(default_factory=GenBackendConfig)
    embedding: EmbedBackendConfig = field(default_factory=EmbedBackendConfig)
    tsne: TsneConfig = field(default_factory=TsneConfig)
    k: int | None = None  # None = scan for best silhouette
    n_pairs: int = DEFAULT_N_PAIRS
    concurrency: int = DEFAULT_CONCURRENCY
    threshold: float = 0.80
    benchmark_path: str | None = None  # None = bundled benchmark set
    output_dir: str = "out"
    seed: int = 0

    def stage_seed(self, stage: str) -> int:
        return stable_seed(stage, self.seed)

    def config_hash(self) -> str:
        """Hash of everything that affects outputs; excludes the output dir."""
        return sha256_hex(self.to_json(include_output_dir=False))

    def to_json(self, include_output_dir: bool = True) -> str:
        doc = {
            "corpus": [{"path": c.path, "format": c.format} for c in self.corpus],
            "chunking": {
                "target_chars": self.chunking.target_chars,
                "max_chars": self.chunking.max_chars,
                "min_chars": self.chunking.min_chars,
            },
            "generation": {
                "kind": self.generation.kind,
                "endpoint_url": self.generation.endpoint_url,
                "model_name": self.generation.model_name,
                "api_key_env": self.generation.api_key_env,
                "max_retries": self.generation.max_retries,
                "timeout_seconds": self.generation.timeout_seconds,
                "temperature": self.generation.temperature,
                "seed": self.generation.seed,
                "fixture_path": self.generation.fixture_path,
            },
            "embedding": {
                "kind": self.embedding.kind,
                "endpoint_url": self.embedding.endpoint_url,
                "model_name": self.embedding.model_name,
                "api_key_env": self.embedding.api_key_env,
                "dim": self.embedding.dim,
                "cache_path": self.embedding.cache_path,
                "max_retries": self.embedding.max_retries,
                "timeout_seconds": self.embedding.timeout_seconds,
            },
            "tsne": {
                "out_dims": self.tsne.out_dims,
                "perplexity": self.tsne.perplexity,
                "iterations": self.tsne.iterations,
                "early_exaggeration_factor": self.tsne.early_exaggeration_factor,
                "learning_rate": self.tsne.learning_rate,
                "momentum_early": self.tsne.momentum_early,
                "momentum_late": self.tsne.momentum_late,
                "seed": self.tsne.seed,
                "perplexity_tol": self.tsne.perplexity_tol,
                "perplexity_max_bisections": self.tsne.perplexity_max_bisections,
            },
            "k": self.k,
            "n_pairs": self.n_pairs,
            "concurrency": self.concurrency,
            "threshold": self.threshold,
            "benchmark_path": self.benchmark_path,
            "seed": self.seed,
        }
        if include_output_dir:
            doc["output_dir"] = self.output_dir
        return json.dumps(doc, indent=2, sort_keys=True)


def load_config(path: str | Path | None) -> RunConfig:
    """Parse a config file; missing sections fall back to defaults."""
    if path is None:
        return RunConfig()
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return config_from_dict(doc, base_dir=Path(path).parent)


def config_from_dict(doc: dict, base_dir: Path | None = None) -> RunConfig:
    def resolve(p: str | None) -> str | None:
        if p is None or base_dir is None:
            return p
        candidate = Path(p)
        return str(candidate if candidate.is_absolute() else base_dir / candidate)

    try:
        corpus = [
            CorpusInput(path=resolve(c["path"]), format=c.get("format", "markdown"))
            for c in doc.get("corpus", [])
        ]
        cfg = RunConfig(
            corpus=corpus,
            chunking=ChunkingConfig(**doc.get("chunking", {})),
            generation=GenBackendConfig(**doc.get("generation", {})),
            embedding=EmbedBackendConfig(**doc.get("embedding", {})),
            tsne=TsneConfig(**doc.get("tsne", {})),
            k=doc.get("k"),
            n_pairs=doc.get("n_pairs", DEFAULT_N_PAIRS),
            concurrency=doc.get("concurrency", DEFAULT_CONCURRENCY),
            threshold=doc.get("threshold", 0.80),
            benchmark_path=resolve(doc.get("benchmark_path")),
            output_dir=doc.get("output_dir", "out"),
            seed=doc.get("seed", 0),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc
    if cfg.n_pairs < 1:
        raise ConfigError("n_pairs must be positive")
    if not -1.0 <= cfg.threshold <= 1.0:
        raise ConfigError("threshold must be in [-1, 1]")
    return cfg


def apply_backend_override(cfg: RunConfig, backend: str) -> RunConfig:
    """--backend mock|remote switches both the generation and embedding sides."""
    if backend == "mock":
        generation = GenBackendConfig(
            kind="mock",
            model_name="mock-chat",
            seed=cfg.generation.seed,
            temperature=cfg.generation.temperature,
            fixture_path=cfg.generation.fixture_path,
        )
        embedding = EmbedBackendConfig(
            kind="local_deterministic",
            model_name="hashed-bow",
            dim=cfg.embedding.dim if cfg.embedding.kind == "local_deterministic" else LOCAL_DEFAULT_DIM,
            cache_path=cfg.embedding.cache_path,
        )
    elif backend == "remote":
        if cfg.generation.kind != "remote" or cfg.embedding.kind != "remote":
            raise ConfigError(
                "--backend remote requires remote generation and embedding sections "
                "(endpoint_url, model_name, api_key_env) in the config file"
            )
        generation = cfg.generation
        embedding = cfg.embedding
    else:
        raise ConfigError(f"unknown backend {backend!r}")
    cfg.generation = generation
    cfg.embedding = embedding
    return cfg
