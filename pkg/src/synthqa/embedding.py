"""Text embeddings with a remote backend and a deterministic local fallback.

The local backend is a signed feature-hashing bag of words: each token is
FNV-1a-64 hashed to a bucket in ``[0, dim)`` (``hash % dim``) and to a sign
(+1 when bit 63 of the hash is 0, else -1); occurrence counts accumulate and
the vector is L2-normalized. It is a pure function of ``(text, dim)`` -- the
same text yields the same vector on every platform and process.

Every embedding, remote or local, is served through a content-addressed cache
keyed by backend id, model, and a SHA-256 of the text. The cache file is
append-only JSON lines with a magic header; a corrupt file is rebuilt from
scratch with a warning rather than failing the run.
"""

from __future__ import annotations

import json
import logging
import math
import os
import re
import threading
import time
from dataclasses import dataclass
from pathlib import Path

import requests

from .hashing import fnv1a64, sha256_hex

log = logging.getLogger(__name__)

CACHE_MAGIC = "synthqa-embedding-cache"
CACHE_VERSION = 1
REMOTE_BATCH_SIZE = 64

_TOKEN_RE = re.compile(r"[0-9a-z]+")


class EmbeddingError(ValueError):
    """Invalid embedding input (empty text, no tokens, zero vector)."""


class EmbeddingBackendError(RuntimeError):
    """Remote embedding endpoint failed after retries."""


def tokenize(text: str) -> list[str]:
    """Lowercase and split on non-alphanumeric runs.

    Shared by the local embedder and the question-entropy metric so both see
    the same token stream.
    """
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class Vector:
    dim: int
    values: tuple[float, ...]
    normalized: bool

    def __post_init__(self) -> None:
        if self.dim < 1 or len(self.values) != self.dim:
            raise ValueError(f"expected {self.dim} values, got {len(self.values)}")
        if not all(math.isfinite(v) for v in self.values):
            raise ValueError("vector contains non-finite values")
        if self.normalized:
            norm = math.sqrt(sum(v * v for v in self.values))
            if abs(norm - 1.0) > 1e-6:
                raise ValueError(f"normalized vector has norm {norm}")


REMOTE_DEFAULT_DIM = 1536
LOCAL_DEFAULT_DIM = 256


@dataclass(frozen=True)
class EmbedBackendConfig:
    kind: str = "local_deterministic"  # or "remote"
    endpoint_url: str = ""
    model_name: str = "hashed-bow"
    api_key_env: str = "EMBED_API_KEY"
    dim: int | None = None  # None picks the backend default: remote 1536, local 256
    cache_path: str | None = None
    max_retries: int = 2
    timeout_seconds: float = 60.0

    def __post_init__(self) -> None:
        if self.kind not in ("remote", "local_deterministic"):
            raise ValueError(f"unknown embedding backend kind: {self.kind!r}")
        if self.dim is None:
            object.__setattr__(
                self, "dim",
                REMOTE_DEFAULT_DIM if self.kind == "remote" else LOCAL_DEFAULT_DIM,
            )
        if self.dim < 2:
            raise ValueError("embedding dim must be >= 2")
        if self.kind == "remote" and not self.endpoint_url:
            raise ValueError("remote embedding backend requires endpoint_url")

    @property
    def backend_id(self) -> str:
        return f"{self.kind}:{self.model_name}:d{self.dim}"


def normalize(values: list[float]) -> tuple[float, ...]:
    norm = math.sqrt(sum(v * v for v in values))
    if norm == 0.0 or not math.isfinite(norm):
        raise EmbeddingError("cannot normalize a zero or non-finite vector")
    return tuple(v / norm for v in values)


def local_deterministic_embed(text: str, dim: int) -> Vector:
    """Signed hashed bag-of-words embedding; deterministic across runs."""
    if not text:
        raise EmbeddingError("cannot embed empty text")
    tokens = tokenize(text)
    if not tokens:
        raise EmbeddingError(f"text has no alphanumeric tokens: {text!r}")
    values = [0.0] * dim
    for token in tokens:
        h = fnv1a64(token)
        sign = 1.0 if (h >> 63) & 1 == 0 else -1.0
        values[h % dim] += sign
    return Vector(dim=dim, values=normalize(values), normalized=True)


class EmbeddingCache:
    """Append-only JSON-lines store of (key, dim, values) records.

    First line is a header ``{"magic": ..., "version": ...}``. Writes are
    serialized through a lock; readers use the in-memory map loaded at open.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._entries: dict[str, tuple[float, ...]] = {}
        self._load()

    def _load(self) -> None:
        if not self.path.exists():
            return
        try:
            with self.path.open(encoding="utf-8") as fh:
                header = json.loads(fh.readline())
                if header.get("magic") != CACHE_MAGIC or header.get("version") != CACHE_VERSION:
                    raise ValueError(f"bad cache header: {header!r}")
                for line in fh:
                    if not line.strip():
                        continue
                    rec = json.loads(line)
                    values = tuple(float(v) for v in rec["values"])
                    if len(values) != rec["dim"]:
                        raise ValueError("record dim mismatch")
                    self._entries[rec["key"]] = values
        except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
            log.warning("embedding cache %s is corrupt (%s); rebuilding", self.path, exc)
            self._entries = {}
            self.path.unlink(missing_ok=True)

    def get(self, key: str) -> tuple[float, ...] | None:
        return self._entries.get(key)

    def put(self, key: str, values: tuple[float, ...]) -> None:
        with self._lock:
            if key in self._entries:
                return
            new_file = not self.path.exists()
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as fh:
                if new_file:
                    fh.write(json.dumps({"magic": CACHE_MAGIC, "version": CACHE_VERSION}) + "\n")
                fh.write(json.dumps({"key": key, "dim": len(values), "values": list(values)}) + "\n")
            self._entries[key] = values


def cache_key(cfg: EmbedBackendConfig, text: str) -> str:
    return f"{cfg.backend_id}|{sha256_hex(text)}"


def embed_texts(
    texts: list[str],
    cfg: EmbedBackendConfig,
    cache: EmbeddingCache | None = None,
) -> list[Vector]:
    """Embed texts in order, consulting the cache per text.

    Remote requests are batched at most ``REMOTE_BATCH_SIZE`` texts each.
    All returned vectors are unit-norm.
    """
    for i, text in enumerate(texts):
        if not text:
            raise EmbeddingError(f"text at index {i} is empty")

    if cache is None and cfg.cache_path:
        cache = EmbeddingCache(cfg.cache_path)

    results: list[tuple[float, ...] | None] = [None] * len(texts)
    missing: list[int] = []
    for i, text in enumerate(texts):
        if cache is not None:
            hit = cache.get(cache_key(cfg, text))
            if hit is not None:
                results[i] = hit
                continue
        missing.append(i)

    if missing:
        if cfg.kind == "local_deterministic":
            computed = [local_deterministic_embed(texts[i], cfg.dim).values for i in missing]
        else:
            computed = _embed_remote([texts[i] for i in missing], cfg)
        for i, values in zip(missing, computed):
            results[i] = values
            if cache is not None:
                cache.put(cache_key(cfg, texts[i]), values)

    return [Vector(dim=cfg.dim, values=v, normalized=True) for v in results]  # type: ignore[arg-type]


def _embed_remote(texts: list[str], cfg: EmbedBackendConfig) -> list[tuple[float, ...]]:
    api_key = os.environ.get(cfg.api_key_env)
    if not api_key:
        raise EmbeddingBackendError(
            f"environment variable {cfg.api_key_env} is not set (required for remote backend)"
        )
    out: list[tuple[float, ...]] = []
    for start in range(0, len(texts), REMOTE_BATCH_SIZE):
        batch = texts[start : start + REMOTE_BATCH_SIZE]
        payload = {"model": cfg.model_name, "input": batch}
        data = _post_with_retry(cfg, payload, api_key)
        rows = sorted(data["data"], key=lambda d: d["index"])
        if len(rows) != len(batch):
            raise EmbeddingBackendError(
                f"endpoint returned {len(rows)} embeddings for {len(batch)} inputs"
            )
        for row in rows:
            values = [float(v) for v in row["embedding"]]
            if len(values) != cfg.dim:
                raise EmbeddingBackendError(
                    f"endpoint returned dim {len(values)}, expected {cfg.dim}"
                )
            out.append(normalize(values))
    return out


def _post_with_retry(cfg: EmbedBackendConfig, payload: dict, api_key: str) -> dict:
    last_error: Exception | None = None
    for attempt in range(cfg.max_retries + 1):
        try:
            resp = requests.post(
                cfg.endpoint_url,
                json=payload,
                headers={"Authorization": f"Bearer {api_key}"},
                timeout=cfg.timeout_seconds,
            )
            if resp.status_code == 200:
                return resp.json()
            last_error = EmbeddingBackendError(
                f"embedding endpoint returned HTTP {resp.status_code}: {resp.text[:200]}"
            )
        except requests.RequestException as exc:
            last_error = exc
        if attempt < cfg.max_retries:
            time.sleep(min(2**attempt * 0.1, 2.0))
    raise EmbeddingBackendError(f"embedding request failed after retries: {last_error}")


def vector_to_record(vector_id: str, v: Vector) -> dict:
    return {"id": vector_id, "dim": v.dim, "values": list(v.values)}


def vector_from_record(rec: dict) -> Vector:
    return Vector(dim=rec["dim"], values=tuple(float(x) for x in rec["values"]), normalized=True)
