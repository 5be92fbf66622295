"""Chat-completion gateway: chunk summarization and QnA pair generation.

Two backends share one ``complete(prompt, cfg)`` entry point:

* ``remote`` -- OpenAI-compatible chat completions over HTTPS, single user
  message, retried on failure. The API key is read from the environment
  variable named in the config and never logged or persisted.
* ``mock``   -- fully offline. A bundled fixture table maps prompt markers to
  canned responses; the response for a prompt is picked by a stable hash of
  (prompt, seed), so a fixed corpus and seed reproduce byte-identical output.

Model output is never trusted: summaries and QnA arrays must parse as JSON
and pass field validation before anything reaches a ``Summary`` or
``QnaPair``. One repair retry (with an appended instruction) is attempted on
parse failure; after that the raw text is surfaced in the error.
"""

from __future__ import annotations

import json
import logging
import os
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources
from typing import Callable, Iterable, TypeVar

import requests

from .hashing import fnv1a64, sha256_hex
from .ingest import Chunk

log = logging.getLogger(__name__)

QUESTION_TYPES = ("fundamental_recall", "technical_explanation", "multi_step_analytical")
STATUSES = ("pending", "flagged", "accepted", "rejected", "edited")

# Legal review-state moves: flagging only from pending; decisions from
# pending or flagged.
_STATUS_TRANSITIONS = {
    "pending": {"flagged", "accepted", "rejected", "edited"},
    "flagged": {"accepted", "rejected", "edited"},
}

DEFAULT_N_PAIRS = 5
DEFAULT_CONCURRENCY = 4

_T = TypeVar("_T")
_R = TypeVar("_R")


class GenBackendError(RuntimeError):
    """Backend call failed (network, HTTP, missing key, timeout)."""


class ParseError(ValueError):
    """No usable JSON in a model response."""

    def __init__(self, message: str, raw: str = ""):
        super().__init__(message)
        self.raw = raw


class SummaryParseError(ParseError):
    pass


class QnaGenerationError(RuntimeError):
    def __init__(self, message: str, raw: str = ""):
        super().__init__(message)
        self.raw = raw


@dataclass(frozen=True)
class GenBackendConfig:
    kind: str = "mock"  # or "remote"
    endpoint_url: str = ""
    model_name: str = "mock-chat"
    api_key_env: str = "GEN_API_KEY"
    max_retries: int = 2
    timeout_seconds: float = 60.0
    temperature: float = 0.7
    seed: int = 0  # mock only
    fixture_path: str | None = None  # mock only; None = bundled table

    def __post_init__(self) -> None:
        if self.kind not in ("remote", "mock"):
            raise ValueError(f"unknown generation backend kind: {self.kind!r}")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature must be in [0, 2]")
        if self.kind == "remote" and (not self.endpoint_url or not self.api_key_env):
            raise ValueError("remote generation backend requires endpoint_url and api_key_env")

    @property
    def backend_id(self) -> str:
        return f"{self.kind}:{self.model_name}"


@dataclass(frozen=True)
class Summary:
    chunk_id: str
    key_concepts: tuple[str, ...]
    summary_text: str

    def __post_init__(self) -> None:
        if not self.key_concepts:
            raise ValueError("a successful summary must carry at least one key concept")


@dataclass
class QnaPair:
    pair_id: str
    chunk_id: str
    question: str
    answer: str
    question_type: str
    source_ref: str
    similarity: float | None = None
    status: str = "pending"

    def __post_init__(self) -> None:
        if not self.question or not self.answer:
            raise ValueError("question and answer must be non-empty")
        if self.question_type not in QUESTION_TYPES:
            raise ValueError(f"invalid question_type: {self.question_type!r}")
        if self.status not in STATUSES:
            raise ValueError(f"invalid status: {self.status!r}")
        if self.similarity is not None and not -1.0 <= self.similarity <= 1.0:
            raise ValueError("similarity must be in [-1, 1]")

    def advance_status(self, new_status: str) -> None:
        allowed = _STATUS_TRANSITIONS.get(self.status, set())
        if new_status not in allowed:
            raise ValueError(f"illegal status transition {self.status} -> {new_status}")
        self.status = new_status


def pair_id_for(chunk_id: str, question: str) -> str:
    return sha256_hex(f"{chunk_id}\x00{question}")[:16]


class WarningCounter:
    """Thread-safe tally of dropped/invalid generation elements."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._count = 0

    def bump(self, n: int = 1) -> None:
        with self._lock:
            self._count += n

    @property
    def count(self) -> int:
        with self._lock:
            return self._count


dropped_elements = WarningCounter()


# ---------------------------------------------------------------------------
# Prompt construction


def _load_template(name: str) -> str:
    return resources.files("synthqa").joinpath("prompts", name).read_text(encoding="utf-8")


def _context_line(chunk: Chunk) -> str:
    section = " > ".join(chunk.section_path) if chunk.section_path else "n/a"
    return (
        f'The source material is a technical engineering reference (document "{chunk.doc_id}", '
        f"section: {section}), written for engineers and technical staff."
    )


def source_ref_for(chunk: Chunk) -> str:
    if chunk.page_start == chunk.page_end:
        return f"{chunk.doc_id}, page {chunk.page_start}"
    return f"{chunk.doc_id}, pages {chunk.page_start}-{chunk.page_end}"


def build_summarize_prompt(chunk: Chunk) -> str:
    return _load_template("summarize.txt").format(
        context_line=_context_line(chunk),
        source_ref=source_ref_for(chunk),
        chunk_text=chunk.text,
    )


def build_qna_prompt(chunk: Chunk, summary: Summary, n_pairs: int) -> str:
    return _load_template("qna.txt").format(
        context_line=_context_line(chunk),
        source_ref=source_ref_for(chunk),
        chunk_text=chunk.text,
        key_concepts=", ".join(summary.key_concepts),
        n_pairs=n_pairs,
    )


# ---------------------------------------------------------------------------
# Backends


def load_fixture_table(path: str | None = None) -> dict:
    if path is None:
        raw = resources.files("synthqa").joinpath("assets", "mock_fixtures.json").read_text(
            encoding="utf-8"
        )
    else:
        with open(path, encoding="utf-8") as fh:
            raw = fh.read()
    table = json.loads(raw)
    if not isinstance(table.get("routes"), list):
        raise ValueError("fixture table must contain a 'routes' list")
    return table


def _mock_complete(prompt: str, cfg: GenBackendConfig) -> str:
    table = load_fixture_table(cfg.fixture_path)
    for route in table["routes"]:
        marker = route.get("marker", "")
        if marker and marker not in prompt:
            continue
        responses = route["responses"]
        return responses[fnv1a64(f"{cfg.seed}|{prompt}") % len(responses)]
    raise GenBackendError("mock fixture table has no matching route")


def _remote_complete(prompt: str, cfg: GenBackendConfig) -> str:
    api_key = os.environ.get(cfg.api_key_env)
    if not api_key:
        raise GenBackendError(
            f"environment variable {cfg.api_key_env} is not set (required for remote backend)"
        )
    payload = {
        "model": cfg.model_name,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": cfg.temperature,
    }
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
                data = resp.json()
                return data["choices"][0]["message"]["content"]
            last_error = GenBackendError(
                f"chat endpoint returned HTTP {resp.status_code}: {resp.text[:200]}"
            )
        except requests.RequestException as exc:
            last_error = exc
        if attempt < cfg.max_retries:
            time.sleep(min(2**attempt * 0.1, 2.0))
    raise GenBackendError(f"chat request failed after retries: {last_error}")


def complete(prompt: str, cfg: GenBackendConfig) -> str:
    """Send one prompt to the configured backend and return the raw text."""
    if not prompt:
        raise ValueError("prompt must be non-empty")
    if cfg.kind == "mock":
        return _mock_complete(prompt, cfg)
    return _remote_complete(prompt, cfg)


# ---------------------------------------------------------------------------
# Parsing and validation

_FENCE_RE = re.compile(r"^\s*```[a-zA-Z0-9_-]*\s*\n(.*?)\n\s*```\s*$", re.DOTALL)

_REPAIR_INSTRUCTION = (
    "\n\nYour previous reply could not be parsed. Respond again with valid JSON only, "
    "exactly in the format requested above, with no extra text."
)


def strip_code_fences(raw: str) -> str:
    match = _FENCE_RE.match(raw)
    return match.group(1) if match else raw


def _normalize_question_type(value: object) -> str | None:
    if not isinstance(value, str):
        return None
    normalized = re.sub(r"[^a-z0-9]+", "_", value.strip().lower()).strip("_")
    return normalized if normalized in QUESTION_TYPES else None


def _first_json_value(raw: str, opener: str) -> object:
    decoder = json.JSONDecoder()
    pos = raw.find(opener)
    while pos != -1:
        try:
            value, _ = decoder.raw_decode(raw, pos)
            return value
        except json.JSONDecodeError:
            pos = raw.find(opener, pos + 1)
    raise ParseError(f"no JSON value starting with {opener!r} found", raw=raw)


def parse_qna_response(raw: str) -> list[dict]:
    """Extract QnA candidates from a raw model response.

    Strips optional code fences, locates the first JSON array, normalizes
    question_type spellings, and drops elements whose type is unrecognizable.
    Returns dicts; the caller enforces the full pair contract.
    """
    text = strip_code_fences(raw)
    value = _first_json_value(text, "[")
    if not isinstance(value, list):
        raise ParseError("expected a JSON array of QnA objects", raw=raw)
    candidates: list[dict] = []
    for element in value:
        if not isinstance(element, dict):
            dropped_elements.bump()
            log.warning("dropping non-object QnA element: %r", element)
            continue
        qtype = _normalize_question_type(element.get("question_type"))
        if qtype is None:
            dropped_elements.bump()
            log.warning("dropping QnA element with unknown question_type: %r",
                        element.get("question_type"))
            continue
        candidates.append({**element, "question_type": qtype})
    return candidates


def summarize_chunk(chunk: Chunk, cfg: GenBackendConfig) -> Summary:
    """Extract key concepts and a short summary from one chunk."""
    if not chunk.text:
        raise ValueError(f"chunk {chunk.chunk_id} has empty text")
    prompt = build_summarize_prompt(chunk)
    raw = complete(prompt, cfg)
    try:
        return _parse_summary(chunk.chunk_id, raw)
    except SummaryParseError:
        raw = complete(prompt + _REPAIR_INSTRUCTION, cfg)
        return _parse_summary(chunk.chunk_id, raw)


def _parse_summary(chunk_id: str, raw: str) -> Summary:
    text = strip_code_fences(raw)
    try:
        value = _first_json_value(text, "{")
    except ParseError as exc:
        raise SummaryParseError(f"summary response is not JSON: {exc}", raw=raw) from exc
    if not isinstance(value, dict):
        raise SummaryParseError("summary response is not a JSON object", raw=raw)
    concepts = value.get("key_concepts")
    summary_text = value.get("summary_text")
    if (
        not isinstance(concepts, list)
        or not concepts
        or not all(isinstance(c, str) and c.strip() for c in concepts)
        or not isinstance(summary_text, str)
    ):
        raise SummaryParseError("summary JSON missing key_concepts/summary_text", raw=raw)
    return Summary(
        chunk_id=chunk_id,
        key_concepts=tuple(c.strip() for c in concepts),
        summary_text=summary_text,
    )


def generate_qna(
    chunk: Chunk,
    summary: Summary,
    n_pairs: int = DEFAULT_N_PAIRS,
    cfg: GenBackendConfig | None = None,
) -> list[QnaPair]:
    """Generate validated QnA pairs for a chunk; at most n_pairs are returned."""
    cfg = cfg or GenBackendConfig()
    if summary.chunk_id != chunk.chunk_id:
        raise ValueError(
            f"summary is for chunk {summary.chunk_id}, not {chunk.chunk_id}"
        )
    if n_pairs < 1:
        raise ValueError("n_pairs must be positive")
    prompt = build_qna_prompt(chunk, summary, n_pairs)
    raw = complete(prompt, cfg)
    pairs = _validate_pairs(chunk, raw)
    if not pairs:
        raw = complete(prompt + _REPAIR_INSTRUCTION, cfg)
        pairs = _validate_pairs(chunk, raw)
        if not pairs:
            raise QnaGenerationError(
                f"no valid QnA pairs for chunk {chunk.chunk_id} after retry", raw=raw
            )
    return pairs[:n_pairs]


def _validate_pairs(chunk: Chunk, raw: str) -> list[QnaPair]:
    try:
        candidates = parse_qna_response(raw)
    except ParseError:
        return []
    pairs: list[QnaPair] = []
    seen: set[str] = set()
    for element in candidates:
        question = element.get("question")
        answer = element.get("answer")
        if not isinstance(question, str) or not question.strip():
            dropped_elements.bump()
            log.warning("dropping QnA element without a question")
            continue
        if not isinstance(answer, str) or not answer.strip():
            dropped_elements.bump()
            log.warning("dropping QnA element without an answer")
            continue
        source_ref = element.get("source_ref")
        if not isinstance(source_ref, str) or not source_ref.strip():
            source_ref = source_ref_for(chunk)
        pid = pair_id_for(chunk.chunk_id, question.strip())
        if pid in seen:
            dropped_elements.bump()
            continue
        seen.add(pid)
        pairs.append(
            QnaPair(
                pair_id=pid,
                chunk_id=chunk.chunk_id,
                question=question.strip(),
                answer=answer.strip(),
                question_type=element["question_type"],
                source_ref=source_ref.strip(),
            )
        )
    return pairs


def map_concurrent(
    fn: Callable[[_T], _R],
    items: Iterable[_T],
    max_workers: int = DEFAULT_CONCURRENCY,
) -> list[_R]:
    """Apply fn across items with bounded concurrency, preserving order."""
    items = list(items)
    if max_workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(fn, items))


def pair_to_record(pair: QnaPair) -> dict:
    return {
        "pair_id": pair.pair_id,
        "chunk_id": pair.chunk_id,
        "question": pair.question,
        "answer": pair.answer,
        "question_type": pair.question_type,
        "source_ref": pair.source_ref,
        "similarity": pair.similarity,
        "status": pair.status,
    }


def pair_from_record(rec: dict) -> QnaPair:
    return QnaPair(
        pair_id=rec["pair_id"],
        chunk_id=rec["chunk_id"],
        question=rec["question"],
        answer=rec["answer"],
        question_type=rec["question_type"],
        source_ref=rec["source_ref"],
        similarity=rec.get("similarity"),
        status=rec.get("status", "pending"),
    )
