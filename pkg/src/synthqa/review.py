"""Embedded HTTP service for human review of generated QnA pairs.

The service loads a self-contained review dataset (JSON lines: one header
record, then chunk records, then pair records), replays an append-only
decision log, and serves a small JSON API plus the static review console.

Review semantics are last-write-wins: each POSTed decision is appended to the
log with a monotone ``decision_seq``, and a pair's effective state is derived
from its highest-sequence decision alone. The log is never rewritten, so the
curated export is a pure function of (dataset, decision log) and survives any
number of restarts.

The server binds to loopback by default; review datasets may be sensitive,
so exposing the service on a routable interface is an explicit opt-in.
"""

from __future__ import annotations

import json
import logging
import os
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from .gateway import QnaPair, pair_from_record, pair_to_record
from .hashing import sha256_hex
from .ingest import Chunk, chunk_from_record

log = logging.getLogger(__name__)

DATASET_VERSION = 1
VERDICTS = ("accept", "reject", "edit")
_VERDICT_STATUS = {"accept": "accepted", "reject": "rejected", "edit": "edited"}
DEFAULT_BIND = "127.0.0.1:8765"
QUEUE_PAGE_LIMIT = 50
CHUNK_EXCERPT_CHARS = 240


class ReviewDataError(ValueError):
    """Invalid review dataset or decision log (message carries line numbers)."""


@dataclass(frozen=True)
class ReviewDecision:
    pair_id: str
    verdict: str
    edited_question: str | None
    edited_answer: str | None
    reviewer: str
    timestamp: str
    decision_seq: int

    def __post_init__(self) -> None:
        if self.verdict not in VERDICTS:
            raise ReviewDataError(f"unknown verdict: {self.verdict!r}")
        if self.verdict == "edit":
            if not (self.edited_question or self.edited_answer):
                raise ReviewDataError("edit decision requires at least one edited field")
        for label, value in (("edited_question", self.edited_question),
                             ("edited_answer", self.edited_answer)):
            if value is not None and not value.strip():
                raise ReviewDataError(f"{label} must be non-empty when present")

    def to_record(self) -> dict:
        return {
            "pair_id": self.pair_id,
            "verdict": self.verdict,
            "edited_question": self.edited_question,
            "edited_answer": self.edited_answer,
            "reviewer": self.reviewer,
            "timestamp": self.timestamp,
            "decision_seq": self.decision_seq,
        }


def _utc_now() -> str:
    """RFC 3339 UTC timestamp; honors SOURCE_DATE_EPOCH for reproducible logs."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is not None:
        moment = datetime.fromtimestamp(int(epoch), tz=timezone.utc)
    else:
        moment = datetime.now(timezone.utc)
    return moment.strftime("%Y-%m-%dT%H:%M:%SZ")


def write_review_dataset(
    path: str | Path,
    chunks: list[Chunk],
    pairs: list[QnaPair],
    threshold: float | None = None,
    entropy_bits: float | None = None,
) -> Path:
    """Write the self-contained dataset bundle the service loads."""
    from .ingest import chunk_to_record  # local import to keep module load light

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        header = {
            "type": "header",
            "version": DATASET_VERSION,
            "threshold": threshold,
            "entropy_bits": entropy_bits,
        }
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for chunk in chunks:
            fh.write(json.dumps({"type": "chunk", **chunk_to_record(chunk)}, sort_keys=True) + "\n")
        for pair in pairs:
            fh.write(json.dumps({"type": "pair", **pair_to_record(pair)}, sort_keys=True) + "\n")
    return path


def load_review_dataset(path: str | Path) -> tuple[dict, dict[str, Chunk], dict[str, QnaPair]]:
    path = Path(path)
    header: dict | None = None
    chunks: dict[str, Chunk] = {}
    pairs: dict[str, QnaPair] = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ReviewDataError(f"{path}:{lineno}: malformed JSON: {exc}") from exc
            kind = rec.get("type")
            try:
                if kind == "header":
                    if rec.get("version") != DATASET_VERSION:
                        raise ReviewDataError(f"unsupported dataset version {rec.get('version')!r}")
                    header = rec
                elif kind == "chunk":
                    chunk = chunk_from_record(rec)
                    chunks[chunk.chunk_id] = chunk
                elif kind == "pair":
                    pair = pair_from_record(rec)
                    pairs[pair.pair_id] = pair
                else:
                    raise ReviewDataError(f"unknown record type {kind!r}")
            except (KeyError, ValueError) as exc:
                raise ReviewDataError(f"{path}:{lineno}: {exc}") from exc
    if header is None:
        raise ReviewDataError(f"{path}: missing header record")
    if not pairs:
        raise ReviewDataError(f"{path}: dataset contains no pairs")
    return header, chunks, pairs


def load_decision_log(path: str | Path) -> list[ReviewDecision]:
    path = Path(path)
    if not path.exists():
        return []
    decisions: list[ReviewDecision] = []
    last_seq = 0
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                decision = ReviewDecision(
                    pair_id=rec["pair_id"],
                    verdict=rec["verdict"],
                    edited_question=rec.get("edited_question"),
                    edited_answer=rec.get("edited_answer"),
                    reviewer=rec.get("reviewer", "anonymous"),
                    timestamp=rec["timestamp"],
                    decision_seq=rec["decision_seq"],
                )
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise ReviewDataError(f"decision log corrupt at line {lineno}: {exc}") from exc
            if decision.decision_seq <= last_seq:
                raise ReviewDataError(
                    f"decision log corrupt at line {lineno}: decision_seq not increasing"
                )
            last_seq = decision.decision_seq
            decisions.append(decision)
    return decisions


def effective_pair(pair: QnaPair, decision: ReviewDecision | None) -> QnaPair:
    """The pair as the review process currently sees it (edits applied)."""
    if decision is None:
        return pair
    question = pair.question
    answer = pair.answer
    if decision.verdict == "edit":
        question = decision.edited_question or question
        answer = decision.edited_answer or answer
    return QnaPair(
        pair_id=pair.pair_id,
        chunk_id=pair.chunk_id,
        question=question,
        answer=answer,
        question_type=pair.question_type,
        source_ref=pair.source_ref,
        similarity=pair.similarity,
        status=_VERDICT_STATUS[decision.verdict],
    )


def export_curated(
    pairs: dict[str, QnaPair],
    decisions: list[ReviewDecision],
) -> list[str]:
    """Curated dataset lines: accepted pairs verbatim, edited pairs with edits
    applied; rejected and undecided pairs excluded. Pure function of its inputs.
    """
    last: dict[str, ReviewDecision] = {}
    for decision in decisions:
        current = last.get(decision.pair_id)
        if current is None or decision.decision_seq > current.decision_seq:
            last[decision.pair_id] = decision
    lines: list[str] = []
    for pair_id in sorted(pairs):
        decision = last.get(pair_id)
        if decision is None or decision.verdict == "reject":
            continue
        lines.append(json.dumps(pair_to_record(effective_pair(pairs[pair_id], decision)),
                                ensure_ascii=False))
    return lines


class ReviewApp:
    """In-memory review state shared by all request handler threads."""

    def __init__(self, dataset_path: str | Path, decisions_path: str | Path):
        self.dataset_path = Path(dataset_path)
        self.decisions_path = Path(decisions_path)
        self.header, self.chunks, self.pairs = load_review_dataset(self.dataset_path)
        self.dataset_hash = sha256_hex(self.dataset_path.read_bytes())
        self._lock = threading.Lock()
        self.decisions = load_decision_log(self.decisions_path)
        self.last_by_pair: dict[str, ReviewDecision] = {}
        seq = 0
        for decision in self.decisions:
            seq = max(seq, decision.decision_seq)
            self.last_by_pair[decision.pair_id] = decision
        self._next_seq = seq + 1

    def dataset_changed(self) -> bool:
        try:
            return sha256_hex(self.dataset_path.read_bytes()) != self.dataset_hash
        except OSError:
            return True

    def record_decision(
        self,
        pair_id: str,
        verdict: str,
        edited_question: str | None,
        edited_answer: str | None,
        reviewer: str,
    ) -> ReviewDecision:
        with self._lock:
            decision = ReviewDecision(
                pair_id=pair_id,
                verdict=verdict,
                edited_question=edited_question,
                edited_answer=edited_answer,
                reviewer=reviewer,
                timestamp=_utc_now(),
                decision_seq=self._next_seq,
            )
            self.decisions_path.parent.mkdir(parents=True, exist_ok=True)
            with self.decisions_path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(decision.to_record(), ensure_ascii=False) + "\n")
                fh.flush()
                os.fsync(fh.fileno())
            self._next_seq += 1
            self.decisions.append(decision)
            current = self.last_by_pair.get(pair_id)
            if current is None or decision.decision_seq > current.decision_seq:
                self.last_by_pair[pair_id] = decision
            return decision

    def stats(self) -> dict:
        counts = {"pending": 0, "flagged": 0, "accepted": 0, "rejected": 0, "edited": 0}
        for pair_id, pair in self.pairs.items():
            decision = self.last_by_pair.get(pair_id)
            status = _VERDICT_STATUS[decision.verdict] if decision else pair.status
            counts[status] += 1
        return {
            **counts,
            "total": len(self.pairs),
            "entropy": self.header.get("entropy_bits"),
            "threshold": self.header.get("threshold"),
        }

    def queue(self, status: str, offset: int, limit: int) -> tuple[list[dict], int]:
        items = []
        for pair_id in self.pairs:
            pair = self.pairs[pair_id]
            decision = self.last_by_pair.get(pair_id)
            effective_status = _VERDICT_STATUS[decision.verdict] if decision else pair.status
            if status == "all":
                pass
            elif decision is not None or effective_status != status:
                continue
            items.append((pair, effective_status))
        items.sort(key=lambda t: (t[0].similarity is None,
                                  t[0].similarity if t[0].similarity is not None else 0.0,
                                  t[0].pair_id))
        total = len(items)
        page = items[offset : offset + limit]
        return [self._queue_item(pair, st) for pair, st in page], total

    def _queue_item(self, pair: QnaPair, effective_status: str) -> dict:
        chunk = self.chunks.get(pair.chunk_id)
        excerpt = chunk.text[:CHUNK_EXCERPT_CHARS] if chunk else ""
        return {
            "pair_id": pair.pair_id,
            "question": pair.question,
            "answer": pair.answer,
            "question_type": pair.question_type,
            "similarity": pair.similarity,
            "status": effective_status,
            "source_ref": pair.source_ref,
            "chunk_excerpt": excerpt,
        }

    def pair_detail(self, pair_id: str) -> dict | None:
        pair = self.pairs.get(pair_id)
        if pair is None:
            return None
        decision = self.last_by_pair.get(pair_id)
        shown = effective_pair(pair, decision)
        chunk = self.chunks.get(pair.chunk_id)
        return {
            "pair": pair_to_record(shown),
            "chunk_text": chunk.text if chunk else "",
            "source_ref": pair.source_ref,
            "decision": decision.to_record() if decision else None,
        }

    def export_lines(self) -> list[str]:
        with self._lock:
            return export_curated(self.pairs, self.decisions)


def default_static_dir() -> Path:
    return Path(__file__).parent / "static"


class _ReviewHandler(BaseHTTPRequestHandler):
    app: ReviewApp
    static_dir: Path

    # -- helpers ----------------------------------------------------------

    def log_message(self, fmt: str, *args) -> None:  # quiet by default
        log.debug("%s %s", self.address_string(), fmt % args)

    def _send_json(self, status: int, payload: object) -> None:
        body = json.dumps(payload, ensure_ascii=False).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _send_error_json(self, status: int, message: str) -> None:
        self._send_json(status, {"error": message})

    def _read_body(self) -> dict | None:
        try:
            length = int(self.headers.get("Content-Length", "0"))
            raw = self.rfile.read(length)
            value = json.loads(raw) if raw else {}
            return value if isinstance(value, dict) else None
        except (ValueError, json.JSONDecodeError):
            return None

    # -- routes -----------------------------------------------------------

    def do_GET(self) -> None:
        url = urlparse(self.path)
        query = parse_qs(url.query)
        if url.path == "/api/queue":
            self._handle_queue(query)
        elif url.path.startswith("/api/pairs/"):
            self._handle_pair_detail(url.path)
        elif url.path == "/api/stats":
            self._send_json(200, self.app.stats())
        elif url.path == "/api/export":
            self._handle_export(query)
        elif url.path.startswith("/api/"):
            self._send_error_json(404, f"unknown endpoint {url.path}")
        else:
            self._serve_static(url.path)

    def do_POST(self) -> None:
        url = urlparse(self.path)
        if url.path.startswith("/api/pairs/") and url.path.endswith("/decision"):
            self._handle_decision(url.path)
        else:
            self._send_error_json(404, f"unknown endpoint {url.path}")

    def _handle_queue(self, query: dict) -> None:
        status = query.get("status", ["flagged"])[0]
        if status not in ("flagged", "pending", "all"):
            self._send_error_json(422, f"unknown queue status {status!r}")
            return
        try:
            offset = max(0, int(query.get("offset", ["0"])[0]))
            limit = max(1, int(query.get("limit", [str(QUEUE_PAGE_LIMIT)])[0]))
        except ValueError:
            self._send_error_json(422, "offset and limit must be integers")
            return
        items, total = self.app.queue(status, offset, limit)
        self._send_json(200, {"items": items, "total": total,
                              "offset": offset, "limit": limit})

    def _handle_pair_detail(self, path: str) -> None:
        pair_id = path[len("/api/pairs/") :]
        detail = self.app.pair_detail(pair_id)
        if detail is None:
            self._send_error_json(404, f"unknown pair_id {pair_id!r}")
            return
        self._send_json(200, detail)

    def _handle_decision(self, path: str) -> None:
        pair_id = path[len("/api/pairs/") : -len("/decision")]
        if pair_id not in self.app.pairs:
            self._send_error_json(404, f"unknown pair_id {pair_id!r}")
            return
        if self.app.dataset_changed():
            self._send_error_json(409, "dataset file changed on disk; restart the service")
            return
        body = self._read_body()
        if body is None:
            self._send_error_json(422, "request body must be a JSON object")
            return
        verdict = body.get("verdict")
        if verdict not in VERDICTS:
            self._send_error_json(422, f"verdict must be one of {', '.join(VERDICTS)}")
            return
        edited_question = _clean_optional(body.get("edited_question"))
        edited_answer = _clean_optional(body.get("edited_answer"))
        if verdict == "edit" and not (edited_question or edited_answer):
            self._send_error_json(422, "edit decision requires edited_question or edited_answer")
            return
        reviewer = body.get("reviewer") or "anonymous"
        decision = self.app.record_decision(
            pair_id, verdict, edited_question, edited_answer, str(reviewer)
        )
        self._send_json(200, decision.to_record())

    def _handle_export(self, query: dict) -> None:
        fmt = query.get("format", ["jsonl"])[0]
        if fmt != "jsonl":
            self._send_error_json(422, f"unsupported export format {fmt!r}")
            return
        if self.app.dataset_changed():
            self._send_error_json(409, "dataset file changed on disk; restart the service")
            return
        body = ("\n".join(self.app.export_lines()) + "\n").encode("utf-8")
        self.send_response(200)
        self.send_header("Content-Type", "application/x-ndjson; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _serve_static(self, path: str) -> None:
        name = path.lstrip("/") or "index.html"
        target = (self.static_dir / name).resolve()
        if not str(target).startswith(str(self.static_dir.resolve())) or not target.is_file():
            self._send_error_json(404, f"not found: {path}")
            return
        content_types = {
            ".html": "text/html; charset=utf-8",
            ".js": "text/javascript; charset=utf-8",
            ".css": "text/css; charset=utf-8",
            ".json": "application/json; charset=utf-8",
            ".svg": "image/svg+xml",
        }
        body = target.read_bytes()
        self.send_response(200)
        self.send_header("Content-Type", content_types.get(target.suffix, "application/octet-stream"))
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)


def _clean_optional(value: object) -> str | None:
    if value is None:
        return None
    text = str(value)
    return text if text.strip() else None


def serve(
    dataset_path: str | Path,
    decisions_path: str | Path,
    bind_address: str = DEFAULT_BIND,
    static_dir: str | Path | None = None,
) -> ThreadingHTTPServer:
    """Build the review server (call ``serve_forever`` on the result).

    Replays the decision log before accepting requests, so state survives
    restarts. Raises ReviewDataError for an invalid dataset or corrupt log.
    """
    app = ReviewApp(dataset_path, decisions_path)
    host, _, port_text = bind_address.partition(":")
    port = int(port_text) if port_text else 8765
    handler = type(
        "BoundReviewHandler",
        (_ReviewHandler,),
        {"app": app, "static_dir": Path(static_dir) if static_dir else default_static_dir()},
    )
    server = ThreadingHTTPServer((host or "127.0.0.1", port), handler)
    server.daemon_threads = True
    return server
