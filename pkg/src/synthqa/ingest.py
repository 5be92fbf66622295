"""Document loading and structure-respecting chunking.

Input documents arrive as pre-extracted text in one of three formats:

* ``plain_text``  -- blank-line separated paragraphs; a line of the form
  ``<<<page N>>>`` marks the start of page N.
* ``markdown``    -- like plain_text, plus ``#``-prefixed heading lines.
* ``block_json``  -- one JSON object per line with fields
  ``{kind, text, page, heading_level}``.

Chunking merges consecutive paragraphs under the same section heading until a
target size, splits oversized chunks at sentence boundaries, and never lets
heading text leak into chunk bodies (headings live in ``section_path``).
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

BLOCK_KINDS = ("heading", "paragraph", "page_break")
INPUT_FORMATS = ("plain_text", "markdown", "block_json")

# Within a chunk, paragraph texts are joined by this separator. Tests strip it
# when checking that chunking preserves every source character.
PARAGRAPH_SEP = "\n"

_PAGE_MARKER_RE = re.compile(r"^<<<page\s+(\d+)>>>\s*$")
_HEADING_RE = re.compile(r"^(#{1,6})\s+(.*\S)\s*$")
_SENTENCE_BOUNDARY_RE = re.compile(r"(?<=\. )|(?<=\? )|(?<=! )|(?<=\n)")


class DocumentError(ValueError):
    """Raised for unreadable or structurally invalid input documents."""


@dataclass(frozen=True)
class Block:
    kind: str
    text: str
    page: int
    heading_level: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in BLOCK_KINDS:
            raise DocumentError(f"unknown block kind: {self.kind!r}")
        if self.page < 1:
            raise DocumentError(f"page must be positive, got {self.page}")
        if self.kind == "paragraph" and not self.text.strip():
            raise DocumentError("paragraph block with empty text")
        if self.kind == "heading" and (self.heading_level is None or self.heading_level < 1):
            raise DocumentError("heading block requires heading_level >= 1")


@dataclass(frozen=True)
class Document:
    doc_id: str
    title: str
    blocks: tuple[Block, ...]

    def __post_init__(self) -> None:
        if not self.doc_id:
            raise DocumentError("doc_id must be non-empty")
        last_page = 0
        for block in self.blocks:
            if block.page < last_page:
                raise DocumentError(
                    f"page numbers decrease: {block.page} after {last_page}"
                )
            last_page = block.page


@dataclass(frozen=True)
class Chunk:
    chunk_id: str
    doc_id: str
    text: str
    page_start: int
    page_end: int
    section_path: tuple[str, ...]
    char_count: int

    def __post_init__(self) -> None:
        if not self.text:
            raise ValueError("chunk text must be non-empty")
        if self.page_start > self.page_end:
            raise ValueError("page_start > page_end")
        if self.char_count != len(self.text):
            raise ValueError("char_count does not match text length")


@dataclass(frozen=True)
class ChunkingConfig:
    target_chars: int = 1500
    max_chars: int = 3000
    min_chars: int = 200

    def __post_init__(self) -> None:
        if not (0 < self.min_chars <= self.target_chars <= self.max_chars):
            raise ValueError(
                "chunking sizes must satisfy 0 < min_chars <= target_chars <= max_chars"
            )


def load_document(path: str | Path, format: str) -> Document:
    """Parse a source file into a Document of heading/paragraph/page_break blocks."""
    path = Path(path)
    if format not in INPUT_FORMATS:
        raise DocumentError(f"unknown input format: {format!r}")
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DocumentError(f"cannot read {path}: {exc}") from exc
    except UnicodeDecodeError as exc:
        raise DocumentError(f"{path} is not valid UTF-8: {exc}") from exc

    doc_id = path.stem
    if format == "block_json":
        blocks = _parse_block_json(raw, str(path))
    else:
        blocks = _parse_text(raw, headings=(format == "markdown"))

    title = next((b.text for b in blocks if b.kind == "heading"), doc_id)
    return Document(doc_id=doc_id, title=title, blocks=tuple(blocks))


def _parse_text(raw: str, headings: bool) -> list[Block]:
    blocks: list[Block] = []
    page = 1
    para_lines: list[str] = []

    def flush_paragraph() -> None:
        text = "\n".join(para_lines).strip()
        para_lines.clear()
        if text:
            blocks.append(Block(kind="paragraph", text=text, page=page))

    for line in raw.splitlines():
        marker = _PAGE_MARKER_RE.match(line)
        if marker:
            flush_paragraph()
            new_page = int(marker.group(1))
            if new_page < page:
                raise DocumentError(
                    f"page marker decreases: <<<page {new_page}>>> after page {page}"
                )
            page = new_page
            blocks.append(Block(kind="page_break", text="", page=page))
            continue
        if headings:
            heading = _HEADING_RE.match(line)
            if heading:
                flush_paragraph()
                blocks.append(
                    Block(
                        kind="heading",
                        text=heading.group(2),
                        page=page,
                        heading_level=len(heading.group(1)),
                    )
                )
                continue
        if not line.strip():
            flush_paragraph()
        else:
            para_lines.append(line)
    flush_paragraph()
    return blocks


def _parse_block_json(raw: str, source: str) -> list[Block]:
    blocks: list[Block] = []
    last_page = 1
    for lineno, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DocumentError(f"{source}:{lineno}: malformed JSON: {exc}") from exc
        if not isinstance(obj, dict) or "kind" not in obj:
            raise DocumentError(f"{source}:{lineno}: expected an object with a 'kind' field")
        page = obj.get("page", last_page)
        if not isinstance(page, int) or page < 1:
            raise DocumentError(f"{source}:{lineno}: invalid page {page!r}")
        if page < last_page:
            raise DocumentError(
                f"{source}:{lineno}: page numbers decrease ({page} after {last_page})"
            )
        last_page = page
        try:
            blocks.append(
                Block(
                    kind=obj["kind"],
                    text=obj.get("text", ""),
                    page=page,
                    heading_level=obj.get("heading_level"),
                )
            )
        except DocumentError as exc:
            raise DocumentError(f"{source}:{lineno}: {exc}") from exc
    return blocks


@dataclass
class _OpenChunk:
    texts: list[str] = field(default_factory=list)
    page_start: int = 1
    page_end: int = 1
    section_path: tuple[str, ...] = ()

    def length(self) -> int:
        if not self.texts:
            return 0
        return sum(len(t) for t in self.texts) + len(PARAGRAPH_SEP) * (len(self.texts) - 1)


def chunk_document(doc: Document, cfg: ChunkingConfig | None = None) -> list[Chunk]:
    """Greedy forward pass over paragraph blocks.

    Consecutive paragraphs under the same section are merged while the running
    chunk is under ``target_chars``; headings close the open chunk and update
    the section path; oversized chunks are split at sentence boundaries; a
    trailing fragment shorter than ``min_chars`` folds into its predecessor
    when both share a section and the merge stays within ``max_chars``.
    """
    cfg = cfg or ChunkingConfig()
    pieces: list[_OpenChunk] = []
    open_chunk = _OpenChunk()
    section_stack: list[tuple[int, str]] = []

    def close() -> None:
        nonlocal open_chunk
        if open_chunk.texts:
            pieces.append(open_chunk)
        open_chunk = _OpenChunk(section_path=tuple(t for _, t in section_stack))

    for block in doc.blocks:
        if block.kind == "heading":
            close()
            level = block.heading_level or 1
            while section_stack and section_stack[-1][0] >= level:
                section_stack.pop()
            section_stack.append((level, block.text))
            open_chunk.section_path = tuple(t for _, t in section_stack)
        elif block.kind == "paragraph":
            if open_chunk.texts and open_chunk.length() >= cfg.target_chars:
                close()
            if not open_chunk.texts:
                open_chunk.page_start = block.page
            open_chunk.texts.append(block.text)
            open_chunk.page_end = block.page
        # page_break blocks carry no text and do not close chunks
    close()

    expanded: list[tuple[str, _OpenChunk]] = []
    for piece in pieces:
        text = PARAGRAPH_SEP.join(piece.texts)
        if len(text) <= cfg.max_chars:
            expanded.append((text, piece))
        else:
            for part in _split_oversized(text, cfg.max_chars):
                expanded.append((part, piece))

    # Fold a short trailing chunk into its predecessor within the same section.
    if (
        len(expanded) >= 2
        and len(expanded[-1][0]) < cfg.min_chars
        and expanded[-1][1].section_path == expanded[-2][1].section_path
        and len(expanded[-2][0]) + len(PARAGRAPH_SEP) + len(expanded[-1][0]) <= cfg.max_chars
    ):
        last_text, last_piece = expanded.pop()
        prev_text, prev_piece = expanded.pop()
        merged = _OpenChunk(
            page_start=prev_piece.page_start,
            page_end=max(prev_piece.page_end, last_piece.page_end),
            section_path=prev_piece.section_path,
        )
        expanded.append((prev_text + PARAGRAPH_SEP + last_text, merged))

    chunks: list[Chunk] = []
    for ordinal, (text, piece) in enumerate(expanded):
        chunks.append(
            Chunk(
                chunk_id=f"{doc.doc_id}-c{ordinal:04d}",
                doc_id=doc.doc_id,
                text=text,
                page_start=piece.page_start,
                page_end=piece.page_end,
                section_path=piece.section_path,
                char_count=len(text),
            )
        )
    return chunks


def _split_oversized(text: str, max_chars: int) -> list[str]:
    """Split at sentence boundaries ('. ', '? ', '! ', newline), keeping every
    character: segments concatenate back to the input exactly. A single
    segment longer than max_chars is hard-split as a last resort."""
    segments: list[str] = []
    for seg in _SENTENCE_BOUNDARY_RE.split(text):
        if not seg:
            continue
        while len(seg) > max_chars:
            segments.append(seg[:max_chars])
            seg = seg[max_chars:]
        if seg:
            segments.append(seg)

    parts: list[str] = []
    current = ""
    for seg in segments:
        if current and len(current) + len(seg) > max_chars:
            parts.append(current)
            current = seg
        else:
            current += seg
    if current:
        parts.append(current)
    return parts


def chunk_to_record(chunk: Chunk) -> dict:
    return {
        "chunk_id": chunk.chunk_id,
        "doc_id": chunk.doc_id,
        "text": chunk.text,
        "page_start": chunk.page_start,
        "page_end": chunk.page_end,
        "section_path": list(chunk.section_path),
        "char_count": chunk.char_count,
    }


def chunk_from_record(rec: dict) -> Chunk:
    return Chunk(
        chunk_id=rec["chunk_id"],
        doc_id=rec["doc_id"],
        text=rec["text"],
        page_start=rec["page_start"],
        page_end=rec["page_end"],
        section_path=tuple(rec["section_path"]),
        char_count=rec["char_count"],
    )
