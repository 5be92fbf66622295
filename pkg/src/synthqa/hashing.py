"""Stable hashing primitives shared across the pipeline.

Python's builtin ``hash`` is salted per process, so everything that must be
reproducible across runs (embedding buckets, mock response selection, stage
seeds, pair ids) goes through the functions here instead.
"""

from __future__ import annotations

import hashlib

FNV64_OFFSET = 0xCBF29CE484222325
FNV64_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def fnv1a64(data: str | bytes) -> int:
    """FNV-1a 64-bit hash over UTF-8 bytes. Same value on every platform."""
    if isinstance(data, str):
        data = data.encode("utf-8")
    h = FNV64_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV64_PRIME) & _MASK64
    return h


def sha256_hex(data: str | bytes) -> str:
    if isinstance(data, str):
        data = data.encode("utf-8")
    return hashlib.sha256(data).hexdigest()


def stable_seed(label: str, base_seed: int) -> int:
    """Derive a per-stage PRNG seed from a global seed and a stage label."""
    return fnv1a64(f"{label}:{base_seed}") % (2**31)
