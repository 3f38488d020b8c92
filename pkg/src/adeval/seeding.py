"""Deterministic seed derivation shared by splits, subsampling and sampling."""

from __future__ import annotations

import hashlib


def derive_seed(*parts: object) -> int:
    """Derive a 64-bit seed from an arbitrary tuple of printable parts.

    The derivation is a stable hash (not Python's salted ``hash``), so the
    same parts give the same seed in every process and on every platform.
    """
    text = "\x1f".join(repr(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")
