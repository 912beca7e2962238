"""Deterministic seed derivation.

A single master seed fans out to per-stage and per-component seeds by
hashing the tag path, so partial reruns and parallel fits see stable
streams regardless of execution order.
"""

from __future__ import annotations

import hashlib

__all__ = ["derive_seed"]


def derive_seed(master: int, *tags) -> int:
    """Derive a 63-bit child seed from a master seed and a tag path."""
    text = "/".join(str(t) for t in tags) + "#" + str(int(master))
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") >> 1
