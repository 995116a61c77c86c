"""Content-derived identifiers.

All ids in the store are digests of canonical content, never sequence
numbers, so that re-running a stage over unchanged inputs reproduces the
same ids and inserts become no-ops.
"""
from __future__ import annotations

import hashlib
import json
from typing import Any

# 128-bit prefix of sha256; fixed length, collision-safe at corpus scale.
ID_HEX_LEN = 32


def dedup_key(image_bytes: bytes) -> str:
    """Digest of raw image bytes; the corpus uniqueness key."""
    return hashlib.sha256(image_bytes).hexdigest()


def content_id(kind: str, fields: dict[str, Any]) -> str:
    """Deterministic id for a record from its identity-bearing fields.

    Fields are canonically serialized (sorted keys, no whitespace drift)
    and namespaced by record kind so that, e.g., an image and a caption
    derived from the same strings cannot collide.
    """
    canonical = json.dumps(fields, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
    h = hashlib.sha256(f"{kind}\x1f{canonical}".encode("utf-8"))
    return h.hexdigest()[:ID_HEX_LEN]


def record_id(kind: str, **fields: Any) -> str:
    return content_id(kind, fields)


def prompt_fingerprint(prompt: str) -> str:
    """Digest of the exact prompt text sent to a backend."""
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()
