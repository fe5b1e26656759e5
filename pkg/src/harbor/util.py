"""Small shared helpers: stable seed derivation and canonical JSON."""

from __future__ import annotations

import hashlib
import json
from typing import Any

_MASK = (1 << 63) - 1


def derive_seed(*parts: Any) -> int:
    """Derive a child seed from arbitrary labelled parts.

    Stable across processes and platforms (unlike ``hash``), so seeded runs
    replay bit-for-bit.
    """
    text = json.dumps(parts, sort_keys=True, separators=(",", ":"), default=str)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") & _MASK


def canonical_json(obj: Any) -> str:
    """Serialize with sorted keys and no whitespace; byte-stable for hashing."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))
