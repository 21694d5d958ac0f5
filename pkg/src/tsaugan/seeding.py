"""Deterministic seed fan-out.

One master seed is hashed together with structured context (window index,
phase name, epoch, ...) so that every stochastic stage gets an independent,
reproducible stream without threading seeds through every call site by hand.
"""
from __future__ import annotations

import hashlib


def derive_seed(base: int, *parts) -> int:
    """Derive a 63-bit seed from a base seed and any hashable context parts."""
    text = ":".join(str(p) for p in (base, *parts))
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") % (2**63)
