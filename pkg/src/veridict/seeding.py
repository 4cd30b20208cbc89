"""Deterministic seed derivation.

Every stochastic stage derives its own seed by hashing the master seed with
a stage path, so results never depend on scheduling or iteration order.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from any printable parts."""
    text = ":".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def derive_rng(*parts) -> np.random.Generator:
    return np.random.default_rng(derive_seed(*parts))
