"""Named, seedable random streams.

Every stochastic consumer derives its own generator from the master seed
plus a string label path, so adding a consumer never perturbs the draws
seen by existing ones.  Derivation: SHA-256 over "seed:label:label:...",
first 8 bytes little-endian as the PCG64 seed.
"""
from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(master_seed: int, *labels: object) -> int:
    text = ":".join([str(int(master_seed))] + [str(label) for label in labels])
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def stream(master_seed: int, *labels: object) -> np.random.Generator:
    """Independent generator for the given master seed and label path."""
    return np.random.Generator(np.random.PCG64(derive_seed(master_seed, *labels)))
