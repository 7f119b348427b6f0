"""Named random streams derived from a single 64-bit seed.

Every random consumer asks for its own labelled stream, so adding a new
consumer never perturbs the draws seen by existing ones.
"""

import hashlib

import numpy as np


def stream(seed: int, label: str) -> np.random.Generator:
    """Independent generator for (seed, label), stable across processes."""
    digest = hashlib.blake2s(label.encode("utf-8"), digest_size=8).digest()
    key = int.from_bytes(digest, "little")
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, key])
    return np.random.Generator(np.random.PCG64(ss))


def substream(seed: int, label: str, index: int) -> np.random.Generator:
    """Per-item stream (e.g. one per trajectory) independent of scheduling."""
    return stream(seed, f"{label}/{int(index)}")
