"""Pure-Python hashing kernels.

Reference implementation of the signed feature-hashing primitives. The
compiled extension (tutorgrade._hashfast) mirrors these functions exactly;
tutorgrade.kernels picks whichever is available at import time. Keep the
two in lockstep: tests assert bit-identical outputs.
"""

from __future__ import annotations

import numpy as np

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def fnv1a64(data: bytes, seed: int = 0) -> int:
    """64-bit FNV-1a over ``data``, with the seed folded into the state."""
    h = (FNV_OFFSET ^ (seed & _MASK64)) & _MASK64
    h = (h * FNV_PRIME) & _MASK64
    for b in data:
        h ^= b
        h = (h * FNV_PRIME) & _MASK64
    return h


def hashed_ngram_counts(tokens, dim, seed, ngram=2, out=None):
    """Accumulate signed hashed counts of token n-grams (orders 1..ngram).

    Each n-gram hashes to a bucket ``(h >> 1) % dim`` with sign taken from
    the low bit of the hash. Counts are exact small integers, so the result
    is independent of accumulation order.
    """
    if dim <= 0:
        raise ValueError(f"dim must be positive, got {dim}")
    vec = np.zeros(dim, dtype=np.float64) if out is None else out
    for n in range(1, ngram + 1):
        for i in range(len(tokens) - n + 1):
            gram = tokens[i] if n == 1 else " ".join(tokens[i : i + n])
            h = fnv1a64(gram.encode("utf-8"), seed)
            if h & 1:
                vec[(h >> 1) % dim] -= 1.0
            else:
                vec[(h >> 1) % dim] += 1.0
    return vec
