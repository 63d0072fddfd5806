"""Encoder backends: text in, fixed-dim sentence vector out.

The built-in backend hashes bag-of-n-grams (unigrams + bigrams) into a
fixed-dim signed feature vector and L2-normalizes it. It is deterministic,
frozen (trainable=False), and needs no model downloads, which keeps the
whole pipeline runnable at desk scale.

Transformer encoders plug in through the same contract: subclass
EncoderBackend, return the final-layer classifier-token pooling from
encode(), set trainable=True and implement update() if the encoder itself
is fine-tuned, then register the class with register_backend(). Pretrained
weights are deliberately out of repo.
"""

from __future__ import annotations

import json
from typing import Callable, Sequence

import numpy as np

from tutorgrade import kernels
from tutorgrade.preprocess import whitespace_token_count


class BackendError(ValueError):
    """Unknown backend name or unusable backend reference."""


class EncoderBackend:
    """Contract all encoders satisfy; encode() must be deterministic and finite."""

    name: str = "base"
    dim: int
    trainable: bool = False

    def encode(self, text: str) -> np.ndarray:
        raise NotImplementedError

    def encode_batch(self, texts: Sequence[str]) -> np.ndarray:
        return np.stack([self.encode(t) for t in texts]) if texts else np.zeros((0, self.dim))

    def token_count(self, text: str) -> int:
        return whitespace_token_count(text)

    def update(self, texts: Sequence[str], grads: np.ndarray, lr: float) -> None:
        """Apply gradients w.r.t. the emitted embeddings; only for trainable encoders."""
        raise BackendError(f"backend {self.name!r} is frozen and cannot be updated")

    def ref(self) -> str:
        """Serializable reference from which the backend can be rebuilt."""
        raise NotImplementedError


class HashedNgramBackend(EncoderBackend):
    """Seeded signed-hash bag of unigrams+bigrams projected to a fixed dim."""

    name = "hashed"
    trainable = False

    def __init__(self, dim: int = 256, seed: int = 42, ngram: int = 2):
        if dim <= 0:
            raise BackendError(f"dim must be positive, got {dim}")
        self.dim = dim
        self.seed = seed
        self.ngram = ngram
        self._cache: dict[str, np.ndarray] = {}

    def encode(self, text: str) -> np.ndarray:
        cached = self._cache.get(text)
        if cached is not None:
            return cached
        vec = kernels.hashed_ngram_counts(text.split(), self.dim, self.seed, self.ngram)
        norm = float(np.linalg.norm(vec))
        if norm > 0:
            vec /= norm
        vec.setflags(write=False)
        self._cache[text] = vec
        return vec

    def ref(self) -> str:
        return json.dumps(
            {"name": self.name, "dim": self.dim, "seed": self.seed, "ngram": self.ngram},
            sort_keys=True,
        )

    # Cache is an implementation detail; drop it when pickling for worker processes.
    def __getstate__(self):
        state = self.__dict__.copy()
        state["_cache"] = {}
        return state


_REGISTRY: dict[str, Callable[..., EncoderBackend]] = {
    HashedNgramBackend.name: HashedNgramBackend,
}


def register_backend(name: str, factory: Callable[..., EncoderBackend]) -> None:
    """Register an encoder adapter (e.g. a transformer wrapper) by name."""
    _REGISTRY[name] = factory


def get_backend(name: str, **kwargs) -> EncoderBackend:
    if name not in _REGISTRY:
        raise BackendError(
            f"unknown backend {name!r}; available: {sorted(_REGISTRY)} "
            "(adapters must be registered with register_backend)"
        )
    return _REGISTRY[name](**kwargs)


def backend_from_ref(ref: str) -> EncoderBackend:
    """Rebuild a backend from the reference string stored in a checkpoint."""
    try:
        data = json.loads(ref)
        name = data.pop("name")
    except (json.JSONDecodeError, KeyError, AttributeError):
        raise BackendError(f"malformed backend reference: {ref!r}") from None
    return get_backend(name, **data)
