"""Select the hashing kernels at import: compiled extension, else pure Python."""

from __future__ import annotations

try:
    from tutorgrade import _hashfast as _impl

    ACTIVE_KERNEL = "compiled"
except ImportError:  # extension not built on this install
    from tutorgrade import _hashref as _impl

    ACTIVE_KERNEL = "python"

fnv1a64 = _impl.fnv1a64
hashed_ngram_counts = _impl.hashed_ngram_counts

__all__ = ["ACTIVE_KERNEL", "fnv1a64", "hashed_ngram_counts"]
