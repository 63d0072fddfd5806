# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hashing kernels; mirrors tutorgrade._hashref bit for bit."""

import numpy as np

cdef unsigned long long FNV_OFFSET = 0xCBF29CE484222325ULL
cdef unsigned long long FNV_PRIME = 0x100000001B3ULL


cdef unsigned long long _fnv1a64(const unsigned char* data, Py_ssize_t n,
                                 unsigned long long seed) noexcept nogil:
    cdef unsigned long long h = FNV_OFFSET ^ seed
    cdef Py_ssize_t i
    h = h * FNV_PRIME
    for i in range(n):
        h ^= <unsigned long long>data[i]
        h = h * FNV_PRIME
    return h


def fnv1a64(data, seed=0):
    """64-bit FNV-1a over ``data``, with the seed folded into the state."""
    cdef bytes buf = bytes(data)
    cdef unsigned long long s = <unsigned long long>(seed & 0xFFFFFFFFFFFFFFFF)
    return _fnv1a64(<const unsigned char*>buf, len(buf), s)


def hashed_ngram_counts(tokens, dim, seed, ngram=2, out=None):
    """Accumulate signed hashed counts of token n-grams (orders 1..ngram)."""
    if dim <= 0:
        raise ValueError(f"dim must be positive, got {dim}")
    vec = np.zeros(dim, dtype=np.float64) if out is None else out
    cdef double[::1] v = vec
    cdef unsigned long long s = <unsigned long long>(seed & 0xFFFFFFFFFFFFFFFF)
    cdef unsigned long long h
    cdef Py_ssize_t d = dim
    cdef Py_ssize_t n, i, ntok = len(tokens)
    cdef bytes gram
    for n in range(1, ngram + 1):
        for i in range(ntok - n + 1):
            if n == 1:
                gram = (<str>tokens[i]).encode("utf-8")
            else:
                gram = (" ".join(tokens[i : i + n])).encode("utf-8")
            h = _fnv1a64(<const unsigned char*>gram, len(gram), s)
            if h & 1:
                v[<Py_ssize_t>((h >> 1) % <unsigned long long>d)] -= 1.0
            else:
                v[<Py_ssize_t>((h >> 1) % <unsigned long long>d)] += 1.0
    return vec
