"""Benchmark the hashed n-gram kernels: compiled extension vs pure Python.

Usage: python benchmarks/bench_kernels.py [--texts N] [--dim D] [--repeats R]

Times the signed feature-hashing accumulation (the hot loop of the built-in
encoder backend) over a synthetic corpus and reports per-implementation
throughput plus the speedup. Also cross-checks that both implementations
produce bit-identical vectors.
"""

import argparse
import random
import time

import numpy as np

from tutorgrade import _hashref

try:
    from tutorgrade import _hashfast
except ImportError:
    _hashfast = None

WORDS = (
    "check your work answer step subtraction fractions carry the one "
    "almost correct mistake look again great nice try revisit maybe "
    "multiply divide denominator formula area exponent twelve seven"
).split()


def synth_texts(n_texts, rng):
    texts = []
    for _ in range(n_texts):
        n = rng.randint(8, 60)
        texts.append(" ".join(rng.choice(WORDS) for _ in range(n)))
    return texts


def run(impl, token_lists, dim, seed):
    start = time.perf_counter()
    acc = 0.0
    for tokens in token_lists:
        acc += impl.hashed_ngram_counts(tokens, dim, seed)[0]
    return time.perf_counter() - start, acc


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--texts", type=int, default=2000)
    parser.add_argument("--dim", type=int, default=256)
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--seed", type=int, default=42)
    args = parser.parse_args()

    rng = random.Random(args.seed)
    texts = synth_texts(args.texts, rng)
    token_lists = [t.split() for t in texts]
    total_tokens = sum(len(t) for t in token_lists)
    print(f"{args.texts} texts, {total_tokens} tokens, dim={args.dim}, "
          f"best of {args.repeats} repeats\n")

    impls = [("python", _hashref)]
    if _hashfast is not None:
        impls.append(("compiled", _hashfast))
    else:
        print("compiled kernels not built on this install; timing pure Python only\n")

    timings = {}
    for name, impl in impls:
        best = min(run(impl, token_lists, args.dim, args.seed)[0] for _ in range(args.repeats))
        timings[name] = best
        print(f"{name:>9}: {best * 1000:8.1f} ms   {total_tokens / best / 1e6:6.2f} M tokens/s")

    if _hashfast is not None:
        print(f"\nspeedup: {timings['python'] / timings['compiled']:.1f}x")
        mismatches = 0
        for tokens in token_lists[:200]:
            a = _hashfast.hashed_ngram_counts(tokens, args.dim, args.seed)
            b = _hashref.hashed_ngram_counts(tokens, args.dim, args.seed)
            if not np.array_equal(a, b):
                mismatches += 1
        print(f"cross-check on 200 texts: {mismatches} mismatches")


if __name__ == "__main__":
    main()
