"""Benchmark the compiled pair-classifier kernels against the numpy fallback.

Runs both backends on identical synthetic batches, checks they agree
numerically, and reports throughput:

    python benchmarks/bench_fastpair.py [--examples 20000] [--dim 64]
"""

import argparse
import time

import numpy as np

from kwmatch._kernels import _pyref

try:
    from kwmatch._kernels import _core
except ImportError:
    _core = None


def make_batch(rng, n_examples, dim, num_buckets, features_per_example):
    emb = rng.uniform(-1.0 / dim, 1.0 / dim, (num_buckets, dim))
    head_w = np.zeros((dim, 2))
    head_b = np.zeros(2)
    sizes = rng.integers(features_per_example // 2, features_per_example * 2, n_examples)
    offsets = np.zeros(n_examples + 1, dtype=np.int64)
    offsets[1:] = np.cumsum(sizes)
    ids_flat = rng.integers(0, num_buckets, int(offsets[-1])).astype(np.int64)
    labels = rng.integers(0, 2, n_examples).astype(np.int64)
    return emb, head_w, head_b, ids_flat, offsets, labels


def time_backend(impl, state, ids_flat, offsets, labels, lrs, order):
    emb, head_w, head_b = (a.copy() for a in state)
    t0 = time.perf_counter()
    impl.fastpair_train_epoch(emb, head_w, head_b, ids_flat, offsets, labels, order, lrs)
    train_s = time.perf_counter() - t0
    t0 = time.perf_counter()
    probs = impl.fastpair_forward_batch(emb, head_w, head_b, ids_flat, offsets)
    fwd_s = time.perf_counter() - t0
    return train_s, fwd_s, probs


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--examples", type=int, default=20000)
    parser.add_argument("--dim", type=int, default=64)
    parser.add_argument("--buckets", type=int, default=1 << 18)
    parser.add_argument("--features", type=int, default=120)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    emb, head_w, head_b, ids_flat, offsets, labels = make_batch(
        rng, args.examples, args.dim, args.buckets, args.features
    )
    order = rng.permutation(args.examples).astype(np.int64)
    lrs = 0.1 * (1.0 - np.arange(args.examples) / args.examples)
    state = (emb, head_w, head_b)

    n = args.examples
    print(f"{n} examples, dim {args.dim}, ~{args.features} features/example\n")
    print(f"{'backend':<10} {'train (ex/s)':>14} {'forward (ex/s)':>16}")
    results = {}
    for name, impl in (("python", _pyref), ("cython", _core)):
        if impl is None:
            print(f"{name:<10} {'not built':>14}")
            continue
        train_s, fwd_s, probs = time_backend(impl, state, ids_flat, offsets, labels, lrs, order)
        results[name] = (train_s, fwd_s, probs)
        print(f"{name:<10} {n / train_s:>14.0f} {n / fwd_s:>16.0f}")

    if len(results) == 2:
        speedup = results["python"][0] / results["cython"][0]
        agreement = np.abs(results["python"][2] - results["cython"][2]).max()
        print(f"\ntrain speedup: {speedup:.1f}x   max |forward diff|: {agreement:.2e}")


if __name__ == "__main__":
    main()
