"""Shared helpers for the test suite."""

import numpy as np

from kwmatch.kwattn.model import named_parameters


def randomize_for_grad_check(model, seed):
    """Give every tensor a healthy random scale so no sampled coordinate has a
    near-zero gradient (which finite differences cannot resolve).

    Score projections stay moderate to keep the softmax unsaturated; value,
    feed-forward, and head paths are larger so upstream gradients stay alive.
    """
    rng = np.random.default_rng(seed)
    for name, arr in named_parameters(model).items():
        base = name.split(".")[-1]
        if base in ("wq", "wk", "bq"):
            arr[...] = rng.normal(0, 0.6, arr.shape)
        elif base in ("wv", "wo", "w1", "w2", "bv", "bo", "b1", "b2"):
            arr[...] = rng.normal(0, 0.5, arr.shape)
        elif name in ("head_w", "head_b"):
            arr[...] = rng.normal(0, 1.0, arr.shape)
        elif "ln" in name and name.endswith("_g"):
            arr[...] = 1.0 + rng.normal(0, 0.15, arr.shape)
        elif "ln" in name:
            arr[...] = rng.normal(0, 0.15, arr.shape)
        else:
            arr[...] = rng.normal(0, 0.5, arr.shape)


def random_packed_pair(rng, vocab, pack_pair, max_len=32, allow_empty_spans=True):
    """A random packed pair over the given vocab, with random keyword spans."""
    words = [t for t in vocab.tokens if not t.startswith("[")]

    def sentence():
        length = int(rng.integers(1, 6))
        tokens = [words[int(rng.integers(len(words)))] for _ in range(length)]
        spans = []
        if not allow_empty_spans or rng.random() < 0.7:
            start = int(rng.integers(length))
            end = int(rng.integers(start + 1, length + 1))
            spans.append((start, end))
        return tokens, spans

    q_tokens, q_spans = sentence()
    Q_tokens, Q_spans = sentence()
    return pack_pair(q_tokens, q_spans, Q_tokens, Q_spans, vocab, max_len)
