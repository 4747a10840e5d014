"""Vocabulary, pair packing, and attention masks for the keyword-attentive layer."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

CLS = "[CLS]"
SEP = "[SEP]"
UNK = "[UNK]"

_SPECIALS = (CLS, SEP, UNK)


class Vocab:
    """Token <-> id table; ids equal line numbers in the one-token-per-line file."""

    def __init__(self, tokens: Sequence[str]):
        self.tokens = list(tokens)
        if len(set(self.tokens)) != len(self.tokens):
            raise ValueError("duplicate tokens in vocabulary")
        for special in _SPECIALS:
            if special not in self.tokens:
                raise ValueError(f"vocabulary is missing {special}")
        self._ids = {t: i for i, t in enumerate(self.tokens)}
        self.unk_id = self._ids[UNK]

    def __len__(self) -> int:
        return len(self.tokens)

    def id_of(self, token: str) -> int:
        return self._ids.get(token, self.unk_id)


def build_vocab(sequences: Sequence[Sequence[str]]) -> Vocab:
    """Specials first, then the distinct tokens in sorted order."""
    seen = {t for seq in sequences for t in seq}
    return Vocab(list(_SPECIALS) + sorted(seen - set(_SPECIALS)))


def save_vocab(vocab: Vocab, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for token in vocab.tokens:
            fh.write(token + "\n")


def load_vocab(path) -> Vocab:
    with open(path, encoding="utf-8") as fh:
        return Vocab([line.rstrip("\n") for line in fh if line.rstrip("\n")])


@dataclass(frozen=True)
class PackedPair:
    """Both sentences packed as [CLS] a.. [SEP] [CLS] b.. [SEP].

    ``sent`` is 0 on the first sentence's positions (its CLS/SEP included)
    and 1 on the second's; ``kw`` marks keyword-span token positions and is
    never true on specials.
    """

    ids: np.ndarray  # int64
    sent: np.ndarray  # int8
    special: np.ndarray  # bool
    kw: np.ndarray  # bool

    @property
    def n(self) -> int:
        return len(self.ids)


def pack_pair(
    q_tokens: Sequence[str],
    q_spans: Sequence[tuple],
    Q_tokens: Sequence[str],
    Q_spans: Sequence[tuple],
    vocab: Vocab,
    max_len: int = 64,
) -> PackedPair:
    """Lay out both sentences with their specials and set keyword flags from
    the given (start, end, ...) spans; unknown tokens map to UNK."""
    if not q_tokens or not Q_tokens:
        raise ValueError("both sentences need at least one token")
    n = len(q_tokens) + len(Q_tokens) + 4
    if n > max_len:
        raise ValueError(f"packed length {n} exceeds max length {max_len}")
    tokens = [CLS, *q_tokens, SEP, CLS, *Q_tokens, SEP]
    ids = np.array([vocab.id_of(t) for t in tokens], dtype=np.int64)
    a_len = len(q_tokens) + 2
    sent = np.array([0] * a_len + [1] * (len(Q_tokens) + 2), dtype=np.int8)
    special = np.zeros(n, dtype=bool)
    special[[0, a_len - 1, a_len, n - 1]] = True
    kw = np.zeros(n, dtype=bool)
    for span in q_spans:
        start, end = span[0], span[1]
        if not 0 <= start < end <= len(q_tokens):
            raise ValueError(f"span {(start, end)} out of range for first sentence")
        kw[1 + start : 1 + end] = True
    for span in Q_spans:
        start, end = span[0], span[1]
        if not 0 <= start < end <= len(Q_tokens):
            raise ValueError(f"span {(start, end)} out of range for second sentence")
        kw[a_len + 1 + start : a_len + 1 + end] = True
    return PackedPair(ids, sent, special, kw)


def build_keyword_mask(pp: PackedPair) -> np.ndarray:
    """Boolean (n, n) mask: position i may attend to j iff j is a keyword
    token of the other sentence.

    Specials act as sources but never as targets. Rows facing a keyword-free
    sentence fall back to all of that sentence's non-special tokens, so no row
    is ever all-false.
    """
    other = pp.sent[:, None] != pp.sent[None, :]
    mask = other & pp.kw[None, :]
    starved = ~mask.any(axis=1)
    if starved.any():
        fallback = other & ~pp.special[None, :]
        mask[starved] = fallback[starved]
    return mask


def build_cross_mask(pp: PackedPair) -> np.ndarray:
    """Ablation mask: every non-special token of the other sentence is allowed."""
    other = pp.sent[:, None] != pp.sent[None, :]
    return other & ~pp.special[None, :]
