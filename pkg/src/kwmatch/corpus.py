"""Corpus ingestion, tokenization, and the count statistics everything else consumes."""

from __future__ import annotations

import json
import unicodedata
from collections import Counter
from dataclasses import dataclass, field

TokenSequence = list[str]

TOKENIZE_MODES = ("char", "whitespace")

# Fullwidth marks that read as punctuation but sit outside Unicode category P*
# (they are Sm/Sk/Sc symbols).
_EXTRA_PUNCT = set("～＋＜＝＞｜＾｀￥＄")


@dataclass(frozen=True)
class Document:
    """One domain-tagged document."""

    id: str
    domain: str
    text: str


@dataclass
class CorpusStats:
    """Token and document-frequency counts aggregated over a corpus.

    ``doc_freq`` counts each document at most once per token and is keyed by
    ``(domain, token)``; ``doc_count`` holds documents per domain, so
    anti-domain totals can be formed by summing over the other domains.
    Bigram counts never span document boundaries.
    """

    unigram_count: Counter = field(default_factory=Counter)
    bigram_count: Counter = field(default_factory=Counter)
    total_tokens: int = 0
    total_bigrams: int = 0
    doc_freq: Counter = field(default_factory=Counter)
    doc_count: Counter = field(default_factory=Counter)

    def merge(self, other: CorpusStats) -> CorpusStats:
        """Combine counts from two disjoint document shards (order-independent)."""
        return CorpusStats(
            unigram_count=self.unigram_count + other.unigram_count,
            bigram_count=self.bigram_count + other.bigram_count,
            total_tokens=self.total_tokens + other.total_tokens,
            total_bigrams=self.total_bigrams + other.total_bigrams,
            doc_freq=self.doc_freq + other.doc_freq,
            doc_count=self.doc_count + other.doc_count,
        )


def tokenize(text: str, mode: str = "char") -> TokenSequence:
    """Split raw text into tokens.

    ``char`` yields one token per non-whitespace character (the CJK default);
    ``whitespace`` splits on runs of whitespace for Latin-script text. Both
    are deterministic and never produce empty tokens.
    """
    if mode == "char":
        return [ch for ch in text if not ch.isspace()]
    if mode == "whitespace":
        return text.split()
    raise ValueError(f"unknown tokenize mode: {mode!r}")


def join_tokens(tokens: TokenSequence, mode: str = "char") -> str:
    """Inverse of :func:`tokenize` up to separator runs."""
    if mode not in TOKENIZE_MODES:
        raise ValueError(f"unknown tokenize mode: {mode!r}")
    return ("" if mode == "char" else " ").join(tokens)


def load_corpus(path) -> list[Document]:
    """Read a JSONL corpus of ``{"id", "domain", "text"}`` records.

    Raises ``ValueError`` naming the offending line for malformed records,
    missing/empty fields, and duplicate ids.
    """
    docs: list[Document] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            rec = _parse_record(path, lineno, line, ("id", "domain", "text"))
            if not rec["domain"]:
                raise ValueError(f"{path}: empty domain, line {lineno}")
            if not rec["text"].strip():
                raise ValueError(f"{path}: empty text, line {lineno}")
            if rec["id"] in seen:
                raise ValueError(f"{path}: duplicate id {rec['id']!r}, line {lineno}")
            seen.add(rec["id"])
            docs.append(Document(rec["id"], rec["domain"], rec["text"]))
    return docs


def load_questions(path) -> dict[str, str]:
    """Read a JSONL question database of ``{"id", "text"}`` records, id -> text."""
    questions: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            rec = _parse_record(path, lineno, line, ("id", "text"))
            if rec["id"] in questions:
                raise ValueError(f"{path}: duplicate id {rec['id']!r}, line {lineno}")
            if not rec["text"].strip():
                raise ValueError(f"{path}: empty text, line {lineno}")
            questions[rec["id"]] = rec["text"]
    return questions


def _parse_record(path, lineno: int, line: str, fields: tuple[str, ...]) -> dict:
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: malformed JSON, line {lineno}: {exc.msg}") from exc
    if not isinstance(rec, dict):
        raise ValueError(f"{path}: expected an object, line {lineno}")
    for name in fields:
        if not isinstance(rec.get(name), str):
            raise ValueError(f"{path}: missing or non-string field {name!r}, line {lineno}")
    return rec


def compute_stats(docs: list[Document], mode: str = "char") -> CorpusStats:
    """Count unigrams, adjacent bigrams, and per-domain document frequencies.

    Equals the brute-force enumeration over all documents; ``doc_freq``
    counts each document at most once per token.
    """
    if not docs:
        raise ValueError("cannot compute statistics over an empty document list")
    stats = CorpusStats()
    for doc in docs:
        tokens = tokenize(doc.text, mode)
        stats.unigram_count.update(tokens)
        stats.total_tokens += len(tokens)
        for pair in zip(tokens, tokens[1:]):
            stats.bigram_count[pair] += 1
        stats.total_bigrams += max(len(tokens) - 1, 0)
        for token in set(tokens):
            stats.doc_freq[(doc.domain, token)] += 1
        stats.doc_count[doc.domain] += 1
    return stats


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P") or ch in _EXTRA_PUNCT


def dedup_key(tokens: TokenSequence) -> tuple[str, ...]:
    """Canonical form that is insensitive to word order and punctuation."""
    stripped = []
    for token in tokens:
        cleaned = "".join(ch for ch in token if not _is_punct(ch))
        if cleaned:
            stripped.append(cleaned)
    return tuple(sorted(stripped))


def dedup_questions(questions: list[TokenSequence]) -> list[TokenSequence]:
    """Drop questions that differ from an earlier one only by word order or
    punctuation; the first occurrence is kept."""
    seen: set[tuple[str, ...]] = set()
    kept: list[TokenSequence] = []
    for question in questions:
        key = dedup_key(question)
        if key in seen:
            continue
        seen.add(key)
        kept.append(question)
    return kept
