"""Okapi BM25 inverted index over a question database, with keyword-enhanced
indexing, keyword-augmented querying, and P@K evaluation."""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping

from kwmatch.corpus import TokenSequence
from kwmatch.keywords import KeywordDictionary, extract_keywords

K1 = 1.2
B = 0.75

INDEX_FORMAT = "kwmatch-index-v1"


@dataclass(frozen=True)
class ScoredHit:
    doc_id: str
    score: float


class InvertedIndex:
    """Postings and statistics for BM25 over an indexed question set.

    ``postings`` maps token -> {doc id: term frequency}; ``questions`` keeps
    the original (pre-augmentation) token sequences so miners can emit pairs.
    ``augmented`` records whether keyword duplication was applied at index
    time, in which case ``doc_len`` reflects the augmented lengths.
    """

    def __init__(
        self,
        postings: dict[str, dict[str, int]],
        doc_len: dict[str, int],
        questions: dict[str, tuple[str, ...]],
        augmented: bool,
    ):
        self.postings = postings
        self.doc_len = doc_len
        self.questions = questions
        self.augmented = augmented
        self.doc_total = len(doc_len)
        self.avg_doc_len = sum(doc_len.values()) / self.doc_total

    def df(self, token: str) -> int:
        return len(self.postings.get(token, ()))

    def idf(self, token: str) -> float:
        df = self.df(token)
        return math.log((self.doc_total - df + 0.5) / (df + 0.5) + 1.0)


def augment_with_keywords(
    seq: TokenSequence, dictionary: KeywordDictionary
) -> TokenSequence:
    """Append each extracted keyword span's tokens after the original tokens,
    in span order."""
    out = list(seq)
    for start, end, _ in extract_keywords(dictionary, seq):
        out.extend(seq[start:end])
    return out


def build_index(
    questions: Mapping[str, TokenSequence],
    dictionary: KeywordDictionary | None = None,
) -> InvertedIndex:
    """Index the question set; with a dictionary, every question is
    keyword-augmented before counting, doubling keyword token frequencies."""
    if not questions:
        raise ValueError("cannot index an empty question set")
    postings: dict[str, dict[str, int]] = {}
    doc_len: dict[str, int] = {}
    originals: dict[str, tuple[str, ...]] = {}
    for doc_id, tokens in questions.items():
        indexed = list(tokens)
        if dictionary is not None:
            indexed = augment_with_keywords(indexed, dictionary)
        doc_len[doc_id] = len(indexed)
        originals[doc_id] = tuple(tokens)
        for token, tf in Counter(indexed).items():
            postings.setdefault(token, {})[doc_id] = tf
    return InvertedIndex(postings, doc_len, originals, dictionary is not None)


def _term_score(idf: float, tf: int, dl: int, avgdl: float) -> float:
    return idf * tf * (K1 + 1.0) / (tf + K1 * (1.0 - B + B * dl / avgdl))


def bm25_score(index: InvertedIndex, query: TokenSequence, doc_id: str) -> float:
    """Okapi BM25 score of one indexed document for the query.

    Sums over unique query terms; duplicated query terms do not change the
    score, and terms absent from the document contribute zero.
    """
    if doc_id not in index.doc_len:
        raise ValueError(f"unknown doc id: {doc_id!r}")
    dl = index.doc_len[doc_id]
    score = 0.0
    for token in sorted(set(query)):
        tf = index.postings.get(token, {}).get(doc_id, 0)
        if tf:
            score += _term_score(index.idf(token), tf, dl, index.avg_doc_len)
    return score


def search(
    index: InvertedIndex,
    query: TokenSequence,
    dictionary: KeywordDictionary | None = None,
    k: int = 10,
) -> list[ScoredHit]:
    """Score every indexed document and return the top k, ties broken by
    ascending doc id. The query is keyword-augmented when a dictionary is
    given."""
    if k < 1:
        raise ValueError("k must be >= 1")
    terms = augment_with_keywords(query, dictionary) if dictionary is not None else query
    scores = {doc_id: 0.0 for doc_id in index.doc_len}
    for token in sorted(set(terms)):
        plist = index.postings.get(token)
        if not plist:
            continue
        idf = index.idf(token)
        for doc_id, tf in plist.items():
            scores[doc_id] += _term_score(idf, tf, index.doc_len[doc_id], index.avg_doc_len)
    ranked = sorted(scores.items(), key=lambda item: (-item[1], item[0]))
    return [ScoredHit(doc_id, score) for doc_id, score in ranked[:k]]


def self_similarity(
    index: InvertedIndex,
    query: TokenSequence,
    dictionary: KeywordDictionary | None = None,
) -> float:
    """BM25 score of the query against itself as a virtual document with the
    index's global statistics; the maximum-similarity normalizer for the
    negative-selection rule."""
    terms = augment_with_keywords(query, dictionary) if dictionary is not None else list(query)
    if not terms:
        return 0.0
    counts = Counter(terms)
    dl = len(terms)
    score = 0.0
    for token in sorted(counts):
        score += _term_score(index.idf(token), counts[token], dl, index.avg_doc_len)
    return score


def precision_at_k(
    rankings: Mapping[str, list[str]],
    gold: Mapping[str, str],
    ks: Iterable[int],
) -> dict[int, float]:
    """Fraction of queries whose reference doc id appears in their top k."""
    if not rankings:
        raise ValueError("no rankings to evaluate")
    for query_id in rankings:
        if query_id not in gold:
            raise ValueError(f"missing gold reference for query {query_id!r}")
    out: dict[int, float] = {}
    for k in ks:
        hits = sum(1 for q, ranked in rankings.items() if gold[q] in ranked[:k])
        out[k] = hits / len(rankings)
    return out


def save_index(index: InvertedIndex, path) -> None:
    """Persist as JSON with a format-version header; round-trips losslessly."""
    payload = {
        "format": INDEX_FORMAT,
        "augmented": index.augmented,
        "doc_len": {d: index.doc_len[d] for d in sorted(index.doc_len)},
        "questions": {d: list(index.questions[d]) for d in sorted(index.questions)},
        "postings": {
            token: sorted(plist.items())
            for token, plist in sorted(index.postings.items())
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False)


def load_index(path) -> InvertedIndex:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if not isinstance(payload, dict) or payload.get("format") != INDEX_FORMAT:
        raise ValueError(f"{path}: not a {INDEX_FORMAT} file")
    postings = {
        token: {doc_id: tf for doc_id, tf in plist}
        for token, plist in payload["postings"].items()
    }
    questions = {d: tuple(tokens) for d, tokens in payload["questions"].items()}
    return InvertedIndex(postings, payload["doc_len"], questions, payload["augmented"])
