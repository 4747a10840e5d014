"""Training-pair generation: rule-based negative mining from retrieval results,
entity-replacement negatives, the random baseline, and the pair file format."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from kwmatch.corpus import TokenSequence, join_tokens, tokenize
from kwmatch.keywords import KeywordDictionary, extract_keywords
from kwmatch.retrieval import InvertedIndex, search, self_similarity

POSITIVE = 1
NEGATIVE = 0

PROVENANCES = ("retrieved", "rule_mined", "entity_replaced", "human", "random")


@dataclass(frozen=True)
class QueryPair:
    """A labeled question pair plus how it was generated."""

    q: tuple[str, ...]
    Q: tuple[str, ...]
    label: int
    provenance: str

    def __post_init__(self):
        if not self.q or not self.Q:
            raise ValueError("pair sides must be non-empty")
        if self.label not in (POSITIVE, NEGATIVE):
            raise ValueError(f"label must be 0 or 1, got {self.label!r}")
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance: {self.provenance!r}")


@dataclass(frozen=True)
class SamplerConfig:
    """Negative-sampling knobs; alpha and beta default to the grid-searched
    optimum of the selection rule."""

    alpha: float = 0.6
    beta: float = 0.2
    replacement_ratio: float = 1.0
    rng_seed: int = 42

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must be in (0, 1)")
        if self.beta <= 0.0:
            raise ValueError("beta must be > 0")
        if not 0.0 <= self.replacement_ratio <= 1.0:
            raise ValueError("replacement_ratio must be in [0, 1]")


@dataclass(frozen=True)
class EntityLexicon:
    """Category -> entity surfaces (token sequences).

    Every category needs at least two entities so replacement can always pick
    a different one.
    """

    categories: dict[str, tuple[tuple[str, ...], ...]]

    def __post_init__(self):
        for category, entities in self.categories.items():
            if not category:
                raise ValueError("empty category name")
            if len(entities) < 2:
                raise ValueError(f"category {category!r} needs at least 2 entities")
            for entity in entities:
                if not entity or any(not token for token in entity):
                    raise ValueError(f"category {category!r} has an empty entity surface")


def keyword_divergence(q_keys: Iterable[str], Q_keys: Iterable[str]) -> float:
    """Symmetric-difference size over intersection size of the keyword sets.

    Disjoint non-empty sets are maximally divergent (+inf); two keyword-free
    sides carry no signal and return 0.
    """
    a, b = set(q_keys), set(Q_keys)
    if not a and not b:
        return 0.0
    inter = a & b
    if not inter:
        return math.inf
    return (len(a | b) - len(inter)) / len(inter)


def select_negative(sim_qQ: float, sim_qq: float, divergence: float, cfg: SamplerConfig) -> bool:
    """Negative-pair rule: normalized similarity strictly below alpha AND
    keyword divergence strictly above beta."""
    if sim_qq <= 0:
        raise ValueError("self-similarity must be positive")
    return sim_qQ / sim_qq < cfg.alpha and divergence > cfg.beta


def _keyword_surfaces(dictionary: KeywordDictionary, tokens: TokenSequence) -> set[str]:
    return {surface for _, _, surface in extract_keywords(dictionary, tokens)}


def mine_negatives(
    index: InvertedIndex,
    dictionary: KeywordDictionary,
    queries: list[TokenSequence],
    cfg: SamplerConfig,
    top_n: int = 10,
) -> list[QueryPair]:
    """Retrieve top-n candidates per query with keyword augmentation and emit
    every candidate passing the selection rule as a rule-mined negative.

    Candidates whose tokens equal the query are never emitted.
    """
    if top_n < 1:
        raise ValueError("top_n must be >= 1")
    pairs: list[QueryPair] = []
    for query in queries:
        if not query:
            continue
        sim_qq = self_similarity(index, query, dictionary)
        q_keys = _keyword_surfaces(dictionary, query)
        for hit in search(index, query, dictionary, top_n):
            candidate = index.questions[hit.doc_id]
            if list(candidate) == list(query):
                continue
            divergence = keyword_divergence(q_keys, _keyword_surfaces(dictionary, list(candidate)))
            if select_negative(hit.score, sim_qq, divergence, cfg):
                pairs.append(QueryPair(tuple(query), candidate, NEGATIVE, "rule_mined"))
    return pairs


@dataclass(frozen=True)
class ReplacedSpan:
    start: int
    end: int
    category: str
    original: tuple[str, ...]
    replacement: tuple[str, ...]


def _entity_table(lexicon: EntityLexicon) -> dict[tuple[str, ...], str]:
    # First category (by name) wins when two categories share a surface.
    table: dict[tuple[str, ...], str] = {}
    for category in sorted(lexicon.categories):
        for entity in lexicon.categories[category]:
            table.setdefault(tuple(entity), category)
    return table


def _find_entities(
    question: TokenSequence, lexicon: EntityLexicon
) -> list[tuple[int, int, str, tuple[str, ...]]]:
    table = _entity_table(lexicon)
    if not table:
        return []
    max_len = max(len(surface) for surface in table)
    occurrences = []
    i, n = 0, len(question)
    while i < n:
        found = None
        for length in range(min(max_len, n - i), 0, -1):
            window = tuple(question[i : i + length])
            if window in table:
                found = (i, i + length, table[window], window)
                break
        if found is not None:
            occurrences.append(found)
            i = found[1]
        else:
            i += 1
    return occurrences


def entity_replace(
    question: TokenSequence, lexicon: EntityLexicon, rng: np.random.Generator
) -> tuple[TokenSequence, ReplacedSpan] | None:
    """Replace one entity occurrence (chosen uniformly) with a uniformly random
    different entity of the same category.

    Occurrences whose category offers no different entity are skipped as
    replacement sources; returns None when nothing can be replaced.
    """
    viable = []
    for start, end, category, surface in _find_entities(question, lexicon):
        alternatives = [e for e in lexicon.categories[category] if tuple(e) != surface]
        if alternatives:
            viable.append((start, end, category, surface, alternatives))
    if not viable:
        return None
    start, end, category, surface, alternatives = viable[int(rng.integers(len(viable)))]
    replacement = tuple(alternatives[int(rng.integers(len(alternatives)))])
    rewritten = list(question[:start]) + list(replacement) + list(question[end:])
    return rewritten, ReplacedSpan(start, end, category, surface, replacement)


def generate_entity_negatives(
    questions: list[TokenSequence], lexicon: EntityLexicon, cfg: SamplerConfig
) -> list[QueryPair]:
    """Independently select each question with probability
    ``cfg.replacement_ratio`` and emit successful replacements as negatives.

    Each question gets its own rng stream derived from ``cfg.rng_seed`` and
    its position, so outputs are reproducible regardless of sharding.
    """
    pairs: list[QueryPair] = []
    for i, question in enumerate(questions):
        rng = np.random.default_rng(np.random.SeedSequence([cfg.rng_seed, i]))
        if rng.random() >= cfg.replacement_ratio:
            continue
        result = entity_replace(question, lexicon, rng)
        if result is None:
            continue
        rewritten, _ = result
        pairs.append(QueryPair(tuple(question), tuple(rewritten), NEGATIVE, "entity_replaced"))
    return pairs


def mine_random(
    questions: list[TokenSequence], n: int, rng: np.random.Generator
) -> list[QueryPair]:
    """Random-pair baseline: n uniform pairs of distinct questions, labeled
    negative."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if len(questions) < 2:
        raise ValueError("need at least 2 questions")
    pairs: list[QueryPair] = []
    attempts = 0
    while len(pairs) < n:
        attempts += 1
        if attempts > 100 * max(n, 1):
            raise ValueError("could not sample enough distinct pairs")
        i = int(rng.integers(len(questions)))
        j = int(rng.integers(len(questions)))
        if i == j or list(questions[i]) == list(questions[j]):
            continue
        pairs.append(QueryPair(tuple(questions[i]), tuple(questions[j]), NEGATIVE, "random"))
    return pairs


def export_candidates(
    index: InvertedIndex,
    dictionary: KeywordDictionary | None,
    queries: list[TokenSequence],
    top_k: int = 5,
) -> list[tuple[tuple[str, ...], tuple[str, ...]]]:
    """Top-k retrieval candidates per query, for external positive labeling.

    Exact duplicates of the query are dropped; no labels are assigned here.
    """
    out = []
    for query in queries:
        if not query:
            continue
        for hit in search(index, query, dictionary, top_k):
            candidate = index.questions[hit.doc_id]
            if list(candidate) == list(query):
                continue
            out.append((tuple(query), candidate))
    return out


def write_candidates(path, candidates, mode: str = "char") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for q, Q in candidates:
            fh.write(f"{join_tokens(list(q), mode)}\t{join_tokens(list(Q), mode)}\n")


def write_pairs(path, pairs: list[QueryPair], mode: str = "char") -> None:
    """Write pairs as JSONL with string-joined sides; lossless together with
    :func:`read_pairs` under the same tokenize mode."""
    with open(path, "w", encoding="utf-8") as fh:
        for pair in pairs:
            record = {
                "q": join_tokens(list(pair.q), mode),
                "Q": join_tokens(list(pair.Q), mode),
                "label": pair.label,
                "provenance": pair.provenance,
            }
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def read_pairs(path, mode: str = "char") -> list[QueryPair]:
    pairs: list[QueryPair] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}: malformed JSON, line {lineno}: {exc.msg}") from exc
            label = record.get("label")
            if label not in (0, 1) or isinstance(label, bool):
                raise ValueError(f"{path}: label must be 0 or 1, line {lineno}")
            provenance = record.get("provenance")
            if provenance not in PROVENANCES:
                raise ValueError(f"{path}: unknown provenance {provenance!r}, line {lineno}")
            try:
                q = tokenize(record["q"], mode)
                Q = tokenize(record["Q"], mode)
            except KeyError as exc:
                raise ValueError(f"{path}: missing field {exc}, line {lineno}") from exc
            pairs.append(QueryPair(tuple(q), tuple(Q), label, provenance))
    return pairs


def load_lexicon(path, mode: str = "char") -> EntityLexicon:
    """Read a TSV entity lexicon: ``category<TAB>entity`` per line."""
    categories: dict[str, list[tuple[str, ...]]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            cols = line.split("\t")
            if len(cols) != 2:
                raise ValueError(f"{path}: expected 2 tab-separated columns, line {lineno}")
            category, entity = cols
            categories.setdefault(category, []).append(tuple(tokenize(entity, mode)))
    return EntityLexicon({c: tuple(es) for c, es in categories.items()})
