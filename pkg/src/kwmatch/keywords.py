"""Domain keyword discovery: PMI phrase candidates, diff-idf scoring, and the
merged keyword dictionary with greedy span extraction."""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass

from kwmatch.corpus import (
    CorpusStats,
    Document,
    TokenSequence,
    compute_stats,
    join_tokens,
    tokenize,
)

# Sentinel for adjacent pairs that never co-occur: distinct from any finite PMI.
NEVER_COOCCURS = float("-inf")


@dataclass(frozen=True)
class PhraseCandidate:
    """A multi-token phrase accepted by PMI chaining.

    ``pmi_score`` is the weakest adjacent-pair PMI inside the phrase, so it is
    the pair PMI itself for two-token candidates.
    """

    tokens: tuple[str, ...]
    pmi_score: float


@dataclass(frozen=True)
class KeywordEntry:
    surface: str
    domain: str
    score: float


class KeywordDictionary:
    """Merged per-domain keyword entries, matchable against token sequences.

    Surfaces are stored as strings and re-tokenized with the dictionary's
    tokenize mode for matching, so a char-mode surface ``"abc"`` matches the
    three tokens ``a b c`` and a whitespace-mode surface ``"new york"``
    matches the two tokens ``new york``.
    """

    def __init__(self, entries: dict[str, KeywordEntry], mode: str = "char"):
        self.mode = mode
        self.entries = dict(entries)
        self._by_tokens: dict[tuple[str, ...], KeywordEntry] = {}
        for surface, entry in self.entries.items():
            tokens = tuple(tokenize(surface, mode))
            if not tokens:
                raise ValueError(f"empty keyword surface: {surface!r}")
            self._by_tokens[tokens] = entry
        self.max_surface_len = max((len(t) for t in self._by_tokens), default=0)

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, surface: str) -> bool:
        return surface in self.entries

    def lookup_tokens(self, tokens: tuple[str, ...]) -> KeywordEntry | None:
        return self._by_tokens.get(tokens)


def pmi(stats: CorpusStats, w1: str, w2: str) -> float:
    """Pointwise mutual information of the ordered adjacent pair (w1, w2).

    Natural log of p(w1, w2) / (p(w1) p(w2)), with the joint probability
    estimated from adjacent-bigram counts and the marginals from unigram
    counts. Returns :data:`NEVER_COOCCURS` when the bigram never occurs.
    """
    for w in (w1, w2):
        if stats.unigram_count.get(w, 0) == 0:
            raise ValueError(f"unknown unigram: {w!r}")
    joint = stats.bigram_count.get((w1, w2), 0)
    if joint == 0:
        return NEVER_COOCCURS
    p_joint = joint / stats.total_bigrams
    p1 = stats.unigram_count[w1] / stats.total_tokens
    p2 = stats.unigram_count[w2] / stats.total_tokens
    return math.log(p_joint / (p1 * p2))


def discover_phrases(
    stats: CorpusStats, pmi_threshold: float, max_len: int = 4
) -> list[PhraseCandidate]:
    """Find sticky token chains: every adjacent pair with PMI >= threshold,
    extended greedily while each (last-token, next-token) link also clears the
    threshold, up to ``max_len`` tokens.

    Sorted by score descending, ties by surface lexicographically.
    """
    if max_len < 2:
        raise ValueError("max_len must be >= 2")
    link_pmi: dict[tuple[str, str], float] = {}
    for pair in stats.bigram_count:
        score = pmi(stats, pair[0], pair[1])
        if score >= pmi_threshold:
            link_pmi[pair] = score
    successors: dict[str, list[tuple[str, float]]] = defaultdict(list)
    for (a, b), score in link_pmi.items():
        successors[a].append((b, score))

    # The min-link score is path-independent, so each chain is visited once.
    candidates: dict[tuple[str, ...], float] = {
        (a, b): s for (a, b), s in link_pmi.items()
    }
    queue = list(candidates.items())
    while queue:
        tokens, score = queue.pop()
        if len(tokens) >= max_len:
            continue
        for nxt, link in successors[tokens[-1]]:
            extended = tokens + (nxt,)
            if extended not in candidates:
                candidates[extended] = min(score, link)
                queue.append((extended, candidates[extended]))

    out = [PhraseCandidate(tokens, score) for tokens, score in candidates.items()]
    out.sort(key=lambda c: (-c.pmi_score, c.tokens))
    return out


def _diff_idf_value(n_dom: int, df_dom: int, n_anti: int, df_anti: int, lam: float) -> float:
    if lam <= 0:
        raise ValueError("lambda must be > 0")
    if n_anti == 0:
        raise ValueError("anti-domain corpus is empty (single-domain corpus)")
    return math.log(n_anti / (df_anti + lam)) - math.log(n_dom / (df_dom + lam))


def diff_idf(stats: CorpusStats, w: str, domain: str, lam: float = 1.0) -> float:
    """Anti-domain idf minus in-domain idf: high values mark words that lean
    into ``domain``; evenly spread words score near zero.

    Smoothing ``lam`` is added to both document frequencies; surfaces absent
    from ``doc_freq`` count as frequency zero.
    """
    if domain not in stats.doc_count:
        raise ValueError(f"unknown domain: {domain!r}")
    n_dom = stats.doc_count[domain]
    n_anti = sum(c for d, c in stats.doc_count.items() if d != domain)
    df_dom = stats.doc_freq.get((domain, w), 0)
    df_anti = sum(c for (d, t), c in stats.doc_freq.items() if t == w and d != domain)
    return _diff_idf_value(n_dom, df_dom, n_anti, df_anti, lam)


def build_domain_dictionary(
    docs: list[Document],
    domain: str,
    pmi_threshold: float,
    diff_idf_threshold: float = 0.0,
    lam: float = 1.0,
    mode: str = "char",
    max_phrase_len: int = 4,
) -> list[KeywordEntry]:
    """Score every candidate surface occurring in ``domain`` by diff-idf and
    keep those at or above the threshold, best first.

    Candidates are the domain's unigrams plus PMI-discovered phrases; phrase
    document frequency is counted by contiguous containment at token level.
    """
    stats = compute_stats(docs, mode)
    if domain not in stats.doc_count:
        raise ValueError(f"unknown domain: {domain!r}")
    n_dom = stats.doc_count[domain]
    n_anti = sum(c for d, c in stats.doc_count.items() if d != domain)

    # Per-token document frequencies, split into domain vs anti-domain.
    token_df_dom: Counter = Counter()
    token_df_anti: Counter = Counter()
    for (d, token), count in stats.doc_freq.items():
        if d == domain:
            token_df_dom[token] += count
        else:
            token_df_anti[token] += count

    phrases = discover_phrases(stats, pmi_threshold, max_phrase_len)
    phrase_set = {p.tokens for p in phrases}
    phrase_df_dom: Counter = Counter()
    phrase_df_anti: Counter = Counter()
    if phrase_set:
        lengths = sorted({len(p) for p in phrase_set})
        for doc in docs:
            tokens = tokenize(doc.text, mode)
            present = set()
            for length in lengths:
                for i in range(len(tokens) - length + 1):
                    window = tuple(tokens[i : i + length])
                    if window in phrase_set:
                        present.add(window)
            bucket = phrase_df_dom if doc.domain == domain else phrase_df_anti
            for window in present:
                bucket[window] += 1

    entries = []
    for token, df_dom in token_df_dom.items():
        score = _diff_idf_value(n_dom, df_dom, n_anti, token_df_anti.get(token, 0), lam)
        if score >= diff_idf_threshold:
            entries.append(KeywordEntry(token, domain, score))
    for tokens in phrase_set:
        df_dom = phrase_df_dom.get(tokens, 0)
        if df_dom == 0:
            continue  # a keyword must occur in its own domain
        score = _diff_idf_value(n_dom, df_dom, n_anti, phrase_df_anti.get(tokens, 0), lam)
        if score >= diff_idf_threshold:
            entries.append(KeywordEntry(join_tokens(list(tokens), mode), domain, score))

    entries.sort(key=lambda e: (-e.score, e.surface))
    return entries


def merge_dictionaries(
    parts: list[list[KeywordEntry]], mode: str = "char"
) -> KeywordDictionary:
    """Union of per-domain entry lists, keeping the best-scored entry per
    surface (ties go to the lexicographically smaller domain tag)."""
    best: dict[str, KeywordEntry] = {}
    for part in parts:
        for entry in part:
            current = best.get(entry.surface)
            if (
                current is None
                or entry.score > current.score
                or (entry.score == current.score and entry.domain < current.domain)
            ):
                best[entry.surface] = entry
    return KeywordDictionary(best, mode=mode)


def extract_keywords(
    dictionary: KeywordDictionary, seq: TokenSequence
) -> list[tuple[int, int, str]]:
    """Greedy longest-match scan of ``seq`` against the dictionary.

    Returns non-overlapping ``(start, end, surface)`` spans in order; the scan
    restarts right after each match.
    """
    spans: list[tuple[int, int, str]] = []
    i, n = 0, len(seq)
    while i < n:
        found = None
        for length in range(min(dictionary.max_surface_len, n - i), 0, -1):
            entry = dictionary.lookup_tokens(tuple(seq[i : i + length]))
            if entry is not None:
                found = (i, i + length, entry.surface)
                break
        if found is not None:
            spans.append(found)
            i = found[1]
        else:
            i += 1
    return spans


def _format_score(score: float) -> str:
    # lossless and at least six decimal digits
    text = repr(score)
    if "." in text and "e" not in text and len(text.split(".")[1]) < 6:
        text = f"{score:.6f}"
    return text


def save_dictionary(dictionary: KeywordDictionary, path) -> None:
    """Write entries as TSV ``surface<TAB>domain<TAB>score`` with full-precision
    scores, best first."""
    entries = sorted(dictionary.entries.values(), key=lambda e: (-e.score, e.surface))
    with open(path, "w", encoding="utf-8") as fh:
        for entry in entries:
            fh.write(f"{entry.surface}\t{entry.domain}\t{_format_score(entry.score)}\n")


def load_dictionary(path, mode: str = "char") -> KeywordDictionary:
    """Read a TSV dictionary written by :func:`save_dictionary`."""
    entries: dict[str, KeywordEntry] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            cols = line.split("\t")
            if len(cols) != 3:
                raise ValueError(f"{path}: expected 3 tab-separated columns, line {lineno}")
            surface, domain, score_text = cols
            try:
                score = float(score_text)
            except ValueError as exc:
                raise ValueError(f"{path}: bad score {score_text!r}, line {lineno}") from exc
            entries[surface] = KeywordEntry(surface, domain, score)
    return KeywordDictionary(entries, mode=mode)
