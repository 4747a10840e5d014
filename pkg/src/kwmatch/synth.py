"""Deterministic synthetic worlds: a domain-tagged article corpus for keyword
extraction, a QA question set with keyword-mismatch distractors, and planted
keyword tasks for the classifiers.

Everything is whitespace-tokenized and generated from explicit rngs so runs
are bit-reproducible.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from kwmatch.corpus import Document

_SYLLABLES = (
    "ba", "co", "da", "el", "fi", "gu", "ha", "in", "jo", "ku", "la", "me",
    "ni", "or", "pa", "qu", "ri", "so", "tu", "ve", "wi", "xa", "yo", "zu",
)

# Frame words shared by every query and distractor; kept out of the keyword
# pools so their diff-idf stays near zero.
QUERY_FRAME = ("which", "factors", "will", "the", "affect", "'s")
GOLD_FRAME = ("talk", "about", "notes", "overview", "summary", "points", "listed", "here")
FUNCTION_WORDS = QUERY_FRAME + GOLD_FRAME + (
    "what", "how", "does", "change", "move", "report",
)


def _pseudo_word(i: int, salt: int) -> str:
    # base-24 digits keep words distinct for i < 24**3
    n = len(_SYLLABLES)
    a = _SYLLABLES[(i + salt) % n]
    b = _SYLLABLES[(i // n + salt * 3 + 5) % n]
    c = _SYLLABLES[(i // (n * n) + salt * 7 + 11) % n]
    return c + b + a


def _word_pool(count: int, salt: int, suffix: str) -> list[str]:
    pool: list[str] = []
    seen: set[str] = set()
    i = 0
    while len(pool) < count:
        word = _pseudo_word(i, salt) + suffix
        if word not in seen:
            seen.add(word)
            pool.append(word)
        i += 1
    return pool


@dataclass(frozen=True)
class QaWorld:
    """A fact world: per fact one query, one gold paraphrase, and one
    entity-swapped distractor sharing the query's phrasing."""

    domains: list[str]
    entities: list[str]  # fact entities
    decoys: list[str]  # distractor-only entities, disjoint from the fact pool
    topics: list[str]
    contexts: list[str]
    entity_domain: dict[str, str]
    topic_domain: dict[str, str]
    queries: list[list[str]]  # per fact
    golds: list[list[str]]
    distractors: list[list[str]]
    swapped_entities: list[str]  # the distractor's entity per fact


def make_qa_world(
    n_facts: int = 500,
    n_entities: int = 40,
    n_decoys: int = 12,
    n_topics: int = 15,
    n_contexts: int = 6,
    n_domains: int = 4,
    seed: int = 0,
) -> QaWorld:
    """Queries follow one fixed frame; the distractor reuses the frame, topic,
    and context word but swaps the entity for a decoy, while the gold
    paraphrase shares only the keywords and context (the classic near-miss
    retrieval pattern).

    Facts use distinct (entity, topic) combinations and decoys never appear
    as fact entities, so no distractor can collide with another fact's query.
    The small context pool keeps its idf moderate: the distractor's extra
    frame overlap narrowly outweighs the gold's entity match under plain BM25,
    and keyword tf-doubling flips the order.
    """
    if n_facts > n_entities * n_topics:
        raise ValueError("not enough (entity, topic) combinations for n_facts")
    rng = np.random.default_rng(seed)
    entities = _word_pool(n_entities + n_decoys, 1, "ia")
    entities, decoys = entities[:n_entities], entities[n_entities:]
    topics = _word_pool(n_topics, 2, "ics")
    contexts = _word_pool(n_contexts, 3, "")
    domains = [f"domain{d}" for d in range(n_domains)]
    entity_domain = {e: domains[i % n_domains] for i, e in enumerate(entities + decoys)}
    topic_domain = {t: domains[i % n_domains] for i, t in enumerate(topics)}

    combos = [(e, t) for e in entities for t in topics]
    picks = rng.permutation(len(combos))[:n_facts]
    queries, golds, distractors, swapped = [], [], [], []
    for pick in picks:
        entity, topic = combos[pick]
        context = contexts[int(rng.integers(n_contexts))]
        other = decoys[int(rng.integers(n_decoys))]
        queries.append(
            ["which", "factors", "will", "the", "affect", entity, "'s", topic, context]
        )
        distractors.append(
            ["which", "factors", "will", "the", "affect", other, "'s", topic, context]
        )
        # variable padding: short golds out-score their distractor even under
        # plain BM25, long ones only after keyword tf-doubling
        gold = ["talk", "about", entity, topic, context,
                "notes", "overview", "summary", "points", "listed", "here"]
        golds.append(gold[: 8 + int(rng.integers(0, 4))])
        swapped.append(other)
    return QaWorld(
        domains, entities, decoys, topics, contexts, entity_domain, topic_domain,
        queries, golds, distractors, swapped,
    )


def make_domain_corpus(
    world: QaWorld,
    articles_per_domain: int = 60,
    seed: int = 1,
) -> list[Document]:
    """Domain-tagged articles: each mentions keywords of its own domain plus
    universal function words, so diff-idf separates the two groups."""
    rng = np.random.default_rng(seed)
    by_domain: dict[str, list[str]] = {d: [] for d in world.domains}
    for entity, domain in world.entity_domain.items():
        by_domain[domain].append(entity)
    for topic, domain in world.topic_domain.items():
        by_domain[domain].append(topic)

    docs: list[Document] = []
    for domain in world.domains:
        pool = by_domain[domain]
        for i in range(articles_per_domain):
            n_keywords = int(rng.integers(3, 9))
            n_function = int(rng.integers(6, 13))
            words = [pool[int(rng.integers(len(pool)))] for _ in range(n_keywords)]
            words += [
                FUNCTION_WORDS[int(rng.integers(len(FUNCTION_WORDS)))]
                for _ in range(n_function)
            ]
            perm = rng.permutation(len(words))
            text = " ".join(words[p] for p in perm)
            docs.append(Document(f"{domain}-a{i:03d}", domain, text))
    return docs


def question_database(world: QaWorld) -> dict[str, list[str]]:
    """Indexable questions: every fact's gold and distractor."""
    questions: dict[str, list[str]] = {}
    for i, (gold, distractor) in enumerate(zip(world.golds, world.distractors)):
        questions[f"g{i:04d}"] = gold
        questions[f"d{i:04d}"] = distractor
    return questions


def gold_mapping(world: QaWorld) -> dict[str, str]:
    return {f"q{i:04d}": f"g{i:04d}" for i in range(len(world.queries))}


def query_mapping(world: QaWorld) -> dict[str, list[str]]:
    return {f"q{i:04d}": q for i, q in enumerate(world.queries)}


_PARA_COMMON = ("today", "report", "news", "brief", "data", "trend", "note", "info")


def make_paraphrase_world(
    n_facts: int = 500,
    n_entities: int = 60,
    n_topics: int = 12,
    n_contexts: int = 6,
    n_domains: int = 4,
    seed: int = 0,
) -> QaWorld:
    """Variant of the QA world for the sampling comparison: no fixed frame,
    just keywords plus words from one small common pool, and distractors swap
    to another real entity.

    Random database pairs then share almost nothing (easy negatives), while
    retrieval surfaces the same-topic entity-swapped near-duplicates that
    only rule mining puts into training.
    """
    if n_facts > n_entities * n_topics:
        raise ValueError("not enough (entity, topic) combinations for n_facts")
    rng = np.random.default_rng(seed)
    entities = _word_pool(n_entities, 1, "ia")
    topics = _word_pool(n_topics, 2, "ics")
    contexts = _word_pool(n_contexts, 3, "")
    domains = [f"domain{d}" for d in range(n_domains)]
    entity_domain = {e: domains[i % n_domains] for i, e in enumerate(entities)}
    topic_domain = {t: domains[i % n_domains] for i, t in enumerate(topics)}

    def draw_common():
        a = _PARA_COMMON[int(rng.integers(len(_PARA_COMMON)))]
        b = a
        while b == a:
            b = _PARA_COMMON[int(rng.integers(len(_PARA_COMMON)))]
        return a, b

    combos = [(e, t) for e in entities for t in topics]
    picks = rng.permutation(len(combos))[:n_facts]
    queries, golds, distractors, swapped = [], [], [], []
    for pick in picks:
        entity, topic = combos[pick]
        context = contexts[int(rng.integers(n_contexts))]
        other = entity
        while other == entity:
            other = entities[int(rng.integers(n_entities))]
        cq1, cq2 = draw_common()
        cg1, cg2 = draw_common()
        queries.append([cq1, cq2, entity, topic, context])
        distractors.append([cq1, cq2, other, topic, context])
        golds.append([cg1, cg2, entity, topic, context])
        swapped.append(other)
    return QaWorld(
        domains, entities, [], topics, contexts, entity_domain, topic_domain,
        queries, golds, distractors, swapped,
    )


def make_planted_pairs(
    n_pairs: int,
    n_keywords: int = 20,
    n_fillers: int = 300,
    sentence_len: int = 8,
    seed: int = 0,
):
    """Pair-classification task where the planted keyword decides the label.

    Each side is random filler plus one keyword token; the pair is positive
    iff both sides planted the same keyword. Returns (q, Q, q_keys, Q_keys,
    label) tuples with the keyword surfaces exposed.
    """
    rng = np.random.default_rng(seed)
    keywords = _word_pool(n_keywords, 4, "key")
    fillers = _word_pool(n_fillers, 5, "fil")

    def sentence(keyword: str) -> list[str]:
        words = [fillers[int(rng.integers(n_fillers))] for _ in range(sentence_len - 1)]
        words.insert(int(rng.integers(sentence_len)), keyword)
        return words

    out = []
    for i in range(n_pairs):
        kq = keywords[int(rng.integers(n_keywords))]
        if i % 2 == 0:
            kQ = kq
            label = 1
        else:
            kQ = kq
            while kQ == kq:
                kQ = keywords[int(rng.integers(n_keywords))]
            label = 0
        out.append((sentence(kq), sentence(kQ), [kq], [kQ], label))
    return out


def make_discrimination_pairs(
    n_pairs: int,
    n_keywords: int = 8,
    n_fillers: int = 40,
    min_len: int = 4,
    max_len: int = 7,
    seed: int = 0,
):
    """Keyword-discrimination pairs for the attention model: heavy shared
    filler vocabulary, label decided by whether the planted keywords match.

    Returns (q_tokens, q_spans, Q_tokens, Q_spans, label) tuples.
    """
    rng = np.random.default_rng(seed)
    keywords = _word_pool(n_keywords, 6, "kw")
    fillers = _word_pool(n_fillers, 7, "ff")

    def sentence(keyword: str):
        length = int(rng.integers(min_len, max_len + 1))
        words = [fillers[int(rng.integers(n_fillers))] for _ in range(length - 1)]
        pos = int(rng.integers(length))
        words.insert(pos, keyword)
        return words, [(pos, pos + 1)]

    out = []
    for i in range(n_pairs):
        kq = keywords[int(rng.integers(n_keywords))]
        if i % 2 == 0:
            kQ = kq
            label = 1
        else:
            kQ = kq
            while kQ == kq:
                kQ = keywords[int(rng.integers(n_keywords))]
            label = 0
        q_tokens, q_spans = sentence(kq)
        Q_tokens, Q_spans = sentence(kQ)
        out.append((q_tokens, q_spans, Q_tokens, Q_spans, label))
    return out


def write_demo_files(outdir, seed: int = 0) -> dict[str, str]:
    """Write a small end-to-end demo dataset (corpus, questions, lexicon, and
    a pipeline config) into ``outdir``; returns the written paths."""
    from pathlib import Path

    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    world = make_qa_world(n_facts=120, seed=seed)
    corpus = make_domain_corpus(world, articles_per_domain=40, seed=seed + 1)

    corpus_path = outdir / "corpus.jsonl"
    with open(corpus_path, "w", encoding="utf-8") as fh:
        for doc in corpus:
            fh.write(json.dumps({"id": doc.id, "domain": doc.domain, "text": doc.text}) + "\n")

    questions_path = outdir / "questions.jsonl"
    with open(questions_path, "w", encoding="utf-8") as fh:
        for qid, tokens in question_database(world).items():
            fh.write(json.dumps({"id": qid, "text": " ".join(tokens)}) + "\n")

    queries_path = outdir / "queries.jsonl"
    with open(queries_path, "w", encoding="utf-8") as fh:
        for qid, tokens in query_mapping(world).items():
            fh.write(json.dumps({"id": qid, "text": " ".join(tokens)}) + "\n")

    gold_path = outdir / "gold.tsv"
    with open(gold_path, "w", encoding="utf-8") as fh:
        for qid, doc_id in gold_mapping(world).items():
            fh.write(f"{qid}\t{doc_id}\n")

    positives_path = outdir / "positives.jsonl"
    with open(positives_path, "w", encoding="utf-8") as fh:
        for query, gold in zip(world.queries, world.golds):
            record = {"q": " ".join(query), "Q": " ".join(gold),
                      "label": 1, "provenance": "human"}
            fh.write(json.dumps(record) + "\n")

    lexicon_path = outdir / "lexicon.tsv"
    with open(lexicon_path, "w", encoding="utf-8") as fh:
        for entity in world.entities + world.decoys:
            fh.write(f"entity\t{entity}\n")

    config_path = outdir / "demo.cfg"
    config_path.write_text(
        "\n".join(
            [
                "# demo pipeline configuration",
                f"corpus = {corpus_path}",
                f"questions = {questions_path}",
                f"queries = {queries_path}",
                f"gold = {gold_path}",
                f"lexicon = {lexicon_path}",
                f"dictionary = {outdir / 'keywords.tsv'}",
                f"index = {outdir / 'index.json'}",
                f"pairs = {outdir / 'pairs.jsonl'}",
                f"model = {outdir / 'model.bin'}",
                f"vocab = {outdir / 'vocab.txt'}",
                "tokenize_mode = whitespace",
                "pmi_threshold = 4.0",
                "diff_idf_threshold = 1.0",
                "lambda = 1.0",
                "top_n = 2",
                "# fastpair trainer",
                "epochs = 8",
                "learning_rate = 1.0",
                "dim = 32",
                "num_buckets = 65536",
                "# attention trainer",
                "attn_epochs = 3",
                "attn_lr = 0.3",
                "clip_norm = 1.0",
                "init_std = 0.2",
                "attn_max_len = 32",
                f"seed = {seed}",
                "",
            ]
        )
    )
    return {
        "corpus": str(corpus_path),
        "questions": str(questions_path),
        "queries": str(queries_path),
        "gold": str(gold_path),
        "positives": str(positives_path),
        "lexicon": str(lexicon_path),
        "config": str(config_path),
    }
