"""Negative-pair selection rule, mining, entity replacement, and pair files."""

import math

import numpy as np
import pytest

from kwmatch.keywords import KeywordDictionary, KeywordEntry, extract_keywords
from kwmatch.retrieval import build_index, self_similarity
from kwmatch.sampling import (
    NEGATIVE,
    POSITIVE,
    EntityLexicon,
    QueryPair,
    SamplerConfig,
    entity_replace,
    export_candidates,
    generate_entity_negatives,
    keyword_divergence,
    load_lexicon,
    mine_negatives,
    mine_random,
    read_pairs,
    select_negative,
    write_pairs,
)


def _dict(*surfaces):
    return KeywordDictionary(
        {s: KeywordEntry(s, "d", 1.0) for s in surfaces}, mode="whitespace"
    )


class TestKeywordDivergence:
    def test_direct_arithmetic(self):
        assert keyword_divergence({"a", "b"}, {"b", "c"}) == 2.0

    def test_identical_sets(self):
        assert keyword_divergence({"a", "b"}, {"a", "b"}) == 0.0

    def test_disjoint_sets_are_infinite(self):
        assert keyword_divergence({"a"}, {"b"}) == math.inf

    def test_both_empty_is_zero(self):
        assert keyword_divergence(set(), set()) == 0.0

    def test_one_empty_is_infinite(self):
        assert keyword_divergence({"a"}, set()) == math.inf


class TestSelectNegative:
    def test_paper_threshold_cases(self):
        cfg = SamplerConfig()
        assert select_negative(0.5, 1.0, 0.3, cfg) is True
        assert select_negative(0.7, 1.0, 0.3, cfg) is False
        assert select_negative(0.5, 1.0, 0.1, cfg) is False

    def test_strict_boundaries(self):
        cfg = SamplerConfig()
        assert select_negative(0.6, 1.0, 0.3, cfg) is False
        assert select_negative(0.5, 1.0, 0.2, cfg) is False

    def test_sentinels(self):
        cfg = SamplerConfig()
        assert select_negative(0.1, 1.0, math.inf, cfg) is True
        assert select_negative(0.1, 1.0, 0.0, cfg) is False

    def test_nonpositive_self_similarity_rejected(self):
        with pytest.raises(ValueError):
            select_negative(0.5, 0.0, 1.0, SamplerConfig())

    def test_monotone(self):
        cfg = SamplerConfig()
        rng = np.random.default_rng(0)
        for _ in range(200):
            ratio = float(rng.uniform(0, 1.2))
            div = float(rng.uniform(0, 2))
            if select_negative(ratio, 1.0, div, cfg):
                assert select_negative(ratio * 0.5, 1.0, div, cfg)
                assert select_negative(ratio, 1.0, div + 1.0, cfg)


class TestSamplerConfig:
    def test_defaults(self):
        cfg = SamplerConfig()
        assert cfg.alpha == 0.6
        assert cfg.beta == 0.2

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"alpha": 0.0},
            {"alpha": 1.0},
            {"beta": 0.0},
            {"replacement_ratio": 1.5},
            {"replacement_ratio": -0.1},
        ],
    )
    def test_validation(self, kwargs):
        with pytest.raises(ValueError):
            SamplerConfig(**kwargs)


class TestQueryPair:
    def test_validation(self):
        with pytest.raises(ValueError):
            QueryPair((), ("a",), 0, "human")
        with pytest.raises(ValueError):
            QueryPair(("a",), ("b",), 2, "human")
        with pytest.raises(ValueError):
            QueryPair(("a",), ("b",), 0, "guessed")


class TestMineNegatives:
    @pytest.fixture
    def setup(self):
        dictionary = _dict("kw1", "kw2", "kw3")
        questions = {
            "d1": ["u", "v", "kw1"],
            "d2": ["u", "v", "kw2"],
            "d3": ["x", "y", "kw3"],
        }
        index = build_index(questions, dictionary)
        return dictionary, questions, index

    def test_passing_candidate_emitted(self, setup):
        # candidate d2 scores ~0.41 of the self-similarity with divergent
        # keywords, so it passes the default rule thresholds
        dictionary, questions, index = setup
        cfg = SamplerConfig()
        pairs = mine_negatives(index, dictionary, [["u", "v", "kw1"]], cfg, top_n=3)
        assert QueryPair(("u", "v", "kw1"), ("u", "v", "kw2"), NEGATIVE, "rule_mined") in pairs
        assert all(p.label == NEGATIVE and p.provenance == "rule_mined" for p in pairs)

    def test_identical_candidate_never_emitted(self, setup):
        dictionary, questions, index = setup
        cfg = SamplerConfig(alpha=0.99, beta=0.1)
        pairs = mine_negatives(index, dictionary, [["u", "v", "kw1"]], cfg, top_n=3)
        assert pairs
        assert all(list(p.Q) != list(p.q) for p in pairs)

    def test_empty_query_list(self, setup):
        dictionary, _, index = setup
        assert mine_negatives(index, dictionary, [], SamplerConfig(), 3) == []

    def test_outputs_satisfy_rule_on_recheck(self, setup):
        dictionary, questions, index = setup
        cfg = SamplerConfig(alpha=0.9, beta=0.2)
        queries = [list(q) for q in questions.values()]
        pairs = mine_negatives(index, dictionary, queries, cfg, top_n=3)
        assert pairs
        for pair in pairs:
            # independent re-evaluation of both rule conditions
            from kwmatch.retrieval import bm25_score

            doc_id = next(d for d, t in index.questions.items() if t == pair.Q)
            from kwmatch.retrieval import augment_with_keywords

            augmented = augment_with_keywords(list(pair.q), dictionary)
            sim = bm25_score(index, augmented, doc_id)
            sim_qq = self_similarity(index, list(pair.q), dictionary)
            q_keys = {s for _, _, s in extract_keywords(dictionary, list(pair.q))}
            Q_keys = {s for _, _, s in extract_keywords(dictionary, list(pair.Q))}
            assert select_negative(sim, sim_qq, keyword_divergence(q_keys, Q_keys), cfg)

    def test_top_n_validated(self, setup):
        dictionary, _, index = setup
        with pytest.raises(ValueError):
            mine_negatives(index, dictionary, [], SamplerConfig(), top_n=0)


class TestEntityLexicon:
    def test_single_entity_category_rejected(self):
        with pytest.raises(ValueError, match="at least 2"):
            EntityLexicon({"country": ((("china",)),)})

    def test_roundtrip_tsv(self, tmp_path):
        path = tmp_path / "lex.tsv"
        path.write_text("country\tchina\ncountry\tamerica\ncity\tparis\ncity\tlondon\n")
        lex = load_lexicon(path, mode="whitespace")
        assert lex.categories["country"] == (("china",), ("america",))

    def test_bad_row(self, tmp_path):
        path = tmp_path / "lex.tsv"
        path.write_text("justoneword\n")
        with pytest.raises(ValueError, match="line 1"):
            load_lexicon(path)


class TestEntityReplace:
    @pytest.fixture
    def lexicon(self):
        return EntityLexicon({"country": (("china",), ("america",))})

    def test_paper_example_only_outcome(self, lexicon):
        question = "what factors will affect china 's gdp".split()
        rng = np.random.default_rng(0)
        rewritten, span = entity_replace(question, lexicon, rng)
        assert rewritten == "what factors will affect america 's gdp".split()
        assert (span.start, span.end) == (4, 5)
        assert span.original == ("china",)
        assert span.replacement == ("america",)

    def test_no_entity_returns_none(self, lexicon):
        assert entity_replace(["nothing", "here"], lexicon, np.random.default_rng(0)) is None

    def test_tokens_outside_span_preserved(self, lexicon):
        rng = np.random.default_rng(1)
        question = ["a", "china", "b", "america", "c"]
        for _ in range(20):
            rewritten, span = entity_replace(question, lexicon, rng)
            assert rewritten[: span.start] == question[: span.start]
            tail = len(question) - span.end
            assert rewritten[len(rewritten) - tail :] == question[span.end :]

    def test_occurrences_chosen_uniformly(self, lexicon):
        rng = np.random.default_rng(42)
        question = ["china", "x", "america"]
        counts = {0: 0, 2: 0}
        n = 10_000
        for _ in range(n):
            _, span = entity_replace(question, lexicon, rng)
            counts[span.start] += 1
        assert abs(counts[0] / n - 0.5) < 0.05

    def test_duplicate_only_alternative_skipped(self):
        # both entities identical: no different replacement exists
        lexicon = EntityLexicon({"country": (("china",), ("china",))})
        assert entity_replace(["china"], lexicon, np.random.default_rng(0)) is None

    def test_multi_token_entities_longest_match(self):
        lexicon = EntityLexicon(
            {"org": (("new", "york"), ("los", "angeles")), "state": (("york",), ("texas",))}
        )
        rng = np.random.default_rng(3)
        rewritten, span = entity_replace(["new", "york", "rocks"], lexicon, rng)
        assert span.original == ("new", "york")
        assert span.category == "org"


class TestGenerateEntityNegatives:
    @pytest.fixture
    def lexicon(self):
        return EntityLexicon({"country": (("china",), ("america",), ("france",))})

    def test_ratio_zero_empty(self, lexicon):
        cfg = SamplerConfig(replacement_ratio=0.0)
        questions = [["china", "gdp"]] * 5
        assert generate_entity_negatives(questions, lexicon, cfg) == []

    def test_ratio_one_full_coverage(self, lexicon):
        cfg = SamplerConfig(replacement_ratio=1.0)
        questions = [["china", "gdp"], ["america", "rocks"]]
        pairs = generate_entity_negatives(questions, lexicon, cfg)
        assert len(pairs) == 2
        assert all(p.label == NEGATIVE and p.provenance == "entity_replaced" for p in pairs)

    def test_each_pair_differs_in_exactly_one_span(self, lexicon):
        cfg = SamplerConfig(replacement_ratio=1.0, rng_seed=9)
        questions = [["x", "china", "y"], ["france", "z"]]
        for pair in generate_entity_negatives(questions, lexicon, cfg):
            diffs = [
                i for i, (a, b) in enumerate(zip(pair.q, pair.Q)) if a != b
            ]
            assert len(diffs) == 1  # single-token entities here

    def test_seeded_reproducibility(self, lexicon):
        cfg = SamplerConfig(replacement_ratio=0.7, rng_seed=5)
        questions = [["china", "a"], ["america", "b"], ["no", "entity"], ["france", "c"]]
        first = generate_entity_negatives(questions, lexicon, cfg)
        second = generate_entity_negatives(questions, lexicon, cfg)
        assert first == second


class TestMineRandom:
    def test_uniform_pairs_exclude_identical(self):
        rng = np.random.default_rng(0)
        questions = [["a"], ["b"], ["a"], ["c"]]
        pairs = mine_random(questions, 50, rng)
        assert len(pairs) == 50
        for pair in pairs:
            assert list(pair.q) != list(pair.Q)
            assert pair.provenance == "random"

    def test_requires_two_questions(self):
        with pytest.raises(ValueError):
            mine_random([["a"]], 1, np.random.default_rng(0))

    def test_degenerate_pool_rejected(self):
        with pytest.raises(ValueError, match="distinct"):
            mine_random([["a"], ["a"]], 1, np.random.default_rng(0))


class TestPairFiles:
    def test_roundtrip(self, tmp_path):
        rng = np.random.default_rng(0)
        vocab = list("abcdef")
        pairs = []
        for i in range(100):
            q = tuple(vocab[int(rng.integers(6))] for _ in range(int(rng.integers(1, 6))))
            Q = tuple(vocab[int(rng.integers(6))] for _ in range(int(rng.integers(1, 6))))
            pairs.append(QueryPair(q, Q, int(i % 2), "human" if i % 2 else "rule_mined"))
        path = tmp_path / "pairs.jsonl"
        write_pairs(path, pairs, mode="whitespace")
        assert read_pairs(path, mode="whitespace") == pairs

    def test_char_mode_roundtrip(self, tmp_path):
        pairs = [QueryPair(("中", "国"), ("美", "国"), NEGATIVE, "entity_replaced")]
        path = tmp_path / "pairs.jsonl"
        write_pairs(path, pairs, mode="char")
        assert read_pairs(path, mode="char") == pairs

    def test_bad_label_rejected_with_line(self, tmp_path):
        path = tmp_path / "pairs.jsonl"
        path.write_text('{"q": "a", "Q": "b", "label": 3, "provenance": "human"}\n')
        with pytest.raises(ValueError, match="line 1"):
            read_pairs(path, mode="whitespace")

    def test_bool_label_rejected(self, tmp_path):
        path = tmp_path / "pairs.jsonl"
        path.write_text('{"q": "a", "Q": "b", "label": true, "provenance": "human"}\n')
        with pytest.raises(ValueError, match="label"):
            read_pairs(path, mode="whitespace")

    def test_empty_file(self, tmp_path):
        path = tmp_path / "pairs.jsonl"
        path.write_text("")
        assert read_pairs(path) == []


def test_export_candidates_drops_exact_duplicates():
    dictionary = _dict("kw1")
    questions = {"d1": ["a", "kw1"], "d2": ["b", "kw1"], "d3": ["c"]}
    index = build_index(questions, dictionary)
    out = export_candidates(index, dictionary, [["a", "kw1"]], top_k=3)
    assert (("a", "kw1"), ("a", "kw1")) not in out
    assert out  # other candidates exported unlabeled
