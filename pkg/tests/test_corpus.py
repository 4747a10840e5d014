"""Tokenization, corpus loading, count statistics, and question dedup."""

import json

import pytest

from kwmatch.corpus import (
    CorpusStats,
    Document,
    compute_stats,
    dedup_questions,
    join_tokens,
    load_corpus,
    load_questions,
    tokenize,
)


class TestTokenize:
    def test_whitespace_split(self):
        assert tokenize("ab cd", "whitespace") == ["ab", "cd"]

    def test_char_mode(self):
        assert tokenize("ab", "char") == ["a", "b"]

    def test_empty_text(self):
        assert tokenize("", "char") == []
        assert tokenize("", "whitespace") == []

    def test_char_skips_whitespace(self):
        assert tokenize("a b\tc\n", "char") == ["a", "b", "c"]

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            tokenize("x", "bytes")

    def test_char_roundtrip_preserves_nonspace_length(self):
        texts = ["hello world", "  spaced\tout ", "中文 字符", ""]
        for text in texts:
            tokens = tokenize(text, "char")
            assert len(join_tokens(tokens, "char")) == sum(
                1 for ch in text if not ch.isspace()
            )

    def test_whitespace_roundtrip(self):
        tokens = tokenize("a bb ccc", "whitespace")
        assert tokenize(join_tokens(tokens, "whitespace"), "whitespace") == tokens


class TestLoadCorpus:
    def _write(self, tmp_path, lines):
        path = tmp_path / "corpus.jsonl"
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    def test_well_formed(self, tmp_path):
        lines = [
            json.dumps({"id": f"d{i}", "domain": "econ", "text": f"text {i}"})
            for i in range(3)
        ]
        docs = load_corpus(self._write(tmp_path, lines))
        assert len(docs) == 3
        assert docs[0] == Document("d0", "econ", "text 0")

    def test_duplicate_id_names_line(self, tmp_path):
        lines = [
            json.dumps({"id": "d1", "domain": "econ", "text": "a"}),
            json.dumps({"id": "d1", "domain": "econ", "text": "b"}),
        ]
        with pytest.raises(ValueError, match=r"duplicate id 'd1', line 2"):
            load_corpus(self._write(tmp_path, lines))

    def test_missing_domain_is_parse_error(self, tmp_path):
        lines = [json.dumps({"id": "d1", "text": "a"})]
        with pytest.raises(ValueError, match="line 1"):
            load_corpus(self._write(tmp_path, lines))

    def test_malformed_json_names_line(self, tmp_path):
        lines = [
            json.dumps({"id": "d1", "domain": "econ", "text": "a"}),
            "{not json",
        ]
        with pytest.raises(ValueError, match="line 2"):
            load_corpus(self._write(tmp_path, lines))

    def test_blank_text_rejected(self, tmp_path):
        lines = [json.dumps({"id": "d1", "domain": "econ", "text": "   "})]
        with pytest.raises(ValueError, match="empty text"):
            load_corpus(self._write(tmp_path, lines))

    def test_questions_file(self, tmp_path):
        path = tmp_path / "q.jsonl"
        path.write_text(
            json.dumps({"id": "q1", "text": "a b"}) + "\n"
            + json.dumps({"id": "q2", "text": "c"}) + "\n",
            encoding="utf-8",
        )
        assert load_questions(path) == {"q1": "a b", "q2": "c"}


class TestComputeStats:
    def test_hand_counts(self):
        docs = [Document("a", "d1", "a b"), Document("b", "d1", "a a")]
        stats = compute_stats(docs, "whitespace")
        assert stats.unigram_count["a"] == 3
        assert stats.unigram_count["b"] == 1
        assert stats.doc_freq[("d1", "a")] == 2
        assert stats.doc_freq[("d1", "b")] == 1
        assert stats.doc_count["d1"] == 2
        assert stats.total_tokens == 4
        assert stats.bigram_count[("a", "b")] == 1
        assert stats.bigram_count[("a", "a")] == 1
        assert stats.total_bigrams == 2

    def test_single_token_doc_has_no_bigrams(self):
        stats = compute_stats([Document("a", "d", "x")], "whitespace")
        assert stats.total_bigrams == 0
        assert not stats.bigram_count

    def test_domains_split_doc_freq(self):
        docs = [Document("a", "econ", "x y"), Document("b", "sport", "x y")]
        stats = compute_stats(docs, "whitespace")
        assert stats.doc_freq[("econ", "x")] == 1
        assert stats.doc_freq[("sport", "x")] == 1
        assert stats.doc_count == {"econ": 1, "sport": 1}

    def test_empty_list_rejected(self):
        with pytest.raises(ValueError):
            compute_stats([], "char")

    def test_total_bigrams_matches_sum(self):
        docs = [Document(str(i), "d", t) for i, t in enumerate(["a b c", "b", "c a"])]
        stats = compute_stats(docs, "whitespace")
        assert stats.total_bigrams == sum(stats.bigram_count.values())

    def test_merge_is_additive_and_order_independent(self):
        docs = [
            Document("1", "econ", "a b a"),
            Document("2", "sport", "b c"),
            Document("3", "econ", "c c a"),
        ]
        whole = compute_stats(docs, "whitespace")
        left = compute_stats(docs[:1], "whitespace")
        right = compute_stats(docs[1:], "whitespace")
        for combined in (left.merge(right), right.merge(left)):
            assert combined == whole


class TestDedup:
    def test_word_order_collision(self):
        qs = [["a", "b"], ["b", "a"]]
        assert dedup_questions(qs) == [["a", "b"]]

    def test_distinct_kept(self):
        qs = [["a", "b"], ["a", "c"]]
        assert dedup_questions(qs) == qs

    def test_punctuation_stripped_first_kept(self):
        qs = [["a", "b!"], ["a", "b"]]
        assert dedup_questions(qs) == [["a", "b!"]]

    def test_fullwidth_punctuation(self):
        qs = [["a", "b！"], ["b", "a"]]
        assert dedup_questions(qs) == [["a", "b！"]]

    def test_idempotent(self):
        qs = [["a", "b"], ["b", "a"], ["c"], ["c", "."]]
        once = dedup_questions(qs)
        assert dedup_questions(once) == once


def test_stats_equal_brute_force_on_random_inputs():
    import numpy as np

    rng = np.random.default_rng(0)
    vocab = list("abcdef")
    for _ in range(50):
        docs = []
        for i in range(int(rng.integers(1, 6))):
            words = [vocab[int(rng.integers(len(vocab)))] for _ in range(int(rng.integers(1, 9)))]
            docs.append(Document(str(i), f"d{int(rng.integers(2))}", " ".join(words)))
        stats = compute_stats(docs, "whitespace")
        expected = CorpusStats()
        for doc in docs:
            toks = doc.text.split()
            for t in toks:
                expected.unigram_count[t] += 1
            for j in range(len(toks) - 1):
                expected.bigram_count[(toks[j], toks[j + 1])] += 1
            expected.total_tokens += len(toks)
            expected.total_bigrams += max(len(toks) - 1, 0)
            for t in set(toks):
                expected.doc_freq[(doc.domain, t)] += 1
            expected.doc_count[doc.domain] += 1
        assert stats == expected
