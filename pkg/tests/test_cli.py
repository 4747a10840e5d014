"""Subcommand behavior, exit codes, config handling, and reproducibility."""

import json

import pytest

from kwmatch import cli


@pytest.fixture(scope="module")
def demo(tmp_path_factory):
    outdir = tmp_path_factory.mktemp("demo")
    assert cli.main(["demo-data", "--outdir", str(outdir), "--seed", "3"]) == 0
    return outdir


@pytest.fixture(scope="module")
def prepared(demo):
    """Demo data with dictionary, index, and pairs built."""
    config = str(demo / "demo.cfg")
    assert cli.main(["extract-keywords", "--config", config]) == 0
    assert cli.main(["index", "--config", config]) == 0
    assert cli.main([
        "gen-pairs", "--config", config,
        "--positives", str(demo / "positives.jsonl"),
    ]) == 0
    return config


class TestConfig:
    def test_lambda_zero_rejected_at_parse(self, tmp_path, capsys):
        path = tmp_path / "bad.cfg"
        path.write_text("lambda = 0.0\n")
        assert cli.main(["extract-keywords", "--config", str(path)]) == 2
        assert "lambda" in capsys.readouterr().err

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("no_such_knob = 1\n")
        assert cli.main(["extract-keywords", "--config", str(path)]) == 2

    def test_unknown_flag_is_usage_error(self):
        with pytest.raises(SystemExit) as excinfo:
            cli.main(["search", "--definitely-not-a-flag", "x"])
        assert excinfo.value.code == 2

    def test_comments_and_blank_lines_ok(self, tmp_path):
        path = tmp_path / "ok.cfg"
        path.write_text("# comment\n\nseed = 9\nalpha = 0.5\n")
        cfg = cli.parse_config(path)
        assert cfg.seed == 9 and cfg.alpha == 0.5


class TestExtractKeywords:
    def test_writes_tsv_and_report(self, demo, capsys):
        config = str(demo / "demo.cfg")
        assert cli.main(["extract-keywords", "--config", config]) == 0
        out = capsys.readouterr().out
        assert "wrote" in out and "[domain0]" in out
        lines = (demo / "keywords.tsv").read_text().splitlines()
        assert all(len(line.split("\t")) == 3 for line in lines)

    def test_missing_corpus_exits_2(self, tmp_path, capsys):
        path = tmp_path / "c.cfg"
        path.write_text(f"corpus = {tmp_path}/nope.jsonl\ndictionary = {tmp_path}/d.tsv\n")
        assert cli.main(["extract-keywords", "--config", str(path)]) == 2
        assert "not found" in capsys.readouterr().err

    def test_single_domain_corpus_exits_2(self, tmp_path, capsys):
        corpus = tmp_path / "corpus.jsonl"
        corpus.write_text(
            json.dumps({"id": "1", "domain": "only", "text": "a b"}) + "\n"
        )
        config = tmp_path / "c.cfg"
        config.write_text(f"corpus = {corpus}\ndictionary = {tmp_path}/d.tsv\n")
        assert cli.main(["extract-keywords", "--config", str(config)]) == 2
        assert "two domains" in capsys.readouterr().err


class TestSearch:
    def test_tsv_output_six_decimals(self, prepared, demo, capsys):
        query = json.loads((demo / "questions.jsonl").read_text().splitlines()[0])["text"]
        assert cli.main(["search", "--config", prepared, "--query", query, "-k", "3"]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) == 3
        for rank, line in enumerate(lines, start=1):
            cols = line.split("\t")
            assert cols[0] == str(rank)
            assert len(cols[2].split(".")[1]) == 6

    def test_k_zero_rejected(self, prepared, capsys):
        assert cli.main(["search", "--config", prepared, "--query", "x", "-k", "0"]) == 2

    def test_missing_index_exits_2(self, tmp_path):
        config = tmp_path / "c.cfg"
        config.write_text(f"index = {tmp_path}/missing.json\n")
        assert cli.main(["search", "--config", str(config), "--query", "x"]) == 2


class TestGenPairs:
    def test_stats_printed(self, prepared, capsys):
        assert cli.main(["gen-pairs", "--config", prepared]) == 0
        out = capsys.readouterr().out
        assert "pos/neg" in out

    def test_missing_lexicon_exits_2(self, demo, tmp_path, capsys):
        config = tmp_path / "c.cfg"
        config.write_text(
            f"questions = {demo}/questions.jsonl\n"
            f"pairs = {tmp_path}/pairs.jsonl\n"
            "tokenize_mode = whitespace\n"
        )
        assert cli.main(["gen-pairs", "--config", str(config), "--mined", "off"]) == 2
        assert "lexicon" in capsys.readouterr().err

    def test_ratio_zero_and_everything_off_gives_empty(self, demo, tmp_path, capsys):
        config = tmp_path / "c.cfg"
        config.write_text(
            f"questions = {demo}/questions.jsonl\n"
            f"lexicon = {demo}/lexicon.tsv\n"
            f"pairs = {tmp_path}/pairs.jsonl\n"
            "tokenize_mode = whitespace\n"
            "replacement_ratio = 0.0\n"
        )
        assert cli.main(["gen-pairs", "--config", str(config), "--mined", "off"]) == 0
        assert "wrote 0 pairs" in capsys.readouterr().out

    def test_seed_repeat_identical_file(self, prepared, demo):
        args = [
            "gen-pairs", "--config", prepared,
            "--positives", str(demo / "positives.jsonl"),
        ]
        assert cli.main(args) == 0
        first = (demo / "pairs.jsonl").read_bytes()
        assert cli.main(args) == 0
        assert (demo / "pairs.jsonl").read_bytes() == first

    def test_candidates_export(self, prepared, demo, tmp_path, capsys):
        out = tmp_path / "cands.tsv"
        assert cli.main([
            "gen-pairs", "--config", prepared, "--candidates-out", str(out),
        ]) == 0
        lines = out.read_text().splitlines()
        assert lines and all(len(line.split("\t")) == 2 for line in lines)


class TestTrainEval:
    def test_fastpair_roundtrip_with_metrics_json(self, prepared, demo, tmp_path, capsys):
        metrics_path = tmp_path / "metrics.json"
        assert cli.main([
            "gen-pairs", "--config", prepared,
            "--positives", str(demo / "positives.jsonl"),
        ]) == 0
        assert cli.main([
            "train", "--config", prepared, "--kind", "fastpair",
            "--json-out", str(metrics_path),
        ]) == 0
        out = capsys.readouterr().out
        assert "epoch,loss" in out
        payload = json.loads(metrics_path.read_text())
        assert payload["schema"] == cli.METRICS_SCHEMA
        assert payload["kind"] == "fastpair"
        assert set(payload["metrics"]) == {"overall", "positive", "negative"}
        assert all(0.0 <= v <= 1.0 for v in payload["metrics"].values())
        # eval on the same pairs reproduces the metrics
        assert cli.main([
            "eval", "--config", prepared, "--kind", "fastpair",
            "--pairs", str(demo / "pairs.jsonl"),
        ]) == 0
        line = capsys.readouterr().out.strip().splitlines()[-1]
        assert json.loads(line)["metrics"] == payload["metrics"]

    def test_eval_missing_model_exits_2(self, prepared, demo, tmp_path):
        assert cli.main([
            "eval", "--config", prepared, "--kind", "fastpair",
            "--pairs", str(demo / "pairs.jsonl"),
            "--model-file", str(tmp_path / "missing.bin"),
        ]) == 2

    def test_retrieval_eval_json(self, prepared, capsys):
        assert cli.main([
            "eval", "--config", prepared, "--kind", "retrieval", "--ks", "1,5",
        ]) == 0
        line = capsys.readouterr().out.strip().splitlines()[-1]
        payload = json.loads(line)
        assert payload["kind"] == "retrieval"
        assert set(payload["metrics"]) == {"p_at_1", "p_at_5"}
        assert payload["metrics"]["p_at_1"] <= payload["metrics"]["p_at_5"]

    def test_train_seed_reproducible_model_file(self, prepared, demo, tmp_path):
        model_a = tmp_path / "a.bin"
        model_b = tmp_path / "b.bin"
        for target in (model_a, model_b):
            assert cli.main([
                "train", "--config", prepared, "--kind", "fastpair",
                "--model-file", str(target),
            ]) == 0
        assert model_a.read_bytes() == model_b.read_bytes()
