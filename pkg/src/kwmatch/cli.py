"""Command-line pipeline: keyword extraction, indexing, search, pair
generation, and classifier training/evaluation.

One flat ``key = value`` config file describes the pipeline; command-line
flags override config values. Exit codes: 0 success, 1 internal failure,
2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from kwmatch import fastpair, kwattn, sampling, synth
from kwmatch.corpus import (
    TOKENIZE_MODES,
    load_corpus,
    load_questions,
    tokenize,
)
from kwmatch.keywords import (
    build_domain_dictionary,
    load_dictionary,
    merge_dictionaries,
    save_dictionary,
)
from kwmatch.retrieval import (
    build_index,
    load_index,
    precision_at_k,
    save_index,
    search,
)

METRICS_SCHEMA = "kwmatch-metrics-v1"


class CliError(Exception):
    """Usage or configuration problem; maps to exit code 2."""


@dataclass(frozen=True)
class PipelineConfig:
    # paths
    corpus: str = ""
    questions: str = ""
    dictionary: str = ""
    index: str = ""
    lexicon: str = ""
    pairs: str = ""
    eval_pairs: str = ""
    model: str = ""
    vocab: str = ""
    queries: str = ""
    gold: str = ""
    # tokenization and keyword extraction
    tokenize_mode: str = "char"
    pmi_threshold: float = 1.0
    diff_idf_threshold: float = 0.0
    lam: float = 1.0
    max_phrase_len: int = 4
    report_top_k: int = 10
    # sampling
    alpha: float = 0.6
    beta: float = 0.2
    replacement_ratio: float = 1.0
    top_n: int = 10
    # shared randomness
    seed: int = 42
    # fastpair trainer
    epochs: int = 5
    learning_rate: float = 0.1
    dim: int = 64
    num_buckets: int = 1 << 20
    hash_seed: int = 0
    # attention model trainer
    attn_dim: int = 32
    attn_heads: int = 4
    attn_layers: int = 2
    attn_max_len: int = 64
    attn_epochs: int = 10
    attn_lr: float = 0.05
    momentum: float = 0.0
    clip_norm: float = 0.0  # 0 disables clipping
    init_std: float = 0.02

    def validated(self) -> "PipelineConfig":
        if self.tokenize_mode not in TOKENIZE_MODES:
            raise CliError(f"tokenize_mode must be one of {TOKENIZE_MODES}")
        if self.lam <= 0:
            raise CliError("lambda must be > 0")
        if not 0.0 < self.alpha < 1.0:
            raise CliError("alpha must be in (0, 1)")
        if self.beta <= 0:
            raise CliError("beta must be > 0")
        if not 0.0 <= self.replacement_ratio <= 1.0:
            raise CliError("replacement_ratio must be in [0, 1]")
        if self.top_n < 1:
            raise CliError("top_n must be >= 1")
        if self.epochs < 1 or self.attn_epochs < 1:
            raise CliError("epochs must be >= 1")
        if self.learning_rate <= 0 or self.attn_lr <= 0:
            raise CliError("learning rates must be > 0")
        if self.max_phrase_len < 2:
            raise CliError("max_phrase_len must be >= 2")
        return self


_FIELD_TYPES = {f.name: f.type for f in fields(PipelineConfig)}
# the config file spells the smoothing constant "lambda"
_KEY_ALIASES = {"lambda": "lam"}


def parse_config(path) -> PipelineConfig:
    """Read the flat ``key = value`` config format (# starts a comment)."""
    values: dict[str, object] = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise CliError(f"cannot read config {path}: {exc}") from exc
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(f"{path}: expected 'key = value', line {lineno}")
        key, _, value = line.partition("=")
        key = _KEY_ALIASES.get(key.strip(), key.strip())
        value = value.strip()
        if key not in _FIELD_TYPES:
            raise CliError(f"{path}: unknown config key {key!r}, line {lineno}")
        values[key] = _coerce(key, value, lineno, path)
    return PipelineConfig(**values).validated()


def _coerce(key: str, value: str, lineno: int, path) -> object:
    kind = _FIELD_TYPES[key]
    try:
        if kind == "int":
            return int(value)
        if kind == "float":
            return float(value)
        return value
    except ValueError as exc:
        raise CliError(f"{path}: bad value for {key!r}, line {lineno}") from exc


def _require(cfg: PipelineConfig, command: str, *names: str) -> None:
    for name in names:
        value = getattr(cfg, name)
        if not value:
            raise CliError(f"{command}: config path {name!r} is not set")


def _require_exists(path: str, what: str) -> str:
    if not Path(path).exists():
        raise CliError(f"{what} file not found: {path}")
    return path


def _load_dictionary(cfg: PipelineConfig):
    _require_exists(cfg.dictionary, "dictionary")
    return load_dictionary(cfg.dictionary, cfg.tokenize_mode)


def _print_metrics(kind: str, metrics: dict, json_out: str | None) -> None:
    width = max(len(k) for k in metrics)
    print(f"{'metric':<{width}}  value")
    for key, value in metrics.items():
        print(f"{key:<{width}}  {value:.4f}")
    payload = {"schema": METRICS_SCHEMA, "kind": kind, "metrics": metrics}
    text = json.dumps(payload, sort_keys=True)
    if json_out:
        Path(json_out).write_text(text + "\n", encoding="utf-8")
    print(text)


def cmd_extract_keywords(cfg: PipelineConfig, args) -> int:
    _require(cfg, "extract-keywords", "corpus", "dictionary")
    _require_exists(cfg.corpus, "corpus")
    docs = load_corpus(cfg.corpus)
    domains = sorted({doc.domain for doc in docs})
    if len(domains) < 2:
        raise CliError("corpus must contain at least two domains")
    parts = [
        build_domain_dictionary(
            docs, domain, cfg.pmi_threshold, cfg.diff_idf_threshold,
            cfg.lam, cfg.tokenize_mode, cfg.max_phrase_len,
        )
        for domain in domains
    ]
    dictionary = merge_dictionaries(parts, mode=cfg.tokenize_mode)
    save_dictionary(dictionary, cfg.dictionary)
    print(f"wrote {len(dictionary)} entries to {cfg.dictionary}")
    for domain, entries in zip(domains, parts):
        print(f"[{domain}] top {min(cfg.report_top_k, len(entries))} of {len(entries)}")
        for entry in entries[: cfg.report_top_k]:
            print(f"  {entry.surface}\t{entry.score:.6f}")
    return 0


def cmd_index(cfg: PipelineConfig, args) -> int:
    _require(cfg, "index", "questions", "index")
    _require_exists(cfg.questions, "questions")
    questions = {
        qid: tokenize(text, cfg.tokenize_mode)
        for qid, text in load_questions(cfg.questions).items()
    }
    dictionary = _load_dictionary(cfg) if args.keywords == "on" else None
    index = build_index(questions, dictionary)
    save_index(index, cfg.index)
    print(
        f"indexed {index.doc_total} questions (avg len {index.avg_doc_len:.2f}, "
        f"keyword-enhanced: {args.keywords})"
    )
    return 0


def cmd_search(cfg: PipelineConfig, args) -> int:
    _require(cfg, "search", "index")
    _require_exists(cfg.index, "index")
    if args.k < 1:
        raise CliError("k must be >= 1")
    index = load_index(cfg.index)
    dictionary = _load_dictionary(cfg) if args.keywords == "on" else None
    query = tokenize(args.query, cfg.tokenize_mode)
    for rank, hit in enumerate(search(index, query, dictionary, args.k), start=1):
        print(f"{rank}\t{hit.doc_id}\t{hit.score:.6f}")
    return 0


def cmd_gen_pairs(cfg: PipelineConfig, args) -> int:
    _require(cfg, "gen-pairs", "questions", "pairs")
    _require_exists(cfg.questions, "questions")
    questions = {
        qid: tokenize(text, cfg.tokenize_mode)
        for qid, text in load_questions(cfg.questions).items()
    }
    queries = list(questions.values())
    sampler = sampling.SamplerConfig(
        alpha=cfg.alpha, beta=cfg.beta,
        replacement_ratio=cfg.replacement_ratio, rng_seed=cfg.seed,
    )
    pairs: list[sampling.QueryPair] = []
    if args.positives:
        _require_exists(args.positives, "positives")
        pairs.extend(sampling.read_pairs(args.positives, cfg.tokenize_mode))
    dictionary = None
    if args.mined == "on":
        _require(cfg, "gen-pairs", "index", "dictionary")
        _require_exists(cfg.index, "index")
        index = load_index(cfg.index)
        dictionary = _load_dictionary(cfg)
        pairs.extend(sampling.mine_negatives(index, dictionary, queries, sampler, cfg.top_n))
        if args.candidates_out:
            candidates = sampling.export_candidates(index, dictionary, queries, top_k=5)
            sampling.write_candidates(args.candidates_out, candidates, cfg.tokenize_mode)
            print(f"wrote {len(candidates)} unlabeled candidates to {args.candidates_out}")
    if args.entity == "on":
        if not cfg.lexicon:
            raise CliError("gen-pairs: entity replacement requested but no lexicon configured")
        _require_exists(cfg.lexicon, "lexicon")
        lexicon = sampling.load_lexicon(cfg.lexicon, cfg.tokenize_mode)
        pairs.extend(sampling.generate_entity_negatives(queries, lexicon, sampler))
    sampling.write_pairs(cfg.pairs, pairs, cfg.tokenize_mode)
    by_provenance: dict[str, int] = {}
    for pair in pairs:
        by_provenance[pair.provenance] = by_provenance.get(pair.provenance, 0) + 1
    positives = sum(1 for p in pairs if p.label == sampling.POSITIVE)
    print(f"wrote {len(pairs)} pairs to {cfg.pairs} "
          f"(pos/neg = {positives}/{len(pairs) - positives})")
    for provenance in sorted(by_provenance):
        print(f"  {provenance}: {by_provenance[provenance]}")
    return 0


def _fastpair_examples(cfg: PipelineConfig, pairs_path: str, hasher):
    pairs = sampling.read_pairs(pairs_path, cfg.tokenize_mode)
    dictionary = _load_dictionary(cfg)
    return fastpair.make_examples(pairs, dictionary, hasher), pairs


def _kwattn_examples(cfg: PipelineConfig, pairs_path: str, vocab):
    from kwmatch.keywords import extract_keywords

    pairs = sampling.read_pairs(pairs_path, cfg.tokenize_mode)
    dictionary = _load_dictionary(cfg)
    examples = []
    for pair in pairs:
        q, Q = list(pair.q), list(pair.Q)
        pp = kwattn.pack_pair(
            q, extract_keywords(dictionary, q),
            Q, extract_keywords(dictionary, Q),
            vocab, cfg.attn_max_len,
        )
        examples.append((pp, pair.label))
    return examples, pairs


def cmd_train(cfg: PipelineConfig, args) -> int:
    _require(cfg, "train", "pairs", "dictionary", "model")
    _require_exists(cfg.pairs, "pairs")
    if args.kind == "fastpair":
        train_cfg = fastpair.TrainConfig(
            epochs=cfg.epochs, learning_rate=cfg.learning_rate, rng_seed=cfg.seed,
            dim=cfg.dim, num_buckets=cfg.num_buckets, hash_seed=cfg.hash_seed,
        )
        hasher = fastpair.FeatureHasher(cfg.num_buckets, cfg.hash_seed)
        examples, _ = _fastpair_examples(cfg, cfg.pairs, hasher)
        model, trace = fastpair.train(examples, train_cfg)
        fastpair.save_model(model, cfg.model)
        print("epoch,loss")
        for epoch, loss in enumerate(trace):
            print(f"{epoch},{loss:.6f}")
        result = fastpair.evaluate(model, examples)
    elif args.kind in ("kwattn", "kwattn-nomask"):
        _require(cfg, "train", "vocab")
        pairs = sampling.read_pairs(cfg.pairs, cfg.tokenize_mode)
        vocab = kwattn.build_vocab([list(p.q) + list(p.Q) for p in pairs])
        kwattn.save_vocab(vocab, cfg.vocab)
        examples, _ = _kwattn_examples(cfg, cfg.pairs, vocab)
        model_cfg = kwattn.ModelConfig(
            vocab_size=len(vocab), d=cfg.attn_dim, heads=cfg.attn_heads,
            layers=cfg.attn_layers, max_len=cfg.attn_max_len,
            mask_mode="keyword" if args.kind == "kwattn" else "cross_all",
        )
        model = kwattn.init_model(model_cfg, seed=cfg.seed, std=cfg.init_std)
        toy_cfg = kwattn.ToyTrainConfig(
            epochs=cfg.attn_epochs, learning_rate=cfg.attn_lr, momentum=cfg.momentum,
            clip_norm=cfg.clip_norm or None, rng_seed=cfg.seed,
        )
        model, trace = kwattn.train_toy(model, examples, toy_cfg)
        kwattn.save_model(model, cfg.model)
        print("epoch,loss,accuracy")
        for epoch, loss, accuracy in trace:
            print(f"{epoch},{loss:.6f},{accuracy:.4f}")
        result = _kwattn_result(model, examples)
    else:
        raise CliError(f"unknown model kind: {args.kind!r}")
    metrics = {
        "overall": result.overall, "positive": result.positive, "negative": result.negative,
    }
    _print_metrics(args.kind, metrics, args.json_out)
    print(f"saved model to {cfg.model}")
    return 0


@dataclass(frozen=True)
class _Result:
    overall: float
    positive: float
    negative: float


def _kwattn_result(model, examples) -> _Result:
    correct = {0: [0, 0], 1: [0, 0]}
    for pp, label in examples:
        pred = int(kwattn.model_forward(model, pp) >= 0.5)
        correct[label][0] += int(pred == label)
        correct[label][1] += 1
    total_right = correct[0][0] + correct[1][0]
    total = correct[0][1] + correct[1][1]

    def rate(bucket):
        hits, count = bucket
        return hits / count if count else float("nan")

    return _Result(total_right / total, rate(correct[1]), rate(correct[0]))


def cmd_eval(cfg: PipelineConfig, args) -> int:
    if args.kind == "retrieval":
        _require(cfg, "eval", "index", "queries", "gold")
        _require_exists(cfg.index, "index")
        _require_exists(cfg.queries, "queries")
        _require_exists(cfg.gold, "gold")
        index = load_index(cfg.index)
        dictionary = _load_dictionary(cfg) if args.keywords == "on" else None
        queries = {
            qid: tokenize(text, cfg.tokenize_mode)
            for qid, text in load_questions(cfg.queries).items()
        }
        gold: dict[str, str] = {}
        for lineno, line in enumerate(
            Path(cfg.gold).read_text(encoding="utf-8").splitlines(), start=1
        ):
            if not line.strip():
                continue
            cols = line.split("\t")
            if len(cols) != 2:
                raise CliError(f"{cfg.gold}: expected 'query_id<TAB>doc_id', line {lineno}")
            gold[cols[0]] = cols[1]
        ks = [int(k) for k in args.ks.split(",")]
        max_k = max(ks)
        rankings = {
            qid: [hit.doc_id for hit in search(index, q, dictionary, max_k)]
            for qid, q in queries.items()
        }
        precisions = precision_at_k(rankings, gold, ks)
        metrics = {f"p_at_{k}": precisions[k] for k in ks}
        _print_metrics("retrieval", metrics, args.json_out)
        return 0

    pairs_path = args.pairs or cfg.eval_pairs or cfg.pairs
    if not pairs_path:
        raise CliError("eval: no pairs file configured")
    _require_exists(pairs_path, "pairs")
    _require(cfg, "eval", "model", "dictionary")
    _require_exists(cfg.model, "model")
    if args.kind == "fastpair":
        model = fastpair.load_model(cfg.model)
        examples, _ = _fastpair_examples(cfg, pairs_path, model.hasher)
        result = fastpair.evaluate(model, examples)
    elif args.kind in ("kwattn", "kwattn-nomask"):
        _require(cfg, "eval", "vocab")
        _require_exists(cfg.vocab, "vocab")
        vocab = kwattn.load_vocab(cfg.vocab)
        model = kwattn.load_model(cfg.model)
        if len(vocab) != model.cfg.vocab_size:
            raise CliError("eval: vocabulary size does not match the model file")
        examples, _ = _kwattn_examples(cfg, pairs_path, vocab)
        result = _kwattn_result(model, examples)
    else:
        raise CliError(f"unknown model kind: {args.kind!r}")
    metrics = {
        "overall": result.overall, "positive": result.positive, "negative": result.negative,
    }
    _print_metrics(args.kind, metrics, args.json_out)
    return 0


def cmd_demo_data(cfg: PipelineConfig, args) -> int:
    paths = synth.write_demo_files(args.outdir, seed=args.seed_override if args.seed_override is not None else cfg.seed)
    for name, path in paths.items():
        print(f"{name}: {path}")
    return 0


_CONFIG_OVERRIDES = (
    ("--corpus", "corpus"), ("--questions", "questions"), ("--dictionary", "dictionary"),
    ("--index-file", "index"), ("--lexicon", "lexicon"), ("--pairs-file", "pairs"),
    ("--model-file", "model"), ("--vocab-file", "vocab"),
    ("--tokenize-mode", "tokenize_mode"),
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kwmatch",
        description="Keyword-attentive semantic matching pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="pipeline config file (key = value lines)")
        p.add_argument("--seed", type=int, dest="seed_override", default=None,
                       help="override the config seed")
        for flag, _ in _CONFIG_OVERRIDES:
            p.add_argument(flag, default=None, help=argparse.SUPPRESS)

    p = sub.add_parser("extract-keywords", help="build and merge domain keyword dictionaries")
    add_common(p)
    p.set_defaults(func=cmd_extract_keywords)

    p = sub.add_parser("index", help="build the BM25 index over the question database")
    add_common(p)
    p.add_argument("--keywords", choices=("on", "off"), default="on",
                   help="keyword-enhance the index (default on)")
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("search", help="query the index")
    add_common(p)
    p.add_argument("--query", required=True, help="query text")
    p.add_argument("-k", type=int, default=10, help="number of hits (default 10)")
    p.add_argument("--keywords", choices=("on", "off"), default="on",
                   help="keyword-augment the query (default on)")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("gen-pairs", help="generate labeled training pairs")
    add_common(p)
    p.add_argument("--mined", choices=("on", "off"), default="on",
                   help="rule-based negative mining (default on)")
    p.add_argument("--entity", choices=("on", "off"), default="on",
                   help="entity-replacement negatives (default on)")
    p.add_argument("--positives", default=None, help="existing positive pairs to merge in")
    p.add_argument("--candidates-out", default=None,
                   help="also export top-5 retrieval candidates for external labeling")
    p.set_defaults(func=cmd_gen_pairs)

    p = sub.add_parser("train", help="train a pair classifier")
    add_common(p)
    p.add_argument("--kind", choices=("fastpair", "kwattn", "kwattn-nomask"), required=True)
    p.add_argument("--json-out", default=None, help="write metrics JSON to this path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a model or the retrieval stack")
    add_common(p)
    p.add_argument("--kind", choices=("fastpair", "kwattn", "kwattn-nomask", "retrieval"),
                   required=True)
    p.add_argument("--pairs", default=None, help="pairs file (defaults to eval_pairs)")
    p.add_argument("--ks", default="1,3,5,10", help="comma-separated K values for P@K")
    p.add_argument("--keywords", choices=("on", "off"), default="on",
                   help="keyword augmentation for retrieval eval (default on)")
    p.add_argument("--json-out", default=None, help="write metrics JSON to this path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("demo-data", help="write a small synthetic demo dataset")
    add_common(p)
    p.add_argument("--outdir", required=True)
    p.set_defaults(func=cmd_demo_data)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = parse_config(args.config) if args.config else PipelineConfig()
        overrides = {}
        for flag, field in _CONFIG_OVERRIDES:
            value = getattr(args, flag.lstrip("-").replace("-", "_"), None)
            if value is not None:
                overrides[field] = value
        if args.seed_override is not None:
            overrides["seed"] = args.seed_override
        if overrides:
            cfg = replace(cfg, **overrides).validated()
        return args.func(cfg, args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # internal failure
        print(f"internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
