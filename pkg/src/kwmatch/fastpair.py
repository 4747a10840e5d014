"""Hashed pair classifier: bag-of-token + cross word-pair + keyword-pair
features, averaged bucket embeddings, and a linear softmax head trained by SGD."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from kwmatch import _kernels
from kwmatch.keywords import KeywordDictionary, extract_keywords
from kwmatch.sampling import QueryPair

# FNV-1a 64-bit constants (Fowler/Noll/Vo).
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1

# Separates the two tokens inside a pair feature string.
_SEP = "\x1f"

MODEL_MAGIC = b"KWFP"
MODEL_VERSION = 1


@dataclass(frozen=True)
class FeatureHasher:
    """FNV-1a 64-bit over UTF-8 feature strings, reduced modulo a power-of-two
    bucket count. ``seed`` is XORed into the offset basis, so different seeds
    give independent bucket assignments; identical inputs always hash to the
    same bucket across runs and platforms."""

    num_buckets: int
    seed: int = 0

    def __post_init__(self):
        if self.num_buckets < 1 or self.num_buckets & (self.num_buckets - 1):
            raise ValueError("num_buckets must be a power of two")

    def bucket(self, feature: str) -> int:
        h = (_FNV_OFFSET ^ self.seed) & _MASK64
        for byte in feature.encode("utf-8"):
            h = ((h ^ byte) * _FNV_PRIME) & _MASK64
        return h & (self.num_buckets - 1)


def featurize(
    q: Sequence[str],
    Q: Sequence[str],
    q_keys: Sequence[str],
    Q_keys: Sequence[str],
    hasher: FeatureHasher,
) -> list[int]:
    """Bucket ids for both bags, all cross word pairs, and both keyword-pair
    blocks, as a multiset (duplicates kept).

    Role prefixes keep the blocks from colliding before hashing; with M and N
    tokens and K_q/K_Q keyword surfaces the result has
    M + N + M*N + M*K_Q + N*K_q entries.
    """
    feats: list[str] = []
    feats.extend(f"q:{t}" for t in q)
    feats.extend(f"Q:{t}" for t in Q)
    feats.extend(f"x:{a}{_SEP}{b}" for a in q for b in Q)
    feats.extend(f"kq:{a}{_SEP}{kb}" for a in q for kb in Q_keys)
    feats.extend(f"kQ:{b}{_SEP}{ka}" for b in Q for ka in q_keys)
    return [hasher.bucket(f) for f in feats]


@dataclass
class FastpairModel:
    embeddings: np.ndarray  # (num_buckets, dim) float64
    head_w: np.ndarray  # (dim, 2)
    head_b: np.ndarray  # (2,)
    hasher: FeatureHasher

    @property
    def dim(self) -> int:
        return self.embeddings.shape[1]


@dataclass(frozen=True)
class TrainConfig:
    """SGD settings; the learning rate decays linearly to zero over all steps."""

    epochs: int = 5
    learning_rate: float = 0.1
    rng_seed: int = 42
    dim: int = 64
    num_buckets: int = 1 << 20
    hash_seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")


@dataclass(frozen=True)
class FastpairExample:
    ids: np.ndarray  # int64 bucket ids, non-empty
    label: int


def make_examples(
    pairs: Sequence[QueryPair],
    dictionary: KeywordDictionary | None,
    hasher: FeatureHasher,
) -> list[FastpairExample]:
    """Featurize labeled pairs, extracting keyword surfaces per side when a
    dictionary is given (span order is kept so runs are bit-reproducible)."""
    examples = []
    for pair in pairs:
        if dictionary is not None:
            q_keys = [s for _, _, s in extract_keywords(dictionary, list(pair.q))]
            Q_keys = [s for _, _, s in extract_keywords(dictionary, list(pair.Q))]
        else:
            q_keys, Q_keys = [], []
        ids = featurize(pair.q, pair.Q, q_keys, Q_keys, hasher)
        examples.append(FastpairExample(np.asarray(ids, dtype=np.int64), pair.label))
    return examples


def init_model(cfg: TrainConfig) -> FastpairModel:
    """Uniform embeddings in [-1/dim, 1/dim], zero head."""
    rng = np.random.default_rng(cfg.rng_seed)
    bound = 1.0 / cfg.dim
    embeddings = rng.uniform(-bound, bound, size=(cfg.num_buckets, cfg.dim))
    return FastpairModel(
        embeddings=embeddings,
        head_w=np.zeros((cfg.dim, 2)),
        head_b=np.zeros(2),
        hasher=FeatureHasher(cfg.num_buckets, cfg.hash_seed),
    )


def _pack(examples: Sequence[FastpairExample]):
    offsets = np.zeros(len(examples) + 1, dtype=np.int64)
    for i, ex in enumerate(examples):
        if ex.ids.size == 0:
            raise ValueError("example with no features")
        offsets[i + 1] = offsets[i] + ex.ids.size
    ids_flat = np.concatenate([ex.ids for ex in examples]).astype(np.int64)
    labels = np.asarray([ex.label for ex in examples], dtype=np.int64)
    return ids_flat, offsets, labels


def forward(model: FastpairModel, ids: Sequence[int]) -> float:
    """Positive-class probability for one featurized example."""
    ids_arr = np.asarray(ids, dtype=np.int64)
    if ids_arr.size == 0:
        raise ValueError("empty feature list")
    offsets = np.array([0, ids_arr.size], dtype=np.int64)
    return float(
        _kernels.fastpair_forward_batch(
            model.embeddings, model.head_w, model.head_b, ids_arr, offsets
        )[0]
    )


def forward_batch(model: FastpairModel, examples: Sequence[FastpairExample]) -> np.ndarray:
    ids_flat, offsets, _ = _pack(examples)
    return _kernels.fastpair_forward_batch(
        model.embeddings, model.head_w, model.head_b, ids_flat, offsets
    )


def loss_and_grads(model: FastpairModel, ids: Sequence[int], label: int):
    """Cross-entropy and analytic gradients for one example, in plain numpy.

    This is the reference route for gradient checking; the training kernels
    implement the same formulas fused with the SGD update.
    """
    ids_arr = np.asarray(ids, dtype=np.int64)
    h = model.embeddings[ids_arr].mean(axis=0)
    z = h @ model.head_w + model.head_b
    e = np.exp(z - z.max())
    p = e / e.sum()
    loss = -float(np.log(p[label]))
    dz = p.copy()
    dz[label] -= 1.0
    d_head_w = np.outer(h, dz)
    d_head_b = dz
    dh = model.head_w @ dz
    d_emb = np.zeros_like(model.embeddings)
    np.add.at(d_emb, ids_arr, dh / ids_arr.size)
    return loss, {"embeddings": d_emb, "head_w": d_head_w, "head_b": d_head_b}


def train(
    examples: Sequence[FastpairExample], cfg: TrainConfig
) -> tuple[FastpairModel, list[float]]:
    """Seeded SGD over shuffled examples; returns the model and the per-epoch
    mean training cross-entropy (measured by a full pass after each epoch)."""
    labels_present = {ex.label for ex in examples}
    if labels_present != {0, 1}:
        raise ValueError("training data must contain both classes")
    model = init_model(cfg)
    ids_flat, offsets, labels = _pack(examples)
    rng = np.random.default_rng(cfg.rng_seed)
    n = len(examples)
    total_steps = cfg.epochs * n
    trace: list[float] = []
    step = 0
    for _ in range(cfg.epochs):
        order = rng.permutation(n).astype(np.int64)
        lrs = cfg.learning_rate * (1.0 - np.arange(step, step + n) / total_steps)
        _kernels.fastpair_train_epoch(
            model.embeddings, model.head_w, model.head_b,
            ids_flat, offsets, labels, order, lrs,
        )
        step += n
        probs = _kernels.fastpair_forward_batch(
            model.embeddings, model.head_w, model.head_b, ids_flat, offsets
        )
        p_true = np.where(labels == 1, probs, 1.0 - probs)
        trace.append(float(-np.log(np.clip(p_true, 1e-300, None)).mean()))
    return model, trace


@dataclass(frozen=True)
class EvalResult:
    overall: float
    positive: float
    negative: float


def evaluate(model: FastpairModel, examples: Sequence[FastpairExample]) -> EvalResult:
    """Accuracy at threshold 0.5, overall and per class.

    A class with no examples reports NaN for its accuracy.
    """
    if not examples:
        raise ValueError("empty evaluation set")
    probs = forward_batch(model, examples)
    labels = np.asarray([ex.label for ex in examples])
    preds = (probs >= 0.5).astype(int)
    correct = preds == labels
    pos = labels == 1
    neg = labels == 0
    return EvalResult(
        overall=float(correct.mean()),
        positive=float(correct[pos].mean()) if pos.any() else float("nan"),
        negative=float(correct[neg].mean()) if neg.any() else float("nan"),
    )


def save_model(model: FastpairModel, path) -> None:
    """Binary layout: magic, version, num_buckets, dim, hash seed, then the
    row-major float64 matrices; round-trips exactly."""
    num_buckets, dim = model.embeddings.shape
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<IQIq", MODEL_VERSION, num_buckets, dim, model.hasher.seed))
        fh.write(np.ascontiguousarray(model.embeddings, dtype=np.float64).tobytes())
        fh.write(np.ascontiguousarray(model.head_w, dtype=np.float64).tobytes())
        fh.write(np.ascontiguousarray(model.head_b, dtype=np.float64).tobytes())


def load_model(path) -> FastpairModel:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MODEL_MAGIC:
            raise ValueError(f"{path}: not a fastpair model file")
        version, num_buckets, dim, hash_seed = struct.unpack("<IQIq", fh.read(24))
        if version != MODEL_VERSION:
            raise ValueError(f"{path}: unsupported model version {version}")
        embeddings = np.frombuffer(fh.read(num_buckets * dim * 8), dtype=np.float64)
        embeddings = embeddings.reshape(num_buckets, dim).copy()
        head_w = np.frombuffer(fh.read(dim * 2 * 8), dtype=np.float64).reshape(dim, 2).copy()
        head_b = np.frombuffer(fh.read(2 * 8), dtype=np.float64).copy()
    return FastpairModel(embeddings, head_w, head_b, FeatureHasher(num_buckets, hash_seed))
