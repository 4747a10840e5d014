"""Keyword-attentive pair classifier at toy scale: packing, masks, the
encoder stub with the keyword-attentive layer, trainer, and gradient checker."""

from kwmatch.kwattn.model import (
    KwAttnModel,
    LayerParams,
    ModelConfig,
    assemble_h_kv,
    attention_weights,
    build_mask,
    classify,
    compute_k_diff,
    init_model,
    kwattn_forward,
    load_model,
    loss_and_grads,
    loss_only,
    model_forward,
    named_parameters,
    pool_sentences,
    save_model,
)
from kwmatch.kwattn.packing import (
    PackedPair,
    Vocab,
    build_cross_mask,
    build_keyword_mask,
    build_vocab,
    load_vocab,
    pack_pair,
    save_vocab,
)
from kwmatch.kwattn.train import ToyTrainConfig, evaluate_pairs, grad_check, train_toy

__all__ = [
    "KwAttnModel", "LayerParams", "ModelConfig", "PackedPair", "ToyTrainConfig",
    "Vocab", "assemble_h_kv", "attention_weights", "build_cross_mask",
    "build_keyword_mask", "build_mask", "build_vocab", "classify",
    "compute_k_diff", "evaluate_pairs", "grad_check", "init_model",
    "kwattn_forward", "load_model", "load_vocab", "loss_and_grads", "loss_only",
    "model_forward", "named_parameters", "pack_pair", "pool_sentences",
    "save_model", "save_vocab", "train_toy",
]
