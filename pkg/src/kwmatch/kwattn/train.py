"""Toy-scale trainer and finite-difference gradient checker."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from kwmatch.kwattn.model import (
    KwAttnModel,
    build_mask,
    loss_and_grads,
    loss_only,
    model_forward,
    named_parameters,
)
from kwmatch.kwattn.packing import PackedPair


@dataclass(frozen=True)
class ToyTrainConfig:
    """Per-example gradients can spike through the layer norms, so a global
    clip norm keeps plain SGD stable on from-scratch toy training."""

    epochs: int = 10
    learning_rate: float = 0.05
    momentum: float = 0.0
    clip_norm: float | None = None
    rng_seed: int = 42

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must be in [0, 1)")
        if self.clip_norm is not None and self.clip_norm <= 0:
            raise ValueError("clip_norm must be > 0")


def evaluate_pairs(
    model: KwAttnModel, examples: Sequence[tuple[PackedPair, int]]
) -> tuple[float, float]:
    """Mean cross-entropy and accuracy at threshold 0.5."""
    losses = []
    correct = 0
    for pp, label in examples:
        p = model_forward(model, pp)
        p_true = p if label == 1 else 1.0 - p
        losses.append(-np.log(max(p_true, 1e-300)))
        correct += int((p >= 0.5) == (label == 1))
    return float(np.mean(losses)), correct / len(examples)


def train_toy(
    model: KwAttnModel,
    examples: Sequence[tuple[PackedPair, int]],
    cfg: ToyTrainConfig,
) -> tuple[KwAttnModel, list[tuple[int, float, float]]]:
    """SGD (optionally with momentum) on cross-entropy, updating the model in
    place; the trace holds one (epoch, mean loss, accuracy) row per epoch,
    measured by a full pass after that epoch."""
    labels_present = {label for _, label in examples}
    if labels_present != {0, 1}:
        raise ValueError("training data must contain both classes")
    masks = [build_mask(model, pp) for pp, _ in examples]
    params = named_parameters(model)
    velocity = {name: np.zeros_like(arr) for name, arr in params.items()}
    rng = np.random.default_rng(cfg.rng_seed)
    trace: list[tuple[int, float, float]] = []
    for epoch in range(cfg.epochs):
        for i in rng.permutation(len(examples)):
            pp, label = examples[i]
            _, grads, _ = loss_and_grads(model, pp, label, masks[i])
            step = cfg.learning_rate
            if cfg.clip_norm is not None:
                norm = np.sqrt(sum(float((g * g).sum()) for g in grads.values()))
                step *= min(1.0, cfg.clip_norm / (norm + 1e-12))
            for name, arr in params.items():
                if cfg.momentum:
                    velocity[name] *= cfg.momentum
                    velocity[name] += grads[name]
                    arr -= step * velocity[name]
                else:
                    arr -= step * grads[name]
        loss, accuracy = evaluate_pairs(model, examples)
        trace.append((epoch, loss, accuracy))
    return model, trace


def grad_check(
    model: KwAttnModel,
    pp: PackedPair,
    label: int,
    step: float = 1e-5,
    samples_per_group: int = 8,
    seed: int = 0,
) -> float:
    """Max relative error between analytic gradients and central differences
    over a random coordinate sample from every parameter tensor.

    The relative error uses max(|analytic|, |numeric|, 1e-8) as denominator so
    saturated zero-gradient coordinates cannot blow up the ratio.
    """
    if step <= 0:
        raise ValueError("step must be > 0")
    mask = build_mask(model, pp)
    _, grads, _ = loss_and_grads(model, pp, label, mask)
    params = named_parameters(model)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for name, arr in params.items():
        count = min(samples_per_group, arr.size)
        for flat in rng.choice(arr.size, size=count, replace=False):
            original = arr.flat[flat]
            arr.flat[flat] = original + step
            loss_plus = loss_only(model, pp, label, mask)
            arr.flat[flat] = original - step
            loss_minus = loss_only(model, pp, label, mask)
            arr.flat[flat] = original
            numeric = (loss_plus - loss_minus) / (2.0 * step)
            analytic = grads[name].flat[flat]
            rel = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8)
            worst = max(worst, rel)
    return worst
