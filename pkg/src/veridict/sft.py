"""Outcome-weighted supervised fine-tuning of the toy policy.

The target string is split into a reasoning span and an answer span; answer
tokens carry a weight lambda >= 1 so the final verdict is trained harder
than the narration leading to it. Lambda = 1 recovers the plain
next-token objective, which is also the "unweighted" ablation.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .policy import (
    PolicyParams,
    add_grad,
    apply_grad,
    policy_tokens,
    sequence_logprob,
    weighted_nll_grad,
    zero_grad,
)
from .reasoning import SftInstance

logger = logging.getLogger("veridict.sft")


@dataclass(frozen=True, slots=True)
class SpanMask:
    """Index sets splitting a target continuation into spans.

    Structural tags count as reasoning positions; only the tokens strictly
    inside the answer block are answer positions.
    """

    reasoning_indices: tuple[int, ...]
    answer_indices: tuple[int, ...]


def span_mask(target_tokens: Sequence[str]) -> SpanMask:
    reasoning: list[int] = []
    answer: list[int] = []
    inside_answer = False
    for i, tok in enumerate(target_tokens):
        if tok == "<answer>":
            inside_answer = True
            reasoning.append(i)
        elif tok == "</answer>":
            inside_answer = False
            reasoning.append(i)
        elif inside_answer:
            answer.append(i)
        else:
            reasoning.append(i)
    return SpanMask(tuple(reasoning), tuple(answer))


def target_weights(target_tokens: Sequence[str], lam: float) -> np.ndarray:
    mask = span_mask(target_tokens)
    weights = np.ones(len(target_tokens))
    weights[list(mask.answer_indices)] = lam
    return weights


def weighted_loss(
    params: PolicyParams, instance: SftInstance, lam: float
) -> tuple[float, dict[str, np.ndarray]]:
    """Span-weighted negative log-likelihood of one instance, with gradient."""
    if lam < 1:
        raise ValueError(f"lambda must be >= 1, got {lam}")
    prompt = policy_tokens(instance.prompt)
    target = policy_tokens(instance.target.raw)
    weights = target_weights(target, lam)
    return weighted_nll_grad(params, prompt, target, weights)


def span_nll(params: PolicyParams, instance: SftInstance) -> tuple[float, float]:
    """(reasoning NLL, answer NLL) of the instance target, unweighted sums."""
    prompt = policy_tokens(instance.prompt)
    target = policy_tokens(instance.target.raw)
    _, per_token = sequence_logprob(params, prompt, target)
    mask = span_mask(target)
    reasoning = -per_token[list(mask.reasoning_indices)].sum() if mask.reasoning_indices else 0.0
    answer = -per_token[list(mask.answer_indices)].sum() if mask.answer_indices else 0.0
    return float(reasoning), float(answer)


def dataset_nll(params: PolicyParams, dataset: Sequence[SftInstance]) -> tuple[float, float]:
    """Mean per-instance (reasoning NLL, answer NLL) over the dataset."""
    pairs = [span_nll(params, inst) for inst in dataset]
    reasoning = float(np.mean([p[0] for p in pairs]))
    answer = float(np.mean([p[1] for p in pairs]))
    return reasoning, answer


def train_sft(
    params: PolicyParams,
    dataset: Sequence[SftInstance],
    lam: float = 2.0,
    epochs: int = 10,
    batch_size: int = 8,
    lr: float = 1e-2,
    seed: int = 0,
    log_path: str | Path | None = None,
) -> PolicyParams:
    """Minibatch gradient descent on the weighted loss; deterministic per
    seed. Writes an optional per-epoch CSV training log."""
    if not dataset:
        raise ValueError("dataset is empty")
    rng = np.random.default_rng(seed)
    history: list[dict] = []
    for epoch in range(epochs):
        order = rng.permutation(len(dataset))
        losses: list[float] = []
        for start in range(0, len(order), batch_size):
            batch = [dataset[i] for i in order[start:start + batch_size]]
            acc = zero_grad(params)
            for inst in batch:
                loss, grad = weighted_loss(params, inst, lam)
                losses.append(loss)
                add_grad(acc, grad, scale=1.0 / len(batch))
            params = apply_grad(params, acc, lr)
        reasoning_nll, answer_nll = dataset_nll(params, dataset)
        row = {
            "epoch": epoch,
            "mean_loss": float(np.mean(losses)),
            "mean_answer_nll": answer_nll,
            "mean_reasoning_nll": reasoning_nll,
        }
        history.append(row)
        logger.info(
            "epoch %d mean_loss %.4f answer_nll %.4f reasoning_nll %.4f",
            epoch, row["mean_loss"], answer_nll, reasoning_nll,
        )
    if log_path is not None and history:
        with open(log_path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.DictWriter(
                fh, fieldnames=["epoch", "mean_loss", "mean_answer_nll", "mean_reasoning_nll"]
            )
            writer.writeheader()
            writer.writerows(history)
    return params
