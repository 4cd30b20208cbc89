"""Group-relative policy optimization with decoupled clipping.

Each training step samples a group of G continuations per prompt from the
frozen pre-step policy, normalizes their rewards into advantages inside the
group, and ascends a clipped importance-weighted surrogate. The clip range
is asymmetric: the ceiling (eps_high) can sit further from 1 than the floor
(eps_low), which keeps low-probability improving moves alive.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .labels import Taxonomy
from .policy import (
    PolicyParams,
    Rollout,
    add_grad,
    apply_grad,
    detokenize,
    policy_tokens,
    sample,
    sequence_logprob,
    weighted_nll_grad,
    zero_grad,
)
from .reasoning import ReasoningTrace, SftInstance, parse_trace
from .rewards import RewardBreakdown
from .seeding import derive_rng, derive_seed

logger = logging.getLogger("veridict.dapo")

#: Log-ratio clamp before exponentiation, to keep ratios finite.
RHO_CLAMP = 20.0

RewardFn = Callable[[SftInstance, Rollout, ReasoningTrace], RewardBreakdown]


@dataclass(frozen=True)
class ClipConfig:
    """Decoupled clip thresholds around an importance ratio of 1."""

    eps_low: float = 0.2
    eps_high: float = 0.28

    def __post_init__(self) -> None:
        if not 0 < self.eps_low < 1:
            raise ValueError(f"eps_low must be in (0, 1), got {self.eps_low}")
        if self.eps_high <= 0:
            raise ValueError(f"eps_high must be > 0, got {self.eps_high}")


@dataclass(frozen=True)
class RolloutGroup:
    """G scored rollouts for one prompt, with normalized advantages."""

    prompt_id: str
    rollouts: tuple[Rollout, ...]
    rewards: tuple[float, ...]
    advantages: tuple[float, ...]
    old_logprobs: tuple[float, ...]
    breakdowns: tuple[RewardBreakdown, ...]


def compute_advantages(rewards: Sequence[float]) -> np.ndarray:
    """Center and scale within the group using the population deviation.

    A zero-variance group gets all-zero advantages, which makes uniformly
    rewarded groups inert.
    """
    r = np.asarray(rewards, dtype=float)
    if r.size < 2:
        raise ValueError("need at least 2 rewards to normalize")
    mu = r.mean()
    sigma = r.std()
    if sigma == 0.0:
        return np.zeros_like(r)
    return (r - mu) / sigma


def clipped_term(rho: float, advantage: float, cfg: ClipConfig) -> float:
    """min(rho * A, clip(rho, 1 - eps_low, 1 + eps_high) * A)."""
    clipped_rho = min(max(rho, 1.0 - cfg.eps_low), 1.0 + cfg.eps_high)
    return min(rho * advantage, clipped_rho * advantage)


def _ratio(log_new: float, log_old: float) -> float:
    return float(np.exp(np.clip(log_new - log_old, -RHO_CLAMP, RHO_CLAMP)))


def sample_group(
    params_old: PolicyParams,
    instance: SftInstance,
    taxonomy: Taxonomy,
    reward_fn: RewardFn,
    g: int,
    temperature: float,
    max_tokens: int,
    seed: int,
) -> RolloutGroup:
    """Draw and score G rollouts for one prompt from the frozen policy."""
    prompt = policy_tokens(instance.prompt)
    rollouts = []
    breakdowns = []
    for i in range(g):
        rollout = sample(
            params_old,
            prompt,
            temperature=temperature,
            max_tokens=max_tokens,
            seed=derive_seed(seed, instance.doc_id, i),
        )
        trace = parse_trace(detokenize(rollout.generated_tokens), taxonomy)
        rollouts.append(rollout)
        breakdowns.append(reward_fn(instance, rollout, trace))
    rewards = tuple(b.total for b in breakdowns)
    advantages = tuple(compute_advantages(rewards))
    return RolloutGroup(
        prompt_id=instance.doc_id,
        rollouts=tuple(rollouts),
        rewards=rewards,
        advantages=advantages,
        old_logprobs=tuple(r.total_logprob for r in rollouts),
        breakdowns=tuple(breakdowns),
    )


def surrogate_and_grad(
    params: PolicyParams,
    groups: Sequence[RolloutGroup],
    cfg: ClipConfig,
    temperature: float = 1.0,
    token_level: bool = False,
) -> tuple[float, dict[str, np.ndarray]]:
    """Value and exact gradient of the clipped group surrogate at ``params``.

    The default ratio is sequence level: one importance ratio per rollout
    from total log-probabilities. Gradients flow only through terms whose
    unclipped branch attains the min; zero-advantage rollouts contribute
    nothing.
    """
    grad = zero_grad(params)
    value = 0.0
    denom = max(1, len(groups))
    for group in groups:
        g = len(group.rollouts)
        for rollout, advantage, old_lp in zip(
            group.rollouts, group.advantages, group.old_logprobs
        ):
            if advantage == 0.0 or not rollout.generated_tokens:
                continue
            scale = 1.0 / (denom * g)
            total_new, per_token_new = sequence_logprob(
                params,
                rollout.prompt_tokens,
                rollout.generated_tokens,
                temperature=temperature,
                strict=False,
            )
            if token_level:
                old_per_token = np.asarray(rollout.per_token_logprobs)
                rhos = np.exp(
                    np.clip(per_token_new - old_per_token, -RHO_CLAMP, RHO_CLAMP)
                )
                clipped = np.clip(rhos, 1.0 - cfg.eps_low, 1.0 + cfg.eps_high)
                unclipped_vals = rhos * advantage
                clipped_vals = clipped * advantage
                terms = np.minimum(unclipped_vals, clipped_vals)
                value += scale * float(terms.mean())
                active = unclipped_vals <= clipped_vals + 1e-12
                coefs = np.where(active, rhos * advantage, 0.0) / len(terms)
            else:
                rho = _ratio(total_new, old_lp)
                term = clipped_term(rho, advantage, cfg)
                value += scale * term
                unclipped = rho * advantage
                active = unclipped <= term + 1e-12
                coef = rho * advantage if active else 0.0
                coefs = np.full(len(rollout.generated_tokens), coef)
            if np.any(coefs != 0.0):
                _, g_lp = weighted_nll_grad(
                    params,
                    rollout.prompt_tokens,
                    rollout.generated_tokens,
                    weights=coefs,
                    temperature=temperature,
                    strict=False,
                )
                # d(surrogate)/dθ = -d(weighted NLL)/dθ, scaled into the mean
                add_grad(grad, g_lp, scale=-scale)
    return value, grad


def rl_step(
    params_old: PolicyParams,
    batch: Sequence[SftInstance],
    taxonomy: Taxonomy,
    reward_fn: RewardFn,
    g: int = 8,
    cfg: ClipConfig = ClipConfig(),
    lr: float = 1e-2,
    seed: int = 0,
    temperature: float = 1.0,
    max_tokens: int = 48,
    token_level: bool = False,
) -> tuple[PolicyParams, list[RolloutGroup]]:
    """One optimization step: sample, score, normalize, ascend."""
    if g < 2:
        raise ValueError(f"group size must be >= 2, got {g}")
    groups = [
        sample_group(params_old, inst, taxonomy, reward_fn, g, temperature, max_tokens, seed)
        for inst in batch
    ]
    _, grad = surrogate_and_grad(
        params_old, groups, cfg, temperature=temperature, token_level=token_level
    )
    ascent = zero_grad(params_old)
    add_grad(ascent, grad, scale=-1.0)
    params_new = apply_grad(params_old, ascent, lr)
    return params_new, groups


def group_summary(groups: Sequence[RolloutGroup]) -> dict[str, float]:
    """Mean reward components and the format-violation rate over groups."""
    all_b = [b for grp in groups for b in grp.breakdowns]
    if not all_b:
        return {
            "mean_total": 0.0,
            "mean_acc": 0.0,
            "mean_fmt": 0.0,
            "mean_cons": 0.0,
            "format_violation_rate": 0.0,
        }
    return {
        "mean_total": float(np.mean([b.total for b in all_b])),
        "mean_acc": float(np.mean([b.acc for b in all_b])),
        "mean_fmt": float(np.mean([b.fmt for b in all_b])),
        "mean_cons": float(np.mean([b.cons for b in all_b])),
        "format_violation_rate": float(np.mean([b.fmt == -1 for b in all_b])),
    }


def train_rl(
    params: PolicyParams,
    dataset: Sequence[SftInstance],
    taxonomy: Taxonomy,
    reward_fn: RewardFn,
    steps: int = 100,
    prompts_per_step: int = 8,
    g: int = 8,
    cfg: ClipConfig = ClipConfig(),
    lr: float = 1e-2,
    temperature: float = 1.0,
    max_tokens: int = 48,
    seed: int = 0,
    token_level: bool = False,
    log_path: str | Path | None = None,
) -> tuple[PolicyParams, list[dict]]:
    """Step loop over label-balanced prompt batches, with a per-step reward CSV.

    Batches are stratified by gold label.  Without this the majority class
    contributes more rollout groups per step and its answer token slowly
    crowds out the minority one in the shared layers.
    """
    if not dataset:
        raise ValueError("dataset is empty")
    pools: dict[str, list[int]] = {}
    for i, inst in enumerate(dataset):
        pools.setdefault(inst.label, []).append(i)
    labels_present = sorted(pools)
    history: list[dict] = []
    for step in range(steps):
        rng = derive_rng(seed, "rl-batch", step)
        size = min(prompts_per_step, len(dataset))
        order = list(labels_present)
        rng.shuffle(order)
        stacks = {name: [int(i) for i in rng.permutation(pools[name])] for name in order}
        picks: list[int] = []
        offset = 0
        while len(picks) < size:
            name = order[offset % len(order)]
            offset += 1
            if stacks[name]:
                picks.append(stacks[name].pop())
        batch = [dataset[i] for i in picks]
        params, groups = rl_step(
            params,
            batch,
            taxonomy,
            reward_fn,
            g=g,
            cfg=cfg,
            lr=lr,
            seed=derive_seed(seed, "rl-step", step),
            temperature=temperature,
            max_tokens=max_tokens,
            token_level=token_level,
        )
        row = {"step": step, **group_summary(groups)}
        history.append(row)
        if step % 20 == 0 or step == steps - 1:
            logger.info(
                "step %d mean_total %.3f acc %.3f fmt %.3f cons %.3f",
                step, row["mean_total"], row["mean_acc"], row["mean_fmt"], row["mean_cons"],
            )
    if log_path is not None and history:
        with open(log_path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(history[0].keys()))
            writer.writeheader()
            writer.writerows(history)
    return params, history


def detection_reward_fn(
    doc_texts: dict[str, str],
    judge,
    use_consistency: bool = True,
) -> RewardFn:
    """Composite detection reward over corpus documents.

    ``doc_texts`` maps instance doc_ids to source text for judge grounding;
    missing ids fall back to the instance prompt.
    """
    from .rewards import total_reward

    def fn(instance: SftInstance, rollout: Rollout, trace: ReasoningTrace) -> RewardBreakdown:
        doc_text = doc_texts.get(instance.doc_id, instance.prompt)
        return total_reward(
            doc_text, trace, instance.label, judge if use_consistency else None
        )

    return fn
