"""Variance-based selection of RL training prompts.

Each prompt gets K stochastic rollouts from the supervised checkpoint and a
binary correctness score per rollout. Only prompts with mixed outcomes, some
right and some wrong, are kept for RL: prompts the model already always
solves or always misses carry no learning signal under group-normalized
advantages. A random mode supports the no-selection ablation.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .labels import Taxonomy
from .policy import PolicyParams, Rollout, detokenize, policy_tokens, sample
from .reasoning import ReasoningTrace, SftInstance, parse_trace
from .seeding import derive_seed

logger = logging.getLogger("veridict.selection")

#: Rollouts per prompt during selection, matching the RL group size.
DEFAULT_K = 8

RolloutFn = Callable[[SftInstance, int], Rollout]


@dataclass(frozen=True, slots=True)
class SelectionRecord:
    """Outcome summary of K scored rollouts for one prompt."""

    doc_id: str
    scores: tuple[int, ...]
    selected: bool


def score_rollout(trace: ReasoningTrace, gold: str) -> int:
    """Binary correctness: well-formed and matching the gold class."""
    return 1 if (trace.format_valid and trace.answer_label == gold) else 0


def mixed_outcome(scores: Sequence[int]) -> bool:
    total = sum(scores)
    return 0 < total < len(scores)


def policy_rollout_fn(
    params: PolicyParams, temperature: float = 1.0, max_tokens: int = 48
) -> RolloutFn:
    """Default rollout source: sample the toy policy on the instance prompt."""

    def fn(instance: SftInstance, rollout_seed: int) -> Rollout:
        prompt = policy_tokens(instance.prompt)
        return sample(
            params, prompt, temperature=temperature, max_tokens=max_tokens, seed=rollout_seed
        )

    return fn


def select(
    dataset: Sequence[SftInstance],
    params: PolicyParams | None,
    taxonomy: Taxonomy,
    k: int = DEFAULT_K,
    temperature: float = 1.0,
    seed: int = 0,
    max_tokens: int = 48,
    rollout_fn: RolloutFn | None = None,
    max_workers: int = 1,
) -> tuple[list[str], list[SelectionRecord]]:
    """Score K rollouts per prompt and retain the mixed-outcome subset.

    Deterministic under ``seed``: each rollout's seed is derived from
    (seed, doc_id, rollout index), so worker count cannot change results.
    """
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    if rollout_fn is None:
        if params is None:
            raise ValueError("either params or rollout_fn is required")
        rollout_fn = policy_rollout_fn(params, temperature=temperature, max_tokens=max_tokens)

    def work(instance: SftInstance) -> SelectionRecord:
        scores = []
        for i in range(k):
            rollout = rollout_fn(instance, derive_seed(seed, instance.doc_id, i))
            trace = parse_trace(detokenize(rollout.generated_tokens), taxonomy)
            scores.append(score_rollout(trace, instance.label))
        return SelectionRecord(instance.doc_id, tuple(scores), mixed_outcome(scores))

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            records = list(pool.map(work, dataset))
    else:
        records = [work(inst) for inst in dataset]
    records.sort(key=lambda r: r.doc_id)
    retained = [r.doc_id for r in records if r.selected]
    logger.info("selected %d/%d prompts", len(retained), len(records))
    return retained, records


def random_select(dataset: Sequence[SftInstance], n: int, seed: int = 0) -> list[str]:
    """Ablation mode: keep a uniform random subset of n prompt ids."""
    from .seeding import derive_rng

    ids = sorted(inst.doc_id for inst in dataset)
    n = min(n, len(ids))
    rng = derive_rng(seed, "random-select")
    picks = rng.choice(len(ids), size=n, replace=False)
    return sorted(ids[int(i)] for i in picks)


def write_records(path: str | Path, records: Iterable[SelectionRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            row = {"doc_id": rec.doc_id, "scores": list(rec.scores), "selected": rec.selected}
            fh.write(json.dumps(row) + "\n")


def read_records(path: str | Path) -> list[SelectionRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                row = json.loads(line)
                records.append(
                    SelectionRecord(row["doc_id"], tuple(row["scores"]), bool(row["selected"]))
                )
    return records
