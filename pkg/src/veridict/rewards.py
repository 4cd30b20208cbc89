"""Composite RL reward: accuracy + format + judged consistency.

A correct verdict earns 1, a malformed output costs 1, and a judge model
awards up to 1 more for reasoning that actually supports the answer. The
judge is consulted only for well-formed outputs, so malformed text cannot
farm consistency credit, and judge failures degrade to zero rather than
crashing a training run.
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass

from .backends import GeneratorClient
from .errors import ClientError
from .prompts import judge_prompt
from .reasoning import ReasoningTrace

logger = logging.getLogger("veridict.rewards")

#: Parse retries when the judge reply is not a three-float list.
JUDGE_RETRIES = 2

_FLOAT_LIST_RE = re.compile(
    r"\[\s*([-+0-9.eE]+)\s*,\s*([-+0-9.eE]+)\s*,\s*([-+0-9.eE]+)\s*\]"
)


@dataclass(frozen=True, slots=True)
class RewardBreakdown:
    """Per-component reward values; total is always their sum."""

    acc: int
    fmt: int
    cons: float
    total: float


@dataclass(frozen=True, slots=True)
class JudgeVerdict:
    """The judge's three criteria: binary alignment plus two quality scores."""

    alignment: float
    groundedness: float
    specificity: float


def accuracy_reward(trace: ReasoningTrace, gold: str) -> int:
    """1 for a well-formed trace answering the gold class, else 0."""
    if trace.format_valid and trace.answer_label == gold:
        return 1
    return 0


def format_reward(trace: ReasoningTrace) -> int:
    """0 when the trace obeys the grammar, -1 otherwise."""
    return 0 if trace.format_valid else -1


def parse_judge_reply(reply: str) -> JudgeVerdict | None:
    """Extract [alignment, groundedness, specificity] from a judge reply.

    Alignment snaps to {0, 1} at 0.5; the quality scores clamp into [0, 1].
    Returns None when no finite three-float list is present.
    """
    m = _FLOAT_LIST_RE.search(reply)
    if m is None:
        return None
    try:
        values = [float(g) for g in m.groups()]
    except ValueError:
        return None
    if not all(math.isfinite(v) for v in values):
        return None
    alignment = 1.0 if values[0] >= 0.5 else 0.0
    grounded = min(1.0, max(0.0, values[1]))
    specific = min(1.0, max(0.0, values[2]))
    return JudgeVerdict(alignment, grounded, specific)


def combine_verdict(verdict: JudgeVerdict) -> float:
    """Scalarize: alignment gates the mean of the two quality scores."""
    return verdict.alignment * (verdict.groundedness + verdict.specificity) / 2.0


def consistency_reward(
    doc_text: str,
    trace: ReasoningTrace,
    judge: GeneratorClient,
    retries: int = JUDGE_RETRIES,
) -> float:
    """Judge-scored coherence of the reasoning, in [0, 1].

    Unparseable replies are retried; judge faults score 0 and are logged.
    Wrap the judge in a caching client to pin replies for reproducibility.
    """
    prompt = judge_prompt(doc_text, trace.raw)
    for attempt in range(retries + 1):
        try:
            reply = judge.complete(prompt, max_tokens=64)
        except ClientError as exc:
            logger.warning("judge failed, scoring 0: %s", exc)
            return 0.0
        verdict = parse_judge_reply(reply)
        if verdict is not None:
            return combine_verdict(verdict)
        logger.debug("unparseable judge reply (attempt %d): %r", attempt, reply[:80])
    logger.warning("judge reply never parsed after %d attempts, scoring 0", retries + 1)
    return 0.0


def total_reward(
    doc_text: str,
    trace: ReasoningTrace,
    gold: str,
    judge: GeneratorClient | None,
) -> RewardBreakdown:
    """Full composite reward; judge=None drops the consistency term."""
    acc = accuracy_reward(trace, gold)
    fmt = format_reward(trace)
    if fmt == -1 or judge is None:
        cons = 0.0
    else:
        cons = consistency_reward(doc_text, trace, judge)
    return RewardBreakdown(acc=acc, fmt=fmt, cons=cons, total=acc + fmt + cons)
