"""Inference-time detection and document scoring.

Three pieces: prompting a policy or a chat backend for a think-then-answer
verdict; turning three class probabilities (Human, AI-Polish, AI-Native)
into a single expectation score in [0, 1]; and scanning a document block
by block to localize machine-written regions.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from .backends import GeneratorClient, marker_counts
from .corpus import Document
from .errors import BackendError, ClientError, EmptyInput
from .labels import Taxonomy, gold_class, THREE
from .policy import (
    PolicyParams,
    detokenize,
    load_params,
    next_logits,
    policy_tokens,
    sample,
)
from .prompts import detection_prompt, direct_prompt
from .reasoning import ReasoningTrace, SftInstance, parse_direct, parse_trace

#: Quantized AI-degree anchor per class, in (Human, AI-Polish, AI-Native) order.
CLASS_ORDER = ("Human", "AI-Polish", "AI-Native")
AI_DEGREE = (0.0, 0.5, 1.0)


@dataclass(frozen=True, slots=True)
class AigcScore:
    """Class probabilities plus their expected AI degree."""

    p_human: float
    p_polish: float
    p_native: float
    score: float


def score_from_probs(p_human: float, p_polish: float, p_native: float) -> AigcScore:
    """Build a score from an explicit probability triple (must sum to 1)."""
    total = p_human + p_polish + p_native
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"probabilities sum to {total}, expected 1")
    return AigcScore(p_human, p_polish, p_native, p_native + 0.5 * p_polish)


def aigc_score(logits: Sequence[float]) -> AigcScore:
    """Softmax three class logits (Human, AI-Polish, AI-Native) and take the
    expectation of the AI degree."""
    z = np.asarray(logits, dtype=float)
    if z.shape != (3,):
        raise ValueError(f"expected 3 logits, got shape {z.shape}")
    if not np.all(np.isfinite(z)):
        raise ValueError("logits must be finite")
    z = z - z.max()
    p = np.exp(z)
    p /= p.sum()
    return AigcScore(float(p[0]), float(p[1]), float(p[2]), float(p[2] + 0.5 * p[1]))


class DocumentScorer(Protocol):
    """Anything that maps text to the three class probabilities."""

    def class_probs(self, text: str) -> tuple[float, float, float]:
        ...


class PolicyScorer:
    """Reads class probabilities from the policy's answer position.

    The policy is prompted in the no-reasoning mode and the logits of the
    three class symbols at the first answer token are renormalized, so a
    single forward pass prices the whole document.
    """

    def __init__(self, params: PolicyParams):
        self.params = params
        missing = [c for c in CLASS_ORDER if c not in params.token_ids]
        if missing:
            raise ValueError(f"policy vocab lacks class symbols {missing}")

    def class_logits(self, text: str) -> np.ndarray:
        prompt = direct_prompt(text, THREE)
        tokens = policy_tokens(prompt) + ["<answer>"]
        logits = next_logits(self.params, tokens)
        ids = [self.params.token_ids[c] for c in CLASS_ORDER]
        return logits[ids]

    def class_probs(self, text: str) -> tuple[float, float, float]:
        s = aigc_score(self.class_logits(text))
        return s.p_human, s.p_polish, s.p_native


class MarkerScorer:
    """Deterministic rule-based scorer over the marker vocabulary; the
    zero-setup backend for demos and scanning tests."""

    def class_probs(self, text: str) -> tuple[float, float, float]:
        h, p, a = marker_counts(text)
        weights = np.array([h, p, a], dtype=float) + 0.25
        weights /= weights.sum()
        return float(weights[0]), float(weights[1]), float(weights[2])


class RiggedScorer:
    """Replays a preset sequence of probability triples, one per call."""

    def __init__(self, triples: Sequence[tuple[float, float, float]]):
        self.triples = list(triples)
        self.calls = 0

    def class_probs(self, text: str) -> tuple[float, float, float]:
        triple = self.triples[self.calls % len(self.triples)]
        self.calls += 1
        return triple


def detect(
    doc_text: str,
    model: PolicyParams | GeneratorClient,
    taxonomy: Taxonomy,
    with_reasoning: bool = True,
    temperature: float = 0.0,
    seed: int = 0,
    max_tokens: int = 64,
) -> ReasoningTrace:
    """Run one detection query and parse the result.

    ``model`` is either a policy checkpoint (sampled locally, temperature 0
    decodes greedily) or a chat backend. ``with_reasoning=False`` asks for
    the bare answer and parses it with the relaxed grammar.
    """
    build = detection_prompt if with_reasoning else direct_prompt
    prompt = build(doc_text, taxonomy)
    if isinstance(model, PolicyParams):
        rollout = sample(
            model,
            policy_tokens(prompt),
            temperature=temperature,
            max_tokens=max_tokens,
            seed=seed,
        )
        raw = detokenize(rollout.generated_tokens)
    else:
        try:
            raw = model.complete(prompt, max_tokens=max_tokens, temperature=temperature)
        except ClientError as exc:
            raise BackendError(f"detection backend failed: {exc}") from exc
    parser = parse_trace if with_reasoning else parse_direct
    return parser(raw, taxonomy)


def score_document(text: str, scorer: DocumentScorer) -> AigcScore:
    """Whole-document expectation score."""
    if not text.strip():
        raise EmptyInput("cannot score empty text")
    return score_from_probs(*_normalized(scorer.class_probs(text)))


def _normalized(triple: Sequence[float]) -> tuple[float, float, float]:
    p = np.asarray(triple, dtype=float)
    if np.any(p < 0):
        raise ValueError(f"negative class probability in {triple}")
    total = p.sum()
    if total <= 0:
        raise ValueError("class probabilities sum to zero")
    if abs(total - 1.0) > 1e-9:
        p = p / total
    return float(p[0]), float(p[1]), float(p[2])


@dataclass(frozen=True, slots=True)
class BlockReport:
    """Score and verdict for one contiguous span of the source document."""

    block_index: int
    start: int
    end: int
    score: AigcScore
    verdict: str


_SEPARATOR_RE = re.compile(r"\n(?:[ \t]*\n)+")


def _segment(text: str, min_block_tokens: int) -> list[tuple[int, int]]:
    """Blank-line paragraph spans, with short blocks merged forward."""
    from .tokenizer import count_tokens

    spans: list[tuple[int, int]] = []
    pos = 0
    for m in _SEPARATOR_RE.finditer(text):
        if text[pos:m.start()].strip():
            spans.append((pos, m.start()))
        pos = m.end()
    if text[pos:].strip():
        spans.append((pos, len(text)))
    if not spans:
        return [(0, len(text))] if text else []
    merged: list[tuple[int, int]] = []
    carry: tuple[int, int] | None = None
    for start, end in spans:
        if carry is not None:
            start = carry[0]
            carry = None
        if count_tokens(text[start:end]) < min_block_tokens:
            carry = (start, end)
        else:
            merged.append((start, end))
    if carry is not None:
        if merged:
            merged[-1] = (merged[-1][0], carry[1])
        else:
            merged.append(carry)
    return merged


def scan(
    doc_text: str,
    scorer: DocumentScorer,
    min_block_tokens: int = 20,
) -> list[BlockReport]:
    """Score the document paragraph by paragraph.

    Spans are character offsets into the source; they are ordered, do not
    overlap, and together with the skipped separators reconstruct the
    document.
    """
    if not doc_text:
        raise EmptyInput("cannot scan empty text")
    reports = []
    for index, (start, end) in enumerate(_segment(doc_text, min_block_tokens)):
        score = score_document(doc_text[start:end], scorer)
        probs = (score.p_human, score.p_polish, score.p_native)
        verdict = CLASS_ORDER[int(np.argmax(probs))]
        reports.append(BlockReport(index, start, end, score, verdict))
    return reports


def scan_to_json(reports: Sequence[BlockReport]) -> dict:
    return {
        "blocks": [
            {
                "index": r.block_index,
                "start": r.start,
                "end": r.end,
                "p_human": r.score.p_human,
                "p_polish": r.score.p_polish,
                "p_native": r.score.p_native,
                "score": r.score.score,
                "verdict": r.verdict,
            }
            for r in reports
        ]
    }


def fast_instances(corpus: Sequence[Document]) -> list[SftInstance]:
    """Answer-only training instances for the direct scoring head: a
    three-class label with no reasoning span."""
    instances = []
    for doc in corpus:
        cls = gold_class(doc.label, THREE)
        raw = f"<answer> {cls} </answer>"
        instances.append(
            SftInstance(
                doc_id=doc.id,
                prompt=direct_prompt(doc.text, THREE),
                target=ReasoningTrace(raw, "", cls, True, False),
                label=cls,
            )
        )
    return instances


def get_scorer(name: str, seed: int = 0) -> DocumentScorer:
    """Scorer registry: ``mock`` rules or ``ckpt:<path>`` for a trained head."""
    if name == "mock":
        return MarkerScorer()
    if name.startswith("ckpt:"):
        return PolicyScorer(load_params(name.split(":", 1)[1]))
    raise ValueError(f"unknown scorer backend {name!r}; expected mock or ckpt:<path>")
