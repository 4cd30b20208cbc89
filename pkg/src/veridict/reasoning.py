"""Hindsight reasoning augmentation and the think/answer trace grammar.

A teacher model is shown the document together with its ground-truth label
and asked to reconstruct the analysis that would lead there, writing as if
the label were unknown. Valid traces become supervised training targets.
"""

from __future__ import annotations

import json
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .backends import GeneratorClient
from .corpus import Document
from .labels import Taxonomy, gold_class, normalize_answer
from .prompts import detection_prompt, hindsight_prompt
from .tokenizer import STRUCTURAL_TAGS

logger = logging.getLogger("veridict.reasoning")

#: Retries after the first rejected teacher sample.
AUGMENT_RETRIES = 2

#: Phrases that reveal the teacher was told the answer.
LEAK_PHRASES = ("ground truth", "the given label", "as labeled")

_TRACE_RE = re.compile(
    r"\A\s*<think>(?P<think>.*?)</think>\s*<answer>(?P<answer>.*?)</answer>\s*\Z",
    re.DOTALL,
)
_ANSWER_ONLY_RE = re.compile(r"\A\s*<answer>(?P<answer>.*?)</answer>\s*\Z", re.DOTALL)


@dataclass(frozen=True, slots=True)
class ReasoningTrace:
    """A parsed model output in the think-then-answer shape."""

    raw: str
    think: str
    answer_label: str | None
    format_valid: bool
    leaks_label: bool

    @property
    def verdict(self) -> str | None:
        return self.answer_label if self.format_valid else None


@dataclass(frozen=True, slots=True)
class SftInstance:
    """One supervised training example: prompt, reasoning target, gold label."""

    doc_id: str
    prompt: str
    target: ReasoningTrace
    label: str


def render(think: str, answer: str) -> str:
    """Canonical raw string for a trace; inverse of parse_trace on valid input."""
    return f"<think>{think}</think><answer>{answer}</answer>"


def _contains_tag(chunk: str) -> bool:
    return any(tag in chunk for tag in STRUCTURAL_TAGS)


def _leaks(think: str) -> bool:
    lowered = think.casefold()
    return any(phrase in lowered for phrase in LEAK_PHRASES)


def parse_trace(raw: str, taxonomy: Taxonomy) -> ReasoningTrace:
    """Parse a raw completion against the strict trace grammar.

    Exactly one think block, then exactly one answer block, then nothing.
    Never raises: malformed input comes back with format_valid=False so
    reward code can score it.
    """
    m = _TRACE_RE.match(raw)
    if m is None:
        return ReasoningTrace(raw, "", None, False, False)
    think = m.group("think")
    answer_raw = m.group("answer")
    if _contains_tag(think) or _contains_tag(answer_raw):
        return ReasoningTrace(raw, "", None, False, False)
    label = normalize_answer(answer_raw, taxonomy)
    if label is None:
        return ReasoningTrace(raw, think, None, False, _leaks(think))
    return ReasoningTrace(raw, think, label, True, _leaks(think))


def parse_direct(raw: str, taxonomy: Taxonomy) -> ReasoningTrace:
    """Relaxed parser for the no-reasoning mode: a lone answer block."""
    m = _ANSWER_ONLY_RE.match(raw)
    if m is None or _contains_tag(m.group("answer")):
        return ReasoningTrace(raw, "", None, False, False)
    label = normalize_answer(m.group("answer"), taxonomy)
    if label is None:
        return ReasoningTrace(raw, "", None, False, False)
    return ReasoningTrace(raw, "", label, True, False)


def build_hindsight_prompt(doc: Document, taxonomy: Taxonomy) -> str:
    gold = gold_class(doc.label, taxonomy)
    return hindsight_prompt(doc.text, gold, taxonomy)


def _accept(trace: ReasoningTrace, gold: str) -> str | None:
    """None if acceptable, else a short rejection reason."""
    if not trace.format_valid:
        return "malformed"
    if trace.answer_label != gold:
        return f"answer {trace.answer_label!r} != gold {gold!r}"
    if trace.leaks_label:
        return "label leakage in think"
    return None


def augment_document(
    doc: Document,
    teacher: GeneratorClient,
    taxonomy: Taxonomy,
    retries: int = AUGMENT_RETRIES,
) -> SftInstance | None:
    """Sample the teacher until a trace passes the filters, or give up."""
    gold = gold_class(doc.label, taxonomy)
    prompt = build_hindsight_prompt(doc, taxonomy)
    reason = "no attempts"
    for _ in range(retries + 1):
        completion = teacher.complete(prompt, max_tokens=512).lstrip()
        raw = completion if completion.startswith("<think>") else "<think>" + completion
        trace = parse_trace(raw, taxonomy)
        reason = _accept(trace, gold)
        if reason is None:
            return SftInstance(
                doc_id=doc.id,
                prompt=detection_prompt(doc.text, taxonomy),
                target=trace,
                label=gold,
            )
    logger.warning("rejected %s after %d attempts: %s", doc.id, retries + 1, reason)
    return None


def augment_dataset(
    corpus: Sequence[Document],
    teacher: GeneratorClient,
    taxonomy: Taxonomy,
    retries: int = AUGMENT_RETRIES,
    max_workers: int = 1,
) -> list[SftInstance]:
    """Augment every document; rejected documents are logged and skipped."""
    if not corpus:
        raise ValueError("corpus is empty")

    def work(doc: Document) -> SftInstance | None:
        return augment_document(doc, teacher, taxonomy, retries=retries)

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            results = list(pool.map(work, corpus))
    else:
        results = [work(doc) for doc in corpus]
    instances = [inst for inst in results if inst is not None]
    instances.sort(key=lambda i: i.doc_id)
    logger.info("augmented %d/%d documents", len(instances), len(corpus))
    return instances


def write_sft_dataset(path: str | Path, instances: Iterable[SftInstance]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for inst in instances:
            row = {
                "doc_id": inst.doc_id,
                "prompt": inst.prompt,
                "raw_target": inst.target.raw,
                "label": inst.label,
            }
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")


def read_sft_dataset(path: str | Path, taxonomy: Taxonomy) -> list[SftInstance]:
    instances = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            trace = parse_trace(row["raw_target"], taxonomy)
            instances.append(
                SftInstance(
                    doc_id=row["doc_id"],
                    prompt=row["prompt"],
                    target=trace,
                    label=row["label"],
                )
            )
    return instances
