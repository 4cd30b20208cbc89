"""Accuracy, Macro-F1, confusion matrices, and score calibration.

Predictions that never parsed count as wrong for every gold class and are
tracked in a dedicated confusion column; they depress recall but are never
false positives for a real class. Per-class F1 of a class absent from both
golds and predictions is 0 and stays in the macro average.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EmptyInput
from .labels import Taxonomy, UNPARSEABLE, unify_binary, BINARY
from .scoring import AigcScore, CLASS_ORDER

logger = logging.getLogger("veridict.evaluate")


@dataclass(frozen=True)
class EvalResult:
    """Headline metrics plus the full confusion matrix."""

    accuracy: float
    macro_f1: float
    confusion: np.ndarray
    classes: tuple[str, ...]
    n: int

    def to_json(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "n": self.n,
            "classes": list(self.classes),
            "confusion": self.confusion.astype(int).tolist(),
        }


def evaluate(
    predictions: Sequence[tuple[str, str | None]],
    taxonomy: Taxonomy,
    unify: bool = False,
) -> EvalResult:
    """Score (gold, predicted) pairs under a taxonomy.

    ``unify=True`` collapses both sides onto Human vs AI before scoring.
    Predicted None is treated as unparseable.
    """
    if not predictions:
        raise EmptyInput("no predictions to evaluate")
    pairs = []
    for gold, pred in predictions:
        if pred is None:
            pred = UNPARSEABLE
        if unify:
            gold, pred = unify_binary(gold), unify_binary(pred)
        pairs.append((gold, pred))
    if unify:
        taxonomy = BINARY
    classes = taxonomy.classes + (UNPARSEABLE,)
    index = {c: i for i, c in enumerate(classes)}
    confusion = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for gold, pred in pairs:
        if gold not in taxonomy:
            raise ValueError(f"gold label {gold!r} not in taxonomy {taxonomy.name}")
        col = index.get(pred, index[UNPARSEABLE])
        confusion[index[gold], col] += 1
    n = len(pairs)
    accuracy = float(np.trace(confusion[: len(taxonomy.classes), : len(taxonomy.classes)])) / n

    f1s = []
    for i, cls in enumerate(taxonomy.classes):
        tp = confusion[i, i]
        fp = confusion[:, i].sum() - tp
        fn = confusion[i, :].sum() - tp
        if tp + fp + fn == 0:
            logger.info("class %s absent from golds and predictions; F1 set to 0", cls)
            f1s.append(0.0)
            continue
        precision = tp / (tp + fp) if tp + fp > 0 else 0.0
        recall = tp / (tp + fn) if tp + fn > 0 else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        f1s.append(float(f1))
    return EvalResult(
        accuracy=accuracy,
        macro_f1=float(np.mean(f1s)),
        confusion=confusion,
        classes=classes,
        n=n,
    )


@dataclass(frozen=True, slots=True)
class CalibrationBin:
    """One decile of the score range; accuracy is None when empty."""

    lo: float
    hi: float
    count: int
    accuracy: float | None


@dataclass(frozen=True)
class CalibrationTable:
    bins: tuple[CalibrationBin, ...]
    n: int

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "bins": [
                {"lo": b.lo, "hi": b.hi, "count": b.count, "accuracy": b.accuracy}
                for b in self.bins
            ],
        }


def bin_index(score: float) -> int:
    """Decile of a score in [0, 1]; 1.0 lands in the final closed bin."""
    if not 0.0 <= score <= 1.0:
        raise ValueError(f"score {score} outside [0, 1]")
    return min(int(score * 10), 9)


def synthetic_calibrated_scores(
    n: int, seed: int = 0
) -> list[tuple[AigcScore, str]]:
    """Reference stream of honestly confident scored samples.

    Each sample draws a score s uniformly and is machine text with
    probability exactly s, so the argmax verdict is right with probability
    max(s, 1 - s). Calibration analysis run on this stream should find
    near-perfect agreement in every decile, which makes it a fixture for
    validating the table itself.
    """
    if n <= 0:
        raise ValueError(f"need a positive sample count, got {n}")
    from .scoring import score_from_probs

    rng = np.random.default_rng(seed)
    out: list[tuple[AigcScore, str]] = []
    for _ in range(n):
        s = float(rng.random())
        gold = "AI-Native" if float(rng.random()) < s else "Human"
        out.append((score_from_probs(1.0 - s, 0.0, s), gold))
    return out


def calibration_table(
    scored: Sequence[tuple[AigcScore, str]],
    taxonomy: Taxonomy | None = None,
) -> CalibrationTable:
    """Bin scored samples into score deciles and measure per-bin accuracy.

    A sample is correct when the argmax class of its probability triple
    (collapsed to Human/AI first if the taxonomy is binary) matches gold.
    """
    if not scored:
        raise EmptyInput("no scored samples")
    counts = np.zeros(10, dtype=np.int64)
    correct = np.zeros(10, dtype=np.int64)
    binary = taxonomy is not None and taxonomy.name == "binary"
    for score, gold in scored:
        probs = (score.p_human, score.p_polish, score.p_native)
        predicted = CLASS_ORDER[int(np.argmax(probs))]
        if binary:
            predicted = unify_binary(predicted)
        idx = bin_index(score.score)
        counts[idx] += 1
        if predicted == gold:
            correct[idx] += 1
    bins = []
    for i in range(10):
        lo, hi = i / 10, (i + 1) / 10
        acc = float(correct[i] / counts[i]) if counts[i] > 0 else None
        bins.append(CalibrationBin(lo, hi, int(counts[i]), acc))
    return CalibrationTable(bins=tuple(bins), n=int(counts.sum()))
