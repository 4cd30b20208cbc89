"""Synthetic source documents for demos and self-contained experiments.

Documents are assembled from small word banks. Each authorship class leaves a
distinct lexical trace near the end of the text, which keeps the toy
detection task learnable by a short-context policy while remaining
non-trivial (the bulk of every document is shared filler vocabulary).
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable

import numpy as np

DOMAINS = (
    "academic",
    "blog",
    "encyclopedic",
    "essay",
    "literature",
    "news",
    "qa",
    "reviews",
    "social",
    "speeches",
)

HUMAN_MARKERS = (
    "honestly",
    "kinda",
    "messy",
    "anyway",
    "coffee",
    "yesterday",
    "stuff",
    "guess",
    "weird",
    "shrug",
)

AI_MARKERS = (
    "delve",
    "furthermore",
    "comprehensive",
    "landscape",
    "leverage",
    "robust",
    "paradigm",
    "holistic",
    "moreover",
    "pivotal",
)

POLISH_MARKERS = (
    "refined",
    "polished",
    "seamless",
    "cohesive",
    "elegant",
    "streamlined",
    "graceful",
    "burnished",
    "lucid",
    "harmonious",
)

FILLER = (
    "the",
    "a",
    "report",
    "garden",
    "river",
    "method",
    "window",
    "market",
    "teacher",
    "signal",
    "winter",
    "road",
    "letter",
    "music",
    "began",
    "moved",
    "showed",
    "carried",
    "changed",
    "stayed",
    "near",
    "under",
    "between",
    "early",
    "small",
    "quiet",
    "bright",
    "local",
    "old",
    "plain",
)

TOPICS = (
    "river restoration",
    "night markets",
    "school gardens",
    "rail timetables",
    "archive digitization",
    "harbor lights",
    "bread ovens",
    "mountain weather",
    "library renovations",
    "street music",
)

STYLES = ("formal", "narrative", "conversational", "neutral")

CUTOFF_DATE = "2022-11-30"


def _sentence(rng: np.random.Generator, n_words: int) -> str:
    words = [str(w) for w in rng.choice(FILLER, size=n_words)]
    words[0] = words[0].capitalize()
    return " ".join(words) + "."


def marker_tail(rng: np.random.Generator, bank: Iterable[str], n: int = 5) -> str:
    """A closing sentence carrying ``n`` class-marker words."""
    picks = [str(w) for w in rng.choice(list(bank), size=n, replace=False)]
    return " ".join(picks).capitalize() + "."


def make_human_text(rng: np.random.Generator, approx_tokens: int) -> str:
    sentences = []
    budget = max(approx_tokens - 7, 8)
    while budget > 0:
        n = int(rng.integers(5, 11))
        sentences.append(_sentence(rng, min(n, max(budget, 3))))
        budget -= n + 1
    sentences.append(marker_tail(rng, HUMAN_MARKERS))
    return " ".join(sentences)


def make_human_corpus(
    n: int, seed: int, min_tokens: int = 40, max_tokens: int = 110
) -> list[dict]:
    """Seeded synthetic human records: id, text, domain, date (pre-cutoff)."""
    rng = np.random.default_rng(seed)
    records = []
    for i in range(n):
        approx = int(rng.integers(min_tokens, max_tokens + 1))
        year = int(rng.integers(2015, 2022))
        month = int(rng.integers(1, 13))
        day = int(rng.integers(1, 29))
        records.append(
            {
                "id": f"h{i:05d}",
                "text": make_human_text(rng, approx),
                "domain": str(rng.choice(DOMAINS)),
                "date": f"{year:04d}-{month:02d}-{day:02d}",
            }
        )
    return records


def write_jsonl(path: str | Path, rows: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")


def read_jsonl(path: str | Path) -> list[dict]:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return rows
