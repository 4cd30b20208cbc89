"""Whitespace-plus-punctuation tokenizer used for every token count in the repo.

A token is a maximal run of word characters, a single punctuation character,
or one of the protected special symbols (structural tags by default, which
must survive tokenization as atomic units so format rewards stay learnable).
"""

from __future__ import annotations

import re
from functools import lru_cache

STRUCTURAL_TAGS = ("<think>", "</think>", "<answer>", "</answer>")

_WORD_OR_PUNCT = r"\w+|[^\w\s]"


@lru_cache(maxsize=64)
def _pattern(specials: tuple[str, ...]) -> re.Pattern[str]:
    if not specials:
        return re.compile(_WORD_OR_PUNCT)
    alts = sorted(specials, key=len, reverse=True)
    return re.compile("|".join(re.escape(s) for s in alts) + "|" + _WORD_OR_PUNCT)


def tokenize(text: str, specials: tuple[str, ...] = STRUCTURAL_TAGS) -> list[str]:
    """Split ``text`` into tokens, keeping any of ``specials`` atomic."""
    return _pattern(tuple(specials)).findall(text)


def count_tokens(text: str) -> int:
    return len(tokenize(text))
