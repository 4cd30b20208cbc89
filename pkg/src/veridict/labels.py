"""Authorship labels, classification taxonomies, and answer normalization."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class Label(str, Enum):
    """Storage-level authorship label of a document."""

    HUMAN = "Human"
    AI_NATIVE = "AINative"
    AI_POLISH = "AIPolish"


#: Human-readable class names used in prompts and model answers.
DISPLAY = {
    Label.HUMAN: "Human",
    Label.AI_NATIVE: "AI-Native",
    Label.AI_POLISH: "AI-Polish",
}

#: Sentinel class for predictions that could not be parsed at all.
UNPARSEABLE = "Unparseable"


@dataclass(frozen=True)
class Taxonomy:
    """An ordered set of answer classes for one detection task."""

    name: str
    classes: tuple[str, ...]

    def menu(self) -> str:
        """Render the class list for prompt templates, e.g. ``Human or AI``."""
        if len(self.classes) == 2:
            return f"{self.classes[0]} or {self.classes[1]}"
        return ", ".join(self.classes[:-1]) + f", or {self.classes[-1]}"

    def __contains__(self, item: str) -> bool:
        return item in self.classes


BINARY = Taxonomy("binary", ("Human", "AI"))
THREE = Taxonomy("three", ("Human", "AI-Polish", "AI-Native"))

_TAXONOMIES = {t.name: t for t in (BINARY, THREE)}


def taxonomy_by_name(name: str) -> Taxonomy:
    try:
        return _TAXONOMIES[name]
    except KeyError:
        raise ValueError(f"unknown taxonomy {name!r}; expected one of {sorted(_TAXONOMIES)}") from None


def _canon(s: str) -> str:
    return "".join(ch for ch in s.casefold() if ch.isalnum())


def normalize_answer(raw: str, taxonomy: Taxonomy) -> str | None:
    """Match ``raw`` against the taxonomy case-insensitively, ignoring
    surrounding whitespace and internal hyphens/spaces. Returns the canonical
    class name, or None if nothing matches."""
    key = _canon(raw)
    if not key:
        return None
    for cls in taxonomy.classes:
        if _canon(cls) == key:
            return cls
    return None


def unify_binary(class_name: str) -> str:
    """Collapse a 3-class name onto the binary Human/AI space."""
    if class_name == UNPARSEABLE:
        return UNPARSEABLE
    return "Human" if class_name == "Human" else "AI"


def gold_class(label: Label, taxonomy: Taxonomy) -> str:
    """Ground-truth class name of a stored label under ``taxonomy``."""
    display = DISPLAY[label]
    if taxonomy.name == "binary":
        return unify_binary(display)
    return display
