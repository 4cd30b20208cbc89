"""Three-way parallel corpus construction.

Every human source document spawns two machine counterparts: a fully
generated rewrite driven by extracted meta attributes, and a polished
variant of the original text. Length alignment, the humanize intervention,
and the temporal cutoff are enforced here.
"""

from __future__ import annotations

import json
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import Iterable, Sequence

from .backends import GeneratorClient
from .errors import EmptyExtraction, LengthUnsatisfiable
from .seeding import derive_rng
from .labels import DISPLAY, Label
from .prompts import (
    continuation_prompt,
    meta_extraction_prompt,
    native_generation_prompt,
    polish_prompt,
)
from .synth import CUTOFF_DATE, DOMAINS
from .tokenizer import count_tokens, tokenize

logger = logging.getLogger("veridict.corpus")

#: Regeneration attempts before falling back to truncate/continue repair.
LENGTH_ATTEMPTS = 3


@dataclass(frozen=True, slots=True)
class Document:
    """One text sample with its authorship provenance."""

    id: str
    domain: str
    label: Label
    text: str
    token_count: int
    published_before_cutoff: bool
    source_model: str | None = None
    human_ref_id: str | None = None
    humanize_intervention: bool = False

    def to_dict(self) -> dict:
        row = {
            "id": self.id,
            "domain": self.domain,
            "label": self.label.value,
            "text": self.text,
            "token_count": self.token_count,
            "published_before_cutoff": self.published_before_cutoff,
        }
        if self.source_model is not None:
            row["source_model"] = self.source_model
        if self.human_ref_id is not None:
            row["human_ref_id"] = self.human_ref_id
        if self.label is Label.AI_NATIVE:
            row["humanize_intervention"] = self.humanize_intervention
        return row

    @classmethod
    def from_dict(cls, row: dict) -> "Document":
        return cls(
            id=row["id"],
            domain=row["domain"],
            label=Label(row["label"]),
            text=row["text"],
            token_count=int(row["token_count"]),
            published_before_cutoff=bool(row["published_before_cutoff"]),
            source_model=row.get("source_model"),
            human_ref_id=row.get("human_ref_id"),
            humanize_intervention=bool(row.get("humanize_intervention", False)),
        )


@dataclass(frozen=True, slots=True)
class MetaAttributes:
    """Structured summary of a human reference document."""

    ref_id: str
    topic_summary: str
    key_points: tuple[str, ...]
    style_profile: str | None
    target_token_count: int


_DATE_RE = re.compile(r"^(\d{4})-(\d{2})-(\d{2})$")


def _parse_date(raw) -> date | None:
    if not isinstance(raw, str):
        return None
    m = _DATE_RE.match(raw.strip())
    if not m:
        return None
    try:
        return date(int(m.group(1)), int(m.group(2)), int(m.group(3)))
    except ValueError:
        return None


_CUTOFF = date.fromisoformat(CUTOFF_DATE)


def ingest_human(records: Iterable[dict]) -> list[Document]:
    """Turn raw human records into Documents, dropping any that violate the
    temporal cutoff, lack a parseable date, or carry an unknown domain."""
    docs: list[Document] = []
    seen: set[str] = set()
    for rec in records:
        doc_id = rec.get("id")
        text = rec.get("text")
        domain = rec.get("domain")
        when = _parse_date(rec.get("date"))
        if not doc_id or doc_id in seen:
            logger.warning("rejecting record with missing/duplicate id: %r", doc_id)
            continue
        if not text or not isinstance(text, str):
            logger.warning("rejecting %s: empty text", doc_id)
            continue
        if domain not in DOMAINS:
            logger.warning("rejecting %s: unknown domain %r", doc_id, domain)
            continue
        if when is None:
            logger.warning("rejecting %s: missing or malformed date", doc_id)
            continue
        if when >= _CUTOFF:
            logger.warning("rejecting %s: dated %s, on/after cutoff %s", doc_id, when, _CUTOFF)
            continue
        seen.add(doc_id)
        docs.append(
            Document(
                id=doc_id,
                domain=domain,
                label=Label.HUMAN,
                text=text,
                token_count=count_tokens(text),
                published_before_cutoff=True,
            )
        )
    return docs


def extract_meta(human_doc: Document, client: GeneratorClient) -> MetaAttributes:
    """Ask the client for topic, key points, and style of a human document."""
    if human_doc.label is not Label.HUMAN:
        raise ValueError(f"{human_doc.id} is not a human document")
    if not human_doc.text.strip():
        raise ValueError(f"{human_doc.id} has empty text")
    reply = client.complete(meta_extraction_prompt(human_doc.text), max_tokens=256)
    try:
        payload = json.loads(reply)
        topic = str(payload["topic"])
        points = tuple(str(p) for p in payload.get("key_points", []))
        style = payload.get("style")
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise EmptyExtraction(
            f"meta extraction for {human_doc.id} returned unparseable output: {reply[:80]!r}"
        ) from exc
    return MetaAttributes(
        ref_id=human_doc.id,
        topic_summary=topic,
        key_points=points,
        style_profile=str(style) if style is not None else None,
        target_token_count=human_doc.token_count,
    )


def _within(tc: int, target: int, tol: float) -> bool:
    return abs(tc - target) <= tol * target


def generate_ai_native(
    meta: MetaAttributes,
    client: GeneratorClient,
    humanize: bool,
    length_tolerance: float = 0.2,
    domain: str = "essay",
    attempts: int = LENGTH_ATTEMPTS,
) -> Document:
    """Generate a fresh document from meta attributes, length-aligned to the
    human reference within ``length_tolerance``."""
    if not 0 < length_tolerance < 1:
        raise ValueError(f"length_tolerance must be in (0, 1), got {length_tolerance}")
    target = meta.target_token_count
    prompt = native_generation_prompt(
        meta.topic_summary, list(meta.key_points), meta.style_profile, target, humanize
    )
    text = ""
    for _ in range(attempts):
        text = client.complete(prompt, max_tokens=2 * target + 32)
        if _within(count_tokens(text), target, length_tolerance):
            break
    else:
        tc = count_tokens(text)
        if tc > target:
            text = " ".join(tokenize(text)[:target])
        elif tc < target:
            extra = client.complete(continuation_prompt(text, target - tc), max_tokens=2 * target)
            text = (text.rstrip() + " " + extra.lstrip()).strip()
        if not _within(count_tokens(text), target, length_tolerance):
            raise LengthUnsatisfiable(
                f"could not hit {target}±{length_tolerance:.0%} tokens for {meta.ref_id} "
                f"after {attempts} attempts (got {count_tokens(text)})"
            )
    return Document(
        id=f"{meta.ref_id}:native:{client.name}",
        domain=domain,
        label=Label.AI_NATIVE,
        text=text,
        token_count=count_tokens(text),
        published_before_cutoff=False,
        source_model=client.name,
        human_ref_id=meta.ref_id,
        humanize_intervention=humanize,
    )


def generate_ai_polish(human_doc: Document, client: GeneratorClient) -> Document:
    """Polish a human document, storing the client output verbatim."""
    if human_doc.label is not Label.HUMAN:
        raise ValueError(f"{human_doc.id} is not a human document")
    text = client.complete(polish_prompt(human_doc.text), max_tokens=2 * human_doc.token_count + 32)
    return Document(
        id=f"{human_doc.id}:polish:{client.name}",
        domain=human_doc.domain,
        label=Label.AI_POLISH,
        text=text,
        token_count=count_tokens(text),
        published_before_cutoff=False,
        source_model=client.name,
        human_ref_id=human_doc.id,
    )


def intervention_flag(seed: int, doc_id: str, rate: float) -> bool:
    """Per-document Bernoulli draw, independent of processing order."""
    rng = derive_rng(seed, "intervene", doc_id)
    return bool(rng.random() < rate)


def build_corpus(
    human_docs: Sequence[Document],
    client: GeneratorClient,
    intervention_rate: float = 0.2,
    length_tolerance: float = 0.2,
    seed: int = 0,
    max_workers: int = 4,
) -> list[Document]:
    """Expand human documents into the three-way corpus. Documents whose length
    cannot be aligned are skipped with a warning rather than aborting the
    whole build."""

    def expand(human: Document) -> list[Document]:
        out: list[Document] = []
        humanize = intervention_flag(seed, human.id, intervention_rate)
        try:
            meta = extract_meta(human, client)
            out.append(
                generate_ai_native(
                    meta, client, humanize, length_tolerance, domain=human.domain
                )
            )
        except (LengthUnsatisfiable, EmptyExtraction) as exc:
            logger.warning("skipping native for %s: %s", human.id, exc)
        out.append(generate_ai_polish(human, client))
        return out

    generated: list[Document] = []
    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            for batch in pool.map(expand, human_docs):
                generated.extend(batch)
    else:
        for human in human_docs:
            generated.extend(expand(human))
    corpus = list(human_docs) + generated
    corpus.sort(key=lambda d: d.id)
    return corpus


def check_corpus(corpus: Sequence[Document]) -> None:
    """Validate referential integrity and stored token counts; raises on
    violation."""
    by_id = {d.id: d for d in corpus}
    if len(by_id) != len(corpus):
        raise ValueError("duplicate document ids in corpus")
    for doc in corpus:
        if doc.label is Label.HUMAN:
            if doc.source_model is not None or doc.human_ref_id is not None:
                raise ValueError(f"{doc.id}: human doc carries generator provenance")
            if not doc.published_before_cutoff:
                raise ValueError(f"{doc.id}: human doc dated after the cutoff")
        else:
            ref = by_id.get(doc.human_ref_id or "")
            if ref is None or ref.label is not Label.HUMAN:
                raise ValueError(f"{doc.id}: human_ref_id does not resolve to a human doc")
        if doc.token_count != count_tokens(doc.text):
            raise ValueError(f"{doc.id}: stored token_count is stale")


def corpus_stats(corpus: Sequence[Document]) -> dict[str, dict]:
    """Per-label sample counts, token totals, and distinct generator counts."""
    stats = {
        DISPLAY[lab]: {"samples": 0, "total_tokens": 0, "generators": set()}
        for lab in (Label.HUMAN, Label.AI_NATIVE, Label.AI_POLISH)
    }
    for doc in corpus:
        row = stats[DISPLAY[doc.label]]
        row["samples"] += 1
        row["total_tokens"] += doc.token_count
        if doc.source_model is not None:
            row["generators"].add(doc.source_model)
    return {
        lab: {
            "samples": row["samples"],
            "total_tokens": row["total_tokens"],
            "distinct_generators": len(row["generators"]),
        }
        for lab, row in stats.items()
    }


def format_stats(stats: dict[str, dict]) -> str:
    """Human-readable stats table; generator count shown as ``-`` for Human."""
    lines = [f"{'Label':<10} {'Samples':>10} {'Tokens':>14} {'Generators':>10}"]
    for lab, row in stats.items():
        gens = "-" if lab == DISPLAY[Label.HUMAN] else str(row["distinct_generators"])
        lines.append(
            f"{lab:<10} {row['samples']:>10} {row['total_tokens']:>14} {gens:>10}"
        )
    return "\n".join(lines)


def write_corpus(path: str | Path, corpus: Iterable[Document]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in corpus:
            fh.write(json.dumps(doc.to_dict(), ensure_ascii=False) + "\n")


def read_corpus(path: str | Path) -> list[Document]:
    docs = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                docs.append(Document.from_dict(json.loads(line)))
    return docs
