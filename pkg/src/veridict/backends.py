"""Text-generation backends: the client interface, the deterministic mock
ecosystem used by tests and demos, caching/retry wrappers, and an HTTP
chat-completion client.

The built-in mock routes on the first line of each prompt template, so one
client can stand in for the meta extractor, the generators, the reasoning
teacher, the detector, and the consistency judge.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import time
from pathlib import Path
from typing import Protocol, runtime_checkable

import numpy as np

from . import prompts, synth
from .errors import ClientError, ConfigError
from .seeding import derive_rng
from .tokenizer import tokenize

#: Environment variables holding HTTP backend credentials.
ENV_API_BASE = "VERIDICT_API_BASE"
ENV_API_KEY = "VERIDICT_API_KEY"


@runtime_checkable
class GeneratorClient(Protocol):
    """Anything that can complete a prompt."""

    name: str

    def complete(self, prompt: str, max_tokens: int = 512, temperature: float = 0.0) -> str:
        ...


class StaticClient:
    """Returns a fixed payload regardless of the prompt."""

    def __init__(self, payload: str, name: str = "static"):
        self.payload = payload
        self.name = name

    def complete(self, prompt: str, max_tokens: int = 512, temperature: float = 0.0) -> str:
        return self.payload


class ScriptedClient:
    """Replays a fixed sequence of outputs; entries that are exceptions are
    raised instead of returned. Exhaustion raises ClientError."""

    def __init__(self, outputs: list, name: str = "scripted"):
        self.outputs = list(outputs)
        self.name = name
        self.calls = 0

    def complete(self, prompt: str, max_tokens: int = 512, temperature: float = 0.0) -> str:
        if self.calls >= len(self.outputs):
            raise ClientError(f"{self.name}: script exhausted after {self.calls} calls")
        item = self.outputs[self.calls]
        self.calls += 1
        if isinstance(item, Exception):
            raise item
        return item


class EchoDocumentClient:
    """Returns the ``Document:`` section of the prompt unchanged.

    Useful as an identity rewriter in tests.
    """

    def __init__(self, name: str = "echo"):
        self.name = name

    def complete(self, prompt: str, max_tokens: int = 512, temperature: float = 0.0) -> str:
        marker = "Document:\n"
        pos = prompt.rfind(marker)
        if pos < 0:
            return prompt
        return prompt[pos + len(marker):]


class RetryingClient:
    """Retries a flaky inner client with exponential backoff."""

    def __init__(self, inner: GeneratorClient, attempts: int = 3, base_delay: float = 0.05):
        self.inner = inner
        self.attempts = attempts
        self.base_delay = base_delay
        self.name = inner.name

    def complete(self, prompt: str, max_tokens: int = 512, temperature: float = 0.0) -> str:
        last: Exception | None = None
        for i in range(self.attempts):
            try:
                return self.inner.complete(prompt, max_tokens=max_tokens, temperature=temperature)
            except Exception as exc:  # noqa: BLE001 - any backend fault is retryable
                last = exc
                if i + 1 < self.attempts:
                    time.sleep(self.base_delay * (2 ** i))
        raise ClientError(f"{self.name}: failed after {self.attempts} attempts: {last}")


class CachingClient:
    """Memoizes completions on disk keyed by a hash of the full request.

    Re-running a pipeline with the same prompts then costs nothing and
    reproduces identical text.
    """

    def __init__(self, inner: GeneratorClient, cache_dir: str | Path):
        self.inner = inner
        self.cache_dir = Path(cache_dir)
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        self.name = inner.name

    def _key(self, prompt: str, max_tokens: int, temperature: float) -> Path:
        raw = f"{self.name}|{max_tokens}|{temperature!r}|{prompt}".encode("utf-8")
        return self.cache_dir / (hashlib.sha256(raw).hexdigest()[:40] + ".json")

    def complete(self, prompt: str, max_tokens: int = 512, temperature: float = 0.0) -> str:
        path = self._key(prompt, max_tokens, temperature)
        if path.exists():
            with open(path, "r", encoding="utf-8") as fh:
                return json.load(fh)["completion"]
        out = self.inner.complete(prompt, max_tokens=max_tokens, temperature=temperature)
        tmp = path.with_suffix(".tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump({"completion": out}, fh, ensure_ascii=False)
        os.replace(tmp, path)
        return out


def _prompt_rng(seed: int, prompt: str) -> np.random.Generator:
    return derive_rng(seed, prompt)


_STOPWORDS = frozenset(
    "the a an of and or to in on for with near under between is are was were this that".split()
)


def _content_words(text: str) -> list[str]:
    return [w.casefold() for w in re.findall(r"[A-Za-z]+", text) if len(w) > 2]


class MockGenerator:
    """Deterministic stand-in for every remote model in the pipeline.

    Routing is by prompt shape: meta extraction, document generation,
    polishing, continuation, hindsight teaching, detection, and judging each
    produce a plausible, seed-stable reply. Generated documents carry
    class-specific vocabulary near the end, which is what makes the bundled
    detection task learnable.
    """

    def __init__(self, seed: int = 0, name: str = "mock"):
        self.seed = seed
        self.name = name

    # -- helpers -----------------------------------------------------------

    def _doc_tokens(self, rng: np.random.Generator, n_tokens: int, tail_bank, mixin=None) -> str:
        tail = [str(w) for w in rng.choice(list(tail_bank), size=5, replace=False)]
        if mixin is not None:
            swap = rng.choice(5, size=2, replace=False)
            extra = rng.choice(list(mixin), size=2, replace=False)
            for slot, word in zip(swap, extra):
                tail[int(slot)] = str(word)
        tail.append(".")
        body_budget = max(n_tokens - len(tail), 4)
        body: list[str] = []
        while len(body) < body_budget:
            run = int(rng.integers(5, 10))
            run = min(run, body_budget - len(body) - 1)
            if run < 1:
                body.append(".")
                break
            body.extend(str(w) for w in rng.choice(synth.FILLER, size=run))
            body.append(".")
        return " ".join(body[:body_budget] + tail)

    # -- per-template replies ---------------------------------------------

    def _meta(self, prompt: str, rng: np.random.Generator) -> str:
        doc = prompt.split("Document:\n", 1)[-1]
        words = [w for w in re.findall(r"[A-Za-z]+", doc) if w not in _STOPWORDS]
        topic = " ".join(words[:3]) if words else "general prose"
        points = []
        for i in range(3):
            lo = (i + 1) * 5
            if lo + 2 <= len(words):
                points.append(" ".join(words[lo:lo + 2]))
        style = str(rng.choice(synth.STYLES))
        return json.dumps({"topic": topic, "key_points": points, "style": style})

    def _native(self, prompt: str, rng: np.random.Generator) -> str:
        m = re.search(r"Target length: (\d+) tokens", prompt)
        target = int(m.group(1)) if m else 80
        jitter = max(1, target // 20)
        n = int(target + rng.integers(-jitter, jitter + 1))
        humanize = prompts.HUMANIZE_LINE in prompt
        mixin = synth.HUMAN_MARKERS if humanize else None
        return self._doc_tokens(rng, n, synth.AI_MARKERS, mixin=mixin)

    def _polish(self, prompt: str, rng: np.random.Generator) -> str:
        doc = prompt.split("Document:\n", 1)[-1]
        toks = tokenize(doc)
        if len(toks) > 12:
            toks = toks[:-6]
        tail = [str(w) for w in rng.choice(list(synth.POLISH_MARKERS), size=5, replace=False)]
        return " ".join(toks + tail + ["."])

    def _continuation(self, prompt: str, rng: np.random.Generator) -> str:
        m = re.search(r"roughly (\d+) more tokens", prompt)
        n = int(m.group(1)) if m else 20
        return self._doc_tokens(rng, max(n, 7), synth.AI_MARKERS)

    def _teacher(self, prompt: str, rng: np.random.Generator) -> str:
        gold = prompt.split("Ground Truth Label:", 1)[1].splitlines()[0].strip()
        doc = prompt.split("Text: ", 1)[1].split("\nGround Truth Label:", 1)[0]
        toks = set(tokenize(doc.casefold()))
        banks = {
            "machine smooth": synth.AI_MARKERS,
            "buffed over": synth.POLISH_MARKERS,
            "lived in": synth.HUMAN_MARKERS,
        }
        flavor = "hard to place"
        found: list[str] = []
        best = 0
        for phrase, bank in banks.items():
            hits = [w for w in bank if w in toks]
            if len(hits) > best:
                best = len(hits)
                flavor = phrase
                found = hits
        if not found:
            tail_words = [w for w in tokenize(doc) if w.isalpha()]
            found = tail_words[-3:] if tail_words else ["plain", "text"]
        # Keep the trace short: the toy policy conditions on a narrow window,
        # so the document tail must stay visible at the answer position.
        picks = found[:2]
        think = f"reads {flavor} ; cues " + " ".join(picks)
        return f"{think} </think> <answer> {gold} </answer>"

    def _detect(self, prompt: str, rng: np.random.Generator) -> str:
        doc = prompt.split("Text: ", 1)[-1]
        toks = set(tokenize(doc.casefold()))
        h = sum(1 for w in synth.HUMAN_MARKERS if w in toks)
        p = sum(1 for w in synth.POLISH_MARKERS if w in toks)
        a = sum(1 for w in synth.AI_MARKERS if w in toks)
        three_way = "AI-Polish" in prompt
        if three_way:
            verdict = ["Human", "AI-Polish", "AI-Native"][int(np.argmax([h, p, a]))]
        else:
            verdict = "Human" if h >= p + a else "AI"
        cues = [w for w in list(synth.HUMAN_MARKERS) + list(synth.POLISH_MARKERS)
                + list(synth.AI_MARKERS) if w in toks][:4]
        cue_text = " ".join(cues) if cues else "no strong cues"
        return (
            f"<think> scanning for authorship cues ; salient words are {cue_text} "
            f"</think> <answer> {verdict} </answer>"
        )

    def _direct(self, prompt: str, rng: np.random.Generator) -> str:
        out = self._detect(prompt, rng)
        return out.split("</think>", 1)[1].strip()

    def _judge(self, prompt: str, rng: np.random.Generator) -> str:
        try:
            tail = prompt.rsplit("\nText: ", 1)[1]
            doc, output = tail.split("\nModel Output: ", 1)
        except (IndexError, ValueError):
            return "[0.0, 0.0, 0.0]"
        think_m = re.search(r"<think>(.*?)</think>", output, re.DOTALL)
        ans_m = re.search(r"<answer>(.*?)</answer>", output, re.DOTALL)
        if not think_m or not ans_m:
            return "[0.0, 0.0, 0.0]"
        think_words = set(_content_words(think_m.group(1)))
        ai_cueset = set(synth.AI_MARKERS) | set(synth.POLISH_MARKERS) | {"machine", "smooth", "buffed"}
        hu_cueset = set(synth.HUMAN_MARKERS) | {"lived"}
        ai_hits = len(think_words & ai_cueset)
        hu_hits = len(think_words & hu_cueset)
        answer_is_human = "human" in ans_m.group(1).casefold()
        if ai_hits == hu_hits:
            alignment = 1.0
        elif answer_is_human:
            alignment = 1.0 if hu_hits > ai_hits else 0.0
        else:
            alignment = 1.0 if ai_hits > hu_hits else 0.0
        doc_words = set(_content_words(doc))
        grounded = len(think_words & doc_words) / max(1, len(think_words))
        specific = min(1.0, len(think_words) / 8.0)
        return f"[{alignment:.1f}, {grounded:.2f}, {specific:.2f}]"

    # -- dispatch ----------------------------------------------------------

    def complete(self, prompt: str, max_tokens: int = 512, temperature: float = 0.0) -> str:
        rng = _prompt_rng(self.seed, prompt)
        if prompt.startswith(prompts.META_SIGNATURE):
            return self._meta(prompt, rng)
        if prompt.startswith(prompts.NATIVE_SIGNATURE):
            return self._native(prompt, rng)
        if prompt.startswith(prompts.POLISH_SIGNATURE):
            return self._polish(prompt, rng)
        if prompt.startswith("Continue the document below"):
            return self._continuation(prompt, rng)
        if "Ground Truth Label:" in prompt and prompt.rstrip().endswith("<think>"):
            return self._teacher(prompt, rng)
        if prompts.JUDGE_SIGNATURE in prompt:
            return self._judge(prompt, rng)
        if prompt.startswith(prompts.DETECT_SIGNATURE):
            return self._detect(prompt, rng)
        if prompt.startswith("Answer in one word"):
            return self._direct(prompt, rng)
        raise ClientError(f"{self.name}: no route for prompt starting {prompt[:60]!r}")


class HttpChatClient:
    """OpenAI-style chat-completion client.

    Reads the base URL and key from the environment unless given explicitly.
    """

    def __init__(self, model: str, base_url: str | None = None, api_key: str | None = None,
                 timeout: float = 60.0):
        self.model = model
        self.name = f"http:{model}"
        self.base_url = base_url or os.environ.get(ENV_API_BASE, "")
        self.api_key = api_key or os.environ.get(ENV_API_KEY, "")
        self.timeout = timeout
        if not self.base_url:
            raise ConfigError(f"HTTP backend needs {ENV_API_BASE} set")

    def complete(self, prompt: str, max_tokens: int = 512, temperature: float = 0.0) -> str:
        import requests

        url = self.base_url.rstrip("/") + "/chat/completions"
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        body = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "max_tokens": max_tokens,
            "temperature": temperature,
        }
        try:
            resp = requests.post(url, json=body, headers=headers, timeout=self.timeout)
            resp.raise_for_status()
            return resp.json()["choices"][0]["message"]["content"]
        except Exception as exc:  # noqa: BLE001 - normalized below
            raise ClientError(f"{self.name}: {exc}") from exc


def get_client(name: str, seed: int = 0, cache_dir: str | Path | None = None) -> GeneratorClient:
    """Backend registry. Names: ``mock``, ``mock:<salt>``, ``http:<model>``."""
    client: GeneratorClient
    if name == "mock":
        client = MockGenerator(seed=seed)
    elif name.startswith("mock:"):
        salt = name.split(":", 1)[1]
        digest = hashlib.sha256(f"{seed}:{salt}".encode()).digest()
        client = MockGenerator(seed=int.from_bytes(digest[:4], "big"), name=name)
    elif name.startswith("http:"):
        client = RetryingClient(HttpChatClient(name.split(":", 1)[1]))
    else:
        raise ConfigError(f"unknown backend {name!r}; expected mock, mock:<salt>, or http:<model>")
    if cache_dir is not None:
        client = CachingClient(client, cache_dir)
    return client


def marker_counts(text: str) -> tuple[int, int, int]:
    """(human, polish, native) marker-word hits; shared by mock scorers."""
    toks = set(tokenize(text.casefold()))
    h = sum(1 for w in synth.HUMAN_MARKERS if w in toks)
    p = sum(1 for w in synth.POLISH_MARKERS if w in toks)
    a = sum(1 for w in synth.AI_MARKERS if w in toks)
    return h, p, a
