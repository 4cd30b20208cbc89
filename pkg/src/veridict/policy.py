"""A tiny trainable autoregressive sequence model.

One hidden tanh layer over the embeddings of a fixed-width context window,
softmax over the vocabulary, exact hand-derived gradients. Small enough
that every training objective built on top of it can be checked against
finite differences in milliseconds.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ShapeMismatch, UnknownToken
from .tokenizer import STRUCTURAL_TAGS, tokenize

PAD = "<pad>"
EOS = "<eos>"
UNK = "<unk>"

#: Multi-token class names the policy treats as atomic symbols.
ATOMIC_CLASSES = ("AI-Polish", "AI-Native")

POLICY_SPECIALS = STRUCTURAL_TAGS + ATOMIC_CLASSES

#: Generation stops after any of these symbols is emitted.
STOP_TOKENS = (EOS, "</answer>")

CHECKPOINT_VERSION = 1


def policy_tokens(text: str) -> list[str]:
    """Tokenize text so structural tags and class names stay atomic."""
    return tokenize(text, specials=POLICY_SPECIALS)


def detokenize(tokens: Sequence[str]) -> str:
    """Join generated tokens back into parseable text, dropping end markers."""
    return " ".join(t for t in tokens if t != EOS)


def build_vocab(token_streams: Sequence[Sequence[str]], extra: Sequence[str] = ()) -> tuple[str, ...]:
    """Deterministic vocabulary: specials, class names, then sorted corpus
    tokens."""
    base = [PAD, EOS, UNK, *STRUCTURAL_TAGS, "Human", "AI", *ATOMIC_CLASSES]
    seen = set(base)
    rest = set()
    for stream in token_streams:
        for tok in stream:
            if tok not in seen:
                rest.add(tok)
    for tok in extra:
        if tok not in seen:
            rest.add(tok)
    return tuple(base) + tuple(sorted(rest))


@dataclass(frozen=True)
class PolicyParams:
    """Immutable parameter snapshot of the sequence model."""

    vocab: tuple[str, ...]
    context_window: int
    emb: np.ndarray  # (V, E)
    w1: np.ndarray   # (H, C*E)
    b1: np.ndarray   # (H,)
    w2: np.ndarray   # (V, H)
    b2: np.ndarray   # (V,)

    @property
    def vocab_size(self) -> int:
        return len(self.vocab)

    @property
    def token_ids(self) -> dict[str, int]:
        cached = getattr(self, "_token_ids", None)
        if cached is None:
            cached = {tok: i for i, tok in enumerate(self.vocab)}
            object.__setattr__(self, "_token_ids", cached)
        return cached


def init_params(
    vocab: Sequence[str],
    seed: int = 0,
    context_window: int = 16,
    d_emb: int = 16,
    d_hidden: int = 32,
    scale: float = 0.1,
) -> PolicyParams:
    rng = np.random.default_rng(seed)
    v = len(vocab)
    return PolicyParams(
        vocab=tuple(vocab),
        context_window=context_window,
        emb=scale * rng.standard_normal((v, d_emb)),
        w1=scale * rng.standard_normal((d_hidden, context_window * d_emb)),
        b1=np.zeros(d_hidden),
        w2=scale * rng.standard_normal((v, d_hidden)),
        b2=np.zeros(v),
    )


def uniform_params(
    vocab: Sequence[str], context_window: int = 16, d_emb: int = 16, d_hidden: int = 32
) -> PolicyParams:
    """All-zero weights: every next-token distribution is exactly uniform."""
    v = len(vocab)
    return PolicyParams(
        vocab=tuple(vocab),
        context_window=context_window,
        emb=np.zeros((v, d_emb)),
        w1=np.zeros((d_hidden, context_window * d_emb)),
        b1=np.zeros(d_hidden),
        w2=np.zeros((v, d_hidden)),
        b2=np.zeros(v),
    )


def encode(params: PolicyParams, tokens: Sequence[str], strict: bool = True) -> list[int]:
    ids = []
    table = params.token_ids
    unk = table[UNK]
    for tok in tokens:
        idx = table.get(tok)
        if idx is None:
            if strict:
                raise UnknownToken(f"token {tok!r} not in policy vocabulary")
            idx = unk
        ids.append(idx)
    return ids


def _context_matrix(params: PolicyParams, prompt_ids: list[int], cont_ids: list[int]) -> np.ndarray:
    """Row t holds the window of ids that conditions continuation token t."""
    c = params.context_window
    pad_id = params.token_ids[PAD]
    padded = [pad_id] * c + prompt_ids + cont_ids
    p = len(prompt_ids)
    return np.array([padded[p + t: p + t + c] for t in range(len(cont_ids))], dtype=np.intp)


def _forward(params: PolicyParams, ctx: np.ndarray):
    """ctx (T, C) -> logits (T, V), hidden (T, H), inputs (T, C*E)."""
    t = ctx.shape[0]
    x = params.emb[ctx.reshape(-1)].reshape(t, -1)
    h = np.tanh(x @ params.w1.T + params.b1)
    logits = h @ params.w2.T + params.b2
    return logits, h, x


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def next_logits(params: PolicyParams, tokens: Sequence[str], strict: bool = False) -> np.ndarray:
    """Logits over the vocabulary for the position following ``tokens``."""
    ids = encode(params, tokens, strict=strict)
    c = params.context_window
    pad_id = params.token_ids[PAD]
    window = ([pad_id] * c + ids)[-c:]
    logits, _, _ = _forward(params, np.array([window], dtype=np.intp))
    return logits[0]


def sequence_logprob(
    params: PolicyParams,
    prompt: Sequence[str],
    continuation: Sequence[str],
    temperature: float = 1.0,
    strict: bool = True,
) -> tuple[float, np.ndarray]:
    """Log-probability of ``continuation`` after ``prompt``.

    Returns the total and the per-token vector; total is their sum. With a
    non-unit temperature the distribution is softmax(logits / temperature),
    matching what sampling at that temperature actually draws from.
    """
    if len(continuation) == 0:
        return 0.0, np.zeros(0)
    prompt_ids = encode(params, prompt, strict=strict)
    cont_ids = encode(params, continuation, strict=strict)
    ctx = _context_matrix(params, prompt_ids, cont_ids)
    logits, _, _ = _forward(params, ctx)
    logp = _log_softmax(logits / temperature)
    per_token = logp[np.arange(len(cont_ids)), cont_ids]
    return float(per_token.sum()), per_token


def zero_grad(params: PolicyParams) -> dict[str, np.ndarray]:
    return {
        "emb": np.zeros_like(params.emb),
        "w1": np.zeros_like(params.w1),
        "b1": np.zeros_like(params.b1),
        "w2": np.zeros_like(params.w2),
        "b2": np.zeros_like(params.b2),
    }


def add_grad(acc: dict[str, np.ndarray], grad: dict[str, np.ndarray], scale: float = 1.0) -> None:
    for key in acc:
        acc[key] += scale * grad[key]


def weighted_nll_grad(
    params: PolicyParams,
    prompt: Sequence[str],
    continuation: Sequence[str],
    weights: np.ndarray,
    temperature: float = 1.0,
    strict: bool = True,
) -> tuple[float, dict[str, np.ndarray]]:
    """Loss Σ_t weights[t] · (−log p(token_t)) and its exact gradient.

    The building block for both supervised training (per-span weights) and
    policy-gradient terms (a single signed coefficient spread over all
    positions).
    """
    if len(continuation) != len(weights):
        raise ShapeMismatch(
            f"{len(weights)} weights for {len(continuation)} continuation tokens"
        )
    if len(continuation) == 0:
        return 0.0, zero_grad(params)
    prompt_ids = encode(params, prompt, strict=strict)
    cont_ids = encode(params, continuation, strict=strict)
    ctx = _context_matrix(params, prompt_ids, cont_ids)
    logits, h, x = _forward(params, ctx)
    scaled = logits / temperature
    logp = _log_softmax(scaled)
    rows = np.arange(len(cont_ids))
    w = np.asarray(weights, dtype=float)
    loss = float(-(w * logp[rows, cont_ids]).sum())

    dlogits = np.exp(logp)            # softmax of scaled logits
    dlogits[rows, cont_ids] -= 1.0
    dlogits *= w[:, None] / temperature

    grad_w2 = dlogits.T @ h
    grad_b2 = dlogits.sum(axis=0)
    dh = dlogits @ params.w2
    dpre = dh * (1.0 - h * h)
    grad_w1 = dpre.T @ x
    grad_b1 = dpre.sum(axis=0)
    dx = dpre @ params.w1             # (T, C*E)
    grad_emb = np.zeros_like(params.emb)
    e = params.emb.shape[1]
    np.add.at(grad_emb, ctx.reshape(-1), dx.reshape(-1, e))
    return loss, {"emb": grad_emb, "w1": grad_w1, "b1": grad_b1, "w2": grad_w2, "b2": grad_b2}


def apply_grad(
    params: PolicyParams, grad: dict[str, np.ndarray], learning_rate: float
) -> PolicyParams:
    """One plain gradient-descent step: params − lr · grad."""
    updates = {}
    for key in ("emb", "w1", "b1", "w2", "b2"):
        current = getattr(params, key)
        g = grad[key]
        if g.shape != current.shape:
            raise ShapeMismatch(f"gradient {key} has shape {g.shape}, expected {current.shape}")
        updates[key] = current - learning_rate * g
    return replace(params, **updates)


@dataclass(frozen=True)
class Rollout:
    """One sampled continuation with its sampling-time log-probabilities."""

    prompt_tokens: tuple[str, ...]
    generated_tokens: tuple[str, ...]
    per_token_logprobs: tuple[float, ...]
    total_logprob: float


def sample(
    params: PolicyParams,
    prompt: Sequence[str],
    temperature: float = 1.0,
    max_tokens: int = 64,
    seed: int = 0,
    stop: Sequence[str] = STOP_TOKENS,
) -> Rollout:
    """Draw a continuation; temperature 0 (or below) decodes greedily."""
    rng = np.random.default_rng(seed)
    c = params.context_window
    pad_id = params.token_ids[PAD]
    ids = ([pad_id] * c + encode(params, prompt, strict=False))
    stop_set = set(stop)
    generated: list[str] = []
    logprobs: list[float] = []
    greedy = temperature <= 0.0
    tau = 1.0 if greedy else temperature
    for _ in range(max_tokens):
        window = np.array([ids[-c:]], dtype=np.intp)
        logits, _, _ = _forward(params, window)
        logp = _log_softmax(logits[0] / tau)
        if greedy:
            choice = int(np.argmax(logp))
        else:
            choice = int(rng.choice(len(logp), p=np.exp(logp)))
        tok = params.vocab[choice]
        generated.append(tok)
        logprobs.append(float(logp[choice]))
        ids.append(choice)
        if tok in stop_set:
            break
    return Rollout(
        prompt_tokens=tuple(prompt),
        generated_tokens=tuple(generated),
        per_token_logprobs=tuple(logprobs),
        total_logprob=float(sum(logprobs)),
    )


def params_digest(params: PolicyParams) -> str:
    """Content hash of a parameter snapshot, for caching and manifests."""
    h = hashlib.sha256()
    h.update("\x00".join(params.vocab).encode("utf-8"))
    h.update(str(params.context_window).encode())
    for key in ("emb", "w1", "b1", "w2", "b2"):
        h.update(np.ascontiguousarray(getattr(params, key), dtype=float).tobytes())
    return h.hexdigest()


def save_params(path: str | Path, params: PolicyParams) -> None:
    """JSON checkpoint with stable key order; reruns produce identical bytes."""
    payload = {
        "version": CHECKPOINT_VERSION,
        "context_window": params.context_window,
        "vocab": list(params.vocab),
        "arrays": {
            "emb": [params.emb.shape, params.emb.reshape(-1).tolist()],
            "w1": [params.w1.shape, params.w1.reshape(-1).tolist()],
            "b1": [params.b1.shape, params.b1.reshape(-1).tolist()],
            "w2": [params.w2.shape, params.w2.reshape(-1).tolist()],
            "b2": [params.b2.shape, params.b2.reshape(-1).tolist()],
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, separators=(",", ":"))


def load_params(path: str | Path) -> PolicyParams:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {payload.get('version')!r}")

    def arr(name: str) -> np.ndarray:
        shape, flat = payload["arrays"][name]
        return np.array(flat, dtype=float).reshape(shape)

    return PolicyParams(
        vocab=tuple(payload["vocab"]),
        context_window=int(payload["context_window"]),
        emb=arr("emb"),
        w1=arr("w1"),
        b1=arr("b1"),
        w2=arr("w2"),
        b2=arr("b2"),
    )
