"""Run configuration: defaults, validation, loading, canonical dumping.

A config file is a flat YAML mapping. Unknown keys and out-of-range values
fail fast with the offending field named, and every default lands in the
dumped form so manifests never contain silent settings.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from pathlib import Path

import yaml

from .errors import ConfigError

#: Pipeline stages in execution order.
STAGES = ("corpus", "augment", "sft", "select", "rl", "eval", "calibrate")

#: Recognized ablation switches.
ABLATION_FLAGS = ("use_sft", "use_rl", "use_weighted", "use_selection", "use_cot")

#: YAML spellings that map onto differently named fields.
_ALIASES = {"lambda": "lam"}


@dataclass
class RunConfig:
    # run layout
    workdir: str = "runs/toy"
    human_path: str | None = None
    n_human: int = 120
    backend: str = "mock"
    teacher: str = "mock"
    judge: str = "mock"
    taxonomy: str = "binary"
    stages: tuple[str, ...] = STAGES
    seed: int = 0
    max_workers: int = 4

    # ablation switches
    use_sft: bool = True
    use_rl: bool = True
    use_weighted: bool = True
    use_selection: bool = True
    use_cot: bool = True

    # corpus
    intervention_rate: float = 0.2
    length_tolerance: float = 0.2

    # reasoning augmentation
    augment_retries: int = 2

    # supervised training
    lam: float = 2.0
    sft_epochs: int = 12
    sft_batch: int = 8
    sft_lr: float = 1e-2

    # selection
    k: int = 8
    temperature: float = 1.0
    random_n: int | None = None

    # reinforcement learning
    g: int = 8
    eps_low: float = 0.2
    eps_high: float = 0.28
    rl_steps: int = 300
    rl_prompts_per_step: int = 8
    rl_lr: float = 3e-2
    max_tokens: int = 48

    # evaluation and the direct scoring head
    eval_fraction: float = 0.25
    fast_epochs: int = 6
    fast_lr: float = 5e-2

    def to_dict(self) -> dict:
        data = asdict(self)
        data["stages"] = list(self.stages)
        return data


def _require(condition: bool, field: str, message: str) -> None:
    if not condition:
        raise ConfigError(f"config field {field!r}: {message}")


def validate(cfg: RunConfig) -> RunConfig:
    _require(cfg.taxonomy in ("binary", "three"), "taxonomy", "must be 'binary' or 'three'")
    unknown = [s for s in cfg.stages if s not in STAGES]
    _require(not unknown, "stages", f"unknown stage(s) {unknown}; valid: {list(STAGES)}")
    _require(cfg.n_human > 0, "n_human", "must be positive")
    _require(0.0 <= cfg.intervention_rate <= 1.0, "intervention_rate", "must be in [0, 1]")
    _require(0.0 < cfg.length_tolerance < 1.0, "length_tolerance", "must be in (0, 1)")
    _require(cfg.lam >= 1.0, "lambda", "must be >= 1")
    _require(cfg.k >= 2, "k", "must be >= 2")
    _require(cfg.g >= 2, "g", "must be >= 2")
    _require(0.0 < cfg.eps_low < 1.0, "eps_low", "must be in (0, 1)")
    _require(cfg.eps_high > 0.0, "eps_high", "must be > 0")
    _require(cfg.temperature > 0.0, "temperature", "must be > 0")
    _require(cfg.sft_epochs >= 0, "sft_epochs", "must be >= 0")
    _require(cfg.sft_batch >= 1, "sft_batch", "must be >= 1")
    _require(cfg.sft_lr > 0, "sft_lr", "must be > 0")
    _require(cfg.rl_steps >= 0, "rl_steps", "must be >= 0")
    _require(cfg.rl_prompts_per_step >= 1, "rl_prompts_per_step", "must be >= 1")
    _require(cfg.rl_lr > 0, "rl_lr", "must be > 0")
    _require(cfg.max_tokens >= 8, "max_tokens", "must be >= 8")
    _require(0.0 < cfg.eval_fraction < 1.0, "eval_fraction", "must be in (0, 1)")
    _require(cfg.fast_epochs >= 0, "fast_epochs", "must be >= 0")
    _require(cfg.augment_retries >= 0, "augment_retries", "must be >= 0")
    _require(cfg.max_workers >= 1, "max_workers", "must be >= 1")
    _require(cfg.random_n is None or cfg.random_n >= 1, "random_n", "must be >= 1 when set")
    return cfg


def from_dict(data: dict) -> RunConfig:
    """Build and validate a config from a plain mapping."""
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"config root must be a mapping, got {type(data).__name__}")
    known = {f.name for f in fields(RunConfig)}
    kwargs = {}
    for key, value in data.items():
        name = _ALIASES.get(key, key)
        if name not in known:
            raise ConfigError(f"config field {key!r}: unknown setting")
        if name == "stages":
            if not isinstance(value, (list, tuple)):
                raise ConfigError("config field 'stages': must be a list")
            value = tuple(value)
        kwargs[name] = value
    try:
        cfg = RunConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"invalid config: {exc}") from exc
    return validate(cfg)


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config file {path} is not valid YAML: {exc}") from exc
    return from_dict(data)


def dump_config(cfg: RunConfig) -> dict:
    """Canonical fully populated form, suitable for hashing and manifests."""
    return cfg.to_dict()
