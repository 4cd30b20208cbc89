"""Run manifests: what produced every artifact, and from which seeds.

The manifest is the only artifact allowed to contain wall-clock times;
everything else a run writes must be byte-identical across reruns of the
same config with mock backends.
"""

from __future__ import annotations

import hashlib
import json
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .config import RunConfig, dump_config
from .seeding import derive_seed

MANIFEST_NAME = "manifest.json"


def config_hash(cfg: RunConfig) -> str:
    canonical = json.dumps(dump_config(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def file_hash(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


class RunManifest:
    """Accumulates provenance while a pipeline runs, then serializes once."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.config_hash = config_hash(cfg)
        self.seeds: dict[str, int] = {}
        self.checkpoint_hashes: dict[str, str] = {}
        self.artifacts: dict[str, str] = {}
        self.timestamps: dict[str, str] = {}

    def stage_seed(self, stage: str) -> int:
        seed = derive_seed(self.cfg.seed, stage)
        self.seeds[stage] = seed
        return seed

    def mark(self, stage: str) -> None:
        self.timestamps[stage] = datetime.now(timezone.utc).isoformat()

    def record_artifact(self, path: str | Path) -> None:
        path = Path(path)
        self.artifacts[path.name] = file_hash(path)

    def record_checkpoint(self, name: str, digest: str) -> None:
        self.checkpoint_hashes[name] = digest

    def to_dict(self) -> dict:
        return {
            "tool_version": __version__,
            "config_hash": self.config_hash,
            "config": dump_config(self.cfg),
            "seeds": self.seeds,
            "checkpoint_hashes": self.checkpoint_hashes,
            "artifacts": self.artifacts,
            "timestamps": self.timestamps,
        }

    def write(self, workdir: str | Path) -> Path:
        path = Path(workdir) / MANIFEST_NAME
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        return path


def load_manifest(workdir: str | Path) -> dict:
    with open(Path(workdir) / MANIFEST_NAME, "r", encoding="utf-8") as fh:
        return json.load(fh)
