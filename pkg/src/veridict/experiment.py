"""End-to-end pipeline orchestration.

Runs the stage DAG corpus -> augment -> sft -> select -> rl -> eval ->
calibrate from one validated config, records provenance in a manifest, and
leaves every artifact in the run directory. Stages not listed in the config
are loaded from disk instead of recomputed, so partial reruns work.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np

from . import synth
from .backends import get_client
from .config import RunConfig
from .corpus import (
    Document,
    build_corpus,
    check_corpus,
    corpus_stats,
    ingest_human,
    read_corpus,
    write_corpus,
)
from .dapo import ClipConfig, detection_reward_fn, train_rl
from .errors import ConfigError
from .evaluate import calibration_table, evaluate
from .labels import gold_class, taxonomy_by_name, THREE
from .manifest import RunManifest
from .policy import (
    PolicyParams,
    build_vocab,
    init_params,
    load_params,
    params_digest,
    policy_tokens,
    save_params,
)
from .reasoning import augment_dataset, read_sft_dataset, write_sft_dataset
from .scoring import PolicyScorer, detect, fast_instances, score_from_probs
from .seeding import derive_rng, derive_seed
from .selection import random_select, select, write_records
from .sft import train_sft

logger = logging.getLogger("veridict.experiment")

#: Run-directory artifact names.
FILES = {
    "corpus": "corpus.jsonl",
    "stats": "stats.json",
    "sft_data": "sft_data.jsonl",
    "selected": "selected_ids.json",
    "records": "selection_records.jsonl",
    "ckpt_init": "ckpt_init.json",
    "ckpt_sft": "ckpt_sft.json",
    "ckpt_rl": "ckpt_rl.json",
    "ckpt_fast": "ckpt_fast.json",
    "sft_log": "sft_log.csv",
    "rl_log": "rl_log.csv",
    "predictions": "predictions.jsonl",
    "result": "result.json",
    "result_untrained": "result_untrained.json",
    "result_sft_only": "result_sft_only.json",
    "scored": "scored.jsonl",
    "calibration": "calibration.json",
}


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def split_corpus(
    corpus: list[Document], eval_fraction: float, seed: int
) -> tuple[list[Document], list[Document]]:
    """Split by human-reference family so paired documents never straddle
    the train/eval boundary."""
    roots = sorted({doc.human_ref_id or doc.id for doc in corpus})
    rng = derive_rng(seed, "split")
    order = rng.permutation(len(roots))
    n_eval = max(1, int(round(eval_fraction * len(roots))))
    eval_roots = {roots[int(i)] for i in order[:n_eval]}
    train = [d for d in corpus if (d.human_ref_id or d.id) not in eval_roots]
    held_out = [d for d in corpus if (d.human_ref_id or d.id) in eval_roots]
    return train, held_out


class Pipeline:
    """One run directory and the lazily materialized state inside it."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.workdir = Path(cfg.workdir)
        self.workdir.mkdir(parents=True, exist_ok=True)
        self.manifest = RunManifest(cfg)
        self.taxonomy = taxonomy_by_name(cfg.taxonomy)
        self.summary: dict = {"workdir": str(self.workdir)}
        self._corpus: list[Document] | None = None
        self._instances = None
        self._params: dict[str, PolicyParams] = {}

    def path(self, key: str) -> Path:
        return self.workdir / FILES[key]

    # ---- stage state accessors ------------------------------------------

    def corpus(self) -> list[Document]:
        if self._corpus is None:
            path = self.path("corpus")
            if not path.exists():
                raise ConfigError(f"corpus stage skipped but {path} is missing")
            self._corpus = read_corpus(path)
        return self._corpus

    def splits(self) -> tuple[list[Document], list[Document]]:
        return split_corpus(self.corpus(), self.cfg.eval_fraction, self.cfg.seed)

    def instances(self):
        if self._instances is None:
            path = self.path("sft_data")
            if not path.exists():
                raise ConfigError(f"augment stage skipped but {path} is missing")
            self._instances = read_sft_dataset(path, self.taxonomy)
        return self._instances

    def params(self, key: str) -> PolicyParams:
        if key not in self._params:
            path = self.path(key)
            if not path.exists():
                raise ConfigError(f"checkpoint {path} is missing")
            self._params[key] = load_params(path)
        return self._params[key]

    def _save_ckpt(self, key: str, params: PolicyParams) -> None:
        save_params(self.path(key), params)
        self._params[key] = params
        self.manifest.record_checkpoint(FILES[key], params_digest(params))
        self.manifest.record_artifact(self.path(key))

    # ---- stages ---------------------------------------------------------

    def stage_corpus(self) -> None:
        cfg = self.cfg
        seed = self.manifest.stage_seed("corpus")
        if cfg.human_path:
            records = synth.read_jsonl(cfg.human_path)
        else:
            records = synth.make_human_corpus(cfg.n_human, seed=derive_seed(cfg.seed, "human"))
        humans = ingest_human(records)
        if not humans:
            raise ConfigError("no human documents survived ingestion")
        client = get_client(cfg.backend, seed=seed)
        docs = build_corpus(
            humans,
            client,
            intervention_rate=cfg.intervention_rate,
            length_tolerance=cfg.length_tolerance,
            seed=seed,
            max_workers=cfg.max_workers,
        )
        check_corpus(docs)
        write_corpus(self.path("corpus"), docs)
        _write_json(self.path("stats"), corpus_stats(docs))
        self.manifest.record_artifact(self.path("corpus"))
        self.manifest.record_artifact(self.path("stats"))
        self._corpus = docs
        self.summary["corpus_size"] = len(docs)

    def stage_augment(self) -> None:
        cfg = self.cfg
        seed = self.manifest.stage_seed("augment")
        teacher = get_client(cfg.teacher, seed=seed)
        train_docs, _ = self.splits()
        instances = augment_dataset(
            train_docs,
            teacher,
            self.taxonomy,
            retries=cfg.augment_retries,
            max_workers=cfg.max_workers,
        )
        if not instances:
            raise ConfigError("reasoning augmentation produced no usable instances")
        write_sft_dataset(self.path("sft_data"), instances)
        self.manifest.record_artifact(self.path("sft_data"))
        self._instances = instances
        self.summary["sft_instances"] = len(instances)

    def _ensure_init(self) -> PolicyParams:
        if self.path("ckpt_init").exists():
            return self.params("ckpt_init")
        streams = [policy_tokens(doc.text) for doc in self.corpus()]
        sample_doc = self.corpus()[0].text if self.corpus() else ""
        from .prompts import detection_prompt, direct_prompt

        streams.append(policy_tokens(detection_prompt(sample_doc, self.taxonomy)))
        streams.append(policy_tokens(detection_prompt("", THREE)))
        streams.append(policy_tokens(direct_prompt("", THREE)))
        for inst in self.instances():
            streams.append(policy_tokens(inst.target.raw))
        vocab = build_vocab(streams)
        params = init_params(vocab, seed=derive_seed(self.cfg.seed, "init"))
        self._save_ckpt("ckpt_init", params)
        self.summary["vocab_size"] = len(vocab)
        return params

    def stage_sft(self) -> None:
        cfg = self.cfg
        seed = self.manifest.stage_seed("sft")
        init = self._ensure_init()
        if not cfg.use_sft:
            logger.info("use_sft=false: supervised stage skipped")
            return
        lam = cfg.lam if cfg.use_weighted else 1.0
        params = train_sft(
            init,
            self.instances(),
            lam=lam,
            epochs=cfg.sft_epochs,
            batch_size=cfg.sft_batch,
            lr=cfg.sft_lr,
            seed=seed,
            log_path=self.path("sft_log"),
        )
        self._save_ckpt("ckpt_sft", params)
        self.manifest.record_artifact(self.path("sft_log"))

    def _rl_start_params(self) -> PolicyParams:
        if self.cfg.use_sft and self.path("ckpt_sft").exists():
            return self.params("ckpt_sft")
        return self._ensure_init()

    def stage_select(self) -> None:
        cfg = self.cfg
        seed = self.manifest.stage_seed("select")
        instances = self.instances()
        fallback = False
        if cfg.use_selection:
            retained, records = select(
                instances,
                self._rl_start_params(),
                self.taxonomy,
                k=cfg.k,
                temperature=cfg.temperature,
                seed=seed,
                max_tokens=cfg.max_tokens,
                max_workers=cfg.max_workers,
            )
            write_records(self.path("records"), records)
            self.manifest.record_artifact(self.path("records"))
            if not retained:
                fallback = True
                retained = random_select(instances, min(32, len(instances)), seed)
                logger.warning(
                    "selection kept nothing; falling back to %d random prompts", len(retained)
                )
        else:
            retained = random_select(instances, cfg.random_n or len(instances), seed)
        _write_json(
            self.path("selected"),
            {"ids": retained, "selection_fallback": fallback, "mode":
                "variance" if cfg.use_selection else "random"},
        )
        self.manifest.record_artifact(self.path("selected"))
        self.summary["rl_prompts"] = len(retained)
        self.summary["selection_fallback"] = fallback

    def _rl_dataset(self):
        path = self.path("selected")
        instances = self.instances()
        if not path.exists():
            return instances
        with open(path, "r", encoding="utf-8") as fh:
            retained = set(json.load(fh)["ids"])
        picked = [inst for inst in instances if inst.doc_id in retained]
        return picked or instances

    def stage_rl(self) -> None:
        cfg = self.cfg
        if not cfg.use_rl:
            logger.info("use_rl=false: reinforcement stage skipped")
            return
        seed = self.manifest.stage_seed("rl")
        judge = get_client(cfg.judge, seed=derive_seed(cfg.seed, "judge"))
        doc_texts = {doc.id: doc.text for doc in self.corpus()}
        reward_fn = detection_reward_fn(doc_texts, judge)
        params, history = train_rl(
            self._rl_start_params(),
            self._rl_dataset(),
            self.taxonomy,
            reward_fn,
            steps=cfg.rl_steps,
            prompts_per_step=cfg.rl_prompts_per_step,
            g=cfg.g,
            cfg=ClipConfig(cfg.eps_low, cfg.eps_high),
            lr=cfg.rl_lr,
            temperature=cfg.temperature,
            max_tokens=cfg.max_tokens,
            seed=seed,
            log_path=self.path("rl_log"),
        )
        self._save_ckpt("ckpt_rl", params)
        self.manifest.record_artifact(self.path("rl_log"))
        if history:
            self.summary["rl_first_reward"] = history[0]["mean_total"]
            self.summary["rl_last_reward"] = history[-1]["mean_total"]
            self.summary["rl_final_violation_rate"] = history[-1]["format_violation_rate"]

    def final_params(self) -> PolicyParams:
        for key in ("ckpt_rl", "ckpt_sft", "ckpt_init"):
            if self.path(key).exists():
                return self.params(key)
        return self._ensure_init()

    def _predict(self, params: PolicyParams, docs: list[Document]) -> list[dict]:
        rows = []
        for doc in docs:
            trace = detect(
                doc.text,
                params,
                self.taxonomy,
                with_reasoning=self.cfg.use_cot,
                temperature=0.0,
                max_tokens=self.cfg.max_tokens,
            )
            rows.append(
                {
                    "doc_id": doc.id,
                    "gold": gold_class(doc.label, self.taxonomy),
                    "pred": trace.verdict,
                }
            )
        return rows

    def _eval_variant(self, params: PolicyParams, docs: list[Document], out_key: str) -> float:
        rows = self._predict(params, docs)
        result = evaluate([(r["gold"], r["pred"]) for r in rows], self.taxonomy)
        payload = result.to_json()
        payload["manifest_config_hash"] = self.manifest.config_hash
        _write_json(self.path(out_key), payload)
        self.manifest.record_artifact(self.path(out_key))
        if out_key == "result":
            with open(self.path("predictions"), "w", encoding="utf-8") as fh:
                for row in rows:
                    fh.write(json.dumps(row, sort_keys=True) + "\n")
            self.manifest.record_artifact(self.path("predictions"))
        return result.accuracy

    def stage_eval(self) -> None:
        _, eval_docs = self.splits()
        if not eval_docs:
            raise ConfigError("evaluation split is empty; lower eval_fraction")
        self.summary["eval_size"] = len(eval_docs)
        self.summary["accuracy_final"] = self._eval_variant(
            self.final_params(), eval_docs, "result"
        )
        self.summary["accuracy_untrained"] = self._eval_variant(
            self._ensure_init(), eval_docs, "result_untrained"
        )
        if self.cfg.use_sft and self.path("ckpt_sft").exists():
            self.summary["accuracy_sft_only"] = self._eval_variant(
                self.params("ckpt_sft"), eval_docs, "result_sft_only"
            )

    def stage_calibrate(self) -> None:
        cfg = self.cfg
        seed = self.manifest.stage_seed("calibrate")
        train_docs, eval_docs = self.splits()
        fast_data = fast_instances(train_docs)
        fast_params = train_sft(
            self._ensure_init(),
            fast_data,
            lam=1.0,
            epochs=cfg.fast_epochs,
            batch_size=cfg.sft_batch,
            lr=cfg.fast_lr,
            seed=seed,
        )
        self._save_ckpt("ckpt_fast", fast_params)
        scorer = PolicyScorer(fast_params)
        scored = []
        rows = []
        binary = self.taxonomy.name == "binary"
        for doc in eval_docs:
            probs = scorer.class_probs(doc.text)
            score = score_from_probs(*probs)
            gold = gold_class(doc.label, self.taxonomy)
            scored.append((score, gold))
            rows.append(
                {
                    "doc_id": doc.id,
                    "p_human": score.p_human,
                    "p_polish": score.p_polish,
                    "p_native": score.p_native,
                    "score": score.score,
                    "gold": gold,
                }
            )
        table = calibration_table(scored, self.taxonomy if binary else THREE)
        payload = table.to_json()
        payload["manifest_config_hash"] = self.manifest.config_hash
        _write_json(self.path("calibration"), payload)
        with open(self.path("scored"), "w", encoding="utf-8") as fh:
            for row in rows:
                fh.write(json.dumps(row, sort_keys=True) + "\n")
        self.manifest.record_artifact(self.path("calibration"))
        self.manifest.record_artifact(self.path("scored"))

    # ---- driver ---------------------------------------------------------

    def run(self) -> dict:
        stage_fns = {
            "corpus": self.stage_corpus,
            "augment": self.stage_augment,
            "sft": self.stage_sft,
            "select": self.stage_select,
            "rl": self.stage_rl,
            "eval": self.stage_eval,
            "calibrate": self.stage_calibrate,
        }
        for stage in self.cfg.stages:
            logger.info("stage %s starting", stage)
            stage_fns[stage]()
            self.manifest.mark(stage)
        self.manifest.write(self.workdir)
        self.summary["manifest_config_hash"] = self.manifest.config_hash
        return self.summary


def run_experiment(cfg: RunConfig) -> dict:
    """Execute the configured stages; returns the run summary."""
    return Pipeline(cfg).run()
