"""Command-line entry point.

One executable with a subcommand per pipeline stage plus scoring utilities.
Exit codes: 0 success, 1 domain error, 2 usage error. Logs are line-
delimited JSON on standard error; artifacts go wherever the flags say.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__, synth
from .backends import get_client
from .config import load_config
from .corpus import (
    build_corpus,
    check_corpus,
    corpus_stats,
    format_stats,
    ingest_human,
    read_corpus,
    write_corpus,
)
from .dapo import ClipConfig, detection_reward_fn, train_rl
from .errors import VeridictError
from .evaluate import calibration_table, evaluate
from .experiment import run_experiment
from .labels import taxonomy_by_name
from .policy import build_vocab, init_params, load_params, policy_tokens, save_params
from .reasoning import augment_dataset, read_sft_dataset, write_sft_dataset
from .scoring import get_scorer, scan, scan_to_json, score_document, score_from_probs
from .selection import random_select, select, write_records
from .sft import train_sft

logger = logging.getLogger("veridict.cli")


class _JsonFormatter(logging.Formatter):
    def format(self, record: logging.LogRecord) -> str:
        payload = {
            "ts": datetime.now(timezone.utc).isoformat(),
            "level": record.levelname,
            "logger": record.name,
            "msg": record.getMessage(),
        }
        return json.dumps(payload, ensure_ascii=False)


def _setup_logging(verbose: bool) -> None:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(_JsonFormatter())
    root = logging.getLogger()
    root.handlers[:] = [handler]
    root.setLevel(logging.DEBUG if verbose else logging.INFO)


def _emit(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True)
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


# ---- subcommand handlers -------------------------------------------------


def _cmd_build_corpus(args: argparse.Namespace) -> int:
    humans = ingest_human(synth.read_jsonl(args.human))
    if not humans:
        raise VeridictError("no human documents survived ingestion")
    client = get_client(args.backend, seed=args.seed)
    docs = build_corpus(
        humans,
        client,
        intervention_rate=args.intervention_rate,
        length_tolerance=args.length_tol,
        seed=args.seed,
        max_workers=args.max_workers,
    )
    check_corpus(docs)
    write_corpus(args.out, docs)
    print(format_stats(corpus_stats(docs)))
    return 0


def _cmd_augment(args: argparse.Namespace) -> int:
    taxonomy = taxonomy_by_name(args.taxonomy)
    corpus = read_corpus(args.corpus)
    teacher = get_client(args.teacher, seed=args.seed)
    instances = augment_dataset(
        corpus, teacher, taxonomy, retries=args.retries, max_workers=args.max_workers
    )
    write_sft_dataset(args.out, instances)
    logger.info("wrote %d instances to %s", len(instances), args.out)
    return 0


def _cmd_sft(args: argparse.Namespace) -> int:
    taxonomy = taxonomy_by_name(args.taxonomy)
    dataset = read_sft_dataset(args.data, taxonomy)
    if args.init:
        params = load_params(args.init)
    else:
        streams = [policy_tokens(i.prompt) for i in dataset]
        streams += [policy_tokens(i.target.raw) for i in dataset]
        params = init_params(build_vocab(streams), seed=args.seed)
    params = train_sft(
        params,
        dataset,
        lam=args.lam,
        epochs=args.epochs,
        batch_size=args.batch,
        lr=args.lr,
        seed=args.seed,
        log_path=args.log,
    )
    save_params(args.out, params)
    return 0


def _cmd_select(args: argparse.Namespace) -> int:
    taxonomy = taxonomy_by_name(args.taxonomy)
    dataset = read_sft_dataset(args.data, taxonomy)
    if args.mode == "random":
        if args.n is None:
            raise VeridictError("--mode random requires --n")
        keep = set(random_select(dataset, args.n, seed=args.seed))
    else:
        params = load_params(args.ckpt)
        retained, records = select(
            dataset,
            params,
            taxonomy,
            k=args.k,
            temperature=args.temp,
            seed=args.seed,
            max_tokens=args.max_tokens,
            max_workers=args.max_workers,
        )
        write_records(str(args.out) + ".records.jsonl", records)
        keep = set(retained)
    subset = [inst for inst in dataset if inst.doc_id in keep]
    write_sft_dataset(args.out, subset)
    logger.info("retained %d/%d prompts", len(subset), len(dataset))
    return 0


def _cmd_rl(args: argparse.Namespace) -> int:
    taxonomy = taxonomy_by_name(args.taxonomy)
    dataset = read_sft_dataset(args.data, taxonomy)
    params = load_params(args.ckpt)
    judge = get_client(args.judge, seed=args.seed) if args.judge else None
    doc_texts = {}
    if args.corpus:
        doc_texts = {d.id: d.text for d in read_corpus(args.corpus)}
    reward_fn = detection_reward_fn(doc_texts, judge, use_consistency=judge is not None)
    params, _ = train_rl(
        params,
        dataset,
        taxonomy,
        reward_fn,
        steps=args.steps,
        prompts_per_step=args.prompts_per_step,
        g=args.g,
        cfg=ClipConfig(args.eps_low, args.eps_high),
        lr=args.lr,
        temperature=args.temp,
        max_tokens=args.max_tokens,
        seed=args.seed,
        log_path=args.log,
    )
    save_params(args.out, params)
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    taxonomy = taxonomy_by_name(args.taxonomy)
    rows = synth.read_jsonl(args.pred)
    if not rows:
        raise VeridictError(f"no predictions in {args.pred}")
    pairs = [(r["gold"], r.get("pred")) for r in rows]
    result = evaluate(pairs, taxonomy, unify=args.unify)
    _emit(result.to_json(), args.out)
    return 0


def _cmd_score(args: argparse.Namespace) -> int:
    text = Path(args.text).read_text(encoding="utf-8")
    scorer = get_scorer(args.backend)
    score = score_document(text, scorer)
    _emit(
        {
            "p_human": score.p_human,
            "p_polish": score.p_polish,
            "p_native": score.p_native,
            "score": score.score,
        },
        args.out,
    )
    return 0


def _cmd_scan(args: argparse.Namespace) -> int:
    text = Path(args.text).read_text(encoding="utf-8")
    scorer = get_scorer(args.backend)
    reports = scan(text, scorer, min_block_tokens=args.min_block)
    _emit(scan_to_json(reports), args.out)
    return 0


def _cmd_calibrate(args: argparse.Namespace) -> int:
    rows = synth.read_jsonl(args.scored)
    if not rows:
        raise VeridictError(f"no scored samples in {args.scored}")
    taxonomy = taxonomy_by_name(args.taxonomy) if args.taxonomy else None
    scored = [
        (score_from_probs(r["p_human"], r["p_polish"], r["p_native"]), r["gold"]) for r in rows
    ]
    table = calibration_table(scored, taxonomy)
    _emit(table.to_json(), args.out)
    return 0


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    summary = run_experiment(cfg)
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


# ---- parser --------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="veridict",
        description="Desk-scale AI-generated-text detection pipeline.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-corpus", help="expand human documents into the 3-way corpus")
    p.add_argument("--human", required=True, help="human source JSONL (id, text, domain, date)")
    p.add_argument("--backend", default="mock")
    p.add_argument("--out", required=True)
    p.add_argument("--intervention-rate", type=float, default=0.2)
    p.add_argument("--length-tol", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-workers", type=int, default=4)
    p.set_defaults(fn=_cmd_build_corpus)

    p = sub.add_parser("augment-reasoning", help="hindsight-teach reasoning targets")
    p.add_argument("--corpus", required=True)
    p.add_argument("--teacher", default="mock")
    p.add_argument("--taxonomy", choices=["binary", "three"], default="binary")
    p.add_argument("--out", required=True)
    p.add_argument("--retries", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-workers", type=int, default=4)
    p.set_defaults(fn=_cmd_augment)

    p = sub.add_parser("sft", help="outcome-weighted supervised training")
    p.add_argument("--data", required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=2.0)
    p.add_argument("--epochs", type=int, default=12)
    p.add_argument("--batch", type=int, default=8)
    p.add_argument("--lr", type=float, default=1e-2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--init", help="starting checkpoint (default: fresh init)")
    p.add_argument("--taxonomy", choices=["binary", "three"], default="binary")
    p.add_argument("--log", help="per-epoch CSV path")
    p.set_defaults(fn=_cmd_sft)

    p = sub.add_parser("select-rl", help="variance-filter prompts for RL")
    p.add_argument("--data", required=True)
    p.add_argument("--ckpt")
    p.add_argument("--k", type=int, default=8)
    p.add_argument("--temp", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--taxonomy", choices=["binary", "three"], default="binary")
    p.add_argument("--mode", choices=["variance", "random"], default="variance")
    p.add_argument("--n", type=int, help="subset size for --mode random")
    p.add_argument("--max-tokens", type=int, default=48)
    p.add_argument("--max-workers", type=int, default=4)
    p.set_defaults(fn=_cmd_select)

    p = sub.add_parser("rl", help="group-relative RL with decoupled clipping")
    p.add_argument("--data", required=True)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--g", type=int, default=8)
    p.add_argument("--eps-low", type=float, default=0.2)
    p.add_argument("--eps-high", type=float, default=0.28)
    p.add_argument("--lr", type=float, default=1e-2)
    p.add_argument("--steps", type=int, default=60)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--taxonomy", choices=["binary", "three"], default="binary")
    p.add_argument("--judge", default="mock", help="judge backend; empty string disables")
    p.add_argument("--corpus", help="corpus JSONL for judge grounding")
    p.add_argument("--temp", type=float, default=1.0)
    p.add_argument("--max-tokens", type=int, default=48)
    p.add_argument("--prompts-per-step", type=int, default=8)
    p.add_argument("--log", help="per-step reward CSV path")
    p.set_defaults(fn=_cmd_rl)

    p = sub.add_parser("eval", help="accuracy / macro-F1 over predictions")
    p.add_argument("--pred", required=True, help="JSONL with gold and pred fields")
    p.add_argument("--taxonomy", choices=["binary", "three"], required=True)
    p.add_argument("--unify", action="store_true", help="collapse labels to Human vs AI")
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("score", help="whole-document AI-degree score")
    p.add_argument("--text", required=True, help="path to a UTF-8 text file")
    p.add_argument("--backend", default="mock", help="mock or ckpt:<path>")
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_score)

    p = sub.add_parser("scan", help="block-wise document scan")
    p.add_argument("--text", required=True)
    p.add_argument("--backend", default="mock")
    p.add_argument("--out", default="report.json")
    p.add_argument("--min-block", type=int, default=20)
    p.set_defaults(fn=_cmd_scan)

    p = sub.add_parser("calibrate", help="bin scored samples into deciles")
    p.add_argument("--scored", required=True, help="JSONL with p_human/p_polish/p_native/gold")
    p.add_argument("--taxonomy", choices=["binary", "three"])
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_calibrate)

    p = sub.add_parser("run", help="run the configured pipeline end to end")
    p.add_argument("--config", required=True)
    p.set_defaults(fn=_cmd_run)

    return parser


def dispatch(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    _setup_logging(args.verbose)
    try:
        return args.fn(args)
    except VeridictError as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return 1
    except (OSError, ValueError, KeyError) as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return 1


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
