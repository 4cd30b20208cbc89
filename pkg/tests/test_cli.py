"""Command-line interface: exit codes, artifacts, and the stage chain."""

import json

import pytest

from veridict import synth
from veridict.cli import dispatch


def run_cli(*argv):
    return dispatch(list(argv))


@pytest.fixture(scope="module")
def human_jsonl(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "human.jsonl"
    synth.write_jsonl(path, synth.make_human_corpus(4, seed=11))
    return path


@pytest.fixture(scope="module")
def corpus_jsonl(tmp_path_factory, human_jsonl):
    out = tmp_path_factory.mktemp("cli") / "corpus.jsonl"
    rc = run_cli(
        "build-corpus", "--human", str(human_jsonl), "--out", str(out),
        "--seed", "0", "--max-workers", "2",
    )
    assert rc == 0
    return out


@pytest.fixture(scope="module")
def sft_data_jsonl(tmp_path_factory, corpus_jsonl):
    out = tmp_path_factory.mktemp("cli") / "sft_data.jsonl"
    rc = run_cli(
        "augment-reasoning", "--corpus", str(corpus_jsonl), "--out", str(out),
        "--seed", "0", "--max-workers", "2",
    )
    assert rc == 0
    return out


@pytest.fixture(scope="module")
def sft_ckpt(tmp_path_factory, sft_data_jsonl):
    out = tmp_path_factory.mktemp("cli") / "ckpt_sft.json"
    rc = run_cli(
        "sft", "--data", str(sft_data_jsonl), "--out", str(out),
        "--epochs", "2", "--lr", "1e-2", "--seed", "0",
    )
    assert rc == 0
    return out


class TestParserBasics:
    def test_version_exits_zero(self):
        assert run_cli("--version") == 0

    def test_missing_command_is_usage_error(self):
        assert run_cli() == 2

    def test_unknown_command_is_usage_error(self):
        assert run_cli("frobnicate") == 2


class TestBuildCorpus:
    def test_writes_three_way_corpus(self, corpus_jsonl, human_jsonl):
        rows = synth.read_jsonl(corpus_jsonl)
        assert len(rows) == 3 * len(synth.read_jsonl(human_jsonl))
        labels = {r["label"] for r in rows}
        assert labels == {"Human", "AINative", "AIPolish"}

    def test_prints_stats_table(self, tmp_path, human_jsonl, capsys):
        out = tmp_path / "c.jsonl"
        assert run_cli("build-corpus", "--human", str(human_jsonl), "--out", str(out)) == 0
        printed = capsys.readouterr().out
        assert "Human" in printed and "AI-Native" in printed

    def test_missing_human_file_fails_cleanly(self, tmp_path):
        rc = run_cli(
            "build-corpus", "--human", str(tmp_path / "absent.jsonl"),
            "--out", str(tmp_path / "c.jsonl"),
        )
        assert rc == 1


class TestAugment:
    def test_instances_cover_corpus(self, sft_data_jsonl, corpus_jsonl):
        rows = synth.read_jsonl(sft_data_jsonl)
        assert rows
        corpus_ids = {r["id"] for r in synth.read_jsonl(corpus_jsonl)}
        assert {r["doc_id"] for r in rows} <= corpus_ids
        for r in rows:
            assert "<answer>" in r["raw_target"]


class TestSft:
    def test_checkpoint_written(self, sft_ckpt):
        payload = json.loads(sft_ckpt.read_text())
        assert "vocab" in payload

    def test_log_csv(self, tmp_path, sft_data_jsonl):
        log = tmp_path / "log.csv"
        out = tmp_path / "ckpt.json"
        rc = run_cli(
            "sft", "--data", str(sft_data_jsonl), "--out", str(out),
            "--epochs", "1", "--log", str(log),
        )
        assert rc == 0
        assert log.read_text().startswith("epoch,")

    def test_missing_data_fails_cleanly(self, tmp_path):
        rc = run_cli("sft", "--data", str(tmp_path / "no.jsonl"), "--out", str(tmp_path / "o"))
        assert rc == 1


class TestSelect:
    def test_variance_mode(self, tmp_path, sft_data_jsonl, sft_ckpt):
        out = tmp_path / "selected.jsonl"
        rc = run_cli(
            "select-rl", "--data", str(sft_data_jsonl), "--ckpt", str(sft_ckpt),
            "--out", str(out), "--k", "2", "--max-tokens", "16",
        )
        assert rc == 0
        assert out.exists()
        assert (tmp_path / "selected.jsonl.records.jsonl").exists()

    def test_random_mode(self, tmp_path, sft_data_jsonl):
        out = tmp_path / "subset.jsonl"
        rc = run_cli(
            "select-rl", "--data", str(sft_data_jsonl), "--mode", "random", "--n", "2",
            "--out", str(out),
        )
        assert rc == 0
        assert len(synth.read_jsonl(out)) == 2

    def test_random_mode_requires_n(self, tmp_path, sft_data_jsonl):
        rc = run_cli(
            "select-rl", "--data", str(sft_data_jsonl), "--mode", "random",
            "--out", str(tmp_path / "s.jsonl"),
        )
        assert rc == 1


class TestRl:
    def test_short_run_writes_checkpoint(self, tmp_path, sft_data_jsonl, sft_ckpt, corpus_jsonl):
        out = tmp_path / "ckpt_rl.json"
        log = tmp_path / "rl.csv"
        rc = run_cli(
            "rl", "--data", str(sft_data_jsonl), "--ckpt", str(sft_ckpt),
            "--out", str(out), "--steps", "2", "--g", "2", "--prompts-per-step", "2",
            "--max-tokens", "16", "--corpus", str(corpus_jsonl), "--log", str(log),
        )
        assert rc == 0
        assert json.loads(out.read_text())["vocab"]
        assert log.read_text().startswith("step,")


class TestEval:
    def test_stdout_metrics(self, tmp_path, capsys):
        pred = tmp_path / "pred.jsonl"
        synth.write_jsonl(
            pred,
            [
                {"gold": "Human", "pred": "Human"},
                {"gold": "AI", "pred": "Human"},
                {"gold": "AI", "pred": "AI"},
                {"gold": "Human", "pred": None},
            ],
        )
        assert run_cli("eval", "--pred", str(pred), "--taxonomy", "binary") == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["n"] == 4
        assert abs(payload["accuracy"] - 0.5) < 1e-12

    def test_out_file(self, tmp_path):
        pred = tmp_path / "pred.jsonl"
        synth.write_jsonl(pred, [{"gold": "Human", "pred": "Human"}])
        out = tmp_path / "metrics.json"
        rc = run_cli("eval", "--pred", str(pred), "--taxonomy", "binary", "--out", str(out))
        assert rc == 0
        assert json.loads(out.read_text())["accuracy"] == 1.0

    def test_empty_predictions_fail(self, tmp_path):
        pred = tmp_path / "pred.jsonl"
        pred.write_text("")
        assert run_cli("eval", "--pred", str(pred), "--taxonomy", "binary") == 1


class TestScoreAndScan:
    def test_score_document(self, tmp_path, capsys):
        doc = tmp_path / "doc.txt"
        doc.write_text(" ".join(synth.AI_MARKERS[:6]), encoding="utf-8")
        assert run_cli("score", "--text", str(doc)) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["score"] > 0.5
        assert abs(payload["p_human"] + payload["p_polish"] + payload["p_native"] - 1) < 1e-9

    def test_scan_report(self, tmp_path):
        doc = tmp_path / "doc.txt"
        human_block = " ".join(list(synth.HUMAN_MARKERS[:5]) * 5)
        native_block = " ".join(list(synth.AI_MARKERS[:5]) * 5)
        doc.write_text(human_block + "\n\n" + native_block, encoding="utf-8")
        out = tmp_path / "report.json"
        assert run_cli("scan", "--text", str(doc), "--out", str(out)) == 0
        payload = json.loads(out.read_text())
        assert len(payload["blocks"]) == 2
        assert payload["blocks"][0]["verdict"] == "Human"
        assert payload["blocks"][1]["verdict"] == "AI-Native"

    def test_score_empty_file_fails(self, tmp_path):
        doc = tmp_path / "empty.txt"
        doc.write_text("  \n")
        assert run_cli("score", "--text", str(doc)) == 1


class TestCalibrate:
    def test_table_from_scored_jsonl(self, tmp_path, capsys):
        scored = tmp_path / "scored.jsonl"
        synth.write_jsonl(
            scored,
            [
                {"p_human": 1.0, "p_polish": 0.0, "p_native": 0.0, "gold": "Human"},
                {"p_human": 0.0, "p_polish": 0.0, "p_native": 1.0, "gold": "AI-Native"},
            ],
        )
        assert run_cli("calibrate", "--scored", str(scored)) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["n"] == 2
        assert payload["bins"][0]["count"] == 1
        assert payload["bins"][9]["count"] == 1


class TestRun:
    def test_corpus_stage_via_config(self, tmp_path, capsys):
        workdir = tmp_path / "run"
        cfg = tmp_path / "cfg.yaml"
        cfg.write_text(
            f"workdir: {workdir}\nn_human: 3\nstages: [corpus]\nmax_workers: 2\n"
        )
        assert run_cli("run", "--config", str(cfg)) == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["corpus_size"] == 9
        assert (workdir / "corpus.jsonl").exists()
        assert (workdir / "manifest.json").exists()

    def test_missing_config_fails(self, tmp_path):
        assert run_cli("run", "--config", str(tmp_path / "none.yaml")) == 1
