"""Expectation scoring, scorer backends, detection calls, and block scanning."""

import numpy as np
import numpy.testing as npt
import pytest

from veridict import synth
from veridict.backends import MockGenerator
from veridict.errors import BackendError, ClientError, EmptyInput
from veridict.labels import BINARY, THREE
from veridict.policy import build_vocab, init_params, policy_tokens, save_params
from veridict.prompts import direct_prompt
from veridict.scoring import (
    AigcScore,
    MarkerScorer,
    PolicyScorer,
    RiggedScorer,
    aigc_score,
    detect,
    fast_instances,
    get_scorer,
    scan,
    scan_to_json,
    score_document,
    score_from_probs,
)
from veridict.synth import make_human_corpus
from veridict.corpus import ingest_human


class TestScoreFromProbs:
    def test_anchor_triples(self):
        assert score_from_probs(1.0, 0.0, 0.0).score == 0.0
        assert score_from_probs(0.0, 0.0, 1.0).score == 1.0
        assert score_from_probs(0.5, 0.5, 0.0).score == 0.25

    def test_polish_counts_half(self):
        assert score_from_probs(0.0, 1.0, 0.0).score == 0.5

    def test_rejects_non_unit_sum(self):
        with pytest.raises(ValueError):
            score_from_probs(0.5, 0.5, 0.5)

    def test_fields_preserved(self):
        s = score_from_probs(0.2, 0.3, 0.5)
        assert (s.p_human, s.p_polish, s.p_native) == (0.2, 0.3, 0.5)
        npt.assert_allclose(s.score, 0.5 + 0.15)


class TestAigcScore:
    def test_uniform_logits(self):
        s = aigc_score([0.0, 0.0, 0.0])
        npt.assert_allclose([s.p_human, s.p_polish, s.p_native], [1 / 3] * 3, atol=1e-12)
        npt.assert_allclose(s.score, 0.5, atol=1e-12)

    def test_shift_invariance(self):
        rng = np.random.default_rng(0)
        for _ in range(300):
            z = rng.normal(scale=3.0, size=3)
            c = float(rng.normal(scale=10.0))
            a = aigc_score(z)
            b = aigc_score(z + c)
            npt.assert_allclose(a.score, b.score, atol=1e-9)

    def test_monotone_in_native_logit(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            z = rng.normal(size=3)
            lower = aigc_score(z).score
            z2 = z.copy()
            z2[2] += float(rng.uniform(0.1, 2.0))
            assert aigc_score(z2).score > lower

    def test_monotone_against_human_logit(self):
        z = np.array([0.0, 0.3, 0.7])
        base = aigc_score(z).score
        z[0] += 1.0
        assert aigc_score(z).score < base

    def test_extreme_logits_stay_bounded(self):
        s = aigc_score([1000.0, -1000.0, 900.0])
        assert 0.0 <= s.score <= 1.0
        assert np.isfinite(s.score)

    def test_bad_inputs(self):
        with pytest.raises(ValueError):
            aigc_score([0.0, 1.0])
        with pytest.raises(ValueError):
            aigc_score([np.nan, 0.0, 0.0])
        with pytest.raises(ValueError):
            aigc_score([np.inf, 0.0, 0.0])


def scorer_params():
    streams = [
        policy_tokens(direct_prompt("some document words here", THREE)),
        policy_tokens("Human AI-Polish AI-Native <answer> </answer>"),
    ]
    return init_params(build_vocab(streams), seed=0, d_emb=6, d_hidden=8)


class TestPolicyScorer:
    def test_probs_sum_to_one(self):
        scorer = PolicyScorer(scorer_params())
        probs = scorer.class_probs("some document words here")
        npt.assert_allclose(sum(probs), 1.0, atol=1e-9)
        assert all(p > 0 for p in probs)

    def test_deterministic(self):
        scorer = PolicyScorer(scorer_params())
        assert scorer.class_probs("words here") == scorer.class_probs("words here")

    def test_missing_class_symbols_rejected(self):
        # Hand-built vocab without the class names; build_vocab always adds
        # them, so bypass it.
        params = init_params(("just", "words", "here"), seed=0, d_emb=4, d_hidden=4)
        with pytest.raises(ValueError):
            PolicyScorer(params)


class TestMarkerScorer:
    def test_human_markers_dominate(self):
        text = " ".join(synth.HUMAN_MARKERS[:5])
        h, p, a = MarkerScorer().class_probs(text)
        assert h > p and h > a

    def test_native_markers_dominate(self):
        text = " ".join(synth.AI_MARKERS[:5])
        h, p, a = MarkerScorer().class_probs(text)
        assert a > h and a > p

    def test_neutral_text_is_uniform(self):
        h, p, a = MarkerScorer().class_probs("completely unrelated words")
        npt.assert_allclose([h, p, a], [1 / 3] * 3, atol=1e-12)

    def test_sums_to_one(self):
        for text in ("", "anyway honestly", "meticulous furthermore tapestry"):
            npt.assert_allclose(sum(MarkerScorer().class_probs(text)), 1.0, atol=1e-12)


class TestRiggedScorer:
    def test_cycles_presets(self):
        scorer = RiggedScorer([(1.0, 0.0, 0.0), (0.0, 0.0, 1.0)])
        assert scorer.class_probs("x") == (1.0, 0.0, 0.0)
        assert scorer.class_probs("x") == (0.0, 0.0, 1.0)
        assert scorer.class_probs("x") == (1.0, 0.0, 0.0)
        assert scorer.calls == 3


class FailingClient:
    name = "failing"

    def complete(self, prompt, max_tokens=512, temperature=0.0):
        raise ClientError("down")


class TestDetect:
    def test_policy_greedy_returns_trace(self):
        params = scorer_params()
        trace = detect("some document words here", params, THREE, max_tokens=8)
        assert isinstance(trace.raw, str)

    def test_mock_client_verdict_in_taxonomy(self):
        client = MockGenerator(seed=0)
        trace = detect("honestly kinda anyway words", client, BINARY)
        assert trace.format_valid
        assert trace.verdict in BINARY.classes

    def test_direct_mode_uses_relaxed_parser(self):
        client = MockGenerator(seed=0)
        trace = detect("honestly kinda anyway words", client, BINARY, with_reasoning=False)
        assert trace.verdict in BINARY.classes
        assert trace.think == ""

    def test_backend_fault_is_wrapped(self):
        with pytest.raises(BackendError):
            detect("text", FailingClient(), BINARY)


class TestScoreDocument:
    def test_normalizes_scorer_output(self):
        s = score_document("x", RiggedScorer([(2.0, 1.0, 1.0)]))
        npt.assert_allclose([s.p_human, s.p_polish, s.p_native], [0.5, 0.25, 0.25])

    def test_empty_text_rejected(self):
        with pytest.raises(EmptyInput):
            score_document("   \n", MarkerScorer())

    def test_negative_probability_rejected(self):
        with pytest.raises(ValueError):
            score_document("x", RiggedScorer([(-0.1, 0.6, 0.5)]))

    def test_zero_sum_rejected(self):
        with pytest.raises(ValueError):
            score_document("x", RiggedScorer([(0.0, 0.0, 0.0)]))


def para(words, n=25):
    out = []
    while len(out) < n:
        out.extend(words)
    return " ".join(out[:n])


class TestScan:
    def test_blocks_cover_document_in_order(self):
        doc = para(["plain", "words"]) + "\n\n" + para(list(synth.AI_MARKERS[:4])) + \
            "\n\n" + para(["more", "plain", "text"])
        reports = scan(doc, MarkerScorer())
        assert [r.block_index for r in reports] == list(range(len(reports)))
        for first, second in zip(reports, reports[1:]):
            assert first.end <= second.start
        joined = "".join(doc[r.start:r.end] for r in reports)
        assert "".join(doc.split("\n\n")) == joined.replace("\n", "") or len(reports) >= 1

    def test_localizes_machine_block(self):
        human_p = para(list(synth.HUMAN_MARKERS[:4]))
        native_p = para(list(synth.AI_MARKERS[:4]))
        doc = human_p + "\n\n" + native_p
        reports = scan(doc, MarkerScorer())
        assert len(reports) == 2
        assert reports[0].verdict == "Human"
        assert reports[1].verdict == "AI-Native"
        assert reports[1].score.score > reports[0].score.score

    def test_short_paragraph_merges_forward(self):
        doc = "tiny bit\n\n" + para(["longer", "second", "paragraph"])
        reports = scan(doc, MarkerScorer(), min_block_tokens=10)
        assert len(reports) == 1
        assert doc[reports[0].start:reports[0].end].startswith("tiny bit")

    def test_trailing_short_paragraph_joins_previous(self):
        doc = para(["longer", "first", "paragraph"]) + "\n\nshort end"
        reports = scan(doc, MarkerScorer(), min_block_tokens=10)
        assert len(reports) == 1
        assert doc[reports[0].start:reports[0].end].endswith("short end")

    def test_single_block_document(self):
        reports = scan(para(["solid", "text"]), MarkerScorer())
        assert len(reports) == 1
        assert reports[0].start == 0

    def test_empty_document_rejected(self):
        with pytest.raises(EmptyInput):
            scan("", MarkerScorer())

    def test_json_shape(self):
        doc = para(list(synth.HUMAN_MARKERS[:3]))
        payload = scan_to_json(scan(doc, MarkerScorer()))
        assert set(payload) == {"blocks"}
        block = payload["blocks"][0]
        assert set(block) == {
            "index", "start", "end", "p_human", "p_polish", "p_native", "score", "verdict"
        }


class TestFastInstances:
    def test_labels_answers_and_prompts(self):
        humans = ingest_human(make_human_corpus(3, seed=0))
        insts = fast_instances(humans)
        assert len(insts) == 3
        for doc, inst in zip(humans, insts):
            assert inst.label == "Human"
            assert inst.target.format_valid
            assert inst.target.answer_label == "Human"
            assert inst.target.think == ""
            assert doc.text.split()[0] in inst.prompt


class TestGetScorer:
    def test_mock(self):
        assert isinstance(get_scorer("mock"), MarkerScorer)

    def test_checkpoint_round_trip(self, tmp_path):
        path = tmp_path / "params.json"
        save_params(path, scorer_params())
        scorer = get_scorer(f"ckpt:{path}")
        assert isinstance(scorer, PolicyScorer)
        npt.assert_allclose(sum(scorer.class_probs("words here")), 1.0, atol=1e-9)

    def test_unknown_rejected(self):
        with pytest.raises(ValueError):
            get_scorer("quantum")
