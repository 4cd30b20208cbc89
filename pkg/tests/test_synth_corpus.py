"""Synthetic corpus generation and the three-way expansion invariants."""

import json

import numpy as np
import pytest

from veridict import synth
from veridict.backends import MockGenerator, marker_counts
from veridict.corpus import (
    Document,
    build_corpus,
    check_corpus,
    corpus_stats,
    extract_meta,
    format_stats,
    generate_ai_native,
    generate_ai_polish,
    ingest_human,
    intervention_flag,
    read_corpus,
    write_corpus,
)
from veridict.errors import EmptyExtraction
from veridict.labels import Label
from veridict.tokenizer import count_tokens


def _records(n=6, seed=0):
    return synth.make_human_corpus(n, seed=seed)


class TestSynthHumans:
    def test_deterministic(self):
        a = synth.make_human_corpus(5, seed=3)
        b = synth.make_human_corpus(5, seed=3)
        assert a == b

    def test_seed_changes_text(self):
        a = synth.make_human_corpus(5, seed=3)
        b = synth.make_human_corpus(5, seed=4)
        assert a != b

    def test_all_dates_before_cutoff(self):
        for rec in _records(30):
            assert rec["date"] < synth.CUTOFF_DATE

    def test_tails_carry_human_markers(self):
        for rec in _records(20):
            tail = " ".join(rec["text"].split()[-6:])
            h, p, a = marker_counts(tail)
            assert h >= 3
            assert p == 0 and a == 0

    def test_token_budget(self):
        for rec in _records(30):
            assert 40 <= count_tokens(rec["text"]) <= 110


class TestIngest:
    def test_clean_records_all_pass(self):
        docs = ingest_human(_records(8))
        assert len(docs) == 8
        assert all(d.label is Label.HUMAN for d in docs)
        assert all(d.published_before_cutoff for d in docs)

    def test_duplicate_id_dropped(self):
        recs = _records(2)
        recs.append(dict(recs[0]))
        assert len(ingest_human(recs)) == 2

    def test_missing_id_dropped(self):
        recs = _records(1)
        recs[0].pop("id")
        assert ingest_human(recs) == []

    def test_empty_text_dropped(self):
        recs = _records(1)
        recs[0]["text"] = ""
        assert ingest_human(recs) == []

    def test_unknown_domain_dropped(self):
        recs = _records(1)
        recs[0]["domain"] = "astrology"
        assert ingest_human(recs) == []

    def test_cutoff_is_fail_closed(self):
        recs = _records(4)
        recs[0]["date"] = synth.CUTOFF_DATE          # boundary: rejected
        recs[1]["date"] = "2023-01-01"               # after: rejected
        recs[2]["date"] = "not a date"               # malformed: rejected
        recs[3].pop("date")                          # missing: rejected
        assert ingest_human(recs) == []

    def test_day_before_cutoff_passes(self):
        recs = _records(1)
        recs[0]["date"] = "2022-11-29"
        assert len(ingest_human(recs)) == 1


class TestGeneration:
    def setup_method(self):
        self.client = MockGenerator(seed=5)
        self.humans = ingest_human(_records(6))

    def test_extract_meta_round_trip(self):
        meta = extract_meta(self.humans[0], self.client)
        assert meta.ref_id == self.humans[0].id
        assert meta.target_token_count == self.humans[0].token_count
        assert meta.topic_summary

    def test_extract_meta_rejects_garbage_reply(self):
        class Garbage:
            name = "garbage"

            def complete(self, prompt, max_tokens=512, temperature=0.0):
                return "not json at all"

        with pytest.raises(EmptyExtraction):
            extract_meta(self.humans[0], Garbage())

    def test_native_length_alignment(self):
        meta = extract_meta(self.humans[0], self.client)
        doc = generate_ai_native(meta, self.client, humanize=False)
        assert abs(doc.token_count - meta.target_token_count) <= 0.2 * meta.target_token_count
        assert doc.label is Label.AI_NATIVE
        assert doc.human_ref_id == self.humans[0].id
        assert not doc.published_before_cutoff

    def test_native_tail_is_ai_marked(self):
        meta = extract_meta(self.humans[1], self.client)
        doc = generate_ai_native(meta, self.client, humanize=False)
        h, p, a = marker_counts(" ".join(doc.text.split()[-6:]))
        assert a >= 3

    def test_humanize_mixes_human_markers_in(self):
        meta = extract_meta(self.humans[2], self.client)
        doc = generate_ai_native(meta, self.client, humanize=True)
        h, p, a = marker_counts(doc.text)
        assert doc.humanize_intervention
        assert h >= 1 and a >= 1

    def test_polish_verbatim_and_provenance(self):
        doc = generate_ai_polish(self.humans[3], self.client)
        assert doc.label is Label.AI_POLISH
        assert doc.id == f"{self.humans[3].id}:polish:{self.client.name}"
        assert doc.token_count == count_tokens(doc.text)

    def test_polish_refuses_non_human_input(self):
        doc = generate_ai_polish(self.humans[0], self.client)
        with pytest.raises(ValueError):
            generate_ai_polish(doc, self.client)


class TestInterventionFlag:
    def test_deterministic_per_id(self):
        assert intervention_flag(1, "h00001", 0.2) == intervention_flag(1, "h00001", 0.2)

    def test_rate_zero_and_one(self):
        assert not intervention_flag(1, "x", 0.0)
        assert intervention_flag(1, "x", 1.0)

    def test_fraction_near_rate(self):
        hits = sum(intervention_flag(9, f"d{i}", 0.2) for i in range(4000))
        assert abs(hits / 4000 - 0.2) < 0.02


class TestBuildCorpus:
    def setup_method(self):
        self.client = MockGenerator(seed=5)
        self.humans = ingest_human(_records(8, seed=2))
        self.corpus = build_corpus(self.humans, self.client, seed=4, max_workers=2)

    def test_three_per_human(self):
        assert len(self.corpus) == 3 * len(self.humans)
        by_label = {lab: 0 for lab in Label}
        for d in self.corpus:
            by_label[d.label] += 1
        assert len(set(by_label.values())) == 1

    def test_check_passes(self):
        check_corpus(self.corpus)

    def test_order_is_id_sorted(self):
        ids = [d.id for d in self.corpus]
        assert ids == sorted(ids)

    def test_deterministic_across_worker_counts(self):
        serial = build_corpus(self.humans, MockGenerator(seed=5), seed=4, max_workers=1)
        assert [d.to_dict() for d in serial] == [d.to_dict() for d in self.corpus]

    def test_stats_recount(self):
        stats = corpus_stats(self.corpus)
        assert set(stats) == {"Human", "AI-Native", "AI-Polish"}
        for name, row in stats.items():
            members = [d for d in self.corpus if d.label.value.replace("-", "") == name.replace("-", "")]
            assert row["samples"] == len(members)
            assert row["total_tokens"] == sum(d.token_count for d in members)
        rendered = format_stats(stats)
        assert "Human" in rendered

    def test_round_trip(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        write_corpus(path, self.corpus)
        back = read_corpus(path)
        assert [d.to_dict() for d in back] == [d.to_dict() for d in self.corpus]

    def test_serialized_rows_are_json(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        write_corpus(path, self.corpus)
        rows = [json.loads(line) for line in path.read_text().splitlines()]
        assert all("id" in r and "label" in r and "text" in r for r in rows)


class TestCheckCorpus:
    def test_detects_duplicate_ids(self):
        humans = ingest_human(_records(2))
        with pytest.raises(ValueError):
            check_corpus(humans + [humans[0]])

    def test_detects_bad_token_count(self):
        humans = ingest_human(_records(1))
        broken = Document(
            id=humans[0].id,
            domain=humans[0].domain,
            label=Label.HUMAN,
            text=humans[0].text,
            token_count=humans[0].token_count + 5,
            published_before_cutoff=True,
        )
        with pytest.raises(ValueError):
            check_corpus([broken])

    def test_detects_dangling_reference(self):
        client = MockGenerator(seed=5)
        humans = ingest_human(_records(2))
        corpus = build_corpus(humans, client, seed=4, max_workers=1)
        orphaned = [d for d in corpus if d.label is not Label.HUMAN]
        with pytest.raises(ValueError):
            check_corpus(orphaned)
