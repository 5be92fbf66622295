"""Review service over live HTTP: queue, decisions, durability, export."""

from __future__ import annotations

import json
import threading

import pytest
import requests

from synthqa.gateway import QnaPair
from synthqa.ingest import Chunk
from synthqa.review import (
    ReviewDataError,
    ReviewDecision,
    export_curated,
    load_decision_log,
    load_review_dataset,
    serve,
    write_review_dataset,
)


def sample_chunk(chunk_id="c0"):
    text = "Class III power supplies the safety-related auxiliaries of the plant."
    return Chunk(chunk_id=chunk_id, doc_id="doc", text=text, page_start=1, page_end=1,
                 section_path=("Power",), char_count=len(text))


def sample_pairs():
    def pair(pid, sim, status):
        return QnaPair(pair_id=pid, chunk_id="c0", question=f"Q {pid}?", answer=f"A {pid}.",
                       question_type="fundamental_recall", source_ref="doc, page 1",
                       similarity=sim, status=status)

    return [
        pair("p-low", 0.5, "flagged"),
        pair("p-mid", 0.79, "flagged"),
        pair("p-high", 0.92, "pending"),
    ]


@pytest.fixture
def dataset(tmp_path):
    path = write_review_dataset(
        tmp_path / "review_dataset.jsonl",
        chunks=[sample_chunk()],
        pairs=sample_pairs(),
        threshold=0.80,
        entropy_bits=4.25,
    )
    return path


class Client:
    def __init__(self, server):
        host, port = server.server_address[:2]
        self.base = f"http://{host}:{port}"

    def get(self, path, **kw):
        return requests.get(self.base + path, timeout=5, **kw)

    def post(self, path, body):
        return requests.post(self.base + path, json=body, timeout=5)


@pytest.fixture
def service(dataset, tmp_path):
    server = serve(dataset, tmp_path / "decisions.jsonl", bind_address="127.0.0.1:0")
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield Client(server)
    server.shutdown()


class TestQueue:
    def test_fresh_log_queue_is_all_flagged(self, service):
        body = service.get("/api/queue?status=flagged").json()
        assert body["total"] == 2
        assert [item["pair_id"] for item in body["items"]] == ["p-low", "p-mid"]

    def test_queue_sorted_by_similarity_ascending(self, service):
        body = service.get("/api/queue?status=all").json()
        assert [item["pair_id"] for item in body["items"]] == ["p-low", "p-mid", "p-high"]

    def test_queue_items_carry_excerpt_and_source(self, service):
        item = service.get("/api/queue").json()["items"][0]
        assert item["source_ref"] == "doc, page 1"
        assert item["chunk_excerpt"].startswith("Class III power")

    def test_decided_pair_leaves_pending_queues(self, service):
        service.post("/api/pairs/p-low/decision", {"verdict": "accept", "reviewer": "r"})
        flagged = service.get("/api/queue?status=flagged").json()
        assert [i["pair_id"] for i in flagged["items"]] == ["p-mid"]
        everything = service.get("/api/queue?status=all").json()
        assert {i["pair_id"]: i["status"] for i in everything["items"]}["p-low"] == "accepted"

    def test_pagination(self, service):
        page = service.get("/api/queue?status=all&offset=1&limit=1").json()
        assert page["total"] == 3
        assert [i["pair_id"] for i in page["items"]] == ["p-mid"]

    def test_unknown_status_rejected(self, service):
        assert service.get("/api/queue?status=everything").status_code == 422


class TestPairDetail:
    def test_full_chunk_text_included(self, service):
        body = service.get("/api/pairs/p-low").json()
        assert body["pair"]["pair_id"] == "p-low"
        assert body["chunk_text"].startswith("Class III power supplies")
        assert body["decision"] is None

    def test_unknown_pair_404(self, service):
        assert service.get("/api/pairs/nope").status_code == 404

    def test_detail_reflects_edit(self, service):
        service.post("/api/pairs/p-low/decision",
                     {"verdict": "edit", "edited_answer": "Better answer.", "reviewer": "r"})
        body = service.get("/api/pairs/p-low").json()
        assert body["pair"]["answer"] == "Better answer."
        assert body["pair"]["status"] == "edited"
        assert body["decision"]["verdict"] == "edit"


class TestDecisions:
    def test_accept_returns_recorded_decision(self, service):
        resp = service.post("/api/pairs/p-low/decision", {"verdict": "accept", "reviewer": "me"})
        assert resp.status_code == 200
        body = resp.json()
        assert body["pair_id"] == "p-low"
        assert body["decision_seq"] == 1
        assert body["timestamp"].endswith("Z")

    def test_edit_without_fields_422(self, service):
        resp = service.post("/api/pairs/p-low/decision", {"verdict": "edit", "reviewer": "r"})
        assert resp.status_code == 422

    def test_blank_edited_field_422(self, service):
        resp = service.post("/api/pairs/p-low/decision",
                            {"verdict": "edit", "edited_question": "   ", "reviewer": "r"})
        assert resp.status_code == 422

    def test_unknown_verdict_422(self, service):
        resp = service.post("/api/pairs/p-low/decision", {"verdict": "maybe", "reviewer": "r"})
        assert resp.status_code == 422

    def test_unknown_pair_404(self, service):
        resp = service.post("/api/pairs/ghost/decision", {"verdict": "accept", "reviewer": "r"})
        assert resp.status_code == 404

    def test_decision_seq_increases(self, service):
        first = service.post("/api/pairs/p-low/decision", {"verdict": "accept", "reviewer": "r"})
        second = service.post("/api/pairs/p-mid/decision", {"verdict": "reject", "reviewer": "r"})
        assert second.json()["decision_seq"] > first.json()["decision_seq"]

    def test_concurrent_decisions_on_same_pair(self, service):
        results = []

        def decide(verdict):
            results.append(service.post("/api/pairs/p-low/decision",
                                        {"verdict": verdict, "reviewer": "r"}).json())

        threads = [threading.Thread(target=decide, args=(v,)) for v in ("accept", "reject")]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert {r["decision_seq"] for r in results} == {1, 2}
        final = service.get("/api/pairs/p-low").json()
        winner = max(results, key=lambda r: r["decision_seq"])
        expected = {"accept": "accepted", "reject": "rejected"}[winner["verdict"]]
        assert final["pair"]["status"] == expected


class TestStats:
    def test_counts_and_report_fields(self, service):
        service.post("/api/pairs/p-low/decision", {"verdict": "accept", "reviewer": "r"})
        stats = service.get("/api/stats").json()
        assert stats["accepted"] == 1
        assert stats["flagged"] == 1
        assert stats["pending"] == 1
        assert stats["rejected"] == 0 and stats["edited"] == 0
        assert stats["total"] == 3
        assert stats["threshold"] == 0.80
        assert stats["entropy"] == 4.25


class TestExport:
    def test_export_rule(self, service):
        service.post("/api/pairs/p-low/decision", {"verdict": "accept", "reviewer": "r"})
        service.post("/api/pairs/p-mid/decision", {"verdict": "reject", "reviewer": "r"})
        lines = service.get("/api/export?format=jsonl").text.strip().splitlines()
        records = [json.loads(line) for line in lines]
        assert [r["pair_id"] for r in records] == ["p-low"]
        assert records[0]["status"] == "accepted"
        assert records[0]["answer"] == "A p-low."

    def test_edit_then_accept_keeps_original(self, service):
        service.post("/api/pairs/p-low/decision",
                     {"verdict": "edit", "edited_answer": "Edited.", "reviewer": "r"})
        service.post("/api/pairs/p-low/decision", {"verdict": "accept", "reviewer": "r"})
        records = [json.loads(l) for l in
                   service.get("/api/export?format=jsonl").text.strip().splitlines()]
        assert records[0]["answer"] == "A p-low."  # last decision wins; edit superseded
        assert records[0]["status"] == "accepted"

    def test_unknown_format_422(self, service):
        assert service.get("/api/export?format=csv").status_code == 422

    def test_export_equals_pure_replay(self, service, dataset, tmp_path):
        service.post("/api/pairs/p-low/decision",
                     {"verdict": "edit", "edited_question": "Edited Q?", "reviewer": "r"})
        service.post("/api/pairs/p-high/decision", {"verdict": "accept", "reviewer": "r"})
        via_http = service.get("/api/export?format=jsonl").text
        _, _, pairs = load_review_dataset(dataset)
        decisions = load_decision_log(tmp_path / "decisions.jsonl")
        assert via_http == "\n".join(export_curated(pairs, decisions)) + "\n"


class TestDurability:
    def test_restart_preserves_state(self, dataset, tmp_path):
        decisions_path = tmp_path / "decisions.jsonl"
        server = serve(dataset, decisions_path, bind_address="127.0.0.1:0")
        threading.Thread(target=server.serve_forever, daemon=True).start()
        client = Client(server)
        client.post("/api/pairs/p-low/decision", {"verdict": "accept", "reviewer": "r"})
        client.post("/api/pairs/p-mid/decision",
                    {"verdict": "edit", "edited_question": "New Q?", "reviewer": "r"})
        before_stats = client.get("/api/stats").json()
        before_export = client.get("/api/export?format=jsonl").text
        server.shutdown()
        server.server_close()

        revived = serve(dataset, decisions_path, bind_address="127.0.0.1:0")
        threading.Thread(target=revived.serve_forever, daemon=True).start()
        client2 = Client(revived)
        assert client2.get("/api/stats").json() == before_stats
        assert client2.get("/api/export?format=jsonl").text == before_export
        # sequence continues after the replayed log
        resp = client2.post("/api/pairs/p-high/decision", {"verdict": "accept", "reviewer": "r"})
        assert resp.json()["decision_seq"] == 3
        revived.shutdown()
        revived.server_close()

    def test_log_is_append_only(self, service, tmp_path):
        log_path = tmp_path / "decisions.jsonl"
        service.post("/api/pairs/p-low/decision", {"verdict": "accept", "reviewer": "r"})
        first_contents = log_path.read_text()
        service.post("/api/pairs/p-low/decision", {"verdict": "reject", "reviewer": "r"})
        assert log_path.read_text().startswith(first_contents)


class TestStartupValidation:
    def test_corrupt_decision_log_refused_with_line_number(self, dataset, tmp_path):
        bad_log = tmp_path / "decisions.jsonl"
        good = ReviewDecision(pair_id="p-low", verdict="accept", edited_question=None,
                              edited_answer=None, reviewer="r",
                              timestamp="2024-01-01T00:00:00Z", decision_seq=1)
        bad_log.write_text(json.dumps(good.to_record()) + "\n{broken json\n", encoding="utf-8")
        with pytest.raises(ReviewDataError, match="line 2"):
            serve(dataset, bad_log, bind_address="127.0.0.1:0")

    def test_non_monotone_seq_rejected(self, dataset, tmp_path):
        log = tmp_path / "decisions.jsonl"
        rec = {"pair_id": "p-low", "verdict": "accept", "edited_question": None,
               "edited_answer": None, "reviewer": "r",
               "timestamp": "2024-01-01T00:00:00Z", "decision_seq": 2}
        log.write_text(json.dumps(rec) + "\n" + json.dumps({**rec, "decision_seq": 2}) + "\n")
        with pytest.raises(ReviewDataError, match="line 2"):
            serve(dataset, log, bind_address="127.0.0.1:0")

    def test_missing_dataset_rejected(self, tmp_path):
        with pytest.raises(OSError):
            serve(tmp_path / "absent.jsonl", tmp_path / "d.jsonl", bind_address="127.0.0.1:0")

    def test_dataset_without_pairs_rejected(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text('{"type": "header", "version": 1, "threshold": 0.8, "entropy_bits": 1}\n')
        with pytest.raises(ReviewDataError, match="no pairs"):
            serve(path, tmp_path / "d.jsonl", bind_address="127.0.0.1:0")


class TestDatasetChange:
    def test_409_when_dataset_rewritten(self, service, dataset):
        dataset.write_text(dataset.read_text() + "\n", encoding="utf-8")
        resp = service.post("/api/pairs/p-low/decision", {"verdict": "accept", "reviewer": "r"})
        assert resp.status_code == 409
        assert service.get("/api/export?format=jsonl").status_code == 409


class TestStatic:
    def test_index_served(self, service):
        resp = service.get("/")
        assert resp.status_code == 200
        assert "review console" in resp.text

    def test_path_traversal_blocked(self, service):
        resp = service.get("/../pyproject.toml")
        assert resp.status_code in (400, 404)


class TestDeterministicTimestamps:
    def test_source_date_epoch_pins_timestamp(self, dataset, tmp_path, monkeypatch):
        monkeypatch.setenv("SOURCE_DATE_EPOCH", "0")
        server = serve(dataset, tmp_path / "d2.jsonl", bind_address="127.0.0.1:0")
        threading.Thread(target=server.serve_forever, daemon=True).start()
        client = Client(server)
        body = client.post("/api/pairs/p-low/decision",
                           {"verdict": "accept", "reviewer": "r"}).json()
        assert body["timestamp"] == "1970-01-01T00:00:00Z"
        server.shutdown()
        server.server_close()
