"""Annotation service: store semantics (leases, WAL recovery, filters) and
the black-box HTTP suite."""

import json
import threading

import pytest
import requests

from batkit.rlhf import PreferenceRecord, ai_feedback
from batkit.service import (ConflictError, NotFoundError, PreferenceStore,
                            ValidationError, make_server)


class FakeClock:
    def __init__(self):
        self.now = 1000.0

    def __call__(self):
        return self.now


@pytest.fixture
def store(tmp_path):
    s = PreferenceStore(tmp_path / "store.jsonl", lease_seconds=600)
    yield s
    s.close()


class TestStore:
    def test_ids_start_at_one_and_increase(self, store):
        assert store.create_task("p", "a", "b") == 1
        assert store.create_task("p2", "a2", "b2") == 2

    def test_empty_field_rejected(self, store):
        with pytest.raises(ValidationError):
            store.create_task("", "a", "b")

    def test_empty_queue_returns_none(self, store):
        assert store.next_task("alice") is None

    def test_lease_exclusivity(self, store):
        store.create_task("p", "a", "b")
        got_alice = store.next_task("alice")
        got_bob = store.next_task("bob")
        assert got_alice is not None
        assert got_bob is None

    def test_same_annotator_gets_same_task_again(self, store):
        store.create_task("p", "a", "b")
        first = store.next_task("alice")
        again = store.next_task("alice")
        assert first.task_id == again.task_id

    def test_lease_expiry_reoffers_task(self, tmp_path):
        clock = FakeClock()
        s = PreferenceStore(tmp_path / "s.jsonl", lease_seconds=600, clock=clock)
        s.create_task("p", "a", "b")
        assert s.next_task("alice").task_id == 1
        assert s.next_task("bob") is None
        clock.now += 601
        assert s.next_task("bob").task_id == 1
        s.close()

    @pytest.mark.parametrize("helpfulness,d,flag", [
        ("a_better", -1, None),
        ("b_better", 1, None),
        ("both_good", 0, None),
        ("both_bad", 0, "low"),
    ])
    def test_judgment_mapping(self, store, helpfulness, d, flag):
        tid = store.create_task("p", "a", "b")
        rec = store.submit_judgment(tid, helpfulness, True, False, "alice")
        assert rec.d == d
        assert rec.quality_flag == flag
        assert rec.source == "human"
        assert rec.accept_a is True and rec.accept_b is False

    def test_double_judgment_conflicts(self, store):
        tid = store.create_task("p", "a", "b")
        store.submit_judgment(tid, "a_better", None, None, "alice")
        with pytest.raises(ConflictError):
            store.submit_judgment(tid, "b_better", None, None, "bob")

    def test_idempotent_client_token(self, store):
        tid = store.create_task("p", "a", "b")
        r1 = store.submit_judgment(tid, "a_better", None, None, "alice",
                                   client_token="tok1")
        r2 = store.submit_judgment(tid, "a_better", None, None, "alice",
                                   client_token="tok1")
        assert r1.id == r2.id
        assert len(store.export()) == 1

    def test_unknown_task(self, store):
        with pytest.raises(NotFoundError):
            store.submit_judgment(99, "a_better", None, None, "alice")

    def test_invalid_helpfulness(self, store):
        tid = store.create_task("p", "a", "b")
        with pytest.raises(ValidationError):
            store.submit_judgment(tid, "a_is_nice", None, None, "alice")

    def test_export_filters(self, store):
        for i in range(3):
            tid = store.create_task(f"p{i}", "a", "b")
            store.submit_judgment(tid, "a_better", None, None, "alice")
        for i in range(2):
            store.add_record(ai_feedback("length", f"q{i}", "looooong", "st"))
        assert len(store.export()) == 5
        assert len(store.export(source="human")) == 3
        assert len(store.export(source="ai")) == 2
        assert len(store.export(annotator="alice")) == 3

    def test_counts_reconcile_across_filters(self, store):
        for i in range(4):
            tid = store.create_task(f"p{i}", "a", "b")
            if i % 2 == 0:
                store.submit_judgment(tid, "b_better", None, None, f"ann{i % 2}")
        stats = store.stats()
        assert stats["open"] == 2
        assert stats["done"] == 2
        assert len(store.export(source="human")) == 2

    def test_restart_preserves_everything(self, tmp_path):
        path = tmp_path / "wal.jsonl"
        s = PreferenceStore(path)
        tid = s.create_task("p", "a", "b")
        s.submit_judgment(tid, "both_good", True, True, "alice")
        s.create_task("p2", "a2", "b2")
        s.close()

        s2 = PreferenceStore(path)
        assert s2.stats() == {"open": 1, "done": 1, "by_annotator": {"alice": 1}}
        assert s2.export()[0].d == 0
        assert s2.create_task("p3", "a3", "b3") == 3
        s2.close()


@pytest.fixture
def server(tmp_path):
    store = PreferenceStore(tmp_path / "http.jsonl", lease_seconds=600)
    srv = make_server(store, port=0)
    thread = threading.Thread(target=srv.serve_forever, daemon=True)
    thread.start()
    base = f"http://127.0.0.1:{srv.server_address[1]}"
    yield base, store
    srv.shutdown()
    store.close()


class TestHttpBlackBox:
    def test_full_annotation_flow(self, server):
        base, _ = server
        r = requests.post(f"{base}/tasks", json={
            "prompt": "compare", "response_a": "first", "response_b": "second"})
        assert r.status_code == 200
        task_id = r.json()["task_id"]

        nxt = requests.get(f"{base}/tasks/next", params={"annotator": "alice"})
        assert nxt.status_code == 200
        assert nxt.json()["task_id"] == task_id

        judged = requests.post(f"{base}/tasks/{task_id}/judgment", json={
            "helpfulness": "a_better", "accept_a": True, "accept_b": None,
            "annotator_id": "alice"})
        assert judged.status_code == 200
        assert judged.json()["d"] == -1

        export = requests.get(f"{base}/export")
        assert export.status_code == 200
        lines = [json.loads(l) for l in export.text.splitlines()]
        assert len(lines) == 1
        rec = PreferenceRecord.from_dict(lines[0])
        assert rec.d == -1 and rec.prompt == "compare"

    def test_both_good_maps_to_zero(self, server):
        base, _ = server
        tid = requests.post(f"{base}/tasks", json={
            "prompt": "p", "response_a": "a", "response_b": "b"}).json()["task_id"]
        r = requests.post(f"{base}/tasks/{tid}/judgment", json={
            "helpfulness": "both_good", "annotator_id": "bob"})
        assert r.json()["d"] == 0

    def test_double_judgment_409(self, server):
        base, _ = server
        tid = requests.post(f"{base}/tasks", json={
            "prompt": "p", "response_a": "a", "response_b": "b"}).json()["task_id"]
        first = requests.post(f"{base}/tasks/{tid}/judgment", json={
            "helpfulness": "a_better", "annotator_id": "x"})
        assert first.status_code == 200
        second = requests.post(f"{base}/tasks/{tid}/judgment", json={
            "helpfulness": "b_better", "annotator_id": "y"})
        assert second.status_code == 409

    def test_empty_queue_204(self, server):
        base, _ = server
        r = requests.get(f"{base}/tasks/next", params={"annotator": "alice"})
        assert r.status_code == 204

    def test_validation_400(self, server):
        base, _ = server
        r = requests.post(f"{base}/tasks", json={"prompt": "", "response_a": "a",
                                                 "response_b": "b"})
        assert r.status_code == 400

    def test_unknown_task_404(self, server):
        base, _ = server
        r = requests.post(f"{base}/tasks/42/judgment", json={
            "helpfulness": "a_better", "annotator_id": "x"})
        assert r.status_code == 404

    def test_stats_endpoint(self, server):
        base, _ = server
        requests.post(f"{base}/tasks", json={
            "prompt": "p", "response_a": "a", "response_b": "b"})
        stats = requests.get(f"{base}/stats").json()
        assert stats["open"] == 1 and stats["done"] == 0

    def test_export_source_filter(self, server):
        base, store = server
        tid = requests.post(f"{base}/tasks", json={
            "prompt": "p", "response_a": "a", "response_b": "b"}).json()["task_id"]
        requests.post(f"{base}/tasks/{tid}/judgment", json={
            "helpfulness": "a_better", "annotator_id": "x"})
        store.add_record(ai_feedback("length", "q", "looong", "s"))
        human = requests.get(f"{base}/export", params={"source": "human"})
        assert len(human.text.splitlines()) == 1

    def test_cors_preflight(self, server):
        base, _ = server
        r = requests.options(f"{base}/tasks")
        assert r.status_code == 204
        assert r.headers["Access-Control-Allow-Origin"] == "*"
