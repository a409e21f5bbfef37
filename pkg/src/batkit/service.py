"""Preference-annotation service: task queue, judgment capture, export.

Annotators are shown two responses to the same prompt and submit one of
four helpfulness options plus optional per-response acceptability flags.
Helpfulness maps onto the preference label d: ``a_better`` -> -1,
``b_better`` -> +1, ``both_good`` -> 0, and ``both_bad`` -> 0 with a
``quality_flag`` of ``low`` retained so downstream filters can drop such
pairs. Acceptability flags are stored verbatim as harmlessness labels.

Persistence is a single append-only JSON Lines file (write-ahead: the event
is flushed to disk before the request is acknowledged) plus an in-memory
index rebuilt on start. All mutations serialize through one lock; lease
bookkeeping is atomic with task handout.

HTTP surface (JSON bodies, no authentication - a trusted-LAN tool):

    POST /tasks                     {prompt, response_a, response_b} -> {task_id}
    GET  /tasks/next?annotator=N    task JSON | 204 when the queue is empty
    POST /tasks/{id}/judgment       {helpfulness, accept_a, accept_b,
                                     annotator_id, client_token?} -> record
                                    409 when already judged
    GET  /export?source=&annotator= JSON Lines of preference records
    GET  /stats                     {open, done, by_annotator}
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
import urllib.parse
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .errors import BatkitError, FormatError
from .rlhf import PreferenceRecord, _utcnow

log = logging.getLogger(__name__)

HELPFULNESS_OPTIONS = ("a_better", "b_better", "both_good", "both_bad")
_D_FOR = {"a_better": -1, "b_better": 1, "both_good": 0, "both_bad": 0}

DEFAULT_LEASE_SECONDS = 600.0


class ValidationError(BatkitError):
    """Maps to HTTP 400."""


class NotFoundError(BatkitError):
    """Maps to HTTP 404."""


class ConflictError(BatkitError):
    """Maps to HTTP 409."""


@dataclass
class AnnotationTask:
    task_id: int
    prompt: str
    response_a: str
    response_b: str
    created_at: str
    status: str = "open"
    judgment: dict | None = None

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id, "prompt": self.prompt,
            "response_a": self.response_a, "response_b": self.response_b,
            "created_at": self.created_at, "status": self.status,
            "judgment": self.judgment,
        }


class PreferenceStore:
    """Append-only task/judgment store with lease-based task handout."""

    def __init__(self, path, lease_seconds: float = DEFAULT_LEASE_SECONDS,
                 clock=time.monotonic):
        self.path = Path(path)
        self.lease_seconds = float(lease_seconds)
        self.clock = clock
        self._lock = threading.Lock()
        self.tasks: dict[int, AnnotationTask] = {}
        self.records: list[PreferenceRecord] = []
        self._leases: dict[int, tuple[str, float]] = {}
        self._tokens: dict[int, str | None] = {}
        self._next_id = 1
        self._replay()
        self._wal = open(self.path, "a", encoding="utf-8", newline="\n")

    # -- persistence --------------------------------------------------------
    def _replay(self) -> None:
        if not self.path.exists():
            return
        with open(self.path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    event = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise FormatError(f"{self.path}:{lineno}: bad WAL line: {exc}")
                self._apply(event)

    def _apply(self, event: dict) -> None:
        kind = event.get("type")
        if kind == "task":
            task = AnnotationTask(
                task_id=int(event["task_id"]), prompt=event["prompt"],
                response_a=event["response_a"], response_b=event["response_b"],
                created_at=event.get("created_at", ""))
            self.tasks[task.task_id] = task
            self._next_id = max(self._next_id, task.task_id + 1)
        elif kind == "judgment":
            task = self.tasks[int(event["task_id"])]
            task.status = "done"
            task.judgment = event["judgment"]
            self._tokens[task.task_id] = event.get("client_token")
            self.records.append(PreferenceRecord.from_dict(event["record"]))
        elif kind == "record":
            self.records.append(PreferenceRecord.from_dict(event["record"]))
        else:
            raise FormatError(f"unknown WAL event type {kind!r}")

    def _append(self, event: dict) -> None:
        self._wal.write(json.dumps(event, ensure_ascii=False) + "\n")
        self._wal.flush()
        os.fsync(self._wal.fileno())

    def close(self) -> None:
        self._wal.close()

    # -- operations ----------------------------------------------------------
    def create_task(self, prompt: str, response_a: str, response_b: str) -> int:
        for name, value in (("prompt", prompt), ("response_a", response_a),
                            ("response_b", response_b)):
            if not isinstance(value, str) or not value:
                raise ValidationError(f"{name} must be a non-empty string")
        with self._lock:
            task_id = self._next_id
            self._next_id += 1
            task = AnnotationTask(task_id, prompt, response_a, response_b,
                                  created_at=_utcnow())
            self._append({"type": "task", **task.to_dict()})
            self.tasks[task_id] = task
            return task_id

    def next_task(self, annotator_id: str) -> AnnotationTask | None:
        """Oldest open task not currently leased to someone else; re-offers
        the caller's own unexpired lease so reloads are idempotent."""
        if not annotator_id:
            raise ValidationError("annotator id required")
        with self._lock:
            now = self.clock()
            expired = [tid for tid, (_, exp) in self._leases.items() if exp <= now]
            for tid in expired:
                del self._leases[tid]
            for tid, (holder, _) in self._leases.items():
                if holder == annotator_id and self.tasks[tid].status == "open":
                    return self.tasks[tid]
            for tid in sorted(self.tasks):
                task = self.tasks[tid]
                if task.status == "open" and tid not in self._leases:
                    self._leases[tid] = (annotator_id, now + self.lease_seconds)
                    return task
            return None

    def submit_judgment(self, task_id: int, helpfulness: str,
                        accept_a: bool | None, accept_b: bool | None,
                        annotator_id: str,
                        client_token: str | None = None) -> PreferenceRecord:
        if helpfulness not in HELPFULNESS_OPTIONS:
            raise ValidationError(
                f"helpfulness must be one of {HELPFULNESS_OPTIONS}")
        for name, value in (("accept_a", accept_a), ("accept_b", accept_b)):
            if value is not None and not isinstance(value, bool):
                raise ValidationError(f"{name} must be true, false, or null")
        if not annotator_id:
            raise ValidationError("annotator_id required")
        with self._lock:
            task = self.tasks.get(task_id)
            if task is None:
                raise NotFoundError(f"task {task_id} does not exist")
            if task.status == "done":
                if client_token and self._tokens.get(task_id) == client_token:
                    for rec in self.records:
                        if rec.id == f"task-{task_id}":
                            return rec
                raise ConflictError(f"task {task_id} already judged")

            record = PreferenceRecord(
                id=f"task-{task_id}",
                prompt=task.prompt,
                response_a=task.response_a,
                response_b=task.response_b,
                d=_D_FOR[helpfulness],
                accept_a=accept_a,
                accept_b=accept_b,
                source="human",
                annotator_id=annotator_id,
                created_at=_utcnow(),
                quality_flag="low" if helpfulness == "both_bad" else None)
            judgment = {
                "helpfulness": helpfulness, "accept_a": accept_a,
                "accept_b": accept_b, "annotator_id": annotator_id,
                "submitted_at": record.created_at,
            }
            self._append({
                "type": "judgment", "task_id": task_id, "judgment": judgment,
                "client_token": client_token, "record": record.to_dict(),
            })
            task.status = "done"
            task.judgment = judgment
            self._tokens[task_id] = client_token
            self._leases.pop(task_id, None)
            self.records.append(record)
            return record

    def add_record(self, record: PreferenceRecord) -> None:
        """Ingest an externally produced record (e.g. AI feedback)."""
        with self._lock:
            self._append({"type": "record", "record": record.to_dict()})
            self.records.append(record)

    def export(self, source: str | None = None, annotator: str | None = None,
               since: str | None = None) -> list[PreferenceRecord]:
        with self._lock:
            out = list(self.records)
        if source:
            out = [r for r in out if r.source == source]
        if annotator:
            out = [r for r in out if r.annotator_id == annotator]
        if since:
            out = [r for r in out if r.created_at >= since]
        return out

    def stats(self) -> dict:
        with self._lock:
            open_count = sum(1 for t in self.tasks.values() if t.status == "open")
            done = len(self.tasks) - open_count
            by_annotator: dict[str, int] = {}
            for rec in self.records:
                key = rec.annotator_id or "unknown"
                by_annotator[key] = by_annotator.get(key, 0) + 1
        return {"open": open_count, "done": done, "by_annotator": by_annotator}


# --------------------------------------------------------------------------
# HTTP layer


def _make_handler(store: PreferenceStore):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):
            log.debug("http: " + fmt, *args)

        def _cors(self):
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
            self.send_header("Access-Control-Allow-Headers", "Content-Type")

        def _reply(self, status: int, payload: bytes = b"",
                   content_type: str = "application/json"):
            self.send_response(status)
            self._cors()
            if payload:
                self.send_header("Content-Type", content_type)
            self.send_header("Content-Length", str(len(payload)))
            self.end_headers()
            if payload:
                self.wfile.write(payload)

        def _json(self, status: int, obj) -> None:
            self._reply(status, json.dumps(obj).encode("utf-8"))

        def _error(self, status: int, message: str) -> None:
            self._json(status, {"error": message})

        def _body(self) -> dict:
            length = int(self.headers.get("Content-Length") or 0)
            raw = self.rfile.read(length) if length else b"{}"
            try:
                parsed = json.loads(raw.decode("utf-8") or "{}")
            except json.JSONDecodeError as exc:
                raise ValidationError(f"bad JSON body: {exc}")
            if not isinstance(parsed, dict):
                raise ValidationError("body must be a JSON object")
            return parsed

        def do_OPTIONS(self):
            self._reply(204)

        def do_GET(self):
            url = urllib.parse.urlparse(self.path)
            query = urllib.parse.parse_qs(url.query)
            try:
                if url.path == "/tasks/next":
                    annotator = (query.get("annotator") or [""])[0]
                    task = store.next_task(annotator)
                    if task is None:
                        self._reply(204)
                    else:
                        self._json(200, task.to_dict())
                elif url.path == "/export":
                    records = store.export(
                        source=(query.get("source") or [None])[0],
                        annotator=(query.get("annotator") or [None])[0],
                        since=(query.get("since") or [None])[0])
                    body = "".join(json.dumps(r.to_dict(), ensure_ascii=False) + "\n"
                                   for r in records)
                    self._reply(200, body.encode("utf-8"), "application/x-ndjson")
                elif url.path == "/stats":
                    self._json(200, store.stats())
                else:
                    self._error(404, f"no such endpoint {url.path}")
            except ValidationError as exc:
                self._error(400, str(exc))

        def do_POST(self):
            url = urllib.parse.urlparse(self.path)
            parts = [p for p in url.path.split("/") if p]
            try:
                body = self._body()
                if parts == ["tasks"]:
                    task_id = store.create_task(
                        body.get("prompt"), body.get("response_a"),
                        body.get("response_b"))
                    self._json(200, {"task_id": task_id})
                elif len(parts) == 3 and parts[0] == "tasks" and parts[2] == "judgment":
                    try:
                        task_id = int(parts[1])
                    except ValueError:
                        raise NotFoundError(f"bad task id {parts[1]!r}")
                    record = store.submit_judgment(
                        task_id,
                        helpfulness=body.get("helpfulness"),
                        accept_a=body.get("accept_a"),
                        accept_b=body.get("accept_b"),
                        annotator_id=body.get("annotator_id", ""),
                        client_token=body.get("client_token"))
                    self._json(200, record.to_dict())
                else:
                    self._error(404, f"no such endpoint {url.path}")
            except ValidationError as exc:
                self._error(400, str(exc))
            except NotFoundError as exc:
                self._error(404, str(exc))
            except ConflictError as exc:
                self._error(409, str(exc))

    return Handler


def make_server(store: PreferenceStore, port: int = 8787,
                host: str = "127.0.0.1") -> ThreadingHTTPServer:
    """Bind (but do not run) the HTTP server; call serve_forever() on it."""
    return ThreadingHTTPServer((host, port), _make_handler(store))
