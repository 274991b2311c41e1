"""Scriptable stand-in for a local model runtime, speaking the ``/api/generate`` shape.

A script is JSON::

    {"default": {"response": "...", "delay_s": 0, "status": 200},
     "rules": [{"match": "2021110001", "response": "...", "delay_s": 5}]}

The first rule whose ``match`` substring occurs in the prompt answers; otherwise
``default`` does, and without a default the stub replies with an empty object.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Iterable


@dataclass
class Reply:
    response: str = "{}"
    delay_s: float = 0.0
    status: int = 200

    @classmethod
    def from_obj(cls, obj: dict) -> Reply:
        return cls(obj.get("response", "{}"), float(obj.get("delay_s", 0.0)), int(obj.get("status", 200)))


@dataclass
class StubScript:
    rules: list[tuple[str, Reply]] = field(default_factory=list)
    default: Reply = field(default_factory=Reply)

    @classmethod
    def from_obj(cls, obj: dict) -> StubScript:
        rules = [(r["match"], Reply.from_obj(r)) for r in obj.get("rules", [])]
        default = Reply.from_obj(obj["default"]) if "default" in obj else Reply()
        return cls(rules, default)

    @classmethod
    def load(cls, path: str | Path) -> StubScript:
        return cls.from_obj(json.loads(Path(path).read_text(encoding="utf-8")))

    def to_obj(self) -> dict:
        as_obj = lambda r: {"response": r.response, "delay_s": r.delay_s, "status": r.status}
        return {"default": as_obj(self.default),
                "rules": [{"match": m, **as_obj(r)} for m, r in self.rules]}

    def answer(self, prompt: str) -> Reply:
        for needle, reply in self.rules:
            if needle in prompt:
                return reply
        return self.default


def script_from_records(pairs: Iterable[tuple[str, dict]], delay_s: float = 0.0) -> StubScript:
    """Answer each document with its ground truth, keyed on a unique substring.

    ``pairs`` holds ``(needle, record_dict)``; the needle is usually the
    student id, which appears once on every page.
    """
    rules = [(needle, Reply(json.dumps(rec, ensure_ascii=False), delay_s)) for needle, rec in pairs]
    return StubScript(rules, Reply('{"courses": [], "lecturers": []}', delay_s))


class StubRuntime:
    """Threaded HTTP server on localhost; use as a context manager."""

    def __init__(self, script: StubScript, host: str = "127.0.0.1", port: int = 0):
        self.script = script
        self.requests: list[dict] = []
        self.in_flight = 0
        self.max_in_flight = 0
        self._lock = threading.Lock()
        self._server = ThreadingHTTPServer((host, port), self._handler())
        self._server.daemon_threads = True
        self._thread: threading.Thread | None = None

    @property
    def url(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    def _handler(self):
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def _send(self, status: int, body: dict | str):
                data = (body if isinstance(body, str) else json.dumps(body)).encode("utf-8")
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                try:
                    self.wfile.write(data)
                except (BrokenPipeError, ConnectionResetError):
                    pass

            def do_GET(self):
                if self.path.rstrip("/") == "/api/tags":
                    self._send(200, {"models": [{"name": "stub"}]})
                else:
                    self._send(404, {"error": "not found"})

            def do_POST(self):
                if self.path.rstrip("/") != "/api/generate":
                    self._send(404, {"error": "not found"})
                    return
                length = int(self.headers.get("Content-Length", 0))
                try:
                    payload = json.loads(self.rfile.read(length) or b"{}")
                except json.JSONDecodeError:
                    self._send(400, {"error": "bad json"})
                    return
                with stub._lock:
                    stub.requests.append(payload)
                    stub.in_flight += 1
                    stub.max_in_flight = max(stub.max_in_flight, stub.in_flight)
                try:
                    reply = stub.script.answer(str(payload.get("prompt", "")))
                    if reply.delay_s:
                        time.sleep(reply.delay_s)
                    if reply.status >= 300:
                        self._send(reply.status, {"error": reply.response})
                    else:
                        self._send(reply.status, {"model": payload.get("model", ""),
                                                  "response": reply.response, "done": True})
                finally:
                    with stub._lock:
                        stub.in_flight -= 1

        return Handler

    def start(self) -> StubRuntime:
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        return self

    def serve_forever(self) -> None:
        self._server.serve_forever()

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread:
            self._thread.join(timeout=5)

    def __enter__(self) -> StubRuntime:
        return self.start()

    def __exit__(self, *exc):
        self.stop()
