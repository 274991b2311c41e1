"""Few-shot prompting of a local model runtime and validation of its JSON reply."""

from __future__ import annotations

import json
import logging
import re
import threading
import time
from dataclasses import dataclass
from typing import Literal

import httpx

from .core import METADATA_FIELDS, KrsRecord, Metadata, ValidationPolicy
from .errors import (
    ContractViolation,
    EndpointUnavailable,
    MalformedPayload,
    NoPayload,
    ReplyError,
    RetryNeeded,
    RuntimeFailure,
    Timeout,
)

logger = logging.getLogger(__name__)

REPLY_HEADROOM = 512  # tokens kept free for the model's answer


@dataclass(frozen=True)
class LlmConfig:
    endpoint_url: str = "http://localhost:11434"
    model_name: str = "qwen2.5:14b"
    num_ctx: int = 3072
    timeout_hybrid_s: int = 180
    timeout_llm_only_s: int = 300
    temperature: float = 0.0
    max_retries: int = 1
    max_in_flight: int = 1

    def __post_init__(self):
        if self.timeout_hybrid_s <= 0 or self.timeout_llm_only_s <= 0:
            raise ValueError("timeouts must be positive")
        if self.num_ctx <= 0:
            raise ValueError("num_ctx must be positive")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")


@dataclass(frozen=True)
class PromptTask:
    kind: Literal["tables_only", "full_record"]
    page_text: str

    def __post_init__(self):
        if self.kind not in ("tables_only", "full_record"):
            raise ValueError(f"unknown prompt kind {self.kind!r}")
        if not self.page_text.strip():
            raise ValueError("page_text is empty")


RULES = """You ONLY extract data that ACTUALLY EXISTS in the text.

ABSOLUTE RULES:
- DO NOT fabricate any data
- DO NOT add any courses
- Advisors are IGNORED
- If none → empty array
- Number of lecturers = Number of courses
- JSON IS VALID ONLY
"""

TABLES_FORMAT = """FORMAT:
{
  "courses": [],
  "lecturers": []
}
"""

FULL_FORMAT = """FORMAT:
{
  "metadata": {
    "student_name": "",
    "student_id": "",
    "study_program": "",
    "semester": "",
    "academic_year": ""
  },
  "courses": [],
  "lecturers": []
}
"""

EXAMPLE = """e.g.
"courses": [
  "High Voltage Engineering",
  "Power Systems Practicum",
],
"lecturers": [
  "Rindi Wulandari, S.ST., M.Si.",
  "Taryo, ST., MT."
],

If there are repeated lecturer names, ALLOW THEM!
THE NUMBER OF LECTURERS MUST EQUAL THE NUMBER OF COURSES!
"""


def estimate_tokens(text: str) -> int:
    return -(-len(text) // 4)


def build_prompt(task: PromptTask, config: LlmConfig = LlmConfig()) -> str:
    """Rules, output skeleton, worked example, then the document text.

    The document text is cut from the bottom when the whole prompt would not
    leave ``REPLY_HEADROOM`` tokens of the context window free.
    """
    fmt = FULL_FORMAT if task.kind == "full_record" else TABLES_FORMAT
    head = f"{RULES}\n{fmt}\n{EXAMPLE}\nTEXT:\n"
    budget_chars = (config.num_ctx - REPLY_HEADROOM) * 4
    room = budget_chars - len(head)
    text = task.page_text
    if len(text) > room:
        logger.warning("page text truncated from %d to %d chars to fit num_ctx=%d",
                       len(text), max(room, 0), config.num_ctx)
        text = text[:max(room, 0)]
    return head + text


class LlmClient:
    """Blocking client for an Ollama-style ``/api/generate`` endpoint.

    At most ``max_in_flight`` requests are outstanding at once, however many
    threads share the client.
    """

    def __init__(self, config: LlmConfig, transport: httpx.BaseTransport | None = None):
        self.config = config
        self._gate = threading.BoundedSemaphore(config.max_in_flight)
        self._http = httpx.Client(transport=transport)
        self._lock = threading.Lock()
        self.call_seconds: list[float] = []

    def close(self) -> None:
        self._http.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    @property
    def url(self) -> str:
        return self.config.endpoint_url.rstrip("/")

    def ping(self, timeout_s: float = 3.0) -> bool:
        try:
            self._http.get(f"{self.url}/api/tags", timeout=timeout_s)
        except httpx.HTTPError:
            return False
        return True

    def complete(self, prompt: str, timeout_s: float | None = None) -> str:
        timeout_s = timeout_s or self.config.timeout_hybrid_s
        payload = {
            "model": self.config.model_name,
            "prompt": prompt,
            "stream": False,
            "options": {"num_ctx": self.config.num_ctx, "temperature": self.config.temperature},
        }
        with self._gate:
            started = time.perf_counter()
            try:
                resp = self._http.post(f"{self.url}/api/generate", json=payload,
                                       timeout=httpx.Timeout(timeout_s))
            except httpx.TimeoutException as exc:
                raise Timeout(f"no reply within {timeout_s} s") from exc
            except httpx.TransportError as exc:
                raise EndpointUnavailable(f"{self.url}: {exc}") from exc
            finally:
                with self._lock:
                    self.call_seconds.append(time.perf_counter() - started)
        if not resp.is_success:
            raise RuntimeFailure(resp.status_code, resp.text)
        try:
            body = resp.json()
        except ValueError as exc:
            raise RuntimeFailure(resp.status_code, f"non-JSON body: {resp.text[:200]}") from exc
        reply = body.get("response") if isinstance(body, dict) else None
        if not isinstance(reply, str):
            raise RuntimeFailure(resp.status_code, "reply has no 'response' string")
        return reply

    def extract(self, task: PromptTask, policy: ValidationPolicy, timeout_s: float) -> KrsRecord:
        """Prompt, parse and re-prompt while the retry budget lasts.

        Raises the last ``ReplyError`` once retries are exhausted; transport
        errors propagate untouched.
        """
        prompt = build_prompt(task, self.config)
        retries_left = self.config.max_retries
        while True:
            raw = self.complete(prompt, timeout_s)
            try:
                return parse_reply(raw, task, policy, retries_left)
            except RetryNeeded as exc:
                logger.info("unusable reply (%s); re-prompting", exc.cause)
                retries_left -= 1


# -- reply parsing --------------------------------------------------------------------

def first_object(raw: str) -> str | None:
    """The first balanced ``{...}`` in ``raw``, respecting JSON string quoting."""
    start = raw.find("{")
    while start >= 0:
        depth = 0
        in_string = escaped = False
        for i in range(start, len(raw)):
            ch = raw[i]
            if in_string:
                if escaped:
                    escaped = False
                elif ch == "\\":
                    escaped = True
                elif ch == '"':
                    in_string = False
            elif ch == '"':
                in_string = True
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    return raw[start:i + 1]
        start = raw.find("{", start + 1)
    return None


_TRAILING_COMMA = re.compile(r",(\s*[}\]])")


def _loads_lenient(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        # the few-shot example itself shows trailing commas; accept that one slip
        return json.loads(_TRAILING_COMMA.sub(r"\1", text))


def _verbatim(value: str, raw: str) -> bool:
    return (value in raw
            or json.dumps(value, ensure_ascii=False)[1:-1] in raw
            or json.dumps(value)[1:-1] in raw)


def _string_array(obj: dict, key: str) -> list[str]:
    value = obj.get(key)
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise ContractViolation("wrong_types", f"{key!r} must be an array of strings")
    return value


def _check(raw: str, task: PromptTask, policy: ValidationPolicy) -> KrsRecord:
    text = first_object(raw)
    if text is None:
        raise NoPayload("reply holds no JSON object")
    try:
        obj = _loads_lenient(text)
    except json.JSONDecodeError as exc:
        raise MalformedPayload(f"{exc.msg} at char {exc.pos}") from exc
    if not isinstance(obj, dict):
        raise MalformedPayload("payload is not an object")
    courses = _string_array(obj, "courses")
    lecturers = _string_array(obj, "lecturers")
    if len(courses) != len(lecturers):
        raise ContractViolation("count_mismatch", f"{len(courses)} courses vs {len(lecturers)} lecturers")
    if len(courses) > policy.max_rows:
        raise ContractViolation("overflow", f"{len(courses)} rows > {policy.max_rows}")
    for value in (*courses, *lecturers):
        if not _verbatim(value, raw):
            raise MalformedPayload(f"value {value!r} does not appear in the reply")
    metadata = Metadata()
    if task.kind == "full_record":
        meta = obj.get("metadata", {})
        if not isinstance(meta, dict):
            raise ContractViolation("wrong_types", "'metadata' must be an object")
        values = {}
        for name in METADATA_FIELDS:
            value = meta.get(name)
            if isinstance(value, (int, float)) and not isinstance(value, bool):
                value = str(value)
            if value is not None and not isinstance(value, str):
                raise ContractViolation("wrong_types", f"metadata.{name} must be a string")
            values[name] = value or None
        metadata = Metadata(**values)
    return KrsRecord(metadata=metadata, courses=tuple(courses), lecturers=tuple(lecturers))


def parse_reply(raw: str, expected: PromptTask, policy: ValidationPolicy = ValidationPolicy(),
                retries_left: int = 0) -> KrsRecord:
    """Validate a model reply against the output contract.

    Duplicated lecturers are kept as given. With ``retries_left`` above zero a
    failure surfaces as ``RetryNeeded`` wrapping the underlying error.
    """
    try:
        return _check(raw, expected, policy)
    except ReplyError as exc:
        if retries_left > 0:
            raise RetryNeeded(exc) from exc
        raise
