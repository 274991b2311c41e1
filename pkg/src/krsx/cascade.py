"""The three extraction strategies and the batch driver around them.

``cascade`` tries the deterministic table extractors first and escalates only
on a structural error or a record that fails validation; every escalation is
kept in the outcome's attempt list.
"""

from __future__ import annotations

import logging
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Literal, Sequence

from .core import (
    Attempt,
    CourseRow,
    ExtractionOutcome,
    KrsRecord,
    Metadata,
    PositionedPage,
    ValidationPolicy,
    validate_record,
)
from .errors import IngestError, IngestFailed, LlmError, RegionNotFound, TableError
from .ingest import IngestOptions, load_page, plain_text, table_region
from .lattice import LatticeOptions, extract_lattice
from .llm import LlmClient, LlmConfig, PromptTask
from .meta import ADVISOR_LABELS, MetaPatternSet, extract_metadata
from .stream import StreamOptions, extract_stream
from .textnorm import normalize_value

logger = logging.getLogger(__name__)

Mode = Literal["llm_only", "hybrid", "cascade"]
MODES = ("llm_only", "hybrid", "cascade")
TABLE_PATHS = ("courses", "lecturers", "rows")


@dataclass(frozen=True)
class PipelineConfig:
    mode: Mode = "cascade"
    llm: LlmConfig = field(default_factory=LlmConfig)
    lattice: LatticeOptions = field(default_factory=LatticeOptions)
    stream: StreamOptions = field(default_factory=StreamOptions)
    patterns: MetaPatternSet = field(default_factory=MetaPatternSet)
    policy: ValidationPolicy = field(default_factory=ValidationPolicy)
    ingest: IngestOptions = field(default_factory=IngestOptions)
    advisor_labels: tuple[str, ...] = ADVISOR_LABELS

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.policy.max_rows > 15:
            logger.warning("max_rows=%d exceeds what the scorer compares", self.policy.max_rows)


def _normalized(record: KrsRecord) -> KrsRecord:
    meta = Metadata(**{k: normalize_value(v) if v else None for k, v in record.metadata.items()})
    return replace(record, metadata=meta,
                   courses=tuple(normalize_value(c) for c in record.courses),
                   lecturers=tuple(normalize_value(x) for x in record.lecturers))


def _table_problems(record: KrsRecord, policy: ValidationPolicy) -> list[str]:
    return [str(v) for v in validate_record(record, policy) if v.path.startswith(TABLE_PATHS)]


class _Run:
    """Collects attempts and stage timings for one document."""

    def __init__(self):
        self.attempts: list[Attempt] = []
        self.timings: dict[str, float] = {}
        self._t0 = 0.0

    def start(self) -> None:
        self._t0 = time.perf_counter()

    def done(self, stage: str, ok: bool, reason: str = "") -> None:
        self.timings[stage] = self.timings.get(stage, 0.0) + time.perf_counter() - self._t0
        self.attempts.append(Attempt(stage, ok, reason))


def _why(exc: Exception) -> str:
    detail = str(exc)
    return f"{type(exc).__name__}: {detail}" if detail else type(exc).__name__


def _ingest(pdf_bytes: bytes, config: PipelineConfig, run: _Run) -> PositionedPage:
    run.start()
    try:
        page = load_page(pdf_bytes, config.ingest)
    except IngestError as exc:
        raise IngestFailed(_why(exc)) from exc
    run.done("ingest", True)
    return page


def _regex_metadata(text: str, config: PipelineConfig, run: _Run) -> tuple[Metadata, list[str]]:
    run.start()
    meta, status = extract_metadata(text, config.patterns)
    unresolved = [k for k, s in status.items() if s != "found"]
    run.done("regex", not unresolved, ", ".join(f"{k}={status[k]}" for k in unresolved))
    return meta, unresolved


def _ask_llm(client: LlmClient | None, kind: str, text: str, timeout_s: float,
             config: PipelineConfig, run: _Run, stage: str) -> KrsRecord | None:
    run.start()
    if client is None:
        run.done(stage, False, "llm disabled: no endpoint configured")
        return None
    try:
        record = client.extract(PromptTask(kind, text), config.policy, timeout_s)
    except (LlmError, ValueError) as exc:
        run.done(stage, False, _why(exc))
        return None
    run.done(stage, True)
    return record


def _deterministic_tables(page: PositionedPage, metadata: Metadata, config: PipelineConfig,
                          run: _Run) -> tuple[KrsRecord | None, str | None]:
    run.start()
    labels = [*config.patterns.all_labels(), *config.advisor_labels]
    try:
        region = table_region(page, labels)
    except RegionNotFound as exc:
        run.done("lattice", False, _why(exc))
        run.start()
        run.done("stream", False, _why(exc))
        return None, None
    spans = [s for s in page.spans if region.contains(s)]

    flavours = (
        ("lattice", lambda: extract_lattice([r for r in page.rulings if region.holds(r, 2.0)], spans,
                                            config.policy, config.lattice, config.advisor_labels)),
        ("stream", lambda: extract_stream(spans, config.policy, config.stream, config.advisor_labels)),
    )
    for i, (stage, extractor) in enumerate(flavours):
        if i:
            run.start()
        try:
            rows: list[CourseRow] = extractor()
        except TableError as exc:
            run.done(stage, False, _why(exc))
            continue
        record = KrsRecord.from_rows(metadata, rows)
        problems = _table_problems(record, config.policy)
        if problems:
            run.done(stage, False, "validation: " + "; ".join(problems[:3]))
            continue
        run.done(stage, True)
        return record, stage
    return None, None


def extract_document(pdf_bytes: bytes, config: PipelineConfig = PipelineConfig(),
                     client: LlmClient | None = None, doc_id: str = "") -> ExtractionOutcome:
    """Run one document through ``config.mode``.

    Only an unreadable PDF raises (``IngestFailed``); poor extractions come back
    as empty or partial records with the reasons in ``attempts``.
    """
    run = _Run()
    page = _ingest(pdf_bytes, config, run)
    text = plain_text(page)
    llm = config.llm

    if config.mode == "llm_only":
        got = _ask_llm(client, "full_record", text, llm.timeout_llm_only_s, config, run, "llm")
        record = got or KrsRecord()
        return ExtractionOutcome(_normalized(record), "llm", "llm", dict(run.timings),
                                 tuple(run.attempts), doc_id)

    metadata, unresolved = _regex_metadata(text, config, run)
    metadata_route = "regex"
    if unresolved and config.mode == "cascade":
        got = _ask_llm(client, "full_record", text, llm.timeout_hybrid_s, config, run, "meta_llm")
        if got is not None:
            fill = {k: v for k, v in got.metadata.items() if k in unresolved and v}
            metadata = replace(metadata, **fill)
            metadata_route = "llm"

    record, table_route = None, None
    if config.mode == "cascade":
        record, table_route = _deterministic_tables(page, metadata, config, run)
    if record is None:
        got = _ask_llm(client, "tables_only", text, llm.timeout_hybrid_s, config, run, "llm")
        if got is not None:
            record = replace(got, metadata=metadata)
        else:
            record = KrsRecord(metadata=metadata)
        table_route = "llm" if client is not None else None

    return ExtractionOutcome(_normalized(record), metadata_route, table_route, dict(run.timings),
                             tuple(run.attempts), doc_id)


def _failed(doc_id: str, exc: Exception) -> ExtractionOutcome:
    return ExtractionOutcome(KrsRecord(), None, None, {}, (), doc_id, error=_why(exc))


def summarize(outcomes: Sequence[ExtractionOutcome]) -> dict:
    """Mean and median seconds per document, overall and per table route."""
    def stats(items):
        secs = [o.seconds for o in items]
        return {"n": len(secs),
                "mean_s": statistics.fmean(secs) if secs else 0.0,
                "median_s": statistics.median(secs) if secs else 0.0}

    routes: dict[str, list[ExtractionOutcome]] = {}
    for o in outcomes:
        routes.setdefault(o.table_route or "none", []).append(o)
    return {**stats(outcomes), "routes": {r: stats(items) for r, items in sorted(routes.items())}}


def extract_corpus(paths: Sequence[str | Path], config: PipelineConfig = PipelineConfig(),
                   workers: int = 1, client: LlmClient | None = None) -> tuple[list[ExtractionOutcome], dict]:
    """Extract every PDF; outcomes follow input order and one bad file never stops the batch."""
    if workers < 1:
        raise ValueError("workers must be >= 1")

    def one(path) -> ExtractionOutcome:
        path = Path(path)
        doc_id = path.name.removesuffix(".pdf")
        try:
            return extract_document(path.read_bytes(), config, client, doc_id)
        except (IngestFailed, OSError) as exc:
            logger.warning("%s: %s", doc_id, exc)
            return _failed(doc_id, exc)
        except Exception as exc:  # keep the batch alive; the outcome carries the error
            logger.exception("%s: unexpected failure", doc_id)
            return _failed(doc_id, exc)

    if workers == 1:
        outcomes = [one(p) for p in paths]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(one, paths))
    return outcomes, summarize(outcomes)
