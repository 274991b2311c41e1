"""Exact-match and thresholded Levenshtein scoring, grouping and throughput reports."""

from __future__ import annotations

import csv
import io
import statistics
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .core import METADATA_FIELDS, ExtractionOutcome, KrsRecord
from .errors import MissingLabel
from .textnorm import comparison_key, similarity

CATEGORIES = ("metadata", "courses", "lecturers")


@dataclass(frozen=True)
class EvalConfig:
    ls_threshold: float = 0.7
    max_slots: int = 15

    def __post_init__(self):
        if not 0.0 <= self.ls_threshold <= 1.0:
            raise ValueError("ls_threshold must lie in [0, 1]")
        if self.max_slots < 1:
            raise ValueError("max_slots must be >= 1")


@dataclass(frozen=True)
class FieldScore:
    path: str
    gt: str
    pred: str
    em: int
    ls: float


@dataclass
class ScoreCard:
    doc_id: str
    em: dict[str, float]
    ls: dict[str, float]
    details: list[FieldScore] = field(default_factory=list)
    labels: dict[str, str] = field(default_factory=dict)


def score_field(gt: str | None, pred: str | None, config: EvalConfig = EvalConfig()) -> tuple[int, float]:
    """EM on comparison keys (both empty counts as a match); LS zeroed below the threshold."""
    a, b = comparison_key(gt or ""), comparison_key(pred or "")
    em = int(a == b)
    s = similarity(a, b)
    return em, (s if s >= config.ls_threshold else 0.0)


def score_lists(gt: Sequence[str], pred: Sequence[str], config: EvalConfig = EvalConfig(),
                path: str = "") -> tuple[float, float, list[FieldScore]]:
    """Positional comparison of at most ``max_slots`` entries.

    The shorter list is padded with empty strings. Slots empty on both sides do
    not count; when none count the list scores 1.0.
    """
    gt, pred = list(gt[:config.max_slots]), list(pred[:config.max_slots])
    n = max(len(gt), len(pred))
    gt += [""] * (n - len(gt))
    pred += [""] * (n - len(pred))
    details = []
    for i, (g, p) in enumerate(zip(gt, pred)):
        if not comparison_key(g) and not comparison_key(p):
            continue
        em, ls = score_field(g, p, config)
        details.append(FieldScore(f"{path}[{i}]", g, p, em, ls))
    if not details:
        return 1.0, 1.0, details
    return (statistics.fmean(d.em for d in details),
            statistics.fmean(d.ls for d in details), details)


def score_document(gt: KrsRecord, pred: KrsRecord, config: EvalConfig = EvalConfig(),
                   doc_id: str = "", labels: Mapping[str, str] | None = None) -> ScoreCard:
    details = []
    for name in METADATA_FIELDS:
        g, p = getattr(gt.metadata, name) or "", getattr(pred.metadata, name) or ""
        em, ls = score_field(g, p, config)
        details.append(FieldScore(f"metadata.{name}", g, p, em, ls))
    meta = details[:]
    c_em, c_ls, c_details = score_lists(gt.courses, pred.courses, config, "courses")
    l_em, l_ls, l_details = score_lists(gt.lecturers, pred.lecturers, config, "lecturers")
    return ScoreCard(
        doc_id=doc_id,
        em={"metadata": statistics.fmean(d.em for d in meta), "courses": c_em, "lecturers": l_em},
        ls={"metadata": statistics.fmean(d.ls for d in meta), "courses": c_ls, "lecturers": l_ls},
        details=details + c_details + l_details,
        labels=dict(labels or {}),
    )


@dataclass(frozen=True)
class ReportRow:
    group: tuple[str, ...]
    em: dict[str, float]
    ls: dict[str, float]
    n: int


def aggregate(cards: Sequence[ScoreCard], keys: Sequence[str]) -> list[ReportRow]:
    """Unweighted mean of per-document category scores within each label group."""
    groups: dict[tuple[str, ...], list[ScoreCard]] = {}
    for card in cards:
        missing = [k for k in keys if k not in card.labels]
        if missing:
            raise MissingLabel(f"{card.doc_id or 'card'} has no label {', '.join(missing)}")
        groups.setdefault(tuple(str(card.labels[k]) for k in keys), []).append(card)
    rows = []
    for group in sorted(groups):
        members = groups[group]
        rows.append(ReportRow(
            group,
            {c: statistics.fmean(m.em[c] for m in members) for c in CATEGORIES},
            {c: statistics.fmean(m.ls[c] for m in members) for c in CATEGORIES},
            len(members),
        ))
    return rows


@dataclass(frozen=True)
class ThroughputRow:
    route: str
    mean_s: float
    per_min: float
    n: int
    mean_with_first_s: float


def throughput_report(outcomes: Sequence[ExtractionOutcome], key: str = "table_route") -> list[ThroughputRow]:
    """Per-route seconds per document.

    The first document seen on each route carries warm-up cost (model load on a
    real runtime), so ``mean_s`` leaves it out and ``mean_with_first_s`` keeps it.
    """
    by_route: dict[str, list[float]] = {}
    for o in outcomes:
        if o.error is not None:
            continue
        by_route.setdefault(str(getattr(o, key) or "none"), []).append(o.seconds)
    rows = []
    for route in sorted(by_route):
        secs = by_route[route]
        warm = secs[1:] or secs
        mean = statistics.fmean(warm)
        rows.append(ThroughputRow(route, mean, 60.0 / mean if mean > 0 else float("inf"),
                                  len(secs), statistics.fmean(secs)))
    return rows


# -- rendering ---------------------------------------------------------------------------

def score_table(rows: Sequence[ReportRow], keys: Sequence[str]) -> tuple[list[str], list[list[str]]]:
    header = [k.capitalize() for k in keys]
    header += [f"EM {c.capitalize()}" for c in CATEGORIES] + [f"LS {c.capitalize()}" for c in CATEGORIES] + ["n"]
    body = [[*r.group, *(f"{r.em[c]:.3f}" for c in CATEGORIES),
             *(f"{r.ls[c]:.3f}" for c in CATEGORIES), str(r.n)] for r in rows]
    return header, body


def throughput_table(rows: Sequence[ThroughputRow]) -> tuple[list[str], list[list[str]]]:
    header = ["Route", "Throughput (sec/PDF)", "PDF/min", "n Data", "Throughput (with 1st attempt)"]
    body = [[r.route, f"{r.mean_s:.4f}", f"{r.per_min:.2f}", str(r.n), f"{r.mean_with_first_s:.4f}"]
            for r in rows]
    return header, body


def to_csv(header: Sequence[str], body: Sequence[Sequence[str]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(body)
    return buf.getvalue()


def to_text(header: Sequence[str], body: Sequence[Sequence[str]]) -> str:
    widths = [max(len(str(row[i])) for row in (header, *body)) for i in range(len(header))]
    lines = ["  ".join(str(v).ljust(w) for v, w in zip(row, widths)).rstrip() for row in (header, *body)]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"
