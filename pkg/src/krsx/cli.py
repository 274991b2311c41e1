"""krsx command line: gen-corpus, extract, eval, bench, stub-serve.

Exit codes: 0 success, 1 environment or I/O failure, 2 usage or validation error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import statistics
import sys
from contextlib import ExitStack
from dataclasses import replace
from pathlib import Path

from .cascade import MODES, PipelineConfig, extract_corpus
from .config import build, load_config, pipeline_config
from .core import ExtractionOutcome, parse_record, serialize_record
from .corpusgen import PROGRAMS, CorpusSpec, generate_corpus, write_corpus
from .errors import ConfigError, InvalidSpec, KrsxError, MalformedRecord, MissingLabel, SchemaViolation
from .evalkit import (
    CATEGORIES,
    EvalConfig,
    aggregate,
    score_document,
    score_table,
    throughput_report,
    throughput_table,
    to_csv,
    to_text,
)
from .llm import LlmClient
from .stub import StubRuntime, StubScript, script_from_records

logger = logging.getLogger("krsx")

LIVE_ENDPOINT = "http://localhost:11434"


class UsageError(Exception):
    pass


class EnvError(Exception):
    pass


def _config(args) -> dict:
    return load_config(args.config) if getattr(args, "config", None) else {}


# -- gen-corpus ----------------------------------------------------------------------------

def cmd_gen_corpus(args) -> int:
    data = _config(args)
    corpus = dict(data.get("corpus", {}))
    programs = tuple(corpus.get("programs", PROGRAMS))
    n = args.n
    if args.per_program is not None:
        if args.per_program < 1:
            raise InvalidSpec("--per-program must be >= 1")
        total = args.per_program * len(programs)
        if n is not None and n != total:
            raise InvalidSpec(f"--n {n} disagrees with --per-program {args.per_program} x {len(programs)} programs")
        n = total
    mix = tuple(float(x) for x in args.mix.split(",")) if args.mix else None
    spec = build(CorpusSpec, corpus, n_docs=n, seed=args.seed, route_mix=mix)
    spec.check()
    out = Path(args.out or data.get("paths", {}).get("out", "corpus"))
    items = generate_corpus(spec)
    write_corpus(spec, items, out)
    by_program: dict[str, int] = {}
    by_layout: dict[str, int] = {}
    for it in items:
        by_program[it.labels["program"]] = by_program.get(it.labels["program"], 0) + 1
        by_layout[it.labels["layout"]] = by_layout.get(it.labels["layout"], 0) + 1
    print(f"wrote {len(items)} documents to {out}/ (seed {spec.seed})")
    print("  programs: " + ", ".join(f"{k}={v}" for k, v in by_program.items()))
    print("  layouts:  " + ", ".join(f"{k}={v}" for k, v in by_layout.items()))
    return 0


# -- LLM wiring ------------------------------------------------------------------------------

def _stub_script_for(corpus: Path, delay_s: float) -> StubScript:
    pairs = []
    for gt_path in sorted(corpus.glob("*.gt.json")):
        record = json.loads(gt_path.read_text(encoding="utf-8"))
        needle = (record.get("metadata") or {}).get("student_id")
        if needle:
            pairs.append((needle, record))
    return script_from_records(pairs, delay_s)


def _open_client(args, data: dict, config: PipelineConfig, corpus: Path, stack: ExitStack) -> LlmClient | None:
    """Client for the bundled stub, an explicit endpoint, or none at all."""
    llm = config.llm
    if args.stub:
        script = StubScript.load(args.stub_script) if args.stub_script else _stub_script_for(corpus, args.stub_delay)
        stub = stack.enter_context(StubRuntime(script))
        return stack.enter_context(LlmClient(replace(llm, endpoint_url=stub.url)))
    endpoint = (args.endpoint or os.environ.get("KRSX_ENDPOINT")
                or data.get("llm", {}).get("endpoint_url") or (LIVE_ENDPOINT if args.live else None))
    if endpoint is None:
        if config.mode != "cascade":
            raise EnvError(f"mode {config.mode} needs --endpoint, KRSX_ENDPOINT or --stub")
        logger.warning("no LLM endpoint configured; documents needing the LLM get empty tables")
        return None
    client = stack.enter_context(LlmClient(replace(llm, endpoint_url=endpoint)))
    if not client.ping():
        raise EnvError(f"LLM endpoint {endpoint} is unreachable")
    return client


def _pipeline(args, data: dict) -> PipelineConfig:
    overrides = {"model_name": args.model, "num_ctx": args.ctx}
    mode = args.mode or data.get("pipeline", {}).get("mode", "cascade")
    if args.timeout is not None:
        overrides["timeout_llm_only_s" if mode == "llm_only" else "timeout_hybrid_s"] = args.timeout
    return pipeline_config(data, mode, **overrides)


def _corpus_paths(args, data: dict) -> tuple[Path, list[Path]]:
    src = Path(args.inp or data.get("paths", {}).get("in", "corpus"))
    if not src.is_dir():
        raise EnvError(f"input directory {src} does not exist")
    return src, sorted(src.glob("*.pdf"))


def _workers(args, data: dict, default: int) -> int:
    workers = args.workers or data.get("pipeline", {}).get("workers") or default
    if workers < 1:
        raise UsageError("--workers must be >= 1")
    return workers


def outcome_to_obj(o: ExtractionOutcome) -> dict:
    return {
        "doc_id": o.doc_id,
        "metadata_route": o.metadata_route,
        "table_route": o.table_route,
        "seconds": o.seconds,
        "stage_timings": dict(o.stage_timings),
        "attempts": [{"stage": a.stage, "ok": a.ok, "reason": a.reason} for a in o.attempts],
        "error": o.error,
    }


def _route_line(outcomes) -> str:
    counts: dict[str, int] = {}
    for o in outcomes:
        key = o.table_route or ("failed" if o.error else "none")
        counts[key] = counts.get(key, 0) + 1
    return ", ".join(f"{k}={v}" for k, v in sorted(counts.items()))


# -- extract ------------------------------------------------------------------------------

def cmd_extract(args) -> int:
    data = _config(args)
    config = _pipeline(args, data)
    src, paths = _corpus_paths(args, data)
    out = Path(args.out or data.get("paths", {}).get("out", "preds"))
    out.mkdir(parents=True, exist_ok=True)
    previous: dict[str, dict] = {}
    if args.resume:
        done = {p.name.removesuffix(".pred.json") for p in out.glob("*.pred.json")}
        if (out / "outcomes.json").exists():
            previous = {o["doc_id"]: o for o in
                        json.loads((out / "outcomes.json").read_text(encoding="utf-8"))["outcomes"]
                        if o["doc_id"] in done}
        paths = [p for p in paths if p.stem not in done]
    with ExitStack() as stack:
        client = _open_client(args, data, config, src, stack)
        outcomes, summary = extract_corpus(paths, config, _workers(args, data, os.cpu_count() or 1), client)
    for o in outcomes:
        (out / f"{o.doc_id}.pred.json").write_bytes(serialize_record(o.record))
    merged = {**previous, **{o.doc_id: outcome_to_obj(o) for o in outcomes}}
    doc = {"mode": config.mode, "summary": summary, "outcomes": [merged[k] for k in sorted(merged)]}
    (out / "outcomes.json").write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    print(f"extracted {len(outcomes)} documents ({config.mode}) into {out}/"
          + (f", {len(previous)} kept from earlier run" if previous else ""))
    print(f"  routes: {_route_line(outcomes)}")
    failed = [o.doc_id for o in outcomes if o.error]
    if failed:
        print(f"  unreadable: {', '.join(failed)}")
    return 0


# -- eval -------------------------------------------------------------------------------------

def _labels(pred_dir: Path, gt_dir: Path) -> dict[str, dict[str, str]]:
    labels: dict[str, dict[str, str]] = {}
    manifest = gt_dir / "manifest.json"
    if manifest.exists():
        for item in json.loads(manifest.read_text(encoding="utf-8"))["items"]:
            labels.setdefault(item["doc_id"], {}).update(
                {k: str(v) for k, v in item.items() if isinstance(v, (str, int, float, bool))})
    outcomes = pred_dir / "outcomes.json"
    if outcomes.exists():
        doc = json.loads(outcomes.read_text(encoding="utf-8"))
        for o in doc["outcomes"]:
            entry = labels.setdefault(o["doc_id"], {})
            entry["mode"] = doc.get("mode", "")
            entry["route"] = str(o.get("table_route"))
            entry["metadata_route"] = str(o.get("metadata_route"))
    return labels


def cmd_eval(args) -> int:
    data = _config(args)
    paths = data.get("paths", {})
    pred_dir = Path(args.pred or paths.get("pred", "preds"))
    gt_dir = Path(args.gt or paths.get("gt", "corpus"))
    config = build(EvalConfig, data.get("eval"), ls_threshold=args.threshold)
    preds = sorted(pred_dir.glob("*.pred.json"))
    if not preds:
        raise UsageError(f"no predictions in {pred_dir}")
    missing = [p.name for p in preds if not (gt_dir / p.name.replace(".pred.json", ".gt.json")).exists()]
    if missing:
        raise UsageError("no ground truth for: " + ", ".join(missing))
    labels = _labels(pred_dir, gt_dir)
    cards = []
    for p in preds:
        doc_id = p.name.removesuffix(".pred.json")
        gt = parse_record((gt_dir / f"{doc_id}.gt.json").read_bytes())
        pred = parse_record(p.read_bytes())
        cards.append(score_document(gt, pred, config, doc_id, labels.get(doc_id, {})))
    keys = [k.strip() for k in args.group.split(",") if k.strip()] if args.group else []
    if not keys:
        keys = ["all"]
        for card in cards:
            card.labels["all"] = "all"
    header, body = score_table(aggregate(cards, keys), keys)
    out = Path(args.out) if args.out else pred_dir
    out.mkdir(parents=True, exist_ok=True)
    (out / "scores.csv").write_text(to_csv(header, body), encoding="utf-8")
    text = to_text(header, body)
    (out / "scores.txt").write_text(text, encoding="utf-8")
    print(text, end="")
    overall_em = {c: statistics.fmean(card.em[c] for card in cards) for c in CATEGORIES}
    overall_ls = {c: statistics.fmean(card.ls[c] for card in cards) for c in CATEGORIES}
    print(f"overall over {len(cards)} documents (threshold {config.ls_threshold}):")
    print("  mean EM " + "  ".join(f"{c}={overall_em[c]:.3f}" for c in CATEGORIES))
    print("  mean LS " + "  ".join(f"{c}={overall_ls[c]:.3f}" for c in CATEGORIES))
    return 0


# -- bench -------------------------------------------------------------------------------------

def cmd_bench(args) -> int:
    data = _config(args)
    config = _pipeline(args, data)
    src, paths = _corpus_paths(args, data)
    if not paths:
        raise UsageError(f"no PDFs in {src}")
    with ExitStack() as stack:
        client = _open_client(args, data, config, src, stack)
        outcomes, summary = extract_corpus(paths, config, _workers(args, data, 1), client)
    header, body = throughput_table(throughput_report(outcomes))
    header, body = ["Mode", *header], [[config.mode, *row] for row in body]
    out = Path(args.out or data.get("paths", {}).get("out", "bench"))
    out.mkdir(parents=True, exist_ok=True)
    (out / "throughput.csv").write_text(to_csv(header, body), encoding="utf-8")
    text = to_text(header, body)
    (out / "throughput.txt").write_text(text, encoding="utf-8")
    print(text, end="")
    print(f"overall: {summary['mean_s']:.4f} s/doc mean, {summary['median_s']:.4f} s/doc median, "
          f"n={summary['n']}")
    return 0


# -- stub-serve -----------------------------------------------------------------------------------

def cmd_stub_serve(args) -> int:
    script = StubScript.load(args.script) if args.script else StubScript()
    runtime = StubRuntime(script, args.host, args.port)
    print(f"stub runtime listening on {runtime.url}", flush=True)
    try:
        runtime.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


# -- parser ---------------------------------------------------------------------------------------

def _llm_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--in", dest="inp", help="corpus directory with *.pdf (and *.gt.json for --stub)")
    p.add_argument("--out")
    p.add_argument("--workers", type=int)
    p.add_argument("--endpoint", help="model runtime URL (default: $KRSX_ENDPOINT)")
    p.add_argument("--model")
    p.add_argument("--ctx", type=int, help="context window in tokens")
    p.add_argument("--timeout", type=int, help="per-call LLM timeout in seconds for this mode")
    p.add_argument("--stub", action="store_true", help="answer LLM calls from the bundled stub")
    p.add_argument("--stub-script", help="stub script JSON (default: replay the corpus ground truth)")
    p.add_argument("--stub-delay", type=float, default=0.0, help="seconds the stub waits per reply")
    p.add_argument("--live", action="store_true", help=f"use a local runtime at {LIVE_ENDPOINT}")
    p.add_argument("--config")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="krsx", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-corpus", help="write a seeded synthetic corpus")
    g.add_argument("--n", type=int)
    g.add_argument("--per-program", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--mix", help="ruled,borderless,pathological fractions, e.g. 0.93,0.06,0.01")
    g.add_argument("--out")
    g.add_argument("--config")
    g.set_defaults(func=cmd_gen_corpus)

    e = sub.add_parser("extract", help="extract records from a corpus")
    _llm_flags(e)
    e.add_argument("--resume", action="store_true", help="skip documents that already have a prediction")
    e.set_defaults(func=cmd_extract)

    v = sub.add_parser("eval", help="score predictions against ground truth")
    v.add_argument("--pred")
    v.add_argument("--gt")
    v.add_argument("--group", help="comma-separated labels, e.g. program,mode,route")
    v.add_argument("--threshold", type=float)
    v.add_argument("--out")
    v.add_argument("--config")
    v.set_defaults(func=cmd_eval)

    b = sub.add_parser("bench", help="per-route throughput report")
    _llm_flags(b)
    b.set_defaults(func=cmd_bench)

    s = sub.add_parser("stub-serve", help="run the scriptable stub runtime")
    s.add_argument("--script")
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--port", type=int, default=11434)
    s.set_defaults(func=cmd_stub_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, InvalidSpec, ConfigError, MissingLabel, MalformedRecord, SchemaViolation) as exc:
        print(f"krsx: error: {exc}", file=sys.stderr)
        return 2
    except (EnvError, OSError, KrsxError) as exc:
        print(f"krsx: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
