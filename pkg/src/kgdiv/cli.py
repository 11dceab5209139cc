"""Command-line interface: fetch, audit, score, report, validate.

Exit codes: 0 success, 1 runtime or data failure, 2 usage or
configuration error. Commands never mutate their inputs and rerunning
with identical inputs rewrites byte-identical outputs.
"""

from __future__ import annotations

import argparse
import csv
import logging
import re
import sys
from datetime import date
from pathlib import Path

from . import audit as audit_mod
from . import catalog, report
from .config import ConfigError, RunConfig, load_run_config, parse_schedule
from .diversity import (
    DiversityParams,
    EntityRecord,
    FeatureSet,
    compute_balance,
    compute_disparity,
    stirling_delta,
)
from .fixtures import FixtureStore, FixtureTransport
from .pipeline import (
    AnnotationClient,
    AnnotationError,
    CsvTripleSource,
    TextDocument,
    aggregate_mentions,
    annotate,
    builtin_ontology,
    enrich_entity,
    load_rules,
    match_rules,
)
from .sparql import DIALECTS, EndpointConfig, QueryError

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kgdiv",
        description="Actor diversity scoring and knowledge-source "
        "representation audits",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    fetch = sub.add_parser("fetch", help="materialize snapshot CSVs from a source")
    fetch.add_argument("--source", required=True, choices=DIALECTS)
    fetch.add_argument("--from-fixture", metavar="DIR", default=None)
    fetch.add_argument("--config", default=None)
    fetch.add_argument("--out", default="out")
    fetch.set_defaults(func=cmd_fetch)

    aud = sub.add_parser("audit", help="run the representation audit on a snapshot")
    aud.add_argument("--snapshot", required=True, metavar="DIR")
    aud.add_argument("--baseline", required=True, metavar="FILE")
    aud.add_argument("--map", required=True, metavar="FILE", dest="map_file")
    aud.add_argument("--parties", required=True, metavar="FILE")
    aud.add_argument("--overrides", default=None, metavar="FILE")
    aud.add_argument("--schedule", default=None, help="comma-separated years or dates")
    aud.add_argument(
        "--baseline-policy",
        choices=("preceding", "closest"),
        default="preceding",
    )
    aud.add_argument("--body", default=None, help="audit only this baseline body")
    aud.add_argument("--today", default=None, help="cap open careers at this date")
    aud.add_argument("--max-unmapped", type=int, default=0)
    aud.add_argument("--config", default=None)
    aud.add_argument("--out", default="out")
    aud.set_defaults(func=cmd_audit)

    score = sub.add_parser("score", help="compute per-document actor diversity")
    score.add_argument("--corpus", required=True, metavar="PATH")
    score.add_argument("--rules", default=None, metavar="FILE")
    score.add_argument("--triples", default=None, metavar="FILE")
    score.add_argument("--alpha", type=float, default=None)
    score.add_argument("--beta", type=float, default=None)
    score.add_argument("--metric", default=None)
    score.add_argument("--nel-endpoint", default=None, metavar="URL")
    score.add_argument("--require-nel", action="store_true")
    score.add_argument("--config", default=None)
    score.add_argument("--out", default="out")
    score.set_defaults(func=cmd_score)

    rep = sub.add_parser("report", help="render audit output as SVG figures")
    rep.add_argument("--audit", required=True, metavar="FILE")
    rep.add_argument("--style", choices=report.RENDER_STYLES, default="line")
    rep.add_argument("--baseline-label", default="baseline")
    rep.add_argument("--out", default="out")
    rep.set_defaults(func=cmd_report)

    val = sub.add_parser("validate", help="report data-quality findings in a snapshot")
    val.add_argument("--snapshot", required=True, metavar="DIR")
    val.add_argument("--map", default=None, metavar="FILE", dest="map_file")
    val.add_argument("--parties", default=None, metavar="FILE")
    val.add_argument("--out", default=None)
    val.set_defaults(func=cmd_validate)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (QueryError, AnnotationError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _load_config(args) -> RunConfig:
    if getattr(args, "config", None):
        return load_run_config(args.config)
    return RunConfig()


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _require_file(raw: str | None, what: str) -> Path | None:
    if raw is None:
        return None
    path = Path(raw)
    if not path.exists():
        raise ConfigError(f"{what} file {path} does not exist")
    return path


# --- fetch ----------------------------------------------------------------


def cmd_fetch(args) -> int:
    config = _load_config(args)
    out = _out_dir(args)
    endpoint = config.endpoint(args.source)

    transport = None
    if args.from_fixture:
        store = FixtureStore(args.from_fixture)
        transport = FixtureTransport(store)
        retrieved_at = store.retrieved_at
        endpoint = EndpointConfig(
            url=f"fixture:///{args.source}",
            dialect=args.source,
            page_size=endpoint.page_size,
            max_requests_per_second=10_000.0,
            retry_limit=0,
        )
    else:
        retrieved_at = date.today().isoformat()

    templates = None
    politicians = catalog.fetch_politicians(
        endpoint, retrieved_at, transport=transport, templates=templates
    )
    parties = catalog.fetch_parties(
        endpoint, retrieved_at, transport=transport, templates=templates
    )

    pol_tmp = out / "politicians.csv.tmp"
    par_tmp = out / "parties.csv.tmp"
    try:
        catalog.write_politicians_csv(pol_tmp, politicians)
        catalog.write_parties_csv(par_tmp, parties)
        pol_tmp.replace(out / "politicians.csv")
        par_tmp.replace(out / "parties.csv")
    except BaseException:
        pol_tmp.unlink(missing_ok=True)
        par_tmp.unlink(missing_ok=True)
        raise
    print(
        f"wrote {len(politicians)} politician rows and {len(parties)} party "
        f"rows to {out}"
    )
    return 0


# --- audit ------------------------------------------------------------------


def _write_rows(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def cmd_audit(args) -> int:
    out = _out_dir(args)
    snapshot_dir = Path(args.snapshot)
    politicians_path = snapshot_dir / "politicians.csv"
    if not politicians_path.exists():
        raise ConfigError(f"snapshot {snapshot_dir} has no politicians.csv")
    for name, raw in (
        ("baseline", args.baseline),
        ("map", args.map_file),
        ("parties", args.parties),
    ):
        _require_file(raw, name)

    nmap = audit_mod.load_normalization_map(args.map_file, args.parties)
    baselines = audit_mod.load_baselines(args.baseline)
    overrides = (
        audit_mod.load_career_end_overrides(args.overrides)
        if _require_file(args.overrides, "overrides")
        else None
    )
    schedule = (
        parse_schedule(args.schedule) if args.schedule else audit_mod.DEFAULT_SCHEDULE
    )
    policy = (
        "most-recent-preceding" if args.baseline_policy == "preceding" else "closest-in-time"
    )
    today = date.fromisoformat(args.today) if args.today else None

    politician_rows = catalog.read_politicians_csv(politicians_path)
    parties_path = snapshot_dir / "parties.csv"
    party_rows = (
        catalog.read_parties_csv(parties_path) if parties_path.exists() else []
    )

    findings = audit_mod.validate_snapshot(politician_rows, party_rows, nmap)
    _write_rows(
        out / "findings.csv",
        ["kind", "subject", "detail"],
        [[f.kind, f.subject, f.detail] for f in findings],
    )

    bodies = sorted(baselines)
    if args.body:
        if args.body not in baselines:
            raise ConfigError(
                f"body {args.body!r} not in baseline file (has {bodies})"
            )
        bodies = [args.body]

    unmapped_written = False
    for body in bodies:
        result = audit_mod.run_audit(
            politician_rows,
            nmap,
            baselines[body],
            schedule=schedule,
            policy=policy,
            today=today,
            career_end_overrides=overrides,
        )
        if not unmapped_written:
            distinct_refs = sorted({u.raw_ref for u in result.unmapped})
            _write_rows(
                out / "unmapped_refs.csv",
                ["source", "politician_id", "raw_ref"],
                [
                    [u.source, u.politician_id, u.raw_ref]
                    for u in sorted(
                        result.unmapped,
                        key=lambda u: (u.source, u.politician_id, u.raw_ref),
                    )
                ],
            )
            unmapped_written = True
            if len(distinct_refs) > args.max_unmapped:
                print(
                    f"error: {len(distinct_refs)} unmapped party refs exceed "
                    f"--max-unmapped {args.max_unmapped}; see "
                    f"{out / 'unmapped_refs.csv'}",
                    file=sys.stderr,
                )
                return 1
        (out / f"audit_{body.lower()}.csv").write_bytes(
            report.emit_series_csv(result.rows)
        )
        _write_rows(
            out / f"coverage_{body.lower()}.csv",
            ["source", "time_point", "active_total", "undated_total", "low_sample"],
            [
                [
                    c.source,
                    c.time_point.isoformat(),
                    c.active_total,
                    c.undated_total,
                    str(c.low_sample).lower(),
                ]
                for c in result.coverage
            ],
        )
    print(f"audit written to {out} (bodies: {', '.join(bodies)}; findings: {len(findings)})")
    return 0


# --- score ------------------------------------------------------------------


def _load_corpus(path: Path) -> list[TextDocument]:
    if path.is_dir():
        docs = []
        for file in sorted(path.glob("*.txt")):
            docs.append(
                TextDocument(doc_id=file.stem, text=file.read_text(encoding="utf-8"))
            )
        if not docs:
            raise ConfigError(f"corpus directory {path} has no .txt files")
        return docs
    if path.suffix.lower() == ".csv":
        docs = []
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if not reader.fieldnames or {"doc_id", "text"} - set(reader.fieldnames):
                raise ConfigError(f"corpus CSV {path} needs doc_id and text columns")
            for row in reader:
                docs.append(TextDocument(doc_id=row["doc_id"], text=row["text"]))
        return docs
    raise ConfigError(f"corpus {path} is neither a directory nor a CSV file")


def cmd_score(args) -> int:
    config = _load_config(args)
    out = _out_dir(args)
    corpus_path = Path(args.corpus)
    if not corpus_path.exists():
        raise ConfigError(f"corpus {corpus_path} does not exist")
    docs = _load_corpus(corpus_path)

    rules_path = _require_file(args.rules, "rules") or config.rules_path
    rules = load_rules(rules_path) if rules_path else []
    lemma_rules = [r for r in rules if r.match_layer == "lemma"]
    if lemma_rules:
        # plain-text ingestion carries no lemma layer; lemmatization is the
        # caller's job in library use
        logger.warning(
            "skipping %d lemma rule(s); corpus ingestion provides no lemma layer",
            len(lemma_rules),
        )
        rules = [r for r in rules if r.match_layer == "surface"]
    triples_path = _require_file(args.triples, "triples") or config.triples_path
    triples = (
        CsvTripleSource.from_file(triples_path) if triples_path else None
    )
    ontology = builtin_ontology()
    params = DiversityParams(
        alpha=args.alpha if args.alpha is not None else config.alpha,
        beta=args.beta if args.beta is not None else config.beta,
    )
    metric = args.metric or config.metric

    nel_url = args.nel_endpoint or config.nel_endpoint
    client = AnnotationClient(endpoint_url=nel_url) if nel_url else None
    nel_warned = False

    score_rows: list[list] = []
    count_rows: list[list] = []
    for doc in docs:
        mentions = match_rules(doc, rules)
        if client is not None:
            try:
                annotated = annotate(doc, client)
            except AnnotationError as exc:
                if args.require_nel:
                    raise
                if not nel_warned:
                    logger.warning(
                        "annotation endpoint unavailable (%s); continuing with "
                        "rule matches only",
                        exc,
                    )
                    nel_warned = True
                annotated = []
            mentions = mentions + _type_filtered(annotated, triples, ontology)
        counts = aggregate_mentions(mentions)
        entities = []
        for entity_id in sorted(counts):
            features = FeatureSet()
            actor_type = "person"
            if triples is not None and not entity_id.startswith("unnamed:"):
                features = enrich_entity(entity_id, triples, ontology)
                actor_type = (
                    ontology.classify(triples.dialect, triples.types(entity_id))
                    or "person"
                )
            entities.append(
                EntityRecord(
                    id=entity_id,
                    label=entity_id,
                    actor_type=actor_type,
                    features=features,
                )
            )
        balance = compute_balance(counts)
        disparity = compute_disparity(entities, metric=metric)
        result = stirling_delta(balance, disparity, params)
        score_rows.append([doc.doc_id, result.variety, f"{result.delta:.12g}"])
        for entity_id in sorted(counts):
            count_rows.append([doc.doc_id, entity_id, counts[entity_id]])

    _write_rows(out / "scores.csv", ["doc_id", "n_entities", "delta"], score_rows)
    _write_rows(
        out / "entity_counts.csv", ["doc_id", "entity_id", "count"], count_rows
    )
    print(f"scored {len(docs)} documents into {out}")
    return 0


def _type_filtered(mentions, triples, ontology):
    """Drop annotator mentions whose resource is typed but not actor-typed."""
    if triples is None:
        return list(mentions)
    kept = []
    for mention in mentions:
        types = triples.types(mention.resolved_id) if mention.resolved_id else []
        if types and ontology.classify(triples.dialect, types) is None:
            continue
        kept.append(mention)
    return kept


# --- report -----------------------------------------------------------------


def _parse_audit_csv(path: Path) -> list[report.AuditRow]:
    problems = []
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = set(report.CSV_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(
                f"audit CSV {path} lacks columns {sorted(missing)}"
            )
        for number, row in enumerate(reader, start=2):
            try:
                rows.append(
                    audit_mod.AuditRow(
                        source=row["source"],
                        time_point=date.fromisoformat(row["time_point"]),
                        party=row["canonical_acronym"],
                        alignment=row["alignment"],
                        lower_count=int(row["lower_count"]),
                        upper_count=int(row["upper_count"]),
                        lower_share=float(row["lower_share"]),
                        upper_share=float(row["upper_share"]),
                        baseline_share=float(row["baseline_share"]),
                        verdict=row["verdict"],
                        active_total=int(row["active_total"]),
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                problems.append(f"row {number}: {exc}")
    if problems:
        raise ValueError(
            f"malformed audit CSV {path}:\n  " + "\n  ".join(problems)
        )
    return rows


def _safe_name(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_-]+", "-", name) or "unnamed"


def cmd_report(args) -> int:
    out = _out_dir(args)
    audit_path = Path(args.audit)
    if not audit_path.exists():
        raise ConfigError(f"audit file {audit_path} does not exist")
    rows = _parse_audit_csv(audit_path)
    sources = sorted({r.source for r in rows})
    if not sources:
        spec = report.FigureSpec(
            title="no data",
            source_label="none",
            baseline_label=args.baseline_label,
            time_points=(),
            parties=(),
            active_counts={},
            style=args.style,
        )
        (out / "figure_empty.svg").write_bytes(report.emit_figure_svg(spec))
        print(f"no audit rows; wrote placeholder figure to {out}")
        return 0
    for source in sources:
        spec = report.build_figure_spec(
            rows, source, args.baseline_label, style=args.style
        )
        (out / f"figure_{_safe_name(source)}.svg").write_bytes(
            report.emit_figure_svg(spec)
        )
    print(f"wrote {len(sources)} figure(s) to {out}")
    return 0


# --- validate -----------------------------------------------------------------


def cmd_validate(args) -> int:
    snapshot_dir = Path(args.snapshot)
    politicians_path = snapshot_dir / "politicians.csv"
    if not politicians_path.exists():
        raise ConfigError(f"snapshot {snapshot_dir} has no politicians.csv")
    politician_rows = catalog.read_politicians_csv(politicians_path)
    parties_path = snapshot_dir / "parties.csv"
    party_rows = (
        catalog.read_parties_csv(parties_path) if parties_path.exists() else []
    )
    nmap = None
    if args.map_file and args.parties:
        nmap = audit_mod.load_normalization_map(
            _require_file(args.map_file, "map"), _require_file(args.parties, "parties")
        )
    findings = audit_mod.validate_snapshot(politician_rows, party_rows, nmap)
    for finding in findings:
        print(f"{finding.kind}: {finding.subject} ({finding.detail})")
    if not findings:
        print("no findings")
    if args.out:
        out = _out_dir(args)
        _write_rows(
            out / "findings.csv",
            ["kind", "subject", "detail"],
            [[f.kind, f.subject, f.detail] for f in findings],
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
