"""Representation-bias audit of politician/party snapshots.

Pipeline: normalize raw affiliations to canonical party acronyms, derive
each politician's maximal activity period, select those active at each
audit time point, bracket every party's visibility between a lower bound
(politicians whose whole relevant career is that single party) and an
upper bound (politicians ever affiliated with it), and compare the bounds
against parliamentary seat-share baselines to classify parties as over-,
under-, or indeterminately represented.
"""

from __future__ import annotations

import csv
import logging
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from datetime import date
from pathlib import Path

logger = logging.getLogger(__name__)

ALIGNMENTS = (
    "extreme-left",
    "left",
    "centre-left",
    "centre",
    "centre-right",
    "right",
    "extreme-right",
    "other",
    "unknown",
)

RELEVANCE_CLASSES = ("relevant", "not-relevant", "foreign")

#: Audit years sampled at 1 January; the off-5-year points bracket the
#: general elections of 1995 and 2010.
DEFAULT_SCHEDULE = (
    date(1990, 1, 1),
    date(1996, 1, 1),
    date(2000, 1, 1),
    date(2005, 1, 1),
    date(2011, 1, 1),
    date(2015, 1, 1),
    date(2020, 1, 1),
)

#: Below this many active politicians the bound shares are flagged as hard
#: to interpret.
LOW_SAMPLE_THRESHOLD = 20

BASELINE_POLICIES = ("most-recent-preceding", "closest-in-time")


@dataclass(frozen=True)
class DateInterval:
    """Closed interval with optional open ends; None means unbounded."""

    start: date | None = None
    end: date | None = None

    def __post_init__(self) -> None:
        if self.start is not None and self.end is not None and self.start > self.end:
            raise ValueError(f"interval start {self.start} after end {self.end}")

    def contains(self, day: date) -> bool:
        if self.start is not None and day < self.start:
            return False
        if self.end is not None and day > self.end:
            return False
        return True

    @property
    def dated(self) -> bool:
        return self.start is not None or self.end is not None


@dataclass(frozen=True)
class Affiliation:
    party: str
    interval: DateInterval | None = None
    relevant: bool = True


@dataclass(frozen=True)
class PoliticianRecord:
    id: str
    label: str
    affiliations: tuple[Affiliation, ...] = ()
    death_date: date | None = None
    career_end_override: date | None = None

    def __post_init__(self) -> None:
        if (
            self.career_end_override is not None
            and self.death_date is not None
            and self.career_end_override > self.death_date
        ):
            raise ValueError(
                f"career end override {self.career_end_override} after death "
                f"{self.death_date} for {self.id!r}"
            )

    def relevant_parties(self) -> frozenset[str]:
        """The whole-career set of relevant party acronyms."""
        return frozenset(a.party for a in self.affiliations if a.relevant)


@dataclass(frozen=True)
class PartyRecord:
    canonical_acronym: str
    alignment: str
    relevance: str

    def __post_init__(self) -> None:
        if self.alignment not in ALIGNMENTS:
            raise ValueError(
                f"alignment {self.alignment!r} not one of {ALIGNMENTS}"
            )
        if self.relevance not in RELEVANCE_CLASSES:
            raise ValueError(
                f"relevance {self.relevance!r} not one of {RELEVANCE_CLASSES}"
            )


@dataclass(frozen=True)
class NormalizationMap:
    """Curated mapping of raw party references to canonical party records."""

    alias_to_canonical: Mapping[str, str]
    canonical_to_party: Mapping[str, PartyRecord]

    def __post_init__(self) -> None:
        for alias, canonical in self.alias_to_canonical.items():
            if canonical not in self.canonical_to_party:
                raise ValueError(
                    f"alias {alias!r} maps to unknown canonical party {canonical!r}"
                )

    def resolve(self, raw_ref: str) -> str | None:
        if raw_ref in self.alias_to_canonical:
            return self.alias_to_canonical[raw_ref]
        if raw_ref in self.canonical_to_party:
            return raw_ref
        return None

    def party(self, canonical: str) -> PartyRecord:
        return self.canonical_to_party[canonical]

    def relevant_parties(self) -> list[str]:
        return sorted(
            p.canonical_acronym
            for p in self.canonical_to_party.values()
            if p.relevance == "relevant"
        )


@dataclass(frozen=True)
class ElectionResult:
    seats: Mapping[str, int]
    total_seats: int

    def __post_init__(self) -> None:
        if self.total_seats <= 0:
            raise ValueError("total_seats must be positive")
        for party, n in self.seats.items():
            if n < 0:
                raise ValueError(f"negative seats for {party!r}")
        if sum(self.seats.values()) > self.total_seats:
            raise ValueError("party seats exceed total seats")


@dataclass(frozen=True)
class BaselineTable:
    body: str
    elections: Mapping[date, ElectionResult]

    def __post_init__(self) -> None:
        if not self.elections:
            raise ValueError("baseline table has no elections")


@dataclass(frozen=True)
class VisibilityBounds:
    party: str
    time_point: date
    lower_count: int
    upper_count: int
    lower_share: float
    upper_share: float
    active_total: int

    def __post_init__(self) -> None:
        if not 0 <= self.lower_count <= self.upper_count <= self.active_total:
            raise ValueError(
                f"bounds violated for {self.party!r} at {self.time_point}: "
                f"{self.lower_count} <= {self.upper_count} <= {self.active_total}"
            )


@dataclass(frozen=True)
class RepresentationVerdict:
    party: str
    time_point: date
    verdict: str
    baseline_share: float
    bounds: VisibilityBounds


@dataclass(frozen=True)
class Finding:
    """A data-quality issue detected in a snapshot."""

    kind: str
    subject: str
    detail: str


@dataclass(frozen=True)
class UnmappedRef:
    raw_ref: str
    politician_id: str
    source: str


@dataclass
class NormalizationResult:
    politicians: list[PoliticianRecord]
    unmapped: list[UnmappedRef]


@dataclass(frozen=True)
class AuditRow:
    source: str
    time_point: date
    party: str
    alignment: str
    lower_count: int
    upper_count: int
    lower_share: float
    upper_share: float
    baseline_share: float
    verdict: str
    active_total: int


@dataclass(frozen=True)
class CoverageRow:
    """Per-source, per-time-point actor accounting."""

    source: str
    time_point: date
    active_total: int
    undated_total: int
    low_sample: bool


@dataclass
class AuditResult:
    rows: list[AuditRow]
    coverage: list[CoverageRow]
    unmapped: list[UnmappedRef]


def _parse_date(raw: str | None) -> date | None:
    if raw is None:
        return None
    raw = raw.strip()
    if not raw:
        return None
    return date.fromisoformat(raw[:10])


def normalize_affiliations(
    rows: Iterable[Mapping[str, str]],
    nmap: NormalizationMap,
    career_end_overrides: Mapping[str, date] | None = None,
) -> NormalizationResult:
    """Collapse raw snapshot rows into one PoliticianRecord per politician.

    Party references are resolved through the alias map; affiliations to
    not-relevant or foreign parties are retained but flagged so the bounds
    computation skips them. Unresolvable references are dropped from the
    record and reported. Rows whose interval is inverted (end before start)
    keep the affiliation but lose the dates; validate_snapshot reports them.
    """
    overrides = career_end_overrides or {}
    by_id: dict[str, dict] = {}
    unmapped: list[UnmappedRef] = []
    for row in rows:
        pid = row["politician_id"]
        entry = by_id.setdefault(
            pid, {"label": "", "death": None, "affs": [], "source": row.get("source", "")}
        )
        if not entry["label"] and row.get("label"):
            entry["label"] = row["label"]
        if entry["death"] is None:
            entry["death"] = _parse_date(row.get("death_date"))

        raw_ref = (row.get("party_id") or "").strip()
        if not raw_ref:
            continue
        canonical = nmap.resolve(raw_ref)
        if canonical is None:
            unmapped.append(UnmappedRef(raw_ref, pid, row.get("source", "")))
            continue
        start = _parse_date(row.get("aff_start"))
        end = _parse_date(row.get("aff_end"))
        if start is not None and end is not None and end < start:
            start, end = None, None
        interval = DateInterval(start, end) if (start or end) else None
        relevant = nmap.party(canonical).relevance == "relevant"
        entry["affs"].append(Affiliation(canonical, interval, relevant))

    politicians = []
    for pid in sorted(by_id):
        entry = by_id[pid]
        deduped = list(dict.fromkeys(entry["affs"]))
        politicians.append(
            PoliticianRecord(
                id=pid,
                label=entry["label"],
                affiliations=tuple(deduped),
                death_date=entry["death"],
                career_end_override=overrides.get(pid),
            )
        )
    return NormalizationResult(politicians=politicians, unmapped=unmapped)


def activity_period(p: PoliticianRecord, today: date) -> DateInterval | None:
    """Convex hull of the politician's dated affiliations.

    An affiliation without an end date is capped by the earliest applicable
    of: today, the death date, and the curated career-end override. Records
    with no dated affiliation at all return None (no activity evidence) and
    are excluded from active-at-T selection.
    """
    dated = [a.interval for a in p.affiliations if a.interval is not None and a.interval.dated]
    if not dated:
        return None
    caps = [today]
    if p.death_date is not None:
        caps.append(p.death_date)
    if p.career_end_override is not None:
        caps.append(p.career_end_override)
    cap = min(caps)

    starts = [iv.start for iv in dated if iv.start is not None]
    effective_ends = [iv.end if iv.end is not None else cap for iv in dated]
    start = min(starts) if starts else None
    end = max(effective_ends)
    if start is not None and start > end:
        # all evidence lies beyond the activity cap (e.g. affiliation
        # starting after the recorded death); treat as no usable evidence
        return None
    return DateInterval(start, end)


def select_active(
    politicians: Sequence[PoliticianRecord], time_point: date, today: date
) -> list[PoliticianRecord]:
    """Politicians whose activity period contains the time point (inclusive)."""
    active = []
    for p in politicians:
        period = activity_period(p, today)
        if period is not None and period.contains(time_point):
            active.append(p)
    return active


def compute_bounds(
    active: Sequence[PoliticianRecord],
    time_point: date,
    parties: Iterable[str] | None = None,
) -> list[VisibilityBounds]:
    """Lower/upper visibility counts per relevant party among the active set.

    The lower bound counts politicians whose whole-career relevant-party
    set is exactly {P}; the upper bound counts anyone ever in P. The share
    denominator is every active politician, including those with multiple
    or only non-relevant affiliations.
    """
    active_total = len(active)
    if active_total == 0:
        return []
    career_sets = [p.relevant_parties() for p in active]
    if parties is None:
        seen: set[str] = set()
        for s in career_sets:
            seen.update(s)
        party_list = sorted(seen)
    else:
        party_list = list(parties)
    bounds = []
    for party in party_list:
        lower = sum(1 for s in career_sets if s == {party})
        upper = sum(1 for s in career_sets if party in s)
        bounds.append(
            VisibilityBounds(
                party=party,
                time_point=time_point,
                lower_count=lower,
                upper_count=upper,
                lower_share=lower / active_total,
                upper_share=upper / active_total,
                active_total=active_total,
            )
        )
    return bounds


def baseline_share(
    baselines: BaselineTable,
    party: str,
    time_point: date,
    policy: str = "most-recent-preceding",
) -> float:
    """Seat share of the party at the policy-selected election.

    most-recent-preceding picks the latest election on or before the time
    point; closest-in-time picks the nearest election, breaking equidistant
    ties toward the earlier one. A party without recorded seats has share 0.
    """
    if policy not in BASELINE_POLICIES:
        raise ValueError(f"unknown baseline policy {policy!r}")
    election_dates = sorted(baselines.elections)
    if policy == "most-recent-preceding":
        preceding = [d for d in election_dates if d <= time_point]
        if not preceding:
            raise ValueError(
                f"time point {time_point} precedes the first recorded election "
                f"{election_dates[0]} for body {baselines.body!r}"
            )
        chosen = preceding[-1]
    else:
        chosen = min(election_dates, key=lambda d: (abs((time_point - d).days), d))
    result = baselines.elections[chosen]
    return result.seats.get(party, 0) / result.total_seats


def classify(bounds: VisibilityBounds, baseline: float) -> RepresentationVerdict:
    """Over if even the lower bound exceeds the baseline, under if even the
    upper bound falls short; ties and straddles are indeterminate."""
    if bounds.lower_share > baseline:
        verdict = "over"
    elif bounds.upper_share < baseline:
        verdict = "under"
    else:
        verdict = "indeterminate"
    return RepresentationVerdict(
        party=bounds.party,
        time_point=bounds.time_point,
        verdict=verdict,
        baseline_share=baseline,
        bounds=bounds,
    )


def run_audit(
    snapshot_rows: Iterable[Mapping[str, str]],
    nmap: NormalizationMap,
    baselines: BaselineTable,
    schedule: Sequence[date] = DEFAULT_SCHEDULE,
    policy: str = "most-recent-preceding",
    today: date | None = None,
    career_end_overrides: Mapping[str, date] | None = None,
) -> AuditResult:
    """Full audit over a politicians snapshot, per source and time point.

    `today` caps open-ended affiliations; it defaults to the snapshot's
    latest retrieved_at stamp so a cached snapshot always audits the same
    way, and falls back to the current date for unstamped rows.
    """
    rows = list(snapshot_rows)
    if today is None:
        stamps = [_parse_date(r.get("retrieved_at")) for r in rows]
        stamps = [s for s in stamps if s is not None]
        today = max(stamps) if stamps else date.today()

    by_source: dict[str, list[Mapping[str, str]]] = {}
    for row in rows:
        by_source.setdefault(row.get("source", ""), []).append(row)

    relevant = nmap.relevant_parties()
    alignment = {p: nmap.party(p).alignment for p in relevant}
    audit_rows: list[AuditRow] = []
    coverage: list[CoverageRow] = []
    unmapped: list[UnmappedRef] = []

    for source in sorted(by_source):
        norm = normalize_affiliations(by_source[source], nmap, career_end_overrides)
        unmapped.extend(norm.unmapped)
        undated = sum(
            1 for p in norm.politicians if activity_period(p, today) is None
        )
        for time_point in sorted(schedule):
            active = select_active(norm.politicians, time_point, today)
            low_sample = 0 < len(active) < LOW_SAMPLE_THRESHOLD
            coverage.append(
                CoverageRow(
                    source=source,
                    time_point=time_point,
                    active_total=len(active),
                    undated_total=undated,
                    low_sample=low_sample,
                )
            )
            if not active:
                logger.warning(
                    "no active politicians for source %s at %s", source, time_point
                )
                continue
            if low_sample:
                logger.warning(
                    "only %d active politicians for source %s at %s; "
                    "bound shares are hard to interpret",
                    len(active),
                    source,
                    time_point,
                )
            for bounds in compute_bounds(active, time_point, parties=relevant):
                share = baseline_share(baselines, bounds.party, time_point, policy)
                verdict = classify(bounds, share)
                audit_rows.append(
                    AuditRow(
                        source=source,
                        time_point=time_point,
                        party=bounds.party,
                        alignment=alignment[bounds.party],
                        lower_count=bounds.lower_count,
                        upper_count=bounds.upper_count,
                        lower_share=bounds.lower_share,
                        upper_share=bounds.upper_share,
                        baseline_share=share,
                        verdict=verdict.verdict,
                        active_total=bounds.active_total,
                    )
                )
    return AuditResult(rows=audit_rows, coverage=coverage, unmapped=unmapped)


def validate_snapshot(
    politician_rows: Iterable[Mapping[str, str]],
    party_rows: Iterable[Mapping[str, str]] = (),
    nmap: NormalizationMap | None = None,
) -> list[Finding]:
    """Flag structural data-quality problems in a snapshot.

    Checks: resources appearing both as politician and as party reference,
    inverted affiliation intervals, deaths predating an affiliation start,
    and (when a normalization map is supplied) politicians with no relevant
    affiliation at all.
    """
    politician_rows = list(politician_rows)
    findings: list[Finding] = []

    politician_ids = {r["politician_id"] for r in politician_rows}
    party_refs = {r["party_id"] for r in politician_rows if r.get("party_id")}
    party_refs.update(r["party_id"] for r in party_rows if r.get("party_id"))
    for conflicted in sorted(politician_ids & party_refs):
        findings.append(
            Finding(
                kind="type-conflict",
                subject=conflicted,
                detail="appears both as a politician and as a party reference",
            )
        )

    deaths: dict[str, date] = {}
    starts: dict[str, list[date]] = {}
    for row in politician_rows:
        pid = row["politician_id"]
        start = _parse_date(row.get("aff_start"))
        end = _parse_date(row.get("aff_end"))
        if start is not None and end is not None and end < start:
            findings.append(
                Finding(
                    kind="inverted-interval",
                    subject=pid,
                    detail=f"affiliation {row.get('party_id', '')} has end {end} "
                    f"before start {start}",
                )
            )
        if start is not None:
            starts.setdefault(pid, []).append(start)
        death = _parse_date(row.get("death_date"))
        if death is not None:
            deaths.setdefault(pid, death)
    for pid in sorted(deaths):
        late_starts = [s for s in starts.get(pid, []) if s > deaths[pid]]
        if late_starts:
            findings.append(
                Finding(
                    kind="death-before-start",
                    subject=pid,
                    detail=f"death {deaths[pid]} precedes affiliation start "
                    f"{min(late_starts)}",
                )
            )

    if nmap is not None:
        norm = normalize_affiliations(politician_rows, nmap)
        for p in norm.politicians:
            if not p.relevant_parties():
                findings.append(
                    Finding(
                        kind="no-relevant-affiliation",
                        subject=p.id,
                        detail="no affiliation with a relevant party",
                    )
                )

    findings.sort(key=lambda f: (f.kind, f.subject))
    return findings


def load_normalization_map(
    alias_path: str | Path, parties_path: str | Path
) -> NormalizationMap:
    """Load the curated alias map and party attribute tables.

    alias CSV: alias,canonical_acronym
    parties CSV: canonical_acronym,alignment,relevance
    """
    parties: dict[str, PartyRecord] = {}
    with open(parties_path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            acronym = row["canonical_acronym"].strip()
            parties[acronym] = PartyRecord(
                canonical_acronym=acronym,
                alignment=row["alignment"].strip(),
                relevance=row["relevance"].strip(),
            )
    aliases: dict[str, str] = {}
    with open(alias_path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            aliases[row["alias"].strip()] = row["canonical_acronym"].strip()
    return NormalizationMap(alias_to_canonical=aliases, canonical_to_party=parties)


def load_baselines(path: str | Path) -> dict[str, BaselineTable]:
    """Load seat baselines, one table per parliamentary body.

    CSV: body,election_date,canonical_acronym,seats,total_seats
    """
    per_body: dict[str, dict[date, dict]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            body = row["body"].strip()
            election = date.fromisoformat(row["election_date"].strip())
            entry = per_body.setdefault(body, {}).setdefault(
                election, {"seats": {}, "total": None}
            )
            entry["seats"][row["canonical_acronym"].strip()] = int(row["seats"])
            total = int(row["total_seats"])
            if entry["total"] is not None and entry["total"] != total:
                raise ValueError(
                    f"inconsistent total_seats for {body} {election}: "
                    f"{entry['total']} vs {total}"
                )
            entry["total"] = total
    tables = {}
    for body, elections in per_body.items():
        tables[body] = BaselineTable(
            body=body,
            elections={
                day: ElectionResult(seats=e["seats"], total_seats=e["total"])
                for day, e in elections.items()
            },
        )
    return tables


def load_career_end_overrides(path: str | Path) -> dict[str, date]:
    """Load curated career-end dates (CSV: politician_id,career_end)."""
    overrides = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            overrides[row["politician_id"].strip()] = date.fromisoformat(
                row["career_end"].strip()
            )
    return overrides
