"""Actor detection and enrichment: rule matching, annotation, ontology mapping.

Actors are found in text through user-defined pattern rules (surface or
lemma layer) and through an external annotation endpoint that links spans
to knowledge-base resources. Linked entities are then enriched into
feature pairs by mapping their predicates through a local ontology, with
linked resources of the recognized actor types expanded one hop deep.
Errors and biases of linked resources flow into the root's features by
design; the dotted feature-name prefix records the path they came in by.
"""

from __future__ import annotations

import csv
import json
import logging
import re
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import requests

from .diversity import ACTOR_TYPES, FeatureSet

logger = logging.getLogger(__name__)

MATCH_LAYERS = ("surface", "lemma")

#: target prefix marking an unnamed category instead of a linked resource
UNNAMED_PREFIX = "unnamed:"


class AnnotationError(RuntimeError):
    """Base class for annotation endpoint failures."""


class AnnotationTransportError(AnnotationError):
    """The annotation endpoint could not be reached."""


class AnnotationResponseError(AnnotationError):
    """The annotation endpoint returned an unusable document."""


class EnrichmentError(RuntimeError):
    """The root resource's triples could not be retrieved."""


@dataclass(frozen=True)
class Token:
    surface: str
    lemma: str
    char_start: int
    char_end: int


@dataclass(frozen=True)
class TextDocument:
    doc_id: str
    text: str
    tokens: tuple[Token, ...] | None = None

    def __post_init__(self) -> None:
        if self.tokens is None:
            return
        previous_end = 0
        for token in self.tokens:
            if not 0 <= token.char_start < token.char_end <= len(self.text):
                raise ValueError(
                    f"token span [{token.char_start}, {token.char_end}) outside "
                    f"document {self.doc_id!r}"
                )
            if token.char_start < previous_end:
                raise ValueError(f"overlapping tokens in document {self.doc_id!r}")
            previous_end = token.char_end


@dataclass(frozen=True)
class MatchRule:
    pattern: str
    case_sensitive: bool = True
    match_layer: str = "surface"
    target_entity: str = ""

    def __post_init__(self) -> None:
        if not self.pattern:
            raise ValueError("rule pattern must be nonempty")
        if self.match_layer not in MATCH_LAYERS:
            raise ValueError(f"match_layer must be one of {MATCH_LAYERS}")

    @property
    def is_unnamed(self) -> bool:
        return self.target_entity.startswith(UNNAMED_PREFIX)


@dataclass(frozen=True)
class EntityMention:
    doc_id: str
    char_start: int
    char_end: int
    surface: str
    resolved_id: str | None
    provenance: str

    def __post_init__(self) -> None:
        if self.char_start >= self.char_end:
            raise ValueError("mention span must be non-empty")


@dataclass(frozen=True)
class LocalOntology:
    """Maps source predicates to feature names and classes to actor types."""

    property_map: Mapping[tuple[str, str], str]
    actor_type_classes: Mapping[tuple[str, str], str]

    def __post_init__(self) -> None:
        for key, name in self.property_map.items():
            if not name:
                raise ValueError(f"empty feature name for predicate {key}")
        for key, actor_type in self.actor_type_classes.items():
            if actor_type not in ACTOR_TYPES:
                raise ValueError(
                    f"class {key} mapped to unknown actor type {actor_type!r}"
                )

    def feature_name(self, dialect: str, predicate: str) -> str | None:
        return self.property_map.get((dialect, predicate))

    def classify(self, dialect: str, class_ids: Iterable[str]) -> str | None:
        for class_id in class_ids:
            actor_type = self.actor_type_classes.get((dialect, class_id))
            if actor_type is not None:
                return actor_type
        return None


class TripleSource(Protocol):
    """Provider of (predicate, object) pairs and type classes per resource."""

    dialect: str

    def predicates(self, resource_id: str) -> Sequence[tuple[str, str]]: ...

    def types(self, resource_id: str) -> Sequence[str]: ...


_TYPE_PREDICATES = frozenset(
    {
        "a",
        "rdf:type",
        "type",
        "http://www.w3.org/1999/02/22-rdf-syntax-ns#type",
        "http://www.wikidata.org/prop/direct/P31",
        "P31",
    }
)


@dataclass
class CsvTripleSource:
    """Triples from a CSV of subject,predicate,object rows."""

    rows: list[tuple[str, str, str]]
    dialect: str = "generic"

    @classmethod
    def from_file(cls, path: str | Path, dialect: str = "generic") -> "CsvTripleSource":
        rows = []
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                rows.append(
                    (row["subject"].strip(), row["predicate"].strip(), row["object"].strip())
                )
        return cls(rows=rows, dialect=dialect)

    def predicates(self, resource_id: str) -> list[tuple[str, str]]:
        return [(p, o) for s, p, o in self.rows if s == resource_id]

    def types(self, resource_id: str) -> list[str]:
        return [
            o for s, p, o in self.rows if s == resource_id and p in _TYPE_PREDICATES
        ]


def match_rules(doc: TextDocument, rules: Sequence[MatchRule]) -> list[EntityMention]:
    """All non-overlapping occurrences of each rule, longest match first.

    Surface rules scan the raw text; lemma rules match whitespace-split
    pattern parts against consecutive token lemmas and require the document
    to carry a lemma layer. Matches of different rules may overlap; matches
    of one rule never do.
    """
    mentions: list[EntityMention] = []
    for rule in rules:
        if rule.match_layer == "surface":
            mentions.extend(_match_surface(doc, rule))
        else:
            if doc.tokens is None:
                raise ValueError(
                    f"lemma rule {rule.pattern!r} needs a lemma layer on "
                    f"document {doc.doc_id!r}"
                )
            mentions.extend(_match_lemma(doc, rule))
    mentions.sort(key=lambda m: (m.char_start, m.char_end, m.resolved_id or ""))
    return mentions


def _match_surface(doc: TextDocument, rule: MatchRule) -> Iterable[EntityMention]:
    flags = 0 if rule.case_sensitive else re.IGNORECASE
    for match in re.finditer(re.escape(rule.pattern), doc.text, flags):
        yield EntityMention(
            doc_id=doc.doc_id,
            char_start=match.start(),
            char_end=match.end(),
            surface=match.group(0),
            resolved_id=rule.target_entity or None,
            provenance="rule",
        )


def _match_lemma(doc: TextDocument, rule: MatchRule) -> Iterable[EntityMention]:
    parts = rule.pattern.split()
    if not rule.case_sensitive:
        parts = [p.lower() for p in parts]
    tokens = doc.tokens
    i = 0
    while i <= len(tokens) - len(parts):
        window = tokens[i : i + len(parts)]
        lemmas = [t.lemma if rule.case_sensitive else t.lemma.lower() for t in window]
        if lemmas == parts:
            start, end = window[0].char_start, window[-1].char_end
            yield EntityMention(
                doc_id=doc.doc_id,
                char_start=start,
                char_end=end,
                surface=doc.text[start:end],
                resolved_id=rule.target_entity or None,
                provenance="rule",
            )
            i += len(parts)
        else:
            i += 1


@dataclass
class AnnotationClient:
    """Client for a Spotlight-style entity annotation HTTP endpoint."""

    endpoint_url: str
    confidence: float | None = None
    timeout: float = 30.0

    def fetch(self, text: str) -> bytes:
        data = {"text": text}
        if self.confidence is not None:
            data["confidence"] = str(self.confidence)
        try:
            resp = requests.post(
                self.endpoint_url,
                data=data,
                headers={"Accept": "application/json"},
                timeout=self.timeout,
            )
        except requests.RequestException as exc:
            raise AnnotationTransportError(
                f"annotation request to {self.endpoint_url} failed: {exc}"
            ) from exc
        if resp.status_code != 200:
            raise AnnotationTransportError(
                f"annotation endpoint returned HTTP {resp.status_code}"
            )
        return resp.content


def parse_annotation_response(doc: TextDocument, body: bytes) -> list[EntityMention]:
    """Parse a Spotlight-style JSON annotation document into mentions."""
    try:
        payload = json.loads(body)
    except ValueError as exc:
        raise AnnotationResponseError(f"annotation body is not JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise AnnotationResponseError("annotation body is not a JSON object")
    resources = payload.get("Resources", [])
    mentions = []
    for item in resources:
        try:
            uri = item["@URI"]
            surface = item["@surfaceForm"]
            offset = int(item["@offset"])
        except (KeyError, TypeError, ValueError) as exc:
            raise AnnotationResponseError(f"malformed annotation entry: {exc}") from exc
        end = offset + len(surface)
        if not 0 <= offset < end <= len(doc.text):
            raise AnnotationResponseError(
                f"annotation span [{offset}, {end}) outside document {doc.doc_id!r}"
            )
        mentions.append(
            EntityMention(
                doc_id=doc.doc_id,
                char_start=offset,
                char_end=end,
                surface=surface,
                resolved_id=uri,
                provenance="annotator",
            )
        )
    return mentions


def annotate(doc: TextDocument, client: AnnotationClient) -> list[EntityMention]:
    """Annotate a document via the external endpoint.

    Transport and response problems raise distinct errors. Type filtering
    happens later, at enrichment time, when the resource's classes are
    known.
    """
    return parse_annotation_response(doc, client.fetch(doc.text))


def enrich_entity(
    root_id: str, triples: TripleSource, ontology: LocalOntology
) -> FeatureSet:
    """Map a resource's predicates to feature pairs, expanding one hop.

    Linked resources reached through a mapped predicate are expanded once
    if they belong to one of the recognized actor types; their mapped
    predicates are prefixed with the linking feature name. Failures on
    linked resources degrade to a partial feature set with a warning; only
    the root's retrieval failure is fatal.
    """
    try:
        root_pairs = triples.predicates(root_id)
    except Exception as exc:
        raise EnrichmentError(f"cannot retrieve triples for {root_id!r}: {exc}") from exc

    features: set[tuple[str, str]] = set()
    for predicate, obj in root_pairs:
        name = ontology.feature_name(triples.dialect, predicate)
        if name is None:
            continue
        features.add((name, obj))
        if obj == root_id:
            continue
        try:
            obj_types = triples.types(obj)
            if ontology.classify(triples.dialect, obj_types) is None:
                continue
            linked_pairs = triples.predicates(obj)
        except Exception as exc:
            logger.warning(
                "enrichment of %r: linked resource %r failed (%s); keeping "
                "partial features",
                root_id,
                obj,
                exc,
            )
            continue
        for linked_predicate, linked_obj in linked_pairs:
            linked_name = ontology.feature_name(triples.dialect, linked_predicate)
            if linked_name is None:
                continue
            features.add((f"{name}.{linked_name}", linked_obj))
    return FeatureSet(frozenset(features))


def aggregate_mentions(mentions: Iterable[EntityMention]) -> dict[str, int]:
    """Occurrence counts per resolved id (mentions without one count under
    their surface string)."""
    counts: dict[str, int] = {}
    for mention in mentions:
        key = mention.resolved_id if mention.resolved_id is not None else mention.surface
        counts[key] = counts.get(key, 0) + 1
    return counts


def load_rules(path: str | Path) -> list[MatchRule]:
    """Load match rules from a CSV with columns pattern, case_sensitive,
    match_layer, target."""
    rules = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            rules.append(
                MatchRule(
                    pattern=row["pattern"],
                    case_sensitive=_parse_bool(row.get("case_sensitive", "true")),
                    match_layer=(row.get("match_layer") or "surface").strip(),
                    target_entity=(row.get("target") or "").strip(),
                )
            )
    return rules


def _parse_bool(raw: str) -> bool:
    value = (raw or "").strip().lower()
    if value in ("1", "true", "yes", "y"):
        return True
    if value in ("0", "false", "no", "n", ""):
        return False
    raise ValueError(f"cannot parse boolean {raw!r}")


def builtin_ontology() -> LocalOntology:
    """Default predicate and class mappings for the supported dialects.

    The generic dialect maps bare predicate names onto themselves, for
    locally curated triple files.
    """
    property_map: dict[tuple[str, str], str] = {}
    actor_type_classes: dict[tuple[str, str], str] = {}

    generic_predicates = (
        "party",
        "ideology",
        "country",
        "government-type",
        "eu-membership",
        "alignment",
        "occupation",
    )
    for predicate in generic_predicates:
        property_map[("generic", predicate)] = predicate
    actor_type_classes.update(
        {
            ("generic", "person"): "person",
            ("generic", "organisation"): "organisation",
            ("generic", "party"): "organisation",
            ("generic", "country"): "geopolitical-entity",
            ("generic", "geopolitical-entity"): "geopolitical-entity",
        }
    )

    dbo = "http://dbpedia.org/ontology/"
    for dialect in ("en-dbpedia", "nl-dbpedia"):
        property_map.update(
            {
                (dialect, f"{dbo}party"): "party",
                (dialect, f"{dbo}ideology"): "ideology",
                (dialect, f"{dbo}country"): "country",
                (dialect, f"{dbo}governmentType"): "government-type",
                (dialect, f"{dbo}occupation"): "occupation",
            }
        )
        actor_type_classes.update(
            {
                (dialect, f"{dbo}Person"): "person",
                (dialect, f"{dbo}Politician"): "person",
                (dialect, f"{dbo}Organisation"): "organisation",
                (dialect, f"{dbo}PoliticalParty"): "organisation",
                (dialect, f"{dbo}Country"): "geopolitical-entity",
            }
        )

    wdt = "http://www.wikidata.org/prop/direct/"
    wd = "http://www.wikidata.org/entity/"
    property_map.update(
        {
            ("wikidata", f"{wdt}P102"): "party",
            ("wikidata", f"{wdt}P1142"): "ideology",
            ("wikidata", f"{wdt}P27"): "country",
            ("wikidata", f"{wdt}P17"): "country",
            ("wikidata", f"{wdt}P122"): "government-type",
            ("wikidata", f"{wdt}P106"): "occupation",
        }
    )
    actor_type_classes.update(
        {
            ("wikidata", f"{wd}Q5"): "person",
            ("wikidata", f"{wd}Q7278"): "organisation",
            ("wikidata", f"{wd}Q43229"): "organisation",
            ("wikidata", f"{wd}Q6256"): "geopolitical-entity",
        }
    )
    return LocalOntology(
        property_map=property_map, actor_type_classes=actor_type_classes
    )
