"""Tests for actor detection and enrichment."""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kgdiv.diversity import FeatureSet
from kgdiv.pipeline import (
    AnnotationClient,
    AnnotationResponseError,
    AnnotationTransportError,
    CsvTripleSource,
    EnrichmentError,
    EntityMention,
    LocalOntology,
    MatchRule,
    TextDocument,
    Token,
    aggregate_mentions,
    annotate,
    builtin_ontology,
    enrich_entity,
    load_rules,
    match_rules,
    parse_annotation_response,
)

NVA_RULE = MatchRule(
    pattern="N-VA",
    case_sensitive=True,
    match_layer="surface",
    target_entity="http://example.org/party/NVA",
)


def lemma_doc():
    text = "refugees arrived"
    return TextDocument(
        doc_id="d1",
        text=text,
        tokens=(
            Token("refugees", "refugee", 0, 8),
            Token("arrived", "arrive", 9, 16),
        ),
    )


class TestMatchRules:
    def test_literal_substring(self):
        doc = TextDocument(doc_id="d", text="N-VA wint")
        (mention,) = match_rules(doc, [NVA_RULE])
        assert (mention.char_start, mention.char_end) == (0, 4)
        assert mention.surface == "N-VA"
        assert mention.provenance == "rule"
        assert mention.resolved_id == "http://example.org/party/NVA"

    def test_case_sensitive_mismatch(self):
        doc = TextDocument(doc_id="d", text="n-va wint")
        assert match_rules(doc, [NVA_RULE]) == []

    def test_case_insensitive_match(self):
        doc = TextDocument(doc_id="d", text="n-va wint")
        rule = MatchRule(
            pattern="N-VA", case_sensitive=False, target_entity="unnamed:nva"
        )
        (mention,) = match_rules(doc, [rule])
        assert mention.surface == "n-va"

    def test_lemma_layer_unnamed_target(self):
        rule = MatchRule(
            pattern="refugee",
            case_sensitive=True,
            match_layer="lemma",
            target_entity="unnamed:refugee",
        )
        (mention,) = match_rules(lemma_doc(), [rule])
        assert (mention.char_start, mention.char_end) == (0, 8)
        assert mention.surface == "refugees"
        assert mention.resolved_id == "unnamed:refugee"
        assert rule.is_unnamed

    def test_multi_token_lemma_pattern(self):
        text = "the refugees arrived today"
        doc = TextDocument(
            doc_id="d",
            text=text,
            tokens=(
                Token("the", "the", 0, 3),
                Token("refugees", "refugee", 4, 12),
                Token("arrived", "arrive", 13, 20),
                Token("today", "today", 21, 26),
            ),
        )
        rule = MatchRule(
            pattern="refugee arrive", match_layer="lemma", target_entity="unnamed:x"
        )
        (mention,) = match_rules(doc, [rule])
        assert mention.surface == "refugees arrived"

    def test_lemma_rule_without_layer(self):
        doc = TextDocument(doc_id="d", text="refugees arrived")
        rule = MatchRule(pattern="refugee", match_layer="lemma")
        with pytest.raises(ValueError, match="lemma layer"):
            match_rules(doc, [rule])

    def test_single_rule_matches_never_overlap(self):
        doc = TextDocument(doc_id="d", text="aaaa")
        rule = MatchRule(pattern="aa", target_entity="unnamed:a")
        mentions = match_rules(doc, [rule])
        assert [(m.char_start, m.char_end) for m in mentions] == [(0, 2), (2, 4)]

    def test_cross_rule_overlaps_are_kept(self):
        doc = TextDocument(doc_id="d", text="N-VA")
        rules = [
            NVA_RULE,
            MatchRule(pattern="VA", target_entity="unnamed:va"),
        ]
        assert len(match_rules(doc, rules)) == 2

    @given(st.text(min_size=1, max_size=60), st.text(min_size=1, max_size=5))
    @settings(max_examples=150)
    def test_property_spans_within_bounds(self, text, pattern):
        doc = TextDocument(doc_id="d", text=text)
        rule = MatchRule(pattern=pattern, target_entity="unnamed:p")
        previous_end = 0
        for m in match_rules(doc, [rule]):
            assert 0 <= m.char_start < m.char_end <= len(text)
            assert m.char_start >= previous_end
            previous_end = m.char_end

    @given(st.text(alphabet="aAbB -", min_size=1, max_size=40))
    @settings(max_examples=150)
    def test_property_insensitive_superset(self, text):
        doc = TextDocument(doc_id="d", text=text)
        sensitive = MatchRule(pattern="aB", case_sensitive=True, target_entity="u:x")
        insensitive = MatchRule(pattern="aB", case_sensitive=False, target_entity="u:x")
        strict = {(m.char_start, m.char_end) for m in match_rules(doc, [sensitive])}
        loose = {(m.char_start, m.char_end) for m in match_rules(doc, [insensitive])}
        assert strict <= loose


class TestAnnotation:
    def test_recorded_response_fixture(self, fixture_dir):
        body = (fixture_dir / "annotation_response.json").read_bytes()
        doc = TextDocument(doc_id="d", text="N-VA wint de verkiezingen in Vlaanderen")
        mentions = parse_annotation_response(doc, body)
        assert len(mentions) == 2
        first = mentions[0]
        assert first.resolved_id == "http://dbpedia.org/resource/New_Flemish_Alliance"
        assert (first.char_start, first.char_end) == (0, 4)
        assert first.provenance == "annotator"

    def test_empty_annotation(self):
        doc = TextDocument(doc_id="d", text="nothing here")
        assert parse_annotation_response(doc, b'{"@text": "nothing here"}') == []

    def test_truncated_body(self):
        doc = TextDocument(doc_id="d", text="x")
        with pytest.raises(AnnotationResponseError):
            parse_annotation_response(doc, b'{"Resources": [{"@URI": "ht')

    def test_span_outside_document(self):
        doc = TextDocument(doc_id="d", text="ab")
        body = json.dumps(
            {"Resources": [{"@URI": "u", "@surfaceForm": "abc", "@offset": "0"}]}
        ).encode()
        with pytest.raises(AnnotationResponseError, match="outside document"):
            parse_annotation_response(doc, body)

    def test_transport_error(self):
        client = AnnotationClient(
            endpoint_url="http://127.0.0.1:1/rest/annotate", timeout=0.5
        )
        doc = TextDocument(doc_id="d", text="N-VA wint")
        with pytest.raises(AnnotationTransportError):
            annotate(doc, client)

    def test_live_endpoint_round_trip(self, fixture_dir):
        payload = (fixture_dir / "annotation_response.json").read_bytes()

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                self.rfile.read(int(self.headers.get("Content-Length", "0")))
                self.send_response(200)
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                self.wfile.write(payload)

            def log_message(self, *args):
                pass

        server = HTTPServer(("127.0.0.1", 0), Handler)
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        try:
            client = AnnotationClient(
                endpoint_url=f"http://127.0.0.1:{server.server_address[1]}/rest/annotate"
            )
            doc = TextDocument(
                doc_id="d", text="N-VA wint de verkiezingen in Vlaanderen"
            )
            mentions = annotate(doc, client)
        finally:
            server.shutdown()
            server.server_close()
        assert [m.surface for m in mentions] == ["N-VA", "Vlaanderen"]


def chain_source(depth: int) -> CsvTripleSource:
    """res0 -party-> res1 -party-> res2 ... each resource a typed organisation."""
    rows = []
    for i in range(depth):
        rows.append((f"res{i}", "party", f"res{i + 1}"))
        rows.append((f"res{i + 1}", "type", "organisation"))
    return CsvTripleSource(rows=rows)


class TestEnrichment:
    def test_party_then_ideology(self):
        triples = CsvTripleSource(
            rows=[
                ("X", "party", "Y"),
                ("Y", "type", "party"),
                ("Y", "ideology", "Z"),
            ]
        )
        features = enrich_entity("X", triples, builtin_ontology())
        assert features.pairs == frozenset(
            {("party", "Y"), ("party.ideology", "Z")}
        )

    def test_country_then_government_type(self):
        triples = CsvTripleSource(
            rows=[
                ("X", "country", "C"),
                ("C", "type", "country"),
                ("C", "government-type", "G"),
                ("C", "eu-membership", "yes"),
            ]
        )
        features = enrich_entity("X", triples, builtin_ontology())
        assert ("country", "C") in features.pairs
        assert ("country.government-type", "G") in features.pairs
        assert ("country.eu-membership", "yes") in features.pairs

    def test_unmapped_predicates_only(self):
        triples = CsvTripleSource(rows=[("X", "shoeSize", "42")])
        assert enrich_entity("X", triples, builtin_ontology()) == FeatureSet()

    def test_untyped_link_not_expanded(self):
        triples = CsvTripleSource(
            rows=[("X", "party", "Y"), ("Y", "ideology", "Z")]
        )
        features = enrich_entity("X", triples, builtin_ontology())
        assert features.pairs == frozenset({("party", "Y")})

    @given(st.integers(min_value=2, max_value=6))
    @settings(max_examples=20)
    def test_property_one_hop_limit(self, depth):
        features = enrich_entity("res0", chain_source(depth), builtin_ontology())
        assert ("party", "res1") in features.pairs
        assert ("party.party", "res2") in features.pairs
        # nothing from two or more hops away leaks in
        for name, value in features.pairs:
            assert name.count(".") <= 1
            assert value in ("res1", "res2")

    def test_root_failure_is_fatal(self):
        class Broken:
            dialect = "generic"

            def predicates(self, resource_id):
                raise IOError("boom")

            def types(self, resource_id):
                return []

        with pytest.raises(EnrichmentError):
            enrich_entity("X", Broken(), builtin_ontology())

    def test_linked_failure_degrades(self, caplog):
        class Flaky:
            dialect = "generic"

            def predicates(self, resource_id):
                if resource_id == "Y":
                    raise IOError("linked down")
                return [("party", "Y")]

            def types(self, resource_id):
                return ["party"]

        with caplog.at_level("WARNING"):
            features = enrich_entity("X", Flaky(), builtin_ontology())
        assert features.pairs == frozenset({("party", "Y")})
        assert any("partial features" in r.message for r in caplog.records)


class TestAggregate:
    def mention(self, rid, start=0):
        return EntityMention(
            doc_id="d",
            char_start=start,
            char_end=start + 1,
            surface="x",
            resolved_id=rid,
            provenance="rule",
        )

    def test_counts(self):
        mentions = [self.mention("A", i) for i in range(3)] + [self.mention("B", 9)]
        assert aggregate_mentions(mentions) == {"A": 3, "B": 1}

    def test_empty(self):
        assert aggregate_mentions([]) == {}

    def test_mixed_provenance_merges(self):
        rule_m = self.mention("A", 0)
        annot_m = EntityMention(
            doc_id="d",
            char_start=5,
            char_end=6,
            surface="y",
            resolved_id="A",
            provenance="annotator",
        )
        assert aggregate_mentions([rule_m, annot_m]) == {"A": 2}

    @given(st.lists(st.sampled_from(["A", "B", "C", None]), max_size=30))
    @settings(max_examples=100)
    def test_property_totals_preserved(self, ids):
        mentions = [
            EntityMention(
                doc_id="d",
                char_start=i,
                char_end=i + 1,
                surface=f"s{i}",
                resolved_id=rid,
                provenance="rule",
            )
            for i, rid in enumerate(ids)
        ]
        counts = aggregate_mentions(mentions)
        assert sum(counts.values()) == len(mentions)


def test_load_rules(fixture_dir):
    rules = load_rules(fixture_dir / "rules.csv")
    assert len(rules) == 3
    assert rules[0] == MatchRule(
        pattern="N-VA",
        case_sensitive=True,
        match_layer="surface",
        target_entity="http://dbpedia.org/resource/New_Flemish_Alliance",
    )
    assert rules[2].match_layer == "lemma"
    assert rules[2].is_unnamed


def test_document_validation():
    with pytest.raises(ValueError, match="outside"):
        TextDocument(doc_id="d", text="ab", tokens=(Token("abc", "abc", 0, 3),))
    with pytest.raises(ValueError, match="overlapping"):
        TextDocument(
            doc_id="d",
            text="abcd",
            tokens=(Token("ab", "ab", 0, 2), Token("bc", "bc", 1, 3)),
        )


def test_ontology_validation():
    with pytest.raises(ValueError, match="empty feature name"):
        LocalOntology(property_map={("generic", "p"): ""}, actor_type_classes={})
    with pytest.raises(ValueError, match="unknown actor type"):
        LocalOntology(
            property_map={}, actor_type_classes={("generic", "c"): "robot"}
        )
