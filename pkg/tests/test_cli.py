"""End-to-end CLI tests: golden outputs, exit codes, determinism."""

from __future__ import annotations

import hashlib
from pathlib import Path

import pytest

from kgdiv.cli import main

GOLDEN = Path(__file__).parent / "golden"


def run_cli(*argv: str) -> int:
    try:
        code = main(list(argv))
    except SystemExit as exc:  # argparse usage errors
        code = exc.code
    return int(code or 0)


def fetch_args(out: Path, fixture: Path, source: str = "en-dbpedia") -> list[str]:
    return [
        "fetch",
        "--source",
        source,
        "--from-fixture",
        str(fixture),
        "--out",
        str(out),
    ]


def audit_args(snapshot: Path, out: Path, fixture_dir: Path, body="KVV") -> list[str]:
    return [
        "audit",
        "--snapshot",
        str(snapshot),
        "--baseline",
        str(fixture_dir / "baselines.csv"),
        "--map",
        str(fixture_dir / "map.csv"),
        "--parties",
        str(fixture_dir / "parties.csv"),
        "--body",
        body,
        "--out",
        str(out),
    ]


class TestFetch:
    def test_matches_golden_snapshot(self, tmp_path, kg_fixture_dir):
        out = tmp_path / "snap"
        assert run_cli(*fetch_args(out, kg_fixture_dir)) == 0
        for name in ("politicians.csv", "parties.csv"):
            assert (out / name).read_bytes() == (
                GOLDEN / "snapshot_en" / name
            ).read_bytes()

    def test_unknown_source_usage_error(self, tmp_path, kg_fixture_dir):
        code = run_cli(
            "fetch from mars".replace("fetch from mars", "fetch"),
            "--source",
            "mars",
            "--from-fixture",
            str(kg_fixture_dir),
            "--out",
            str(tmp_path),
        )
        assert code == 2

    def test_unreachable_endpoint_leaves_no_partials(self, tmp_path, monkeypatch):
        monkeypatch.setenv(
            "KGDIV_ENDPOINT_EN_DBPEDIA", "http://127.0.0.1:1/en-dbpedia/sparql"
        )
        out = tmp_path / "snap"
        code = run_cli("fetch", "--source", "en-dbpedia", "--out", str(out))
        assert code == 1
        assert not list(out.glob("*.csv"))
        assert not list(out.glob("*.tmp"))

    def test_all_dialects_fetch(self, tmp_path, kg_fixture_dir):
        for source in ("en-dbpedia", "nl-dbpedia", "wikidata"):
            out = tmp_path / source
            assert run_cli(*fetch_args(out, kg_fixture_dir, source)) == 0
            assert (out / "politicians.csv").exists()
            assert (out / "parties.csv").exists()

    def test_nl_dbpedia_party_workaround_produces_rows(self, tmp_path, kg_fixture_dir):
        out = tmp_path / "nl"
        assert run_cli(*fetch_args(out, kg_fixture_dir, "nl-dbpedia")) == 0
        lines = (out / "parties.csv").read_text(encoding="utf-8").strip().splitlines()
        assert len(lines) > 1


class TestAudit:
    def test_matches_golden(self, tmp_path, fixture_dir):
        out = tmp_path / "audit"
        code = run_cli(*audit_args(GOLDEN / "snapshot_en", out, fixture_dir))
        assert code == 0
        for name in ("audit_kvv.csv", "coverage_kvv.csv", "findings.csv"):
            assert (out / name).read_bytes() == (
                GOLDEN / "audit_en" / name
            ).read_bytes()

    def test_inverted_interval_reported_but_audit_proceeds(
        self, tmp_path, fixture_dir
    ):
        out = tmp_path / "audit"
        code = run_cli(*audit_args(GOLDEN / "snapshot_en", out, fixture_dir))
        assert code == 0
        findings = (out / "findings.csv").read_text(encoding="utf-8")
        assert "inverted-interval" in findings
        assert (out / "audit_kvv.csv").exists()

    def test_missing_baseline_is_config_error(self, tmp_path, fixture_dir):
        code = run_cli(
            "audit",
            "--snapshot",
            str(GOLDEN / "snapshot_en"),
            "--baseline",
            str(tmp_path / "nope.csv"),
            "--map",
            str(fixture_dir / "map.csv"),
            "--parties",
            str(fixture_dir / "parties.csv"),
            "--out",
            str(tmp_path / "out"),
        )
        assert code == 2

    def test_missing_snapshot_is_config_error(self, tmp_path, fixture_dir):
        code = run_cli(*audit_args(tmp_path / "empty", tmp_path / "out", fixture_dir))
        assert code == 2

    def test_unmapped_over_threshold_fails(self, tmp_path, fixture_dir):
        snapshot = tmp_path / "snap"
        snapshot.mkdir()
        (snapshot / "politicians.csv").write_text(
            "source,politician_id,label,party_id,aff_start,aff_end,death_date,"
            "position,retrieved_at\n"
            "test,p1,P One,UnknownParty,2010-01-01,,,,2022-01-01\n",
            encoding="utf-8",
        )
        out = tmp_path / "out"
        code = run_cli(*audit_args(snapshot, out, fixture_dir))
        assert code == 1
        review = (out / "unmapped_refs.csv").read_text(encoding="utf-8")
        assert "UnknownParty" in review

    def test_unmapped_threshold_can_be_raised(self, tmp_path, fixture_dir):
        snapshot = tmp_path / "snap"
        snapshot.mkdir()
        (snapshot / "politicians.csv").write_text(
            "source,politician_id,label,party_id,aff_start,aff_end,death_date,"
            "position,retrieved_at\n"
            "test,p1,P One,UnknownParty,2010-01-01,,,,2022-01-01\n"
            "test,p2,P Two,N-VA,2010-01-01,,,,2022-01-01\n",
            encoding="utf-8",
        )
        out = tmp_path / "out"
        code = run_cli(
            *audit_args(snapshot, out, fixture_dir), "--max-unmapped", "5"
        )
        assert code == 0

    def test_inputs_not_mutated(self, tmp_path, fixture_dir):
        digests = {}
        inputs = [
            GOLDEN / "snapshot_en" / "politicians.csv",
            fixture_dir / "baselines.csv",
            fixture_dir / "map.csv",
            fixture_dir / "parties.csv",
        ]
        for path in inputs:
            digests[path] = hashlib.sha256(path.read_bytes()).hexdigest()
        run_cli(*audit_args(GOLDEN / "snapshot_en", tmp_path / "out", fixture_dir))
        for path, digest in digests.items():
            assert hashlib.sha256(path.read_bytes()).hexdigest() == digest


class TestScore:
    def test_hand_computed_deltas(self, tmp_path, fixture_dir):
        out = tmp_path / "score"
        code = run_cli(
            "score",
            "--corpus",
            str(fixture_dir / "corpus"),
            "--rules",
            str(fixture_dir / "rules.csv"),
            "--triples",
            str(fixture_dir / "triples.csv"),
            "--out",
            str(out),
        )
        assert code == 0
        lines = (out / "scores.csv").read_text(encoding="utf-8").strip().splitlines()
        assert lines[0] == "doc_id,n_entities,delta"
        # batch outputs follow corpus order
        assert [line.split(",")[0] for line in lines[1:]] == ["doc1", "doc2", "doc3"]
        by_doc = {line.split(",")[0]: line.split(",") for line in lines[1:]}
        # two disjoint-feature entities with equal counts and alpha=beta=1
        assert by_doc["doc1"][1] == "2"
        assert float(by_doc["doc1"][2]) == pytest.approx(0.5, abs=1e-12)
        assert by_doc["doc2"][1] == "0"
        assert float(by_doc["doc2"][2]) == 0.0
        # counts 2:1 -> 2 * 1 * (2/3 * 1/3)
        assert float(by_doc["doc3"][2]) == pytest.approx(4 / 9, abs=1e-12)

    def test_annotator_mentions_filtered_by_actor_type(self, tmp_path):
        import json
        import threading
        from http.server import BaseHTTPRequestHandler, HTTPServer

        corpus = tmp_path / "corpus"
        corpus.mkdir()
        text = "Jan bezoekt het Atomium"
        (corpus / "doc1.txt").write_text(text + "\n", encoding="utf-8")
        triples = tmp_path / "triples.csv"
        triples.write_text(
            "subject,predicate,object\n"
            "http://x/jan,type,person\n"
            "http://x/landmark,type,building\n",
            encoding="utf-8",
        )
        payload = json.dumps(
            {
                "Resources": [
                    {"@URI": "http://x/jan", "@surfaceForm": "Jan", "@offset": "0"},
                    {
                        "@URI": "http://x/landmark",
                        "@surfaceForm": "Atomium",
                        "@offset": str(text.index("Atomium")),
                    },
                ]
            }
        ).encode()

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
        threading.Thread(target=server.serve_forever, daemon=True).start()
        out = tmp_path / "score"
        try:
            code = run_cli(
                "score",
                "--corpus",
                str(corpus),
                "--triples",
                str(triples),
                "--nel-endpoint",
                f"http://127.0.0.1:{server.server_address[1]}/rest/annotate",
                "--out",
                str(out),
            )
        finally:
            server.shutdown()
            server.server_close()
        assert code == 0
        counts = (out / "entity_counts.csv").read_text(encoding="utf-8")
        # the person survives the actor-type filter, the building does not
        assert "http://x/jan" in counts
        assert "http://x/landmark" not in counts

    def test_nel_degrades_without_require_flag(self, tmp_path, fixture_dir):
        out = tmp_path / "score"
        code = run_cli(
            "score",
            "--corpus",
            str(fixture_dir / "corpus"),
            "--rules",
            str(fixture_dir / "rules.csv"),
            "--nel-endpoint",
            "http://127.0.0.1:1/rest/annotate",
            "--out",
            str(out),
        )
        assert code == 0
        assert (out / "scores.csv").exists()

    def test_require_nel_fails_hard(self, tmp_path, fixture_dir):
        code = run_cli(
            "score",
            "--corpus",
            str(fixture_dir / "corpus"),
            "--rules",
            str(fixture_dir / "rules.csv"),
            "--nel-endpoint",
            "http://127.0.0.1:1/rest/annotate",
            "--require-nel",
            "--out",
            str(tmp_path / "score"),
        )
        assert code == 1

    def test_alpha_beta_flags(self, tmp_path, fixture_dir):
        out = tmp_path / "score"
        code = run_cli(
            "score",
            "--corpus",
            str(fixture_dir / "corpus"),
            "--rules",
            str(fixture_dir / "rules.csv"),
            "--triples",
            str(fixture_dir / "triples.csv"),
            "--alpha",
            "0",
            "--beta",
            "1",
            "--out",
            str(out),
        )
        assert code == 0
        lines = (out / "scores.csv").read_text(encoding="utf-8").strip().splitlines()
        by_doc = {line.split(",")[0]: line.split(",") for line in lines[1:]}
        # alpha=0 with positive disparity reduces to 1 - sum of squares
        assert float(by_doc["doc1"][2]) == pytest.approx(0.5, abs=1e-12)
        assert float(by_doc["doc3"][2]) == pytest.approx(1 - (4 / 9 + 1 / 9), abs=1e-12)


class TestReport:
    def test_matches_golden_svg(self, tmp_path):
        out = tmp_path / "fig"
        code = run_cli(
            "report",
            "--audit",
            str(GOLDEN / "audit_en" / "audit_kvv.csv"),
            "--baseline-label",
            "KVV",
            "--out",
            str(out),
        )
        assert code == 0
        assert (out / "figure_en-dbpedia.svg").read_bytes() == (
            GOLDEN / "fig_en" / "figure_en-dbpedia.svg"
        ).read_bytes()

    def test_stacked_style_selected(self, tmp_path):
        out = tmp_path / "fig"
        code = run_cli(
            "report",
            "--audit",
            str(GOLDEN / "audit_en" / "audit_kvv.csv"),
            "--style",
            "stacked",
            "--out",
            str(out),
        )
        assert code == 0
        data = (out / "figure_en-dbpedia.svg").read_text(encoding="utf-8")
        assert 'data-style="stacked"' in data
        assert "stack-line" in data

    def test_empty_audit_csv_gives_no_data_svg(self, tmp_path):
        audit_csv = tmp_path / "audit.csv"
        audit_csv.write_text(
            "source,time_point,canonical_acronym,alignment,lower_count,"
            "upper_count,lower_share,upper_share,baseline_share,verdict,"
            "active_total\n",
            encoding="utf-8",
        )
        out = tmp_path / "fig"
        code = run_cli("report", "--audit", str(audit_csv), "--out", str(out))
        assert code == 0
        assert "no data" in (out / "figure_empty.svg").read_text(encoding="utf-8")

    def test_malformed_audit_csv_fails_with_diagnostics(self, tmp_path, capsys):
        audit_csv = tmp_path / "audit.csv"
        audit_csv.write_text(
            "source,time_point,canonical_acronym,alignment,lower_count,"
            "upper_count,lower_share,upper_share,baseline_share,verdict,"
            "active_total\n"
            "s,not-a-date,A,left,1,2,0.1,0.2,0.1,over,10\n",
            encoding="utf-8",
        )
        code = run_cli("report", "--audit", str(audit_csv), "--out", str(tmp_path / "f"))
        assert code == 1
        err = capsys.readouterr().err
        assert "row 2" in err


class TestValidate:
    def test_prints_findings(self, capsys):
        code = run_cli(
            "validate",
            "--snapshot",
            str(GOLDEN / "snapshot_en"),
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "inverted-interval" in out
        # the miscategorized party listed as a politician in the source
        assert "type-conflict" in out
        assert "Women%27s_Equality_Party" in out

    def test_clean_snapshot_reports_none(self, tmp_path, capsys):
        snapshot = tmp_path / "snap"
        snapshot.mkdir()
        (snapshot / "politicians.csv").write_text(
            "source,politician_id,label,party_id,aff_start,aff_end,death_date,"
            "position,retrieved_at\n"
            "test,p1,P One,N-VA,2010-01-01,2014-01-01,,,2022-01-01\n",
            encoding="utf-8",
        )
        code = run_cli("validate", "--snapshot", str(snapshot))
        assert code == 0
        assert "no findings" in capsys.readouterr().out


class TestDeterminism:
    def test_repeat_runs_byte_identical(self, tmp_path, fixture_dir, kg_fixture_dir):
        outputs = []
        for label in ("one", "two"):
            base = tmp_path / label
            assert run_cli(*fetch_args(base / "snap", kg_fixture_dir)) == 0
            assert (
                run_cli(*audit_args(base / "snap", base / "audit", fixture_dir)) == 0
            )
            assert (
                run_cli(
                    "report",
                    "--audit",
                    str(base / "audit" / "audit_kvv.csv"),
                    "--baseline-label",
                    "KVV",
                    "--out",
                    str(base / "fig"),
                )
                == 0
            )
            digest = {}
            for path in sorted((base).rglob("*")):
                if path.is_file():
                    digest[str(path.relative_to(base))] = hashlib.sha256(
                        path.read_bytes()
                    ).hexdigest()
            outputs.append(digest)
        assert outputs[0] == outputs[1]


def test_config_file_round_trip(tmp_path, fixture_dir, kg_fixture_dir):
    config = tmp_path / "kgdiv.yaml"
    config.write_text(
        f"""
map: {fixture_dir / 'map.csv'}
parties: {fixture_dir / 'parties.csv'}
baselines: {fixture_dir / 'baselines.csv'}
rules: {fixture_dir / 'rules.csv'}
triples: {fixture_dir / 'triples.csv'}
schedule: [2011, 2015, 2020]
diversity:
  alpha: 1.0
  beta: 1.0
endpoints:
  en-dbpedia:
    url: http://example.invalid/sparql
    page_size: 77
""",
        encoding="utf-8",
    )
    out = tmp_path / "score"
    code = run_cli(
        "score",
        "--corpus",
        str(fixture_dir / "corpus"),
        "--config",
        str(config),
        "--out",
        str(out),
    )
    assert code == 0
    assert (out / "scores.csv").exists()


def test_config_with_missing_file_is_rejected(tmp_path):
    config = tmp_path / "kgdiv.yaml"
    config.write_text("map: /does/not/exist.csv\n", encoding="utf-8")
    code = run_cli(
        "score", "--corpus", str(tmp_path), "--config", str(config), "--out", str(tmp_path)
    )
    assert code == 2
