"""Offline query backends serving recorded result sets.

A fixture directory contains one JSON dataset per (dialect, template) and
an optional manifest with the snapshot stamp:

    manifest.json                 {"retrieved_at": "2022-05-27"}
    en-dbpedia/politicians.json   {"variables": [...], "bindings": [...]}
    wikidata/belgian_chamber_members.json
        {"variables": ["member"],
         "synthetic": {"count": 2996,
                       "binding": {"member": {"type": "uri",
                                              "value": "http://x/m{n}"}}}}

Bindings use the SPARQL JSON results encoding. The synthetic form expands
{n} over 0..count-1, which keeps large recorded row counts out of the
repository while still exercising paging and parsing.

The same store backs an in-process transport (no sockets) and a local
HTTP server speaking the SPARQL protocol, both honouring LIMIT/OFFSET.
"""

from __future__ import annotations

import json
import re
import threading
import time
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from .sparql import DIALECTS, QueryTransportError

TEMPLATE_MARK = re.compile(r"#template=(\S+)")
PAGE_MARK = re.compile(r"\bLIMIT (\d+) OFFSET (\d+)\s*$")


@dataclass
class RequestRecord:
    monotonic: float
    dialect: str
    template_id: str
    limit: int
    offset: int


class FixtureStore:
    """Loads fixture datasets and answers paged queries against them."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        if not self.root.is_dir():
            raise FileNotFoundError(f"fixture directory {self.root} does not exist")
        self._cache: dict[tuple[str, str], tuple[list[str], list[dict]]] = {}
        self._lock = threading.Lock()
        self.requests: list[RequestRecord] = []

    @property
    def retrieved_at(self) -> str:
        manifest = self.root / "manifest.json"
        if manifest.exists():
            stamp = json.loads(manifest.read_text()).get("retrieved_at")
            if stamp:
                return stamp
        return "1970-01-01"

    def dataset(self, dialect: str, template_id: str) -> tuple[list[str], list[dict]]:
        key = (dialect, template_id)
        with self._lock:
            if key in self._cache:
                return self._cache[key]
        path = self.root / dialect / f"{template_id}.json"
        if not path.exists():
            raise FileNotFoundError(f"no fixture dataset {dialect}/{template_id}")
        doc = json.loads(path.read_text(encoding="utf-8"))
        variables = list(doc["variables"])
        if "synthetic" in doc:
            spec = doc["synthetic"]
            proto = spec["binding"]
            bindings = [
                {
                    var: {
                        k: v.replace("{n}", str(n)) if isinstance(v, str) else v
                        for k, v in term.items()
                    }
                    for var, term in proto.items()
                }
                for n in range(int(spec["count"]))
            ]
        else:
            bindings = list(doc["bindings"])
        with self._lock:
            self._cache[key] = (variables, bindings)
        return variables, bindings

    def respond(self, dialect: str, query: str) -> bytes:
        """Answer one paged SPARQL query with a JSON results document."""
        mark = TEMPLATE_MARK.search(query)
        if not mark:
            raise QueryTransportError("fixture backend needs a #template= marker")
        template_id = mark.group(1)
        page = PAGE_MARK.search(query)
        if page:
            limit, offset = int(page.group(1)), int(page.group(2))
        else:
            limit, offset = None, 0
        variables, bindings = self.dataset(dialect, template_id)
        sliced = bindings[offset:] if limit is None else bindings[offset : offset + limit]
        with self._lock:
            self.requests.append(
                RequestRecord(
                    monotonic=time.monotonic(),
                    dialect=dialect,
                    template_id=template_id,
                    limit=limit if limit is not None else -1,
                    offset=offset,
                )
            )
        doc = {
            "head": {"vars": variables},
            "results": {"bindings": sliced},
        }
        return json.dumps(doc).encode("utf-8")


def _dialect_from_url(url: str) -> str:
    path = urlparse(url).path
    segments = [s for s in path.split("/") if s]
    for segment in segments:
        if segment in DIALECTS:
            return segment
    raise QueryTransportError(f"cannot infer dialect from fixture url {url!r}")


class FixtureTransport:
    """In-process transport; plugs into execute_query without sockets."""

    def __init__(self, store: FixtureStore):
        self.store = store

    def __call__(self, url: str, query: str, accept: str, timeout: float) -> bytes:
        return self.store.respond(_dialect_from_url(url), query)


class FixtureServer:
    """Local HTTP server speaking the SPARQL protocol over the store.

    Endpoint URLs look like http://127.0.0.1:PORT/<dialect>/sparql. Request
    arrival times are recorded on the store for rate assertions.
    """

    def __init__(self, store: FixtureStore):
        self.store = store
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def do_GET(self):
                parsed = urlparse(self.path)
                query = parse_qs(parsed.query).get("query", [""])[0]
                self._answer(parsed.path, query)

            def do_POST(self):
                length = int(self.headers.get("Content-Length", "0"))
                body = self.rfile.read(length).decode("utf-8")
                query = parse_qs(body).get("query", [""])[0]
                self._answer(urlparse(self.path).path, query)

            def _answer(self, path: str, query: str):
                try:
                    dialect = _dialect_from_url(path)
                    payload = outer.store.respond(dialect, query)
                except (QueryTransportError, FileNotFoundError) as exc:
                    message = str(exc).encode("utf-8")
                    self.send_response(400)
                    self.send_header("Content-Length", str(len(message)))
                    self.end_headers()
                    self.wfile.write(message)
                    return
                self.send_response(200)
                self.send_header("Content-Type", "application/sparql-results+json")
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                self.wfile.write(payload)

            def log_message(self, *args):
                pass

        self._server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._thread = threading.Thread(
            target=self._server.serve_forever, daemon=True
        )

    @property
    def base_url(self) -> str:
        host, port = self._server.server_address
        return f"http://{host}:{port}"

    def url_for(self, dialect: str) -> str:
        return f"{self.base_url}/{dialect}/sparql"

    def __enter__(self) -> "FixtureServer":
        self._thread.start()
        return self

    def __exit__(self, *exc) -> None:
        self._server.shutdown()
        self._server.server_close()
