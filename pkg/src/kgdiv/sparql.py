"""SPARQL endpoint client: templated queries, paging, rate limiting, parsing.

Queries are issued with LIMIT/OFFSET pages until a short page comes back;
rows are deduplicated afterwards as a second safety net against unstable
OFFSET paging. Per-endpoint request rates are capped process-wide.
"""

from __future__ import annotations

import json
import re
import threading
import time
import xml.etree.ElementTree as ET
from collections.abc import Callable, Mapping
from dataclasses import dataclass
from urllib.parse import urlencode

import requests

DIALECTS = ("en-dbpedia", "nl-dbpedia", "wikidata")

RESULTS_JSON = "application/sparql-results+json"
RESULTS_XML = "application/sparql-results+xml"

DEFAULT_TIMEOUT = 30.0
RETRY_BACKOFF_BASE = 0.2

_PLACEHOLDER = re.compile(r"\{([a-z_][a-z0-9_]*)\}")
_SPARQL_NS = "http://www.w3.org/2005/sparql-results#"


class QueryError(RuntimeError):
    """Base class for query execution failures."""


class QueryTransportError(QueryError):
    """The endpoint could not be reached or returned an HTTP error."""


class MalformedResultError(QueryError):
    """The endpoint's response body is not a valid result document."""


@dataclass(frozen=True)
class RdfTerm:
    kind: str
    value: str
    datatype: str | None = None
    language_tag: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("iri", "literal", "blank"):
            raise ValueError(f"unknown term kind {self.kind!r}")
        if self.kind != "literal" and (self.datatype or self.language_tag):
            raise ValueError("datatype/language tag only allowed on literals")
        if self.datatype and self.language_tag:
            raise ValueError("a literal cannot carry both datatype and language tag")


@dataclass(frozen=True)
class ResultTable:
    variables: tuple[str, ...]
    rows: tuple[Mapping[str, RdfTerm], ...]

    def __post_init__(self) -> None:
        declared = set(self.variables)
        for row in self.rows:
            extra = set(row) - declared
            if extra:
                raise ValueError(f"row binds undeclared variables {sorted(extra)}")

    def __len__(self) -> int:
        return len(self.rows)

    def values(self, variable: str) -> list[str]:
        """Convenience accessor: the bound values of one variable, row order."""
        return [row[variable].value for row in self.rows if variable in row]


@dataclass(frozen=True)
class EndpointConfig:
    url: str
    dialect: str
    page_size: int = 1000
    max_requests_per_second: float = 2.0
    retry_limit: int = 2
    timeout: float = DEFAULT_TIMEOUT

    def __post_init__(self) -> None:
        if self.dialect not in DIALECTS:
            raise ValueError(f"unknown dialect {self.dialect!r}")
        if self.page_size < 1:
            raise ValueError("page_size must be >= 1")
        if self.max_requests_per_second <= 0:
            raise ValueError("max_requests_per_second must be positive")
        if self.retry_limit < 0:
            raise ValueError("retry_limit must be >= 0")


@dataclass(frozen=True)
class QueryTemplate:
    template_id: str
    dialect: str
    query_text: str
    result_schema: tuple[str, ...]
    parameters: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.result_schema:
            raise ValueError("result_schema must declare at least one variable")
        used = set(_PLACEHOLDER.findall(self.query_text))
        undeclared = used - set(self.parameters)
        if undeclared:
            raise ValueError(
                f"template {self.template_id!r} uses undeclared placeholders "
                f"{sorted(undeclared)}"
            )

    def render(self, params: Mapping[str, str]) -> str:
        """Substitute {name} placeholders; every declared parameter must bind."""
        missing = set(self.parameters) - set(params)
        if missing:
            raise ValueError(
                f"unbound parameters {sorted(missing)} for template "
                f"{self.template_id!r}"
            )
        return _PLACEHOLDER.sub(lambda m: str(params[m.group(1)]), self.query_text)


#: transport signature: (url, query, accept header, timeout) -> response body
Transport = Callable[[str, str, str, float], bytes]


def http_transport(url: str, query: str, accept: str, timeout: float) -> bytes:
    """Default SPARQL-protocol transport: GET, falling back to POST for
    long query strings."""
    headers = {"Accept": accept}
    try:
        if len(query) < 1800:
            resp = requests.get(
                url, params={"query": query}, headers=headers, timeout=timeout
            )
        else:
            resp = requests.post(
                url,
                data=urlencode({"query": query}),
                headers={
                    **headers,
                    "Content-Type": "application/x-www-form-urlencoded",
                },
                timeout=timeout,
            )
    except requests.RequestException as exc:
        raise QueryTransportError(f"request to {url} failed: {exc}") from exc
    if resp.status_code != 200:
        raise QueryTransportError(
            f"endpoint {url} returned HTTP {resp.status_code}"
        )
    return resp.content


class RateLimiter:
    """Spaces request starts at least 1/rate seconds apart, across threads."""

    def __init__(self, max_per_second: float):
        self._interval = 1.0 / max_per_second
        self._lock = threading.Lock()
        self._next_slot = 0.0

    def wait(self) -> None:
        with self._lock:
            now = time.monotonic()
            slot = max(now, self._next_slot)
            self._next_slot = slot + self._interval
        delay = slot - now
        if delay > 0:
            time.sleep(delay)


_limiters: dict[tuple[str, float], RateLimiter] = {}
_limiters_lock = threading.Lock()


def _limiter_for(endpoint: EndpointConfig) -> RateLimiter:
    key = (endpoint.url, endpoint.max_requests_per_second)
    with _limiters_lock:
        limiter = _limiters.get(key)
        if limiter is None:
            limiter = RateLimiter(endpoint.max_requests_per_second)
            _limiters[key] = limiter
        return limiter


def _row_key(row: Mapping[str, RdfTerm]) -> tuple:
    return tuple(
        sorted(
            (var, term.kind, term.value, term.datatype or "", term.language_tag or "")
            for var, term in row.items()
        )
    )


def execute_query(
    endpoint: EndpointConfig,
    template: QueryTemplate,
    params: Mapping[str, str] | None = None,
    transport: Transport | None = None,
) -> ResultTable:
    """Run a templated query with paging, dedup, rate limiting and retries."""
    if template.dialect != endpoint.dialect:
        raise ValueError(
            f"template dialect {template.dialect!r} does not match endpoint "
            f"dialect {endpoint.dialect!r}"
        )
    query = template.render(params or {})
    send = transport or http_transport
    limiter = _limiter_for(endpoint)

    variables: tuple[str, ...] | None = None
    rows: list[Mapping[str, RdfTerm]] = []
    seen: set[tuple] = set()
    offset = 0
    while True:
        paged = f"{query}\nLIMIT {endpoint.page_size} OFFSET {offset}"
        body = _send_with_retry(send, endpoint, paged, limiter)
        page = parse_results(body, "sparql-json")
        if variables is None:
            variables = page.variables
        for row in page.rows:
            key = _row_key(row)
            if key not in seen:
                seen.add(key)
                rows.append(row)
        if len(page.rows) < endpoint.page_size:
            break
        offset += endpoint.page_size
    return ResultTable(variables=variables or (), rows=tuple(rows))


def _send_with_retry(
    send: Transport, endpoint: EndpointConfig, query: str, limiter: RateLimiter
) -> bytes:
    last_error: QueryTransportError | None = None
    for attempt in range(endpoint.retry_limit + 1):
        limiter.wait()
        try:
            return send(endpoint.url, query, RESULTS_JSON, endpoint.timeout)
        except QueryTransportError as exc:
            last_error = exc
            if attempt < endpoint.retry_limit:
                time.sleep(RETRY_BACKOFF_BASE * 2**attempt)
    raise last_error  # type: ignore[misc]


def parse_results(body: bytes, format: str = "sparql-json") -> ResultTable:
    """Parse a SPARQL results document, preserving datatypes and language tags."""
    if format == "sparql-json":
        return _parse_json(body)
    if format == "sparql-xml":
        return _parse_xml(body)
    raise ValueError(f"unknown result format {format!r}")


def _term_from_json(binding: Mapping) -> RdfTerm:
    kind = binding.get("type")
    value = binding.get("value")
    if value is None:
        raise MalformedResultError("binding without a value")
    if kind == "uri":
        return RdfTerm("iri", value)
    if kind == "bnode":
        return RdfTerm("blank", value)
    if kind in ("literal", "typed-literal"):
        return RdfTerm(
            "literal",
            value,
            datatype=binding.get("datatype"),
            language_tag=binding.get("xml:lang"),
        )
    raise MalformedResultError(f"unknown binding kind {kind!r}")


def _parse_json(body: bytes) -> ResultTable:
    try:
        doc = json.loads(body)
        variables = tuple(doc["head"]["vars"])
        bindings = doc["results"]["bindings"]
    except (ValueError, KeyError, TypeError) as exc:
        raise MalformedResultError(f"not a SPARQL JSON results document: {exc}") from exc
    rows = []
    for binding in bindings:
        try:
            rows.append(
                {var: _term_from_json(term) for var, term in binding.items()}
            )
        except (AttributeError, TypeError) as exc:
            raise MalformedResultError(f"malformed binding: {exc}") from exc
    return ResultTable(variables=variables, rows=tuple(rows))


def _parse_xml(body: bytes) -> ResultTable:
    try:
        root = ET.fromstring(body)
    except ET.ParseError as exc:
        raise MalformedResultError(f"not well-formed XML: {exc}") from exc
    ns = {"s": _SPARQL_NS}
    variables = tuple(
        el.attrib["name"] for el in root.findall("s:head/s:variable", ns)
    )
    rows = []
    for result in root.findall("s:results/s:result", ns):
        row = {}
        for binding in result.findall("s:binding", ns):
            name = binding.attrib["name"]
            child = binding[0] if len(binding) else None
            if child is None:
                raise MalformedResultError(f"empty binding for {name!r}")
            tag = child.tag.removeprefix(f"{{{_SPARQL_NS}}}")
            text = child.text or ""
            if tag == "uri":
                row[name] = RdfTerm("iri", text)
            elif tag == "bnode":
                row[name] = RdfTerm("blank", text)
            elif tag == "literal":
                row[name] = RdfTerm(
                    "literal",
                    text,
                    datatype=child.attrib.get("datatype"),
                    language_tag=child.attrib.get(
                        "{http://www.w3.org/XML/1998/namespace}lang"
                    ),
                )
            else:
                raise MalformedResultError(f"unknown binding kind {tag!r}")
        rows.append(row)
    return ResultTable(variables=variables, rows=tuple(rows))


def _term_to_json(term: RdfTerm) -> dict:
    if term.kind == "iri":
        return {"type": "uri", "value": term.value}
    if term.kind == "blank":
        return {"type": "bnode", "value": term.value}
    out: dict = {"type": "literal", "value": term.value}
    if term.datatype:
        out["datatype"] = term.datatype
    if term.language_tag:
        out["xml:lang"] = term.language_tag
    return out


def serialize_results(table: ResultTable, format: str = "sparql-json") -> bytes:
    """Inverse of parse_results, for caching and round-trip checks."""
    if format == "sparql-json":
        doc = {
            "head": {"vars": list(table.variables)},
            "results": {
                "bindings": [
                    {var: _term_to_json(term) for var, term in row.items()}
                    for row in table.rows
                ]
            },
        }
        return json.dumps(doc, ensure_ascii=False, sort_keys=True).encode("utf-8")
    if format == "sparql-xml":
        root = ET.Element("sparql", xmlns=_SPARQL_NS)
        head = ET.SubElement(root, "head")
        for var in table.variables:
            ET.SubElement(head, "variable", name=var)
        results = ET.SubElement(root, "results")
        for row in table.rows:
            result = ET.SubElement(results, "result")
            for var, term in row.items():
                binding = ET.SubElement(result, "binding", name=var)
                if term.kind == "iri":
                    ET.SubElement(binding, "uri").text = term.value
                elif term.kind == "blank":
                    ET.SubElement(binding, "bnode").text = term.value
                else:
                    attrs = {}
                    if term.datatype:
                        attrs["datatype"] = term.datatype
                    if term.language_tag:
                        attrs["{http://www.w3.org/XML/1998/namespace}lang"] = (
                            term.language_tag
                        )
                    ET.SubElement(binding, "literal", attrs).text = term.value
        return ET.tostring(root, encoding="utf-8", xml_declaration=True)
    raise ValueError(f"unknown result format {format!r}")
