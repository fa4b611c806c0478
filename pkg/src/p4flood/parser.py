"""P4-style parse graphs: extract headers state by state, branch on field values."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any, Mapping

from .header_schema import HeaderInstance, InvalidHeader, PacketMeta, ParsedPacket, HeaderDef

ACCEPT = "ACCEPT"
REJECT = "REJECT"
TERMINALS = (ACCEPT, REJECT)

UNDERFLOW = "Underflow"
REJECTED = "Rejected"
REVISITED = "RevisitedState"


class ParseError(Exception):
    def __init__(self, kind: str, at_state: str, offset_bytes: int):
        super().__init__(f"{kind} at state {at_state!r}, offset {offset_bytes}")
        self.kind = kind
        self.at_state = at_state
        self.offset_bytes = offset_bytes


class GraphError(ValueError):
    pass


@dataclass(frozen=True)
class Select:
    header: str
    field: str
    cases: Mapping[int, str]
    default: str = REJECT


@dataclass(frozen=True)
class ParseState:
    name: str
    extracts: tuple[str, ...] = ()
    select: Select | None = None
    next: str = ACCEPT  # used only when select is None


@dataclass(frozen=True)
class ParseGraph:
    states: Mapping[str, ParseState]
    start: str = "start"

    def targets(self, st: ParseState) -> list[str]:
        if st.select is None:
            return [st.next]
        return [*st.select.cases.values(), st.select.default]


@dataclass(frozen=True)
class Violation:
    kind: str  # MissingStart | DanglingState | UnknownHeader | UnknownField | CaseOverflow
    state: str
    detail: str

    def __str__(self) -> str:
        return f"{self.kind}({self.detail}) in state {self.state!r}"


def validate_graph(graph: ParseGraph, schemas: Mapping[str, HeaderDef]) -> list[Violation]:
    """Return every structural problem in ``graph``; an empty list means valid."""
    out: list[Violation] = []
    if graph.start not in graph.states:
        out.append(Violation("MissingStart", graph.start, graph.start))
    for name, st in graph.states.items():
        if name in TERMINALS:
            out.append(Violation("DanglingState", name, f"{name} is reserved"))
        for h in st.extracts:
            if h not in schemas:
                out.append(Violation("UnknownHeader", name, h))
        for t in graph.targets(st):
            if t not in graph.states and t not in TERMINALS:
                out.append(Violation("DanglingState", name, t))
        sel = st.select
        if sel is None:
            continue
        hdef = schemas.get(sel.header)
        if hdef is None:
            out.append(Violation("UnknownHeader", name, sel.header))
            continue
        if not hdef.has_field(sel.field):
            out.append(Violation("UnknownField", name, f"{sel.header}.{sel.field}"))
            continue
        limit = hdef.field(sel.field).max_value
        for v in sel.cases:
            if not 0 <= v <= limit:
                out.append(Violation("CaseOverflow", name, f"{v:#x} > {limit:#x}"))
    return out


def parse(
    graph: ParseGraph,
    schemas: Mapping[str, HeaderDef],
    raw: bytes,
    meta: PacketMeta | None = None,
) -> ParsedPacket:
    """Walk ``graph`` over ``raw``. Raises ParseError on underflow, reject or a cycle."""
    n = len(raw)
    if meta is None:
        meta = PacketMeta(raw_len=n)
    elif meta.raw_len != n:
        meta = PacketMeta(meta.ingress_port, meta.timestamp_s, n)
    states = graph.states
    headers: list[HeaderInstance] = []
    by_name: dict[str, HeaderInstance] = {}
    visited: set[str] = set()
    off = 0
    cur = prev = graph.start
    while True:
        if cur == ACCEPT:
            break
        if cur == REJECT:
            raise ParseError(REJECTED, prev, off)
        if cur in visited:
            raise ParseError(REVISITED, cur, off)
        visited.add(cur)
        st = states[cur]
        for hname in st.extracts:
            hdef = schemas[hname]
            w = hdef.byte_width
            if off + w > n:
                raise ParseError(UNDERFLOW, cur, off)
            inst = HeaderInstance(hdef, hdef.unpack(raw[off : off + w]), True)
            headers.append(inst)
            by_name[hname] = inst
            off += w
        prev = cur
        sel = st.select
        if sel is None:
            cur = st.next
        else:
            src = by_name.get(sel.header)
            if src is None:
                # select on a header this packet never extracted
                raise ParseError(REJECTED, cur, off)
            cur = sel.cases.get(src.values[sel.field], sel.default)
    return ParsedPacket(headers, bytes(raw[off:]), meta)


def deparse(pkt: ParsedPacket) -> bytes:
    parts = []
    for h in pkt.headers:
        if not h.valid:
            raise InvalidHeader(f"{h.definition.name} instance is not valid")
        parts.append(h.definition.pack(h.values))
    parts.append(pkt.payload)
    return b"".join(parts)


def _target(v: Any) -> str:
    if not isinstance(v, str):
        raise GraphError(f"transition target must be a string, got {v!r}")
    return v


def graph_from_json(doc: Mapping[str, Any] | str) -> ParseGraph:
    """Decode a parse graph document (or a path to one).

    Each state takes ``extract`` (list of header names) and either ``select``
    (``{"on": "HDR.field", "cases": {"0x4558": "next"}, "default": "REJECT"}``)
    or ``next`` (defaults to ACCEPT).
    """
    if isinstance(doc, str):
        with open(doc) as fh:
            doc = json.load(fh)
    try:
        states: dict[str, ParseState] = {}
        for name, sd in doc["states"].items():
            select = None
            if "select" in sd:
                s = sd["select"]
                hname, _, fname = s["on"].partition(".")
                if not fname:
                    raise GraphError(f"select 'on' must be HEADER.field, got {s['on']!r}")
                cases = {
                    (int(k, 0) if isinstance(k, str) else int(k)): _target(v)
                    for k, v in s.get("cases", {}).items()
                }
                select = Select(hname, fname, cases, _target(s.get("default", REJECT)))
            states[name] = ParseState(
                name,
                tuple(sd.get("extract", ())),
                select,
                _target(sd.get("next", ACCEPT)),
            )
        return ParseGraph(states, doc.get("start", "start"))
    except GraphError:
        raise
    except (KeyError, TypeError, AttributeError, ValueError) as exc:
        raise GraphError(f"malformed parse graph: {exc}") from exc


def graph_to_json(graph: ParseGraph) -> dict[str, Any]:
    states: dict[str, Any] = {}
    for name, st in graph.states.items():
        sd: dict[str, Any] = {"extract": list(st.extracts)}
        if st.select is None:
            sd["next"] = st.next
        else:
            sd["select"] = {
                "on": f"{st.select.header}.{st.select.field}",
                "cases": {f"{k:#x}": v for k, v in st.select.cases.items()},
                "default": st.select.default,
            }
        states[name] = sd
    return {"start": graph.start, "states": states}
