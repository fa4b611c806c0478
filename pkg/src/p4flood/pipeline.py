"""Six-stage software switch: parse, verify checksum, ingress tables, egress,
compute checksum, deparse.

Tables are exact-match on a single header field. A table may learn on miss,
which is how ``dstnodecounter`` allocates a counter cell per destination
without the control plane pre-installing entries.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

from .events import ControllerEvent, ParseFailed, TableDiagnostic, addr_hex
from .header_schema import HeaderDef, PacketMeta, ParsedPacket, set_field
from .parser import ParseError, ParseGraph, deparse, parse, validate_graph

STAGES = ("Parser", "VerifyChecksum", "Ingress", "Egress", "ComputeChecksum", "Deparser")


class PipelineError(Exception):
    pass


class NoSuchTable(PipelineError, KeyError):
    pass


class NoSuchCounter(PipelineError, KeyError):
    pass


class TableFull(PipelineError):
    pass


class ActionInvalid(PipelineError, ValueError):
    pass


class CapacityExhausted(PipelineError):
    pass


class Primitive(enum.Enum):
    COUNTER_INCR = "counter_incr"
    SET_FIELD = "set_field"
    DROP = "drop"
    FORWARD = "forward"
    TO_CONTROLLER = "to_controller"
    NOP = "nop"


@dataclass(frozen=True)
class ActionSpec:
    primitive: Primitive
    counter: str = ""  # COUNTER_INCR
    header: str = ""  # SET_FIELD
    field: str = ""  # SET_FIELD
    value: int = 0  # SET_FIELD
    port: int = 0  # FORWARD
    reason: str = ""  # TO_CONTROLLER

    @classmethod
    def counter_incr(cls, counter: str) -> ActionSpec:
        return cls(Primitive.COUNTER_INCR, counter=counter)

    @classmethod
    def set_field(cls, header: str, field: str, value: int) -> ActionSpec:
        return cls(Primitive.SET_FIELD, header=header, field=field, value=value)

    @classmethod
    def drop(cls) -> ActionSpec:
        return cls(Primitive.DROP)

    @classmethod
    def forward(cls, port: int) -> ActionSpec:
        return cls(Primitive.FORWARD, port=port)

    @classmethod
    def to_controller(cls, reason: str) -> ActionSpec:
        return cls(Primitive.TO_CONTROLLER, reason=reason)

    @classmethod
    def nop(cls) -> ActionSpec:
        return cls(Primitive.NOP)


NOP = ActionSpec.nop()
DROP = ActionSpec.drop()


@dataclass
class TableStats:
    hits: int = 0
    misses: int = 0
    full_drops: int = 0


@dataclass
class Table:
    name: str
    key_header: str
    key_field: str
    key_width: int
    max_size: int
    default_action: ActionSpec = NOP
    learn_action: ActionSpec | None = None
    entries: dict[int, ActionSpec] = field(default_factory=dict)
    stats: TableStats = field(default_factory=TableStats)

    match_kind = "exact"

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.key_header, self.key_field, self.match_kind)


@dataclass
class CounterStats:
    increments: int = 0
    exhausted: int = 0


class KeyedCounter:
    """Per-key packet counts over tumbling windows of ``window_s`` seconds.

    A cell, once allocated, is kept for the lifetime of the counter; new keys
    are refused once ``capacity`` cells exist.
    """

    def __init__(self, name: str, capacity: int, window_s: float):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        if not window_s > 0:
            raise ValueError("window_s must be > 0")
        self.name = name
        self.capacity = capacity
        self.window_s = window_s
        self.cells: dict[int, list[int]] = {}  # key -> [count, window_index]
        self.stats = CounterStats()

    def window_of(self, timestamp_s: float) -> int:
        return math.floor(timestamp_s / self.window_s)

    def increment(self, key: int, timestamp_s: float) -> tuple[int, int]:
        """Count one packet for ``key``; returns (post-increment count, window index)."""
        if timestamp_s < 0:
            raise ValueError("timestamp_s must be >= 0")
        w = math.floor(timestamp_s / self.window_s)
        cell = self.cells.get(key)
        if cell is None:
            if len(self.cells) >= self.capacity:
                self.stats.exhausted += 1
                raise CapacityExhausted(f"{self.name}: no cell for {key:#x}")
            cell = self.cells[key] = [0, w]
        elif cell[1] != w:
            cell[0] = 0
            cell[1] = w
        cell[0] += 1
        self.stats.increments += 1
        return cell[0], w

    def snapshot(self) -> list[tuple[int, int, int]]:
        return sorted((k, c, w) for k, (c, w) in self.cells.items())


def counter_increment(counter: KeyedCounter, key_value: int, timestamp_s: float) -> int:
    return counter.increment(key_value, timestamp_s)[0]


@dataclass
class ActionOutcome:
    table: str
    action: ActionSpec
    hit: bool
    key: int | None = None
    learned: bool = False
    count: int | None = None
    window_index: int | None = None
    diagnostic: str = ""


def apply_table(
    table: Table, pkt: ParsedPacket, counters: Mapping[str, KeyedCounter]
) -> ActionOutcome:
    """Look up ``pkt`` in ``table`` and run packet- and counter-level effects.

    Disposition primitives (DROP, FORWARD, TO_CONTROLLER) are only reported;
    the caller folds them into the packet verdict.
    """
    hdr = pkt.header(table.key_header)
    if hdr is None or not hdr.valid:
        table.stats.misses += 1
        return ActionOutcome(
            table.name,
            table.default_action,
            False,
            diagnostic=f"KeyFieldAbsent: {table.key_header}.{table.key_field}",
        )
    key = hdr.values[table.key_field]
    action = table.entries.get(key)
    out = ActionOutcome(table.name, NOP, action is not None, key)
    if action is not None:
        table.stats.hits += 1
    else:
        table.stats.misses += 1
        if table.learn_action is not None:
            if len(table.entries) < table.max_size:
                action = table.entries[key] = table.learn_action
                out.learned = True
            else:
                table.stats.full_drops += 1
                action = table.default_action
        else:
            action = table.default_action
    out.action = action

    prim = action.primitive
    if prim is Primitive.COUNTER_INCR:
        ctr = counters[action.counter]
        try:
            out.count, out.window_index = ctr.increment(key, pkt.meta.timestamp_s)
        except CapacityExhausted as exc:
            out.diagnostic = f"CapacityExhausted: {exc}"
    elif prim is Primitive.SET_FIELD:
        target = pkt.header(action.header)
        if target is not None and target.valid:
            pkt.replace_header(set_field(target, action.field, action.value))
    return out


class Disposition(enum.Enum):
    FORWARD = "forward"
    DROP = "drop"
    COPY_TO_CONTROLLER = "forward+copy"


@dataclass
class PacketVerdict:
    disposition: Disposition
    port: int | None = None
    events: tuple[ControllerEvent, ...] = ()
    parsed: ParsedPacket | None = None

    @property
    def forwarded(self) -> bool:
        return self.disposition is not Disposition.DROP


@dataclass
class IngressStep:
    table: str
    guard: Callable[[ParsedPacket], bool] | None = None


Hook = Callable[[ParsedPacket], ParsedPacket]
CountHook = Callable[["SwitchState", ActionOutcome, ParsedPacket], Sequence[ControllerEvent]]


def identity(pkt: ParsedPacket) -> ParsedPacket:
    return pkt


@dataclass
class SwitchStats:
    packets: int = 0
    forwarded: int = 0
    dropped: int = 0
    parse_failures: int = 0


@dataclass
class SwitchState:
    id: str
    graph: ParseGraph
    schemas: Mapping[str, HeaderDef]
    tables: dict[str, Table]
    counters: dict[str, KeyedCounter]
    ingress: list[IngressStep]
    default_port: int = 1
    verify_checksum_hook: Hook = identity
    egress_hook: Hook = identity
    compute_checksum_hook: Hook = identity
    on_count: CountHook | None = None
    stats: SwitchStats = field(default_factory=SwitchStats)

    stages = STAGES

    @property
    def ingress_tables(self) -> list[str]:
        return [s.table for s in self.ingress]

    def validate(self) -> list[str]:
        problems = [str(v) for v in validate_graph(self.graph, self.schemas)]
        for step in self.ingress:
            if step.table not in self.tables:
                problems.append(f"ingress references unknown table {step.table!r}")
        for t in self.tables.values():
            hdef = self.schemas.get(t.key_header)
            if hdef is None or not hdef.has_field(t.key_field):
                problems.append(f"table {t.name}: unknown key {t.key_header}.{t.key_field}")
            elif hdef.field(t.key_field).width_bits != t.key_width:
                problems.append(f"table {t.name}: key width {t.key_width} != field width")
            for a in (t.default_action, t.learn_action, *t.entries.values()):
                if a is not None:
                    try:
                        _check_action(self, a)
                    except ActionInvalid as exc:
                        problems.append(f"table {t.name}: {exc}")
        return problems


def process_packet(
    sw: SwitchState, raw: bytes, meta: PacketMeta | None = None
) -> tuple[PacketVerdict, bytes | None]:
    """Run one frame through every stage. Never raises for bad input."""
    if meta is None:
        meta = PacketMeta(raw_len=len(raw))
    sw.stats.packets += 1
    try:
        pkt = parse(sw.graph, sw.schemas, raw, meta)
    except ParseError as exc:
        sw.stats.parse_failures += 1
        sw.stats.dropped += 1
        ev = ParseFailed(sw.id, meta.timestamp_s, str(exc))
        return PacketVerdict(Disposition.DROP, None, (ev,)), None

    pkt = sw.verify_checksum_hook(pkt)

    events: list[ControllerEvent] = []
    port = sw.default_port
    copy = False
    dropped = False
    tables = sw.tables
    for step in sw.ingress:
        if step.guard is not None and not step.guard(pkt):
            continue
        out = apply_table(tables[step.table], pkt, sw.counters)
        if out.diagnostic:
            events.append(TableDiagnostic(sw.id, meta.timestamp_s, out.table, out.diagnostic))
        prim = out.action.primitive
        if prim is Primitive.DROP:
            dropped = True
            break
        if prim is Primitive.FORWARD:
            port = out.action.port
        elif prim is Primitive.TO_CONTROLLER:
            copy = True
        if out.count is not None and sw.on_count is not None:
            raised = sw.on_count(sw, out, pkt)
            if raised:
                events.extend(raised)
                copy = True

    if dropped:
        sw.stats.dropped += 1
        return PacketVerdict(Disposition.DROP, None, tuple(events), pkt), None

    pkt = sw.egress_hook(pkt)
    pkt = sw.compute_checksum_hook(pkt)
    out_bytes = deparse(pkt)
    sw.stats.forwarded += 1
    disp = Disposition.COPY_TO_CONTROLLER if copy else Disposition.FORWARD
    return PacketVerdict(disp, port, tuple(events), pkt), out_bytes


def _check_action(sw: SwitchState, action: ActionSpec) -> None:
    prim = action.primitive
    if prim is Primitive.COUNTER_INCR and action.counter not in sw.counters:
        raise ActionInvalid(f"unknown counter {action.counter!r}")
    if prim is Primitive.SET_FIELD:
        hdef = sw.schemas.get(action.header)
        if hdef is None or not hdef.has_field(action.field):
            raise ActionInvalid(f"unknown field {action.header}.{action.field}")
        if not 0 <= action.value <= hdef.field(action.field).max_value:
            raise ActionInvalid(f"value {action.value:#x} overflows {action.header}.{action.field}")
    if prim is Primitive.FORWARD and action.port < 0:
        raise ActionInvalid(f"bad port {action.port}")


def install_entry(sw: SwitchState, table_name: str, key_value: int, action: ActionSpec) -> None:
    table = sw.tables.get(table_name)
    if table is None:
        raise NoSuchTable(table_name)
    if not isinstance(action, ActionSpec):
        raise ActionInvalid(f"not an action: {action!r}")
    _check_action(sw, action)
    if not 0 <= key_value < (1 << table.key_width):
        raise ActionInvalid(f"key {key_value:#x} wider than {table.key_width} bits")
    if key_value not in table.entries and len(table.entries) >= table.max_size:
        raise TableFull(f"{table_name} holds {table.max_size} entries")
    table.entries[key_value] = action


def read_counters(sw: SwitchState, counter_name: str) -> list[tuple[int, int, int]]:
    ctr = sw.counters.get(counter_name)
    if ctr is None:
        raise NoSuchCounter(counter_name)
    return ctr.snapshot()


def counters_to_csv(snapshot: Iterable[tuple[int, int, int]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["key_hex", "count", "window_index"])
    for k, c, win in snapshot:
        w.writerow([addr_hex(k), c, win])
    return buf.getvalue()
