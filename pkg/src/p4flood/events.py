"""Messages exchanged between switches and the controller.

Everything here serializes to the newline-delimited JSON used on the
southbound channel. Addresses go out as ``0x`` + 16 uppercase hex digits.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any, Union


def addr_hex(addr: int) -> str:
    return f"0x{addr:016X}"


def parse_addr(v: int | str) -> int:
    if isinstance(v, int):
        return v
    return int(v, 16) if v.lower().startswith("0x") else int(v, 0)


def dumps(msg: dict[str, Any]) -> str:
    return json.dumps(msg, separators=(",", ":"))


@dataclass(frozen=True)
class Alert:
    switch_id: str
    dst_addr: int
    count: int
    window_index: int
    timestamp_s: float

    def to_message(self) -> dict[str, Any]:
        return {
            "type": "alert",
            "switch": self.switch_id,
            "dst": addr_hex(self.dst_addr),
            "count": self.count,
            "window": self.window_index,
            "ts": round(self.timestamp_s, 6),
        }


@dataclass(frozen=True)
class ParseFailed:
    switch_id: str
    timestamp_s: float
    reason: str

    def to_message(self) -> dict[str, Any]:
        return {
            "type": "parse_failed",
            "switch": self.switch_id,
            "ts": round(self.timestamp_s, 6),
            "reason": self.reason,
        }


@dataclass(frozen=True)
class CounterSnapshot:
    switch_id: str
    counter: str
    entries: tuple[tuple[int, int, int], ...] = ()  # (key, count, window_index)

    def to_message(self) -> dict[str, Any]:
        return {
            "type": "counters",
            "switch": self.switch_id,
            "counter": self.counter,
            "entries": [[addr_hex(k), c, w] for k, c, w in self.entries],
        }


@dataclass(frozen=True)
class TableDiagnostic:
    """Non-fatal table condition, e.g. a key header that was never extracted."""

    switch_id: str
    timestamp_s: float
    table: str
    reason: str

    def to_message(self) -> dict[str, Any]:
        return {
            "type": "diagnostic",
            "switch": self.switch_id,
            "table": self.table,
            "ts": round(self.timestamp_s, 6),
            "reason": self.reason,
        }


ControllerEvent = Union[Alert, ParseFailed, CounterSnapshot, TableDiagnostic]


@dataclass(frozen=True)
class InstallRule:
    switch_id: str
    table: str
    key: int
    action: str = "drop"

    def to_message(self) -> dict[str, Any]:
        return {
            "type": "install",
            "switch": self.switch_id,
            "table": self.table,
            "key": addr_hex(self.key),
            "action": self.action,
        }


@dataclass(frozen=True)
class ReadCounters:
    switch_id: str
    counter: str = "dstnodecounter"

    def to_message(self) -> dict[str, Any]:
        return {"type": "read_counters", "switch": self.switch_id, "counter": self.counter}


Command = Union[InstallRule, ReadCounters]


def message_from_json(line: str | dict[str, Any]) -> ControllerEvent | Command:
    """Inverse of ``to_message`` for the southbound message types."""
    m = json.loads(line) if isinstance(line, str) else line
    t = m.get("type")
    if t == "alert":
        return Alert(m["switch"], parse_addr(m["dst"]), int(m["count"]), int(m["window"]), float(m["ts"]))
    if t == "parse_failed":
        return ParseFailed(m["switch"], float(m["ts"]), m["reason"])
    if t == "counters":
        entries = tuple((parse_addr(k), int(c), int(w)) for k, c, w in m.get("entries", []))
        return CounterSnapshot(m["switch"], m["counter"], entries)
    if t == "diagnostic":
        return TableDiagnostic(m["switch"], float(m["ts"]), m["table"], m["reason"])
    if t == "install":
        return InstallRule(m["switch"], m["table"], parse_addr(m["key"]), m.get("action", "drop"))
    if t == "read_counters":
        return ReadCounters(m["switch"], m.get("counter", "dstnodecounter"))
    raise ValueError(f"unknown southbound message type {t!r}")


__all__ = [
    "Alert",
    "Command",
    "ControllerEvent",
    "CounterSnapshot",
    "InstallRule",
    "ParseFailed",
    "ReadCounters",
    "TableDiagnostic",
    "addr_hex",
    "dumps",
    "message_from_json",
    "parse_addr",
]
