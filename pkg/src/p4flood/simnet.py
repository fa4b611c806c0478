"""Deterministic sensor-network traffic for a single-switch star topology.

Legit nodes beacon broadcast HELLOs. An attacker either advertises itself with
broadcast HELLOs that every legit node answers with a unicast HELLO
(REPLY_FLOOD), or sends unicast HELLOs straight at a target (DIRECT_FLOOD).
All randomness comes from a splitmix64 stream seeded by the scenario, and all
timestamps are whole microseconds so that a pcap round trip is exact.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Any, Iterator, Mapping

from .events import addr_hex, parse_addr
from .profile import BROADCAST, ConfigInvalid, ProfileConfig, build_hello

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def prng_next(state: int) -> tuple[int, int]:
    """One splitmix64 step: returns (output, new state)."""
    state = (state + GOLDEN_GAMMA) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31), state


def u01(v: int) -> float:
    # top 53 bits only, so the result is exactly representable and never 1.0
    return (v >> 11) * (1.0 / (1 << 53))


class SplitMix64:
    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next(self) -> int:
        v, self.state = prng_next(self.state)
        return v

    def random(self) -> float:
        return u01(self.next())

    def __iter__(self) -> Iterator[int]:
        while True:
            yield self.next()


class ScenarioInvalid(ValueError):
    pass


class Role(enum.Enum):
    LEGIT = "LEGIT"
    ATTACKER = "ATTACKER"
    BASESTATION = "BASESTATION"


class AttackMode(enum.Enum):
    REPLY_FLOOD = "REPLY_FLOOD"
    DIRECT_FLOOD = "DIRECT_FLOOD"


@dataclass
class NodeSpec:
    id: str
    addr: int
    role: Role = Role.LEGIT
    hello_rate_hz: float = 0.0


@dataclass
class AttackSpec:
    mode: AttackMode
    flood_rate_hz: float
    start_s: float = 0.0
    target: int | None = None  # None means every non-attacker node


@dataclass
class ScenarioConfig:
    duration_s: float
    seed: int = 0
    nodes: list[NodeSpec] = field(default_factory=list)
    attack: AttackSpec | None = None
    reply_delay_s: float = 0.010
    profile: dict[str, Any] = field(default_factory=dict)
    controller: dict[str, Any] = field(default_factory=dict)

    def validate(self) -> None:
        if not self.duration_s > 0:
            raise ScenarioInvalid("duration_s must be > 0")
        if self.reply_delay_s < 0:
            raise ScenarioInvalid("reply_delay_s must be >= 0")
        if not 0 <= self.seed <= MASK64:
            raise ScenarioInvalid("seed must fit in 64 bits")
        ids: set[str] = set()
        addrs: set[int] = set()
        for n in self.nodes:
            if n.id in ids:
                raise ScenarioInvalid(f"duplicate node id {n.id!r}")
            if n.addr in addrs:
                raise ScenarioInvalid(f"duplicate node address {addr_hex(n.addr)}")
            if n.addr == BROADCAST or not 0 <= n.addr <= MASK64:
                raise ScenarioInvalid(f"node {n.id}: address {n.addr:#x} is reserved or too wide")
            if n.hello_rate_hz < 0:
                raise ScenarioInvalid(f"node {n.id}: negative hello_rate_hz")
            ids.add(n.id)
            addrs.add(n.addr)
        a = self.attack
        if a is not None:
            if a.flood_rate_hz < 0:
                raise ScenarioInvalid("flood_rate_hz must be >= 0")
            if not 0 <= a.start_s <= self.duration_s:
                raise ScenarioInvalid("attack start_s must lie within [0, duration_s]")
            if not any(n.role is Role.ATTACKER for n in self.nodes):
                raise ScenarioInvalid("attack configured but no ATTACKER node")
        try:
            ProfileConfig().with_overrides(self.profile)
        except (ConfigInvalid, ValueError, TypeError) as exc:
            raise ScenarioInvalid(f"profile: {exc}") from exc

    def profile_config(self) -> ProfileConfig:
        return ProfileConfig().with_overrides(self.profile)

    def to_json(self) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "duration_s": self.duration_s,
            "seed": self.seed,
            "nodes": [
                {"id": n.id, "addr": addr_hex(n.addr), "role": n.role.value, "hello_rate_hz": n.hello_rate_hz}
                for n in self.nodes
            ],
            "reply_delay_s": self.reply_delay_s,
        }
        if self.attack is not None:
            doc["attack"] = {
                "mode": self.attack.mode.value,
                "flood_rate_hz": self.attack.flood_rate_hz,
                "start_s": self.attack.start_s,
                "target": "ALL" if self.attack.target is None else addr_hex(self.attack.target),
            }
        if self.profile:
            doc["profile"] = dict(self.profile)
        if self.controller:
            doc["controller"] = dict(self.controller)
        return doc


def scenario_from_json(doc: Mapping[str, Any]) -> ScenarioConfig:
    try:
        nodes = [
            NodeSpec(
                str(n["id"]),
                parse_addr(n["addr"]),
                Role(str(n.get("role", "LEGIT")).upper()),
                float(n.get("hello_rate_hz", 0.0)),
            )
            for n in doc.get("nodes", [])
        ]
        attack = None
        if doc.get("attack"):
            a = doc["attack"]
            target = a.get("target", "ALL")
            attack = AttackSpec(
                AttackMode(str(a["mode"]).upper()),
                float(a.get("flood_rate_hz", 0.0)),
                float(a.get("start_s", 0.0)),
                None if target in (None, "ALL") else parse_addr(target),
            )
        sc = ScenarioConfig(
            duration_s=float(doc["duration_s"]),
            seed=int(doc.get("seed", 0)),
            nodes=nodes,
            attack=attack,
            reply_delay_s=float(doc.get("reply_delay_s", 0.010)),
            profile=dict(doc.get("profile") or {}),
            controller=dict(doc.get("controller") or {}),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioInvalid(f"malformed scenario: {exc}") from exc
    sc.validate()
    return sc


def load_scenario(path: str) -> ScenarioConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ScenarioInvalid(f"{path}: {exc}") from exc
    return scenario_from_json(doc)


def star_scenario(
    n_legit: int = 10,
    legit_rate_hz: float = 2.0,
    flood_rate_hz: float | None = 100.0,
    duration_s: float = 10.0,
    seed: int = 1,
    mode: AttackMode = AttackMode.REPLY_FLOOD,
    start_s: float = 0.0,
    **profile: Any,
) -> ScenarioConfig:
    """Convenience topology: ``n_legit`` beaconing nodes plus an optional attacker."""
    nodes = [
        NodeSpec(f"n{i + 1}", 0x00124B0000000001 + i, Role.LEGIT, legit_rate_hz)
        for i in range(n_legit)
    ]
    attack = None
    if flood_rate_hz is not None:
        nodes.append(NodeSpec("mal", 0x00124B00DEADBEEF, Role.ATTACKER, 0.0))
        attack = AttackSpec(mode, flood_rate_hz, start_s)
    sc = ScenarioConfig(duration_s, seed, nodes, attack, profile=profile)
    sc.validate()
    return sc


@dataclass
class PacketRecord:
    timestamp_s: float
    raw_bytes: bytes
    src_node_id: str = ""
    note: str = ""


def _periodic(start: float, period: float, end: float) -> Iterator[float]:
    k = 0
    while True:
        t = start + k * period
        if t >= end:
            return
        yield t
        k += 1


def generate(scenario: ScenarioConfig) -> list[PacketRecord]:
    scenario.validate()
    cfg = scenario.profile_config()
    rng = SplitMix64(scenario.seed)
    dur = scenario.duration_s
    # (ts_us, generation order, node, dst, note)
    events: list[tuple[int, int, NodeSpec, int, str]] = []

    def emit(t: float, node: NodeSpec, dst: int, note: str) -> None:
        events.append((round(t * 1_000_000), len(events), node, dst, note))

    for node in scenario.nodes:
        if node.role is Role.ATTACKER or node.hello_rate_hz <= 0:
            continue
        period = 1.0 / node.hello_rate_hz
        phase = rng.random() * period
        for t in _periodic(phase, period, dur):
            emit(t, node, BROADCAST, "beacon")

    attack = scenario.attack
    if attack is not None and attack.flood_rate_hz > 0:
        legit = [n for n in scenario.nodes if n.role is Role.LEGIT]
        victims = [n for n in scenario.nodes if n.role is not Role.ATTACKER]
        for atk in (n for n in scenario.nodes if n.role is Role.ATTACKER):
            for t in _periodic(attack.start_s, 1.0 / attack.flood_rate_hz, dur):
                if attack.mode is AttackMode.REPLY_FLOOD:
                    emit(t, atk, BROADCAST, "advert")
                    for n in legit:
                        # replies are emitted even if they land past duration_s
                        emit(t + scenario.reply_delay_s, n, atk.addr, "reply")
                elif attack.target is not None:
                    emit(t, atk, attack.target, "flood")
                else:
                    for v in victims:
                        emit(t, atk, v.addr, "flood")

    events.sort(key=lambda e: (e[0], e[1]))
    seqs: dict[str, int] = {}
    out: list[PacketRecord] = []
    for ts_us, _, node, dst, note in events:
        seq = seqs.get(node.id, 0)
        seqs[node.id] = seq + 1
        frame = build_hello(node.addr, dst, seq, cfg)
        out.append(PacketRecord(ts_us / 1_000_000, frame, node.id, note))
    return out
