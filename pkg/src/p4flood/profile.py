"""ZEP / IEEE 802.15.4 / 6LoWPAN / UDP profile with HELLO-flood detection.

Wire layout of a HELLO frame (67 bytes)::

    ZEP (13) | IEEE802154 (19) | SixLoWPAN (18) | UDP (8) | msgType (1) | nodeId (8)

The IEEE802154 header is the simplified six-field layout used throughout this
package (48-bit addresses, FCS before the payload); it is not the standard
802.15.4 MAC frame.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields as dc_fields
from typing import Any, Mapping

from .events import Alert
from .header_schema import HeaderDef, ParsedPacket, define_header
from .parser import ACCEPT, REJECT, ParseGraph, ParseState, Select
from .pipeline import (
    ActionOutcome,
    ActionSpec,
    IngressStep,
    KeyedCounter,
    SwitchState,
    Table,
)

BROADCAST = 0xFFFF_FFFF_FFFF_FFFF
MAC48 = 0xFFFF_FFFF_FFFF
BLOCKLIST = "blocklist"
DSTNODECOUNTER = "dstnodecounter"
BLOCKLIST_SIZE = 512

ZEP = define_header(
    "ZEP",
    [
        ("protoIDstring", 16),
        ("version", 8),
        ("type", 8),
        ("channelId", 8),
        ("deviceId", 16),
        ("lqiMode", 8),
        ("lqi", 8),
        ("seq", 32),
    ],
)
IEEE802154 = define_header(
    "IEEE802154",
    [
        ("framecontrol", 16),
        ("seqnumber", 8),
        ("destPAN", 16),
        ("destination", 48),
        ("extendSrc", 48),
        ("fcs", 16),
    ],
)
SIXLOWPAN = define_header(
    "SixLoWPAN",
    [("dispatch", 8), ("hopLimit", 8), ("src", 64), ("dst", 64)],
)
UDP = define_header(
    "UDP",
    [("srcPort", 16), ("dstPort", 16), ("length", 16), ("checksum", 16)],
)
HEADERS = (ZEP, IEEE802154, SIXLOWPAN, UDP)
MIN_FRAME_LEN = sum(h.byte_width for h in HEADERS)
HELLO_PAYLOAD_LEN = 9
HELLO_FRAME_LEN = MIN_FRAME_LEN + HELLO_PAYLOAD_LEN

# fixed values for frames we originate
ZEP_VERSION = 2
ZEP_TYPE_DATA = 1
ZEP_CHANNEL = 11
FRAME_CONTROL = 0x8841
DEST_PAN = 0xABCD
LOWPAN_DISPATCH_IPV6 = 0x41
HOP_LIMIT = 64
UDP_SRC_PORT = 0xF0B1
UDP_DST_PORT = 0xF0B2


class ConfigInvalid(ValueError):
    pass


@dataclass
class ProfileConfig:
    zep_proto_id: int = 0x4558  # "EX"
    hello_msg_type: int = 0x01
    theta: int = 50
    window_s: float = 1.0
    counter_capacity: int = 512

    def validate(self) -> None:
        if not 0 <= self.zep_proto_id <= 0xFFFF:
            raise ConfigInvalid(f"zep_proto_id {self.zep_proto_id:#x} is not 16-bit")
        if not 0 <= self.hello_msg_type <= 0xFF:
            raise ConfigInvalid(f"hello_msg_type {self.hello_msg_type:#x} is not 8-bit")
        if self.theta < 1:
            raise ConfigInvalid("theta must be >= 1")
        if not self.window_s > 0:
            raise ConfigInvalid("window_s must be > 0")
        if self.counter_capacity < 1:
            raise ConfigInvalid("counter_capacity must be >= 1")

    def with_overrides(self, overrides: Mapping[str, Any] | None) -> ProfileConfig:
        """Return a copy with non-None values from ``overrides`` applied."""
        if not overrides:
            return self
        known = {f.name for f in dc_fields(self)}
        vals = {f.name: getattr(self, f.name) for f in dc_fields(self)}
        for k, v in overrides.items():
            if k not in known:
                raise ConfigInvalid(f"unknown profile key {k!r}")
            if v is None:
                continue
            if k in ("zep_proto_id", "hello_msg_type") and isinstance(v, str):
                v = int(v, 0)
            vals[k] = float(v) if k == "window_s" else int(v)
        cfg = ProfileConfig(**vals)
        cfg.validate()
        return cfg

    def to_json(self) -> dict[str, Any]:
        return {
            "zep_proto_id": f"0x{self.zep_proto_id:04X}",
            "hello_msg_type": f"0x{self.hello_msg_type:02X}",
            "theta": self.theta,
            "window_s": self.window_s,
            "counter_capacity": self.counter_capacity,
        }


@dataclass
class Profile:
    config: ProfileConfig
    schemas: dict[str, HeaderDef]
    graph: ParseGraph
    tables: dict[str, Table] = field(default_factory=dict)
    counters: dict[str, KeyedCounter] = field(default_factory=dict)


def build_graph(zep_proto_id: int) -> ParseGraph:
    states = [
        ParseState("start", (), None, "zigbee"),
        ParseState(
            "zigbee",
            ("ZEP",),
            Select("ZEP", "protoIDstring", {zep_proto_id: "ieee802154"}, REJECT),
        ),
        ParseState("ieee802154", ("IEEE802154",), None, "sixlowpan"),
        ParseState("sixlowpan", ("SixLoWPAN",), None, "udp"),
        ParseState("udp", ("UDP",), None, ACCEPT),
    ]
    return ParseGraph({s.name: s for s in states}, "start")


def build_profile(config: ProfileConfig | None = None) -> Profile:
    """Fresh headers, parse graph, tables and counters for one switch."""
    config = config or ProfileConfig()
    config.validate()
    dst_width = SIXLOWPAN.field("dst").width_bits
    tables = {
        BLOCKLIST: Table(BLOCKLIST, "SixLoWPAN", "dst", dst_width, BLOCKLIST_SIZE),
        DSTNODECOUNTER: Table(
            DSTNODECOUNTER,
            "SixLoWPAN",
            "dst",
            dst_width,
            config.counter_capacity,
            learn_action=ActionSpec.counter_incr(DSTNODECOUNTER),
        ),
    }
    counters = {
        DSTNODECOUNTER: KeyedCounter(DSTNODECOUNTER, config.counter_capacity, config.window_s)
    }
    return Profile(
        config,
        {h.name: h for h in HEADERS},
        build_graph(config.zep_proto_id),
        tables,
        counters,
    )


def classify_hello(pkt: ParsedPacket, config: ProfileConfig) -> bool:
    if len(pkt.headers) != len(HEADERS) or pkt.headers[-1].definition.name != UDP.name:
        return False
    return len(pkt.payload) >= 1 and pkt.payload[0] == config.hello_msg_type


def detect(
    switch_id: str,
    dst: int,
    post_increment_count: int,
    window_index: int,
    timestamp_s: float,
    config: ProfileConfig,
) -> Alert | None:
    # exact crossing: one alert per (dst, window) with no extra state
    if post_increment_count == config.theta:
        return Alert(switch_id, dst, post_increment_count, window_index, timestamp_s)
    return None


def build_switch(config: ProfileConfig | None = None, switch_id: str = "s1") -> SwitchState:
    """A switch running the profile: blocklist, then dstnodecounter, then detection."""
    prof = build_profile(config)
    cfg = prof.config

    def counts(pkt: ParsedPacket) -> bool:
        if not classify_hello(pkt, cfg):
            return False
        return pkt.headers[2].values["dst"] != BROADCAST

    def on_count(sw: SwitchState, out: ActionOutcome, pkt: ParsedPacket) -> list[Alert]:
        if out.table != DSTNODECOUNTER:
            return []
        alert = detect(sw.id, out.key, out.count, out.window_index, pkt.meta.timestamp_s, cfg)
        return [alert] if alert else []

    return SwitchState(
        id=switch_id,
        graph=prof.graph,
        schemas=prof.schemas,
        tables=prof.tables,
        counters=prof.counters,
        ingress=[IngressStep(BLOCKLIST), IngressStep(DSTNODECOUNTER, counts)],
        on_count=on_count,
    )


def hello_payload(node_addr: int, config: ProfileConfig) -> bytes:
    return bytes([config.hello_msg_type]) + node_addr.to_bytes(8, "big")


def build_frame(
    src: int,
    dst: int,
    seq: int,
    payload: bytes,
    config: ProfileConfig | None = None,
) -> bytes:
    """Serialize a frame in the profile's layout from node addresses."""
    config = config or ProfileConfig()
    zep = ZEP.pack(
        {
            "protoIDstring": config.zep_proto_id,
            "version": ZEP_VERSION,
            "type": ZEP_TYPE_DATA,
            "channelId": ZEP_CHANNEL,
            "deviceId": src & 0xFFFF,
            "lqiMode": 0,
            "lqi": 0xFF,
            "seq": seq & 0xFFFF_FFFF,
        }
    )
    mac = IEEE802154.pack(
        {
            "framecontrol": FRAME_CONTROL,
            "seqnumber": seq & 0xFF,
            "destPAN": DEST_PAN,
            "destination": dst & MAC48,
            "extendSrc": src & MAC48,
            "fcs": 0,
        }
    )
    lowpan = SIXLOWPAN.pack(
        {"dispatch": LOWPAN_DISPATCH_IPV6, "hopLimit": HOP_LIMIT, "src": src, "dst": dst}
    )
    udp = UDP.pack(
        {
            "srcPort": UDP_SRC_PORT,
            "dstPort": UDP_DST_PORT,
            "length": 8 + len(payload),
            "checksum": 0,
        }
    )
    return zep + mac + lowpan + udp + payload


def build_hello(src: int, dst: int, seq: int, config: ProfileConfig | None = None) -> bytes:
    config = config or ProfileConfig()
    return build_frame(src, dst, seq, hello_payload(src, config), config)
