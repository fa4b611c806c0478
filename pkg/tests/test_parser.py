from __future__ import annotations

import pytest
from hypothesis import given, settings, strategies as st

from conftest import hand_frame
from p4flood.header_schema import PacketMeta, ParsedPacket, define_header, set_field
from p4flood.parser import (
    ACCEPT,
    REJECT,
    REJECTED,
    REVISITED,
    UNDERFLOW,
    ParseError,
    ParseGraph,
    ParseState,
    Select,
    deparse,
    graph_from_json,
    graph_to_json,
    parse,
    validate_graph,
)
from p4flood.profile import build_profile


def test_parse_hello_frame(profile, frame):
    assert len(frame) == 67
    meta = PacketMeta(3, 1.25, 67)
    pkt = parse(profile.graph, profile.schemas, frame, meta)
    assert [h.name for h in pkt.headers] == ["ZEP", "IEEE802154", "SixLoWPAN", "UDP"]
    assert len(pkt.payload) == 9
    assert pkt.meta == meta
    assert pkt.header("SixLoWPAN").values["dst"] == 0xAA
    assert pkt.header("UDP").values["length"] == 17


def test_underflow_short_input(profile, frame):
    with pytest.raises(ParseError) as ei:
        parse(profile.graph, profile.schemas, frame[:10])
    assert (ei.value.kind, ei.value.at_state, ei.value.offset_bytes) == (UNDERFLOW, "zigbee", 0)


def test_underflow_mid_stack(profile, frame):
    with pytest.raises(ParseError) as ei:
        parse(profile.graph, profile.schemas, frame[:40])
    assert (ei.value.kind, ei.value.at_state, ei.value.offset_bytes) == (UNDERFLOW, "sixlowpan", 32)


def test_rejected_wrong_proto(profile, frame):
    raw = b"\x00\x00" + frame[2:]
    with pytest.raises(ParseError) as ei:
        parse(profile.graph, profile.schemas, raw)
    assert ei.value.kind == REJECTED
    assert ei.value.at_state == "zigbee"


def test_deparse_roundtrip(profile, frame):
    assert deparse(parse(profile.graph, profile.schemas, frame)) == frame


def test_deparse_payload_only():
    pkt = ParsedPacket([], b"AB", PacketMeta(raw_len=2))
    assert deparse(pkt) == b"\x41\x42"


def test_set_seqnumber_changes_one_byte(profile, frame):
    pkt = parse(profile.graph, profile.schemas, frame)
    before = deparse(pkt)
    mac = pkt.header("IEEE802154")
    pkt.replace_header(set_field(mac, "seqnumber", 0x07 ^ 0xFF))
    after = deparse(pkt)
    diff = [i for i, (a, b) in enumerate(zip(before, after)) if a != b]
    assert len(before) == len(after)
    # 13 ZEP bytes + 2 framecontrol bytes
    assert diff == [15]


def test_validate_profile_graph(profile):
    assert validate_graph(profile.graph, profile.schemas) == []
    order = []
    cur = profile.graph.start
    while cur != ACCEPT:
        order.append(cur)
        st_ = profile.graph.states[cur]
        cur = st_.next if st_.select is None else next(iter(st_.select.cases.values()))
    assert order == ["start", "zigbee", "ieee802154", "sixlowpan", "udp"]


def test_validate_dangling_state(profile):
    states = dict(profile.graph.states)
    states["udp"] = ParseState("udp", ("UDP",), None, "foo")
    v = validate_graph(ParseGraph(states, "start"), profile.schemas)
    assert [(x.kind, x.detail) for x in v] == [("DanglingState", "foo")]


def test_validate_case_overflow(profile):
    states = dict(profile.graph.states)
    states["zigbee"] = ParseState(
        "zigbee", ("ZEP",), Select("ZEP", "protoIDstring", {0x1FFFF: "ieee802154"})
    )
    v = validate_graph(ParseGraph(states, "start"), profile.schemas)
    assert [x.kind for x in v] == ["CaseOverflow"]


def test_validate_unknown_refs(profile):
    states = {
        "start": ParseState("start", ("Nope",), Select("ZEP", "bogus", {1: ACCEPT})),
    }
    kinds = {x.kind for x in validate_graph(ParseGraph(states, "begin"), profile.schemas)}
    assert kinds == {"MissingStart", "UnknownHeader", "UnknownField"}


def test_revisited_state_guard():
    h = define_header("B", [("b", 8)])
    g = ParseGraph(
        {
            "start": ParseState("start", ("B",), None, "loop"),
            "loop": ParseState("loop", (), None, "start"),
        }
    )
    with pytest.raises(ParseError) as ei:
        parse(g, {"B": h}, b"\x01\x02\x03")
    assert ei.value.kind == REVISITED
    assert ei.value.at_state == "start"


def test_select_default_state():
    h = define_header("B", [("b", 8)])
    g = ParseGraph(
        {
            "start": ParseState("start", ("B",), Select("B", "b", {1: ACCEPT}, "more")),
            "more": ParseState("more", (), None, ACCEPT),
        }
    )
    assert parse(g, {"B": h}, b"\x02xyz").payload == b"xyz"


def test_graph_json_roundtrip(profile):
    doc = graph_to_json(profile.graph)
    assert doc["states"]["zigbee"]["select"]["cases"] == {"0x4558": "ieee802154"}
    assert graph_from_json(doc) == profile.graph


def test_graph_json_document_shape(profile):
    g = graph_from_json(
        {
            "start": "start",
            "states": {
                "start": {"next": "zigbee"},
                "zigbee": {
                    "extract": ["ZEP"],
                    "select": {"on": "ZEP.protoIDstring", "cases": {"0x4558": "ieee802154"}, "default": "REJECT"},
                },
                "ieee802154": {"extract": ["IEEE802154"], "next": "sixlowpan"},
                "sixlowpan": {"extract": ["SixLoWPAN"], "next": "udp"},
                "udp": {"extract": ["UDP"]},
            },
        }
    )
    assert g == profile.graph
    assert g.states["zigbee"].select.default == REJECT


PROFILE = build_profile()

frames = st.builds(
    hand_frame,
    src=st.integers(0, (1 << 64) - 1),
    dst=st.integers(0, (1 << 64) - 1),
    seq=st.integers(0, (1 << 32) - 1),
    payload=st.binary(max_size=64),
)


@given(frames)
def test_roundtrip_property(raw):
    assert deparse(parse(PROFILE.graph, PROFILE.schemas, raw)) == raw


@given(frames, st.binary(max_size=80))
def test_prefix_monotonicity(raw, tail):
    pkt = parse(PROFILE.graph, PROFILE.schemas, raw)
    k = len(raw) - len(pkt.payload)
    other = parse(PROFILE.graph, PROFILE.schemas, raw[:k] + tail)
    assert [h.values for h in other.headers] == [h.values for h in pkt.headers]


@settings(max_examples=300)
@given(st.binary(max_size=120))
def test_never_crashes_on_garbage(raw):
    try:
        pkt = parse(PROFILE.graph, PROFILE.schemas, raw)
    except ParseError as exc:
        assert exc.kind in (UNDERFLOW, REJECTED)
        assert 0 <= exc.offset_bytes <= len(raw)
    else:
        assert deparse(pkt) == raw
