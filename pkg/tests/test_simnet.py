from __future__ import annotations

import json
import math

import pytest
from hypothesis import given, settings, strategies as st

from p4flood.header_schema import PacketMeta
from p4flood.pipeline import process_packet
from p4flood.profile import BROADCAST, build_profile, build_switch
from p4flood.parser import parse
from p4flood.simnet import (
    AttackMode,
    AttackSpec,
    NodeSpec,
    Role,
    ScenarioConfig,
    ScenarioInvalid,
    SplitMix64,
    generate,
    load_scenario,
    prng_next,
    scenario_from_json,
    star_scenario,
    u01,
)

M64 = (1 << 64) - 1


def test_splitmix_seed0_reference():
    # first output for seed 0, worked step by step from the mixing constants
    s = 0x9E3779B97F4A7C15
    z = s
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) % (1 << 64)
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) % (1 << 64)
    z = z ^ (z >> 31)
    v, state = prng_next(0)
    assert v == z == 0xE220A8397B1DCDAF
    assert state == s


def test_splitmix_determinism():
    a, b = SplitMix64(42), SplitMix64(42)
    assert [a.next() for _ in range(50)] == [b.next() for _ in range(50)]


@given(st.integers(0, M64))
def test_u01_range(v):
    assert 0.0 <= u01(v) < 1.0


def test_u01_extremes():
    assert u01(0) == 0.0
    assert u01(M64) < 1.0


def _phases(seed, n, period):
    out, state = [], seed
    for _ in range(n):
        v, state = prng_next(state)
        out.append(u01(v) * period)
    return out


def test_benign_beacon_count():
    sc = star_scenario(n_legit=5, legit_rate_hz=2.0, flood_rate_hz=None, duration_s=10.0, seed=9)
    recs = generate(sc)
    # naive enumeration of each node's beacon times
    expected = 0
    for ph in _phases(9, 5, 0.5):
        t, k = ph, 0
        while t < 10.0:
            expected += 1
            k += 1
            t = ph + k * 0.5
        assert math.floor((10.0 - ph) / 0.5) + 1 == 20
    assert len(recs) == expected == 100
    assert all(r.note == "beacon" for r in recs)


def test_reply_flood_counts():
    sc = star_scenario(n_legit=10, legit_rate_hz=2.0, flood_rate_hz=10.0, duration_s=10.0)
    recs = generate(sc)
    atk = next(n for n in sc.nodes if n.role is Role.ATTACKER)
    prof = build_profile()
    to_atk = [
        r for r in recs
        if parse(prof.graph, prof.schemas, r.raw_bytes).header("SixLoWPAN").values["dst"] == atk.addr
    ]
    adverts = sum(1 for k in range(1000) if k / 10.0 < 10.0)
    assert len(to_atk) == adverts * 10 == 1000
    assert sum(r.note == "advert" for r in recs) == 100
    assert sum(r.note == "beacon" for r in recs) == 200


def test_direct_flood_targets():
    sc = star_scenario(n_legit=3, flood_rate_hz=5.0, duration_s=2.0, mode=AttackMode.DIRECT_FLOOD)
    recs = generate(sc)
    assert sum(r.note == "flood" for r in recs) == 10 * 3
    sc.attack = AttackSpec(AttackMode.DIRECT_FLOOD, 5.0, 0.0, sc.nodes[0].addr)
    assert sum(r.note == "flood" for r in generate(sc)) == 10


def test_invalid_scenarios():
    with pytest.raises(ScenarioInvalid):
        generate(ScenarioConfig(duration_s=0))
    with pytest.raises(ScenarioInvalid):
        ScenarioConfig(10, nodes=[NodeSpec("a", 1), NodeSpec("b", 1)]).validate()
    with pytest.raises(ScenarioInvalid):
        ScenarioConfig(10, nodes=[NodeSpec("a", BROADCAST)]).validate()
    with pytest.raises(ScenarioInvalid):
        ScenarioConfig(10, nodes=[NodeSpec("a", 1)], attack=AttackSpec(AttackMode.REPLY_FLOOD, 5)).validate()
    with pytest.raises(ScenarioInvalid):
        ScenarioConfig(10, profile={"theta": 0}).validate()
    with pytest.raises(ScenarioInvalid):
        scenario_from_json({"nodes": []})


def test_generated_frames_parse_and_ordered():
    sc = star_scenario(n_legit=4, flood_rate_hz=20.0, duration_s=3.0, seed=77)
    recs = generate(sc)
    sw = build_switch()
    ts = [r.timestamp_s for r in recs]
    assert ts == sorted(ts)
    for r in recs:
        v, out = process_packet(sw, r.raw_bytes, PacketMeta(0, r.timestamp_s, len(r.raw_bytes)))
        assert v.forwarded and out == r.raw_bytes
        assert round(r.timestamp_s * 1e6) / 1e6 == r.timestamp_s


def test_seq_per_node():
    sc = star_scenario(n_legit=2, flood_rate_hz=None, duration_s=3.0)
    prof = build_profile()
    seen: dict[str, list[int]] = {}
    for r in generate(sc):
        zep = parse(prof.graph, prof.schemas, r.raw_bytes).header("ZEP").values
        seen.setdefault(r.src_node_id, []).append(zep["seq"])
        assert zep["deviceId"] == next(n.addr for n in sc.nodes if n.id == r.src_node_id) & 0xFFFF
    for seqs in seen.values():
        assert seqs == list(range(len(seqs)))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, M64), st.integers(1, 6), st.floats(0.5, 5))
def test_determinism_and_benign_unicast_free(seed, n, rate):
    sc = star_scenario(n_legit=n, legit_rate_hz=rate, flood_rate_hz=None, duration_s=2.0, seed=seed)
    a, b = generate(sc), generate(sc)
    assert [(r.timestamp_s, r.raw_bytes) for r in a] == [(r.timestamp_s, r.raw_bytes) for r in b]
    prof = build_profile()
    for r in a:
        assert parse(prof.graph, prof.schemas, r.raw_bytes).header("SixLoWPAN").values["dst"] == BROADCAST


def test_scenario_json_roundtrip(tmp_path):
    sc = star_scenario(n_legit=2, flood_rate_hz=50.0, duration_s=1.0, theta=7)
    p = tmp_path / "sc.json"
    p.write_text(json.dumps(sc.to_json()))
    back = load_scenario(str(p))
    assert back == sc
    assert back.profile_config().theta == 7
