from __future__ import annotations

import struct

import pytest

from p4flood.profile import ProfileConfig, build_profile, build_switch

SRC = 0x00124B0000000001
DST = 0x00000000000000AA
BCAST = 0xFFFFFFFFFFFFFFFF


def hand_frame(
    src: int = SRC,
    dst: int = DST,
    seq: int = 7,
    payload: bytes | None = None,
    proto: int = 0x4558,
) -> bytes:
    """67-byte HELLO frame assembled field by field with struct, not via HeaderDef."""
    if payload is None:
        payload = struct.pack(">BQ", 0x01, src)
    zep = struct.pack(">HBBBHBBI", proto, 2, 1, 11, src & 0xFFFF, 0, 0xFF, seq)
    mac = (
        struct.pack(">HBH", 0x8841, seq & 0xFF, 0xABCD)
        + (dst & 0xFFFFFFFFFFFF).to_bytes(6, "big")
        + (src & 0xFFFFFFFFFFFF).to_bytes(6, "big")
        + struct.pack(">H", 0)
    )
    lowpan = struct.pack(">BBQQ", 0x41, 64, src, dst)
    udp = struct.pack(">HHHH", 0xF0B1, 0xF0B2, 8 + len(payload), 0)
    return zep + mac + lowpan + udp + payload


@pytest.fixture
def frame() -> bytes:
    return hand_frame()


@pytest.fixture
def profile():
    return build_profile(ProfileConfig())


@pytest.fixture
def switch():
    return build_switch(ProfileConfig())


# acceptance bookkeeping: one PASS/FAIL line per criterion in the terminal summary
ACCEPTANCE: list[tuple[str, bool, str]] = []


class criterion:
    def __init__(self, name: str):
        self.name = name
        self.detail = ""

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        ok = exc_type is None
        detail = self.detail if ok else f"{exc_type.__name__}: {exc}"
        ACCEPTANCE.append((self.name, ok, detail))
        return False


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE:
        line = f"{'PASS' if ok else 'FAIL'}  {name}"
        if detail:
            line += f"  ({detail})"
        terminalreporter.write_line(line)
