"""Classic libpcap files (not pcapng).

Files we write are little-endian, microsecond resolution, linktype 147
(LINKTYPE_USER0) since frames start directly at the ZEP header. Reading
accepts either byte order and the nanosecond-resolution magic.
"""

from __future__ import annotations

import struct
from typing import Iterable

from .simnet import PacketRecord

MAGIC_USEC = 0xA1B2C3D4
MAGIC_NSEC = 0xA1B23C4D
VERSION = (2, 4)
SNAPLEN = 65535
LINKTYPE_USER0 = 147

GLOBAL_HEADER = struct.Struct("<IHHiIII")
RECORD_HEADER = struct.Struct("<IIII")
GLOBAL_HEADER_LEN = GLOBAL_HEADER.size  # 24
RECORD_HEADER_LEN = RECORD_HEADER.size  # 16


class PcapError(Exception):
    pass


class BadMagic(PcapError):
    pass


class Truncated(PcapError):
    def __init__(self, msg: str, records: list[PacketRecord]):
        super().__init__(msg)
        self.records = records

    @property
    def recovered(self) -> int:
        return len(self.records)


class IoFailure(PcapError):
    pass


def split_ts(ts: float) -> tuple[int, int]:
    us = round(ts * 1_000_000)
    sec, usec = divmod(us, 1_000_000)
    return sec, usec


def encode_pcap(records: Iterable[PacketRecord], linktype: int = LINKTYPE_USER0) -> bytes:
    parts = [GLOBAL_HEADER.pack(MAGIC_USEC, *VERSION, 0, 0, SNAPLEN, linktype)]
    prev = None
    for r in records:
        if r.timestamp_s < 0:
            raise ValueError("negative timestamp")
        if prev is not None and r.timestamp_s < prev:
            raise ValueError("records must be time-ordered")
        prev = r.timestamp_s
        n = len(r.raw_bytes)
        if n > SNAPLEN:
            raise ValueError(f"frame of {n} bytes exceeds snaplen")
        sec, usec = split_ts(r.timestamp_s)
        parts.append(RECORD_HEADER.pack(sec, usec, n, n))
        parts.append(r.raw_bytes)
    return b"".join(parts)


def write_pcap(path: str, records: Iterable[PacketRecord], linktype: int = LINKTYPE_USER0) -> None:
    data = encode_pcap(records, linktype)
    try:
        with open(path, "wb") as fh:
            fh.write(data)
    except OSError as exc:
        raise IoFailure(f"{path}: {exc}") from exc


def decode_pcap(data: bytes) -> tuple[int, list[PacketRecord]]:
    """Return (linktype, records)."""
    if len(data) < GLOBAL_HEADER_LEN:
        raise Truncated("short global header", [])
    (magic,) = struct.unpack_from("<I", data)
    for order in "<>":
        (m,) = struct.unpack_from(order + "I", data)
        if m in (MAGIC_USEC, MAGIC_NSEC):
            break
    else:
        raise BadMagic(f"unknown pcap magic {magic:#010x}")
    frac = 1_000_000 if m == MAGIC_USEC else 1_000_000_000
    ghdr = struct.Struct(order + "IHHiIII")
    rhdr = struct.Struct(order + "IIII")
    linktype = ghdr.unpack_from(data)[6]

    records: list[PacketRecord] = []
    off = GLOBAL_HEADER_LEN
    end = len(data)
    while off < end:
        if off + RECORD_HEADER_LEN > end:
            raise Truncated(f"record header cut at byte {off}", records)
        sec, sub, incl, _orig = rhdr.unpack_from(data, off)
        off += RECORD_HEADER_LEN
        if off + incl > end:
            raise Truncated(f"record body cut at byte {off}", records)
        # exact division keeps timestamps identical to the generator's
        ts = (sec * frac + sub) / frac
        records.append(PacketRecord(ts, data[off : off + incl]))
        off += incl
    return linktype, records


def read_pcap(path: str) -> list[PacketRecord]:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise IoFailure(f"{path}: {exc}") from exc
    return decode_pcap(data)[1]
