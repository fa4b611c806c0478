"""Declarative packet headers: ordered big-endian bit-fields and their instances."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence, Union

MAX_FIELD_BITS = 128


class SchemaError(ValueError):
    pass


class DuplicateField(SchemaError):
    pass


class WidthOutOfRange(SchemaError):
    pass


class NotByteAligned(SchemaError):
    pass


class NoSuchField(SchemaError, KeyError):
    def __str__(self) -> str:
        return ValueError.__str__(self)


class InvalidHeader(SchemaError):
    pass


class ValueOverflow(SchemaError):
    pass


@dataclass(frozen=True)
class FieldDef:
    name: str
    width_bits: int

    @property
    def max_value(self) -> int:
        return (1 << self.width_bits) - 1


@dataclass(frozen=True)
class HeaderDef:
    """An immutable header layout. Field order is wire order, MSB first."""

    name: str
    fields: tuple[FieldDef, ...]
    # (name, shift, mask) per field, shift counted from the LSB of the whole header
    _layout: tuple[tuple[str, int, int], ...] = field(
        init=False, repr=False, compare=False
    )
    _index: Mapping[str, FieldDef] = field(init=False, repr=False, compare=False)
    total_width_bits: int = field(init=False, repr=False, compare=False)
    byte_width: int = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not self.name or not self.name.isidentifier():
            raise SchemaError(f"bad header name {self.name!r}")
        if not self.fields:
            raise SchemaError(f"header {self.name} has no fields")
        seen: dict[str, FieldDef] = {}
        for f in self.fields:
            if f.name in seen:
                raise DuplicateField(f"{self.name}.{f.name} defined twice")
            if not isinstance(f.width_bits, int) or not 1 <= f.width_bits <= MAX_FIELD_BITS:
                raise WidthOutOfRange(
                    f"{self.name}.{f.name}: width {f.width_bits} not in 1..{MAX_FIELD_BITS}"
                )
            seen[f.name] = f
        total = sum(f.width_bits for f in self.fields)
        if total % 8:
            raise NotByteAligned(f"header {self.name} is {total} bits wide")
        layout = []
        shift = total
        for f in self.fields:
            shift -= f.width_bits
            layout.append((f.name, shift, f.max_value))
        object.__setattr__(self, "_layout", tuple(layout))
        object.__setattr__(self, "_index", seen)
        object.__setattr__(self, "total_width_bits", total)
        object.__setattr__(self, "byte_width", total // 8)

    @property
    def field_names(self) -> list[str]:
        return [f.name for f in self.fields]

    def field(self, name: str) -> FieldDef:
        try:
            return self._index[name]
        except KeyError:
            raise NoSuchField(f"{self.name} has no field {name!r}") from None

    def has_field(self, name: str) -> bool:
        return name in self._index

    def field_offset_bits(self, name: str) -> int:
        """Bit offset of ``name`` from the first bit of the header."""
        self.field(name)
        off = 0
        for f in self.fields:
            if f.name == name:
                return off
            off += f.width_bits
        raise AssertionError("unreachable")

    def unpack(self, data: bytes) -> dict[str, int]:
        v = int.from_bytes(data, "big")
        return {name: (v >> sh) & m for name, sh, m in self._layout}

    def pack(self, values: Mapping[str, int]) -> bytes:
        v = 0
        for name, sh, _ in self._layout:
            v |= values[name] << sh
        return v.to_bytes(self.byte_width, "big")

    def instance(self, **values: int) -> HeaderInstance:
        """Build a valid instance; unspecified fields default to zero."""
        for name in values:
            self.field(name)
        full = {f.name: 0 for f in self.fields}
        full.update(values)
        inst = HeaderInstance(self, full, True)
        inst.check()
        return inst

    def to_json(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "fields": [{"name": f.name, "bits": f.width_bits} for f in self.fields],
        }


FieldSpec = Union[FieldDef, tuple[str, int]]


def define_header(name: str, fields: Iterable[FieldSpec]) -> HeaderDef:
    defs = tuple(f if isinstance(f, FieldDef) else FieldDef(f[0], f[1]) for f in fields)
    return HeaderDef(name, defs)


def total_width_bits(hdef: HeaderDef) -> int:
    return hdef.total_width_bits


@dataclass(slots=True)
class HeaderInstance:
    definition: HeaderDef
    values: dict[str, int]
    valid: bool = True

    @property
    def name(self) -> str:
        return self.definition.name

    def check(self) -> None:
        d = self.definition
        for f in d.fields:
            if f.name not in self.values:
                raise InvalidHeader(f"{d.name}.{f.name} has no value")
            v = self.values[f.name]
            if not 0 <= v <= f.max_value:
                raise ValueOverflow(f"{d.name}.{f.name}={v} exceeds {f.width_bits} bits")

    def to_bytes(self) -> bytes:
        if not self.valid:
            raise InvalidHeader(f"{self.name} instance is not valid")
        return self.definition.pack(self.values)


def get_field(inst: HeaderInstance, field_name: str) -> int:
    inst.definition.field(field_name)
    if not inst.valid:
        raise InvalidHeader(f"{inst.name} instance is not valid")
    return inst.values[field_name]


def set_field(inst: HeaderInstance, field_name: str, value: int) -> HeaderInstance:
    """Return a copy of ``inst`` with one field replaced."""
    f = inst.definition.field(field_name)
    if not 0 <= value <= f.max_value:
        raise ValueOverflow(f"{inst.name}.{field_name}={value:#x} exceeds {f.width_bits} bits")
    values = dict(inst.values)
    values[field_name] = value
    return HeaderInstance(inst.definition, values, inst.valid)


@dataclass(slots=True)
class PacketMeta:
    ingress_port: int = 0
    timestamp_s: float = 0.0
    raw_len: int = 0


@dataclass(slots=True)
class ParsedPacket:
    headers: list[HeaderInstance]
    payload: bytes = b""
    meta: PacketMeta = field(default_factory=PacketMeta)

    def header(self, name: str) -> HeaderInstance | None:
        for h in self.headers:
            if h.definition.name == name:
                return h
        return None

    def replace_header(self, inst: HeaderInstance) -> None:
        for i, h in enumerate(self.headers):
            if h.definition.name == inst.definition.name:
                self.headers[i] = inst
                return
        raise NoSuchField(f"packet has no {inst.definition.name} header")

    def wire_length(self) -> int:
        return sum(h.definition.byte_width for h in self.headers) + len(self.payload)


def header_from_json(doc: Mapping[str, Any]) -> HeaderDef:
    try:
        return define_header(
            doc["name"], [(f["name"], int(f["bits"])) for f in doc["fields"]]
        )
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"malformed header document: {exc}") from exc


def load_schema_set(source: str | Sequence[Mapping[str, Any]] | Mapping[str, Any]) -> dict[str, HeaderDef]:
    """Load header definitions from a JSON file path or already-decoded JSON.

    Accepts a single header object, a list of them, or ``{"headers": [...]}``.
    """
    doc: Any = source
    if isinstance(source, str):
        with open(source) as fh:
            doc = json.load(fh)
    if isinstance(doc, Mapping) and "headers" in doc:
        doc = doc["headers"]
    if isinstance(doc, Mapping):
        doc = [doc]
    out: dict[str, HeaderDef] = {}
    for d in doc:
        h = header_from_json(d)
        if h.name in out:
            raise SchemaError(f"header {h.name} defined twice")
        out[h.name] = h
    return out
