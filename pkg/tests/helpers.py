"""Shared fixture builders: hand-built image bytes and a fast AST generator."""

from __future__ import annotations

import random
import struct
import zlib

from idvault.query_language import (
    BooleanValue,
    EnumValue,
    FloatValue,
    IntValue,
    ListValue,
    NullValue,
    ObjectValue,
    Operation,
    OpType,
    QueryDocument,
    Selection,
    StringValue,
    VariableDef,
    VariableRef,
)


def make_png(width: int, height: int, rgb: tuple[int, int, int] = (180, 40, 40)) -> bytes:
    """A complete, valid RGB PNG assembled chunk by chunk."""

    def chunk(tag: bytes, payload: bytes) -> bytes:
        data = tag + payload
        return struct.pack(">I", len(payload)) + data + struct.pack(">I", zlib.crc32(data) & 0xFFFFFFFF)

    ihdr = struct.pack(">IIBBBBB", width, height, 8, 2, 0, 0, 0)
    raw = b"".join(b"\x00" + bytes(rgb) * width for _ in range(height))
    return (
        b"\x89PNG\r\n\x1a\n"
        + chunk(b"IHDR", ihdr)
        + chunk(b"IDAT", zlib.compress(raw))
        + chunk(b"IEND", b"")
    )


def make_jpeg_header(width: int, height: int) -> bytes:
    """SOI + APP0 + SOF0 + EOI: enough header for dimension parsing."""
    app0 = b"\xff\xe0" + struct.pack(">H", 16) + b"JFIF\x00\x01\x01\x00\x00\x01\x00\x01\x00\x00"
    sof0 = (
        b"\xff\xc0"
        + struct.pack(">H", 11)
        + b"\x08"
        + struct.pack(">HH", height, width)
        + b"\x01\x01\x11\x00"
    )
    return b"\xff\xd8" + app0 + sof0 + b"\xff\xd9"


# -- seeded random AST generation ----------------------------------------------

_NAME_ALPHABET = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_"
_NAME_CONT = _NAME_ALPHABET + "0123456789"
_RESERVED_WORDS = {"true", "false", "null"}


def _name(rng: random.Random) -> str:
    length = rng.randint(1, 10)
    text = rng.choice(_NAME_ALPHABET) + "".join(rng.choice(_NAME_CONT) for _ in range(length - 1))
    return text if text not in _RESERVED_WORDS else text + "_"


def _string(rng: random.Random) -> str:
    pool = 'abc XYZ 123 "quote" \\slash\\ \n\t\r unicode: é世界 \x01'
    length = rng.randint(0, 12)
    return "".join(rng.choice(pool) for _ in range(length))


def _value(rng: random.Random, declared: list[str], depth: int):
    choices = ["int", "float", "string", "bool", "null", "enum"]
    if declared:
        choices.append("var")
    if depth > 0:
        choices += ["list", "object"]
    kind = rng.choice(choices)
    if kind == "int":
        return IntValue(rng.randint(-(2**63), 2**63 - 1))
    if kind == "float":
        mantissa = rng.uniform(-1e6, 1e6)
        return FloatValue(mantissa * (10 ** rng.randint(-20, 20)))
    if kind == "string":
        return StringValue(_string(rng))
    if kind == "bool":
        return BooleanValue(rng.random() < 0.5)
    if kind == "null":
        return NullValue()
    if kind == "enum":
        return EnumValue(_name(rng))
    if kind == "var":
        return VariableRef(rng.choice(declared))
    if kind == "list":
        return ListValue(tuple(_value(rng, declared, depth - 1) for _ in range(rng.randint(0, 3))))
    names = []
    seen: set[str] = set()
    for _ in range(rng.randint(0, 3)):
        n = _name(rng)
        if n not in seen:
            seen.add(n)
            names.append(n)
    return ObjectValue(tuple((n, _value(rng, declared, depth - 1)) for n in names))


def _selection(rng: random.Random, declared: list[str], depth: int) -> Selection:
    args = []
    seen: set[str] = set()
    for _ in range(rng.randint(0, 2)):
        n = _name(rng)
        if n not in seen:
            seen.add(n)
            args.append((n, _value(rng, declared, 2)))
    selection_set = None
    if depth > 0 and rng.random() < 0.5:
        selection_set = _selection_set(rng, declared, depth - 1)
    return Selection(
        field_name=_name(rng),
        alias=_name(rng) if rng.random() < 0.25 else None,
        arguments=tuple(args),
        selection_set=selection_set,
    )


def _selection_set(rng: random.Random, declared: list[str], depth: int) -> tuple[Selection, ...]:
    return tuple(_selection(rng, declared, depth) for _ in range(rng.randint(1, 3)))


def random_document(rng: random.Random) -> QueryDocument:
    operations = []
    for _ in range(rng.randint(1, 2)):
        op_type = rng.choice([OpType.QUERY, OpType.MUTATION])
        name = _name(rng) if rng.random() < 0.6 else None
        variable_defs: tuple[VariableDef, ...] = ()
        if name is not None and rng.random() < 0.5:
            var_names = []
            seen: set[str] = set()
            for _ in range(rng.randint(1, 3)):
                n = _name(rng)
                if n not in seen:
                    seen.add(n)
                    var_names.append(n)
            variable_defs = tuple(
                VariableDef(n, _name(rng), rng.random() < 0.5) for n in var_names
            )
        declared = [v.name for v in variable_defs]
        operations.append(
            Operation(op_type, name, variable_defs, _selection_set(rng, declared, 3))
        )
    return QueryDocument(tuple(operations))
