"""Canonical wire encoding: varints, instance tags, message bodies.

The bit-exact envelope body layout is::

    varint(number of tag components)
    per component: protocol-kind byte || varint(child index)
    message-kind byte
    payload bytes

`count_bits` charges 8 bits per encoded body byte.
"""

from __future__ import annotations

# Protocol-kind bytes used in instance-tag components. These identify the
# *slot* a child instance occupies inside its parent, so routing stays stable
# even when a slot is filled by a pluggable factory.
KIND_GC1 = 1
KIND_PROP = 2
KIND_GC2K = 3
KIND_TC = 4
KIND_EXP = 5
KIND_TWO_STEP = 6
KIND_AGR_Z = 7
KIND_TERM = 8
KIND_PI = 9
KIND_TC_STAR = 10
KIND_GC2T = 11
KIND_AGR_N = 12
KIND_EPS = 13

# A tag is a tuple of (protocol-kind, child-index) components, root first.
Tag = tuple


def encode_varint(value: int) -> bytes:
    """Unsigned LEB128."""
    if value < 0:
        raise ValueError("varint is unsigned")
    out = bytearray()
    while True:
        byte = value & 0x7F
        value >>= 7
        if value:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return bytes(out)


def decode_varint(data: bytes, offset: int = 0) -> tuple[int, int]:
    """Returns (value, next offset)."""
    value = 0
    shift = 0
    while True:
        byte = data[offset]
        offset += 1
        value |= (byte & 0x7F) << shift
        if not byte & 0x80:
            return value, offset
        shift += 7


def encode_tag(tag: Tag) -> bytes:
    out = bytearray(encode_varint(len(tag)))
    for kind, index in tag:
        if not 0 <= kind < 256 or index < 0:
            raise ValueError(f"bad tag component {(kind, index)}")
        out.append(kind)
        out += encode_varint(index)
    return bytes(out)


def decode_tag(data: bytes, offset: int = 0) -> tuple[Tag, int]:
    count, offset = decode_varint(data, offset)
    parts = []
    for _ in range(count):
        kind = data[offset]
        offset += 1
        index, offset = decode_varint(data, offset)
        parts.append((kind, index))
    return tuple(parts), offset


def encode_body(tag: Tag, kind: int, payload: bytes) -> bytes:
    return encode_tag(tag) + bytes([kind]) + payload


def body_bits(tag: Tag, kind: int, payload: bytes) -> int:
    return 8 * len(encode_body(tag, kind, payload))


def value_width(bits: int) -> int:
    """Byte width of a fixed-length bit string."""
    return (bits + 7) // 8


def encode_value(value: int, bits: int) -> bytes:
    """Fixed-width big-endian encoding of an l-bit string held as an int."""
    if not 0 <= value < (1 << bits):
        raise ValueError(f"value {value} out of range for {bits} bits")
    return value.to_bytes(value_width(bits), "big")


def decode_value(payload: bytes, bits: int) -> int | None:
    """Returns the value, or None when the payload is malformed."""
    if len(payload) != value_width(bits):
        return None
    value = int.from_bytes(payload, "big")
    if value >= (1 << bits):
        return None
    return value


def bit_at(value: int, k: int, bits: int) -> int:
    """k-th bit of an l-bit string, 1-indexed from the most significant end."""
    return (value >> (bits - k)) & 1


def encode_graded(value: int | None, grade: int, bits: int) -> bytes:
    """Canonical encoding of a (value, grade) pair; (None, 0) is the bottom pair."""
    if value is None:
        if grade != 0:
            raise ValueError("bottom value must carry grade 0")
        return b"\x00"
    return b"\x01" + encode_varint(grade) + encode_value(value, bits)


def decode_graded(payload: bytes, bits: int) -> tuple[int | None, int] | None:
    """Inverse of encode_graded; None when malformed or non-canonical."""
    if not payload:
        return None
    if payload[0] == 0:
        return (None, 0) if len(payload) == 1 else None
    if payload[0] != 1:
        return None
    try:
        grade, offset = decode_varint(payload, 1)
    except IndexError:
        return None
    if grade < 1:
        return None
    value = decode_value(payload[offset:], bits)
    if value is None:
        return None
    # Re-encode check keeps the mapping bijective (tallies key on bytes).
    if encode_graded(value, grade, bits) != payload:
        return None
    return value, grade


def encode_int(value: int) -> bytes:
    """Canonical zigzag varint for signed integers of unbounded magnitude."""
    zig = value << 1 if value >= 0 else ((-value) << 1) - 1
    return encode_varint(zig)


def decode_int(payload: bytes) -> int | None:
    try:
        zig, offset = decode_varint(payload)
    except IndexError:
        return None
    if offset != len(payload):
        return None
    return zig >> 1 if zig % 2 == 0 else -((zig + 1) >> 1)
