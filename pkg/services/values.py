import math
import operator
import struct
from typing import Dict, Mapping

from services.program_model import (
    ControlValuation,
    EventKind,
    MemoryEvent,
    Number,
    Program,
    Relation3,
    ViewKind,
    active_events,
)

FLOAT_FORMATS = {32: "<f", 64: "<d"}
INT_OPS = {
    "+": operator.add,
    "-": operator.sub,
    "&": operator.and_,
    "|": operator.or_,
    "^": operator.xor,
}


class UncoveredByteError(ValueError):
    pass


class ValueDependencyCycleError(ValueError):
    def __init__(self, events):
        self.events = sorted(events)
        super().__init__(f"Cycle de dépendance de valeurs entre {', '.join(self.events)}")


def _to_integer(value: Number) -> int:
    if isinstance(value, float):
        if not math.isfinite(value):
            return 0
        return math.trunc(value)
    return int(value)


def encode_value(value: Number, view: ViewKind) -> bytes:
    """Little-endian bytes of ``value`` as stored through ``view``; integers wrap modulo 2^width."""
    if view.is_float:
        fmt = FLOAT_FORMATS[view.width_bits]
        try:
            return struct.pack(fmt, float(value))
        except OverflowError:
            return struct.pack(fmt, math.copysign(math.inf, float(value)))
    wrapped = _to_integer(value) % (1 << view.width_bits)
    return wrapped.to_bytes(view.element_size, "little")


def decode_value(data: bytes, view: ViewKind) -> Number:
    if len(data) != view.element_size:
        raise ValueError(f"{len(data)} octets pour une vue {view.label}")
    if view.is_float:
        return struct.unpack(FLOAT_FORMATS[view.width_bits], bytes(data))[0]
    return int.from_bytes(data, "little", signed=view.is_signed)


def apply_modify(op: str, old: Number, operand: Number) -> int:
    return INT_OPS[op](_to_integer(old), _to_integer(operand))


def compose_write_event_bytes(
    read: MemoryEvent,
    rbf: Relation3,
    write_bytes: Mapping[str, bytes],
    program: Program,
) -> bytes:
    """Assemble the bytes seen by ``read``: byte i comes from the writer chosen for i,
    at offset ``i - byte_index(writer)`` in that writer's bytes."""
    sources = {index: writer for r, writer, index in rbf if r == read.id}
    out = bytearray()
    for index in read.range.addresses:
        writer = sources.get(index)
        if writer is None:
            raise UncoveredByteError(f"Octet {index} de {read.id} sans écriture source")
        origin = program.event(writer).range.byte_index
        out.append(write_bytes[writer][index - origin])
    return bytes(out)


def reconstruct_values(program: Program, cv: ControlValuation, rbf: Relation3) -> Dict[str, Number]:
    active = active_events(program, cv)
    write_bytes: Dict[str, bytes] = {}
    for event in program.events:
        if event.id not in active:
            continue
        if event.is_init:
            write_bytes[event.id] = bytes(event.range.element_size)
        elif event.kind is EventKind.WRITE:
            write_bytes[event.id] = encode_value(event.payload, event.view)

    sources: Dict[str, set] = {}
    for read, writer, _ in rbf:
        sources.setdefault(read, set()).add(writer)

    pending = [e for e in program.events if e.id in active and e.is_read]
    values: Dict[str, Number] = {}
    while pending:
        remaining = []
        for read in pending:
            if not sources.get(read.id, set()) <= write_bytes.keys():
                remaining.append(read)
                continue
            value = decode_value(compose_write_event_bytes(read, rbf, write_bytes, program), read.view)
            values[read.id] = value
            if read.kind is EventKind.RMW:
                write_bytes[read.id] = encode_value(apply_modify(read.modify_op, value, read.payload), read.view)
        if len(remaining) == len(pending):
            raise ValueDependencyCycleError(e.id for e in remaining)
        pending = remaining
    return values


def format_value(value: Number) -> str:
    """String form of a value as a JavaScript engine would print it."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if math.isnan(value):
        return "NaN"
    if math.isinf(value):
        return "Infinity" if value > 0 else "-Infinity"
    if value == 0:
        return "0"
    sign = "-" if value < 0 else ""
    digits, point = _shortest_digits(abs(value))
    count = len(digits)
    if count <= point <= 21:
        return sign + digits + "0" * (point - count)
    if 0 < point <= 21:
        return f"{sign}{digits[:point]}.{digits[point:]}"
    if -6 < point <= 0:
        return f"{sign}0.{'0' * -point}{digits}"
    exponent = point - 1
    mantissa = digits if count == 1 else f"{digits[0]}.{digits[1:]}"
    return f"{sign}{mantissa}e{'+' if exponent > 0 else '-'}{abs(exponent)}"


def _shortest_digits(value: float) -> tuple:
    """Shortest round-trip decimal digits of a positive float and the position of the
    decimal point, so that value == 0.digits * 10**point."""
    mantissa, _, exponent = repr(value).partition("e")
    whole, _, fraction = mantissa.partition(".")
    digits = whole + fraction
    point = len(whole) + int(exponent or 0)
    stripped = digits.lstrip("0")
    point -= len(digits) - len(stripped)
    return stripped.rstrip("0"), point
