import math
from pathlib import Path

import pytest

from services.program_model import ViewKind
from services.program_parser import parse
from services.values import (
    ValueDependencyCycleError,
    apply_modify,
    compose_write_event_bytes,
    decode_value,
    encode_value,
    format_value,
    reconstruct_values,
)

FIXTURE_ROOT = Path(__file__).resolve().parents[1] / "fixtures"


def test_decode_respects_signedness():
    assert decode_value(bytes([0xFF]), ViewKind.parse("I8")) == -1
    assert decode_value(bytes([0xFF]), ViewKind.parse("U8")) == 255
    assert decode_value(bytes([1, 3]), ViewKind.parse("I16")) == 769
    assert decode_value(bytes([0, 0, 0xC0, 0x3F]), ViewKind.parse("F32")) == 1.5


def test_encode_wraps_integers_and_is_little_endian():
    assert encode_value(300, ViewKind.parse("I8")) == bytes([44])
    assert encode_value(-1, ViewKind.parse("I16")) == b"\xff\xff"
    assert encode_value(769, ViewKind.parse("U32")) == bytes([1, 3, 0, 0])
    assert decode_value(encode_value(1e300, ViewKind.parse("F32")), ViewKind.parse("F32")) == math.inf


def test_decode_rejects_wrong_length():
    with pytest.raises(ValueError):
        decode_value(bytes([1]), ViewKind.parse("I16"))


def test_apply_modify():
    assert apply_modify("+", 4, 1) == 5
    assert apply_modify("^", 0b1100, 0b1010) == 0b0110
    assert apply_modify("-", 0, 1) == -1


def test_compose_takes_bytes_at_writer_offsets():
    program = parse((FIXTURE_ROOT / "mixed_read" / "program.sab").read_text(encoding="utf-8"))
    rbf = frozenset({("ev3", "ev2", 0), ("ev3", "ev6", 1)})
    data = compose_write_event_bytes(program.event("ev3"), rbf, {"ev2": bytes([1]), "ev6": bytes([3])}, program)
    assert data == bytes([1, 3])


def test_reconstruct_mixed_read():
    program = parse((FIXTURE_ROOT / "mixed_read" / "program.sab").read_text(encoding="utf-8"))
    rbf = frozenset({("ev3", "ev2", 0), ("ev3", "ev6", 1), ("ev4", "ev1", 0)})
    assert reconstruct_values(program, {"cond1": False}, rbf) == {"ev3": 769, "ev4": 0}


def test_reconstruct_follows_rmw_chain():
    program = parse("var x = new SharedArrayBuffer(1);\nThread t1 { x-I8[0] = 4; x-I8[0] += 1; print(x-I8[0]); }\n")
    rbf = frozenset({("ev3", "ev2", 0), ("ev4", "ev3", 0)})
    assert reconstruct_values(program, {}, rbf) == {"ev3": 4, "ev4": 5}


def test_reconstruct_rejects_value_cycle():
    program = parse("var x = new SharedArrayBuffer(1);\nThread t1 { x-I8[0] += 1; }\nThread t2 { x-I8[0] += 1; }\n")
    rbf = frozenset({("ev2", "ev3", 0), ("ev3", "ev2", 0)})
    with pytest.raises(ValueDependencyCycleError) as excinfo:
        reconstruct_values(program, {}, rbf)
    assert excinfo.value.events == ["ev2", "ev3"]


def test_format_value_like_javascript():
    assert format_value(1.0) == "1"
    assert format_value(-0.0) == "0"
    assert format_value(0.5) == "0.5"
    assert format_value(float("nan")) == "NaN"
    assert format_value(float("-inf")) == "-Infinity"
    assert format_value(1e21) == "1e+21"
    assert format_value(1e-7) == "1e-7"
    assert format_value(-3) == "-3"
    assert format_value(1e-5) == "0.00001"
    assert format_value(1e-6) == "0.000001"
    assert format_value(-1.5e-7) == "-1.5e-7"
    assert format_value(2.0**60) == "1152921504606847000"
    assert format_value(1.2345678901234568e20) == "123456789012345680000"
    assert format_value(123.456) == "123.456"
    assert format_value(100.0) == "100"


INTEGER_VIEWS = ["I8", "U8", "I16", "U16", "I32", "U32", "I64", "U64"]


def _integer_boundaries(label: str) -> list:
    view = ViewKind.parse(label)
    if view.is_signed:
        low, high = -(1 << (view.width_bits - 1)), (1 << (view.width_bits - 1)) - 1
        return [low, high, 0, -1]
    return [0, (1 << view.width_bits) - 1, 1]


@pytest.mark.parametrize("label", INTEGER_VIEWS)
def test_integer_constants_survive_encoding(label):
    view = ViewKind.parse(label)
    for value in _integer_boundaries(label):
        assert decode_value(encode_value(value, view), view) == value


@pytest.mark.parametrize(
    "label, values",
    [
        ("F32", [1.5, -2.25, 3.4028234663852886e38, 1.401298464324817e-45, 0.1015625]),
        ("F64", [0.1, -1e300, 5e-324, 1.7976931348623157e308, 2.0**60]),
    ],
)
def test_float_constants_survive_encoding(label, values):
    view = ViewKind.parse(label)
    for value in values + [0.0, -0.0, math.inf, -math.inf, math.nan]:
        data = encode_value(value, view)
        decoded = decode_value(data, view)
        assert encode_value(decoded, view) == data
        if not math.isnan(value):
            assert decoded == value
            assert math.copysign(1.0, decoded) == math.copysign(1.0, value)
