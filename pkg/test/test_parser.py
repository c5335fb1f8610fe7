from pathlib import Path

import pytest

from services.program_model import EventKind, Order
from services.program_parser import (
    DEFAULT_BLOCK_SIZE,
    InvalidProgramError,
    ParameterError,
    ProgramParser,
    ProgramSyntaxError,
    SourceProgram,
    emit_source,
    expand_params,
    parse,
    tokenize,
)

FIXTURE_ROOT = Path(__file__).resolve().parents[1] / "fixtures"


def load_source(name: str) -> str:
    return (FIXTURE_ROOT / name / "program.sab").read_text(encoding="utf-8")


def test_reference_program_has_six_events():
    program = parse(load_source("mixed_read"))
    assert len(program.events) == 6
    assert program.blocks[0].size_bytes == DEFAULT_BLOCK_SIZE
    assert [t.name for t in program.threads] == ["t1", "t2"]
    read = program.event("ev3")
    assert read.kind is EventKind.READ and read.view.label == "I16"
    control = program.control_vars[0]
    assert (control.id, control.read_event, control.op, control.constant) == ("cond1", "ev4", "==", 1)
    assert program.event("ev5").activation.literals == (("cond1", True),)
    assert program.event("ev6").activation.literals == (("cond1", False),)


def test_prefixes_and_read_modify_write():
    program = parse(
        "var x = new SharedArrayBuffer(4);\n"
        "Thread t1 {\n"
        "  atomic x-I8[0] = 1;\n"
        "  tear print(x-I16[2]);\n"
        "  atomic x-U8[1] += 2;\n"
        "  x-I8[3] = -1;\n"
        "}\n"
    )
    write, read, rmw, negative = program.threads[0].events
    assert write.order is Order.SEQ_CST and write.payload == 1
    assert read.tear and read.order is Order.UNORDERED
    assert rmw.kind is EventKind.RMW and rmw.modify_op == "+" and rmw.payload == 2
    assert negative.payload == -1


def test_bounded_loop_is_unrolled():
    program = parse(
        "var x = new SharedArrayBuffer(4);\n"
        "Thread t1 {\n"
        "  for (i in 0..3) {\n"
        "    x-I8[i] = i;\n"
        "  }\n"
        "  print(x-I8[0]);\n"
        "}\n"
    )
    events = program.threads[0].events
    assert [e.range.byte_index for e in events] == [0, 1, 2, 0]
    assert [e.payload for e in events[:3]] == [0, 1, 2]


def test_empty_loop_emits_nothing():
    program = parse("var x = new SharedArrayBuffer(1);\nThread t1 {\n  for (i in 2..2) { x-I8[0] = 1; }\n  print(x-I8[0]);\n}\n")
    assert len(program.threads[0].events) == 1


def test_parameters_are_substituted():
    text = "var x = new SharedArrayBuffer(2);\nThread t1 { x-I8[$k] = $v; }\n"
    expanded = expand_params(SourceProgram(text), {"k": 1, "v": 5})
    assert "$" not in expanded.text
    program = ProgramParser().parse(SourceProgram(text, {"k": 1, "v": 5}))
    event = program.threads[0].events[0]
    assert event.range.byte_index == 1 and event.payload == 5


def test_unbound_parameter_is_reported():
    with pytest.raises(ParameterError):
        parse("var x = new SharedArrayBuffer(2);\nThread t1 { x-I8[$k] = 1; }\n")


def test_unbounded_loops_are_rejected():
    with pytest.raises(ProgramSyntaxError):
        parse("var x = new SharedArrayBuffer(1);\nThread t1 { while (x-I8[0] == 0) { } }\n")
    with pytest.raises(ProgramSyntaxError):
        parse("var x = new SharedArrayBuffer(1);\nThread t1 { for (i in 0..) { x-I8[0] = 1; } }\n")


def test_syntax_error_carries_position():
    with pytest.raises(ProgramSyntaxError) as excinfo:
        parse("var x = new SharedArrayBuffer(1);\nThread t1 {\n  y-I8[0] = 1;\n}\n")
    assert excinfo.value.line == 3
    assert str(excinfo.value).startswith("3:")


def test_if_depth_limit():
    text = (
        "var x = new SharedArrayBuffer(1);\n"
        "Thread t1 {\n"
        "  if (x-I8[0] == 0) {\n"
        "    if (x-I8[0] == 0) { x-I8[0] = 1; }\n"
        "  }\n"
        "}\n"
    )
    assert len(parse(text).control_vars) == 2
    with pytest.raises(ProgramSyntaxError):
        ProgramParser(max_if_depth=1).parse(text)


def test_misaligned_access_is_invalid():
    with pytest.raises(InvalidProgramError) as excinfo:
        parse("var x = new SharedArrayBuffer(4);\nThread t1 { x-I16[1] = 1; }\n")
    assert "alignment" in excinfo.value.report.codes


def test_unexpected_character():
    with pytest.raises(ProgramSyntaxError):
        tokenize("var x = new SharedArrayBuffer(1); @")


def test_emitted_source_parses_back_to_the_same_program():
    for name in ("mixed_read", "store_buffering"):
        program = parse(load_source(name))
        assert parse(emit_source(program)) == program
    program = parse(
        "var x = new SharedArrayBuffer(8);\nvar y = new SharedArrayBuffer(4);\n"
        "Thread a { atomic tear y-U16[2] ^= 3; if (atomic x-F64[0] != 1.5) { x-I8[0] = 2; } else { } }\n"
    )
    assert parse(emit_source(program)) == program
