from pathlib import Path

from services.dot_emitter import emit_dot
from services.execution_enumerator import enumerate_executions
from services.program_parser import parse

FIXTURE_ROOT = Path(__file__).resolve().parents[1] / "fixtures"


def test_mixed_read_graph():
    program = parse((FIXTURE_ROOT / "mixed_read" / "program.sab").read_text(encoding="utf-8"))
    execution = next(x for x in enumerate_executions(program) if dict(x.output)["ev3"] == 769)
    dot = emit_dot(program, execution)
    assert dot.startswith("digraph execution {")
    assert dot.endswith("}")
    assert '"ev2" -> "ev3" [color=red fontcolor=red label="byte 0"];' in dot
    assert '"ev6" -> "ev3" [color=red fontcolor=red label="byte 1"];' in dot
    assert "color=blue" not in dot
    assert 'label="MO: (vide)"' in dot
    assert '"ev5"' not in dot
    assert emit_dot(program, execution) == dot


def test_synchronization_and_reduced_happens_before():
    program = parse("var x = new SharedArrayBuffer(1);\nThread t1 { atomic x-I8[0] = 1; }\nThread t2 { atomic print(x-I8[0]); }\n")
    execution = next(x for x in enumerate_executions(program) if dict(x.output)["ev3"] == 1)
    dot = emit_dot(program, execution)
    assert '"ev2" -> "ev3" [color=blue];' in dot
    assert 'label="MO: ev2 < ev3"' in dot
    assert '"ev1" -> "ev2" [color=black];' in dot
    assert '"ev2" -> "ev3" [color=black];' in dot
    assert '"ev1" -> "ev3" [color=black];' not in dot
