import itertools
import json
import shlex
import sys
from collections import Counter
from pathlib import Path

import pytest

from services.execution_enumerator import NO_OUTPUT, enumerate_executions
from services.litmus_generator import (
    EmptyExecutionSetError,
    block_offsets,
    generate_litmus,
    parse_header,
)
from services.litmus_runner import (
    EngineConfig,
    EngineLaunchError,
    EngineOutputError,
    EngineTimeoutError,
    LogFormatError,
    RunReport,
    Verdict,
    canonicalize_output,
    classify,
    ingest_observed,
    report_from_log,
    run_harness,
)
from services.program_generator import GenConfig, sample_corpus
from services.program_parser import parse

FIXTURE_ROOT = Path(__file__).resolve().parents[1] / "fixtures"
ENGINES = FIXTURE_ROOT / "engines"


def mixed_read_test():
    program = parse((FIXTURE_ROOT / "mixed_read" / "program.sab").read_text(encoding="utf-8"))
    return program, generate_litmus(program, enumerate_executions(program), name="mixed_read")


def engine_command(script: str, *extra: str) -> str:
    parts = [shlex.quote(sys.executable), shlex.quote(str(ENGINES / script)), "{file}", "{run}"]
    return " ".join(parts + [shlex.quote(e) for e in extra])


def test_header_carries_expected_outputs():
    _, test = mixed_read_test()
    header = parse_header(test.source)
    assert header["expected_outputs"] == list(test.expected_outputs)
    assert len(test.expected_outputs) == 4
    assert "%%" not in test.source


def test_generated_agents_use_typed_array_views():
    _, test = mixed_read_test()
    assert "new Int16Array(sab, 0, 4)" in test.source
    assert "new Int8Array(sab, 0, 8)" in test.source
    assert 'report.push("t1:ev3=" + x_I16[0]);' in test.source
    assert 'report.push("t2:ev4=" + v_ev4);' in test.source
    assert "if (v_ev4 === 1) {" in test.source
    assert "Atomics" not in test.source.split("---*/", 1)[1]


def test_seq_cst_accesses_use_atomics():
    program = parse(
        "var x = new SharedArrayBuffer(8);\n"
        "Thread t1 { atomic x-I32[4] = 1; atomic x-I64[0] += 2; }\n"
        "Thread t2 { atomic print(x-I32[4]); }\n"
    )
    source = generate_litmus(program, enumerate_executions(program)).source
    assert "Atomics.store(x_I32, 1, 1);" in source
    assert "Atomics.add(x_I64, 0, 2n)" in source
    assert "Atomics.load(x_I32, 1)" in source


def test_empty_execution_set_is_refused():
    program, _ = mixed_read_test()
    with pytest.raises(EmptyExecutionSetError):
        generate_litmus(program, [])


def test_blocks_are_laid_out_on_eight_byte_boundaries():
    program = parse("var x = new SharedArrayBuffer(3);\nvar y = new SharedArrayBuffer(8);\nThread t1 { print(y-I8[0]); }\n")
    assert block_offsets(program) == ({"x": 0, "y": 8}, 16)


def test_canonical_output_sorts_entries():
    assert canonicalize_output("t2:ev4=1;t1:ev3=1\n") == "t1:ev3=1;t2:ev4=1"


@pytest.mark.parametrize(
    "log_name, verdict",
    [("good.log", Verdict.EXACT), ("partial.log", Verdict.SUBSET), ("bad.log", Verdict.VIOLATION)],
)
def test_recorded_logs_are_classified(log_name, verdict):
    _, test = mixed_read_test()
    report = report_from_log((FIXTURE_ROOT / "mixed_read" / log_name).read_text(encoding="utf-8"), test)
    classification = classify(report, test.expected_outputs)
    assert classification.verdict is verdict
    if verdict is Verdict.VIOLATION:
        assert classification.violations == ("t1:ev3=3;t2:ev4=0",)
    if verdict is Verdict.SUBSET:
        assert len(classification.unobserved) == 2


def test_good_log_counts():
    counts = ingest_observed((FIXTURE_ROOT / "mixed_read" / "good.log").read_text(encoding="utf-8"))
    assert counts["t1:ev3=1;t2:ev4=1"] == 2
    assert sum(counts.values()) == 7


def test_unreadable_log_lines_are_reported():
    with pytest.raises(LogFormatError) as excinfo:
        ingest_observed("t1:ev3=1\n\nhello world\nt1:ev3=\n")
    assert excinfo.value.line_numbers == [3, 4]


def test_coverage_fraction():
    report = RunReport(counts=Counter({"a:b=1": 3}), expected=("a:b=1", "a:b=2"))
    assert report.runs == 3
    assert report.coverage_fraction == 0.5
    assert report.violations == ()


def test_harness_observes_every_expected_output():
    _, test = mixed_read_test()
    report = run_harness(EngineConfig(engine_command("cycle_expected.py"), timeout=30, jobs=4), test, 8)
    assert report.runs == 8
    assert set(report.counts) == set(test.expected_outputs)
    assert classify(report, test.expected_outputs).verdict is Verdict.EXACT


def test_harness_with_engine_restricted_to_a_subset():
    _, test = mixed_read_test()
    report = run_harness(EngineConfig(engine_command("subset_engine.py", "0,2")), test, 4)
    classification = classify(report, test.expected_outputs)
    assert classification.verdict is Verdict.SUBSET
    assert set(classification.observed) == {test.expected_outputs[0], test.expected_outputs[2]}
    assert set(classification.observed) <= set(test.expected_outputs)
    report = run_harness(EngineConfig(engine_command("first_expected.py")), test, 2)
    assert report.observed == (test.expected_outputs[0],)


def test_harness_detects_forbidden_output():
    _, test = mixed_read_test()
    report = run_harness(EngineConfig(engine_command("out_of_set.py")), test, 2)
    classification = classify(report, test.expected_outputs)
    assert classification.verdict is Verdict.VIOLATION
    assert classification.violations == ("t9:ev99=42",)


def test_harness_engine_failures():
    _, test = mixed_read_test()
    with pytest.raises(EngineOutputError):
        run_harness(EngineConfig(engine_command("silent.py")), test, 1)
    with pytest.raises(EngineTimeoutError):
        run_harness(EngineConfig(engine_command("slow.py"), timeout=0.5), test, 1)
    with pytest.raises(EngineLaunchError):
        run_harness(EngineConfig("/nonexistent/engine {file}"), test, 1)


WRITE_ONLY = "var x = new SharedArrayBuffer(1);\nThread t1 { x-I8[0] = 1; }\nThread t2 { x-I8[0] = 2; }\n"


def test_program_without_reads_has_a_printable_output():
    program = parse(WRITE_ONLY)
    test = generate_litmus(program, enumerate_executions(program), name="write_only")
    assert test.expected_outputs == (NO_OUTPUT,)
    assert parse_header(test.source)["expected_outputs"] == [NO_OUTPUT]
    assert f"var NO_OUTPUT = {json.dumps(NO_OUTPUT)};" in test.source
    report = report_from_log(f"{NO_OUTPUT}\n\n{NO_OUTPUT}\n", test)
    assert report.runs == 2
    assert classify(report, test.expected_outputs).verdict is Verdict.EXACT
    report = run_harness(EngineConfig(engine_command("cycle_expected.py")), test, 3)
    assert report.counts == Counter({NO_OUTPUT: 3})
    assert classify(report, test.expected_outputs).verdict is Verdict.EXACT


def test_classification_follows_set_relations_on_generated_programs():
    for program in sample_corpus(GenConfig(event_count=4), 10, seed=2):
        test = generate_litmus(program, enumerate_executions(program))
        assert parse_header(test.source)["expected_outputs"] == list(test.expected_outputs)
        expected = list(test.expected_outputs)
        for size in range(1, len(expected) + 1):
            for observed in itertools.combinations(expected, size):
                report = RunReport(counts=Counter(observed), expected=test.expected_outputs)
                verdict = classify(report, expected).verdict
                assert verdict is (Verdict.EXACT if size == len(expected) else Verdict.SUBSET)
                report.counts["t9:ev99=42"] += 1
                assert classify(report, expected).verdict is Verdict.VIOLATION
