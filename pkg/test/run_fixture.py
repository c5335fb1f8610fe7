import argparse
import json
import sys
from pathlib import Path

from services.execution_enumerator import enumerate_executions, output_key
from services.program_parser import parse


def load_expected(fixture_dir: Path) -> dict:
    expected_path = fixture_dir / "expected.json"
    if not expected_path.exists():
        raise FileNotFoundError(f"expected.json introuvable: {expected_path}")
    with expected_path.open("r", encoding="utf-8") as handle:
        return json.load(handle)


def resolve_program_path(fixture_dir: Path, expected: dict) -> Path:
    source = expected.get("source_program")
    if source:
        candidate = fixture_dir / source
        if candidate.exists():
            return candidate
    programs = sorted(fixture_dir.glob("*.sab"))
    if len(programs) == 1:
        return programs[0]
    raise FileNotFoundError(
        "Programme .sab introuvable dans la fixture. "
        "Ajoutez un fichier .sab ou 'source_program' dans expected.json."
    )


def assert_expected(program, executions, expected: dict) -> list[str]:
    failures = []
    if "event_count" in expected and len(program.events) != expected["event_count"]:
        failures.append(f"MISMATCH event_count: expected={expected['event_count']} actual={len(program.events)}")
    if "execution_count" in expected and len(executions) != expected["execution_count"]:
        failures.append(f"MISMATCH execution_count: expected={expected['execution_count']} actual={len(executions)}")
    outputs = sorted({output_key(program, x) for x in executions})
    if "expected_outputs" in expected and outputs != expected["expected_outputs"]:
        failures.append(f"MISMATCH expected_outputs: expected={expected['expected_outputs']} actual={outputs}")
    by_key = {(x.cv, x.sorted_rbf): x for x in executions}
    for required in expected.get("required_values", []):
        key = (tuple(sorted(required["cv"].items())), tuple(tuple(t) for t in required["rbf"]))
        execution = by_key.get(key)
        if execution is None:
            failures.append(f"MISSING execution cv={required['cv']} rbf={required['rbf']}")
        elif execution.witness.values != required["values"]:
            failures.append(f"MISMATCH values: expected={required['values']} actual={execution.witness.values}")
    return failures


def main() -> int:
    parser = argparse.ArgumentParser(description="Vérifie une fixture de programme contre son expected.json")
    parser.add_argument("fixture", type=Path, help="Dossier de la fixture")
    args = parser.parse_args()

    fixture_dir = args.fixture.resolve()
    if not fixture_dir.exists():
        raise FileNotFoundError(f"Fixture introuvable: {fixture_dir}")

    expected = load_expected(fixture_dir)
    program_path = resolve_program_path(fixture_dir, expected)
    program = parse(program_path.read_text(encoding="utf-8"))
    executions = enumerate_executions(program, logger=print)

    failures = assert_expected(program, executions, expected)
    if failures:
        for failure in failures:
            print(failure)
        return 1

    print("Fixture OK")
    return 0


if __name__ == "__main__":
    sys.exit(main())
