import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import yaml

from services.execution_enumerator import NO_OUTPUT, ValidExecution, output_key
from services.program_model import (
    Branch,
    EventKind,
    MemoryEvent,
    Order,
    Program,
    ViewKind,
    statement_tree,
)
from utils.paths import get_litmus_template_path

HEADER_RE = re.compile(r"/\*---\n(.*?)\n---\*/", re.DOTALL)
BLOCK_ALIGNMENT = 8
TYPED_ARRAYS = {
    "I8": "Int8Array",
    "U8": "Uint8Array",
    "I16": "Int16Array",
    "U16": "Uint16Array",
    "I32": "Int32Array",
    "U32": "Uint32Array",
    "I64": "BigInt64Array",
    "U64": "BigUint64Array",
    "F32": "Float32Array",
    "F64": "Float64Array",
}
ATOMIC_RMW = {"+": "add", "-": "sub", "&": "and", "|": "or", "^": "xor"}


class EmptyExecutionSetError(ValueError):
    pass


@dataclass(frozen=True)
class LitmusTest:
    name: str
    source: str
    expected_outputs: Tuple[str, ...]
    header: Dict = field(default_factory=dict)


def expected_outputs(p: Program, executions: Iterable[ValidExecution]) -> Tuple[str, ...]:
    return tuple(sorted({output_key(p, execution) for execution in executions}))


def block_offsets(p: Program) -> Tuple[Dict[str, int], int]:
    offsets = {}
    cursor = 0
    for block in p.blocks:
        offsets[block.name] = cursor
        cursor += math.ceil(block.size_bytes / BLOCK_ALIGNMENT) * BLOCK_ALIGNMENT
    return offsets, max(cursor, BLOCK_ALIGNMENT)


def _array_name(block: str, view: ViewKind) -> str:
    return f"{block}_{view.label}"


def _literal(value, view: ViewKind) -> str:
    if view.width_bits == 64 and not view.is_float:
        return f"{int(value)}n"
    if isinstance(value, float):
        if math.isnan(value):
            return "NaN"
        if math.isinf(value):
            return "Infinity" if value > 0 else "-Infinity"
        return repr(value)
    return str(value)


def _index(event: MemoryEvent) -> int:
    return event.range.byte_index // event.range.element_size


def _load_expr(event: MemoryEvent) -> str:
    array = _array_name(event.range.block.name, event.view)
    if event.order is Order.SEQ_CST and not event.view.is_float:
        return f"Atomics.load({array}, {_index(event)})"
    return f"{array}[{_index(event)}]"


def _rmw_expr(event: MemoryEvent) -> str:
    array = _array_name(event.range.block.name, event.view)
    operand = _literal(event.payload, event.view)
    if event.order is Order.SEQ_CST:
        return f"Atomics.{ATOMIC_RMW[event.modify_op]}({array}, {_index(event)}, {operand})"
    return (
        f"(function (a, k, v) {{ var old = a[k]; a[k] = old {event.modify_op} v; return old; }})"
        f"({array}, {_index(event)}, {operand})"
    )


def _statement_lines(nodes: list, indent: int, lines: List[str]) -> None:
    pad = "  " * indent
    for node in nodes:
        if isinstance(node, Branch):
            control = node.control_var
            op = "===" if control.op == "==" else "!=="
            constant = _literal(control.constant, node.condition.view)
            condition = node.condition
            local = f"v_{condition.id}"
            lines.append(f"{pad}var {local} = {_load_expr(condition)};")
            lines.append(f'{pad}report.push("{condition.thread}:{condition.id}=" + {local});')
            lines.append(f"{pad}if ({local} {op} {constant}) {{")
            _statement_lines(node.then_nodes, indent + 1, lines)
            lines.append(f"{pad}}} else {{")
            _statement_lines(node.else_nodes, indent + 1, lines)
            lines.append(f"{pad}}}")
            continue
        tag = f"{node.thread}:{node.id}="
        if node.kind is EventKind.READ:
            lines.append(f'{pad}report.push("{tag}" + {_load_expr(node)});')
        elif node.kind is EventKind.RMW:
            lines.append(f'{pad}report.push("{tag}" + {_rmw_expr(node)});')
        else:
            array = _array_name(node.range.block.name, node.view)
            value = _literal(node.payload, node.view)
            if node.order is Order.SEQ_CST and not node.view.is_float:
                lines.append(f"{pad}Atomics.store({array}, {_index(node)}, {value});")
            else:
                lines.append(f"{pad}{array}[{_index(node)}] = {value};")


def _agent_source(p: Program, thread, offsets: Dict[str, int]) -> str:
    views = sorted(
        {(e.range.block, e.view.label) for e in thread.events},
        key=lambda item: (item[0].name, item[1]),
    )
    lines = ["$262.agent.receiveBroadcast(function (sab) {"]
    for block, label in views:
        view = ViewKind.parse(label)
        length = block.size_bytes // view.element_size
        lines.append(
            f"  var {_array_name(block.name, view)} = new {TYPED_ARRAYS[label]}(sab, {offsets[block.name]}, {length});"
        )
    lines.append("  var report = [];")
    _statement_lines(statement_tree(p, thread.events), 1, lines)
    lines.append('  $262.agent.report(report.join(";"));')
    lines.append("  $262.agent.leaving();")
    lines.append("});")
    body = "\n".join(lines)
    return f"// Thread {thread.name}\n$262.agent.start(`\n{body}\n`);"


def build_header(name: str, outputs: Sequence[str]) -> Dict:
    return {
        "description": f"Litmus {name}: la sortie triée doit appartenir aux exécutions valides",
        "features": ["SharedArrayBuffer", "Atomics"],
        "expected_outputs": list(outputs),
    }


def generate_litmus(
    p: Program,
    executions: Sequence[ValidExecution],
    name: str = "litmus",
    template_path: Optional[Path] = None,
) -> LitmusTest:
    if not executions:
        raise EmptyExecutionSetError("Aucune exécution valide: impossible de générer un test litmus")
    outputs = expected_outputs(p, executions)
    offsets, sab_size = block_offsets(p)
    header = build_header(name, outputs)
    template = (template_path or get_litmus_template_path()).read_text(encoding="utf-8")
    agents = "\n\n".join(_agent_source(p, thread, offsets) for thread in p.threads)
    source = (
        template.replace("%%HEADER%%", yaml.safe_dump(header, sort_keys=False, allow_unicode=True).rstrip("\n"))
        .replace("%%NUM_AGENTS%%", str(len(p.threads)))
        .replace("%%EXPECTED_JSON%%", json.dumps(list(outputs)))
        .replace("%%NO_OUTPUT_JSON%%", json.dumps(NO_OUTPUT))
        .replace("%%SAB_SIZE%%", str(sab_size))
        .replace("%%AGENTS%%", agents)
    )
    return LitmusTest(name=name, source=source, expected_outputs=outputs, header=header)


def parse_header(source: str) -> Dict:
    match = HEADER_RE.search(source)
    if not match:
        raise ValueError("En-tête YAML '/*--- ... ---*/' introuvable")
    header = yaml.safe_load(match.group(1)) or {}
    header["expected_outputs"] = [str(item) if item is not None else "" for item in header.get("expected_outputs", [])]
    return header
