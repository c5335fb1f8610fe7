"""Graphviz rendering of valid executions.

Save the output as ``exec.dot`` and run ``dot -Tpng exec.dot > exec.png``.
"""

from typing import List

import networkx as nx

from services.execution_enumerator import ValidExecution
from services.program_model import Program, active_events, event_sort_key
from services.values import format_value


def _node(event_id: str) -> str:
    return f'"{event_id}"'


def _label(program: Program, execution: ValidExecution, event_id: str) -> str:
    event = program.event(event_id)
    if event.is_init:
        return f"{event_id} init {event.range.block.name} = 0"
    text = f"{event_id} {event.thread} {event.kind.value}{event.order.value}{' tear' if event.tear else ''}\\n{event.access_text}"
    value = execution.witness.values.get(event_id)
    if value is not None:
        text += f" = {format_value(value)}"
    elif event.payload is not None:
        text += f" := {format_value(event.payload)}"
    return text


def _sorted_pairs(pairs) -> list:
    return sorted(pairs, key=lambda pair: (event_sort_key(pair[0]), event_sort_key(pair[1])))


def emit_dot(program: Program, execution: ValidExecution) -> str:
    """Render one execution: HB as its transitive reduction in black, RBF in red with byte
    labels (write to read), SW in blue, and MO as the graph label in the top right corner.
    RF and AO are not drawn."""
    witness = execution.witness
    active = sorted(active_events(program, execution.cv_map), key=event_sort_key)
    lines: List[str] = ["digraph execution {"]
    append = lines.append

    mo = " < ".join(witness.mo) if witness.mo else "(vide)"
    append(f'graph [labelloc=t labeljust=r label="MO: {mo}"];')
    append("node [fontname=Arial shape=box];")
    for event_id in active:
        append(f'{_node(event_id)} [label="{_label(program, execution, event_id)}"];')

    hb_graph = nx.DiGraph()
    hb_graph.add_nodes_from(active)
    hb_graph.add_edges_from(witness.hb)
    reduced = nx.transitive_reduction(hb_graph)
    for source, target in _sorted_pairs(reduced.edges()):
        append(f"{_node(source)} -> {_node(target)} [color=black];")

    for read, write, index in sorted(
        witness.rbf, key=lambda t: (event_sort_key(t[1]), event_sort_key(t[0]), t[2])
    ):
        append(f'{_node(write)} -> {_node(read)} [color=red fontcolor=red label="byte {index}"];')

    for source, target in _sorted_pairs(witness.sw):
        append(f"{_node(source)} -> {_node(target)} [color=blue];")

    append("}")
    return "\n".join(lines)
