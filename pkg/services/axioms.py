from collections import defaultdict
from dataclasses import dataclass
from typing import Collection, Dict, Iterable, List, Mapping, Optional, Tuple

import networkx as nx

from services.program_model import (
    ControlValuation,
    Number,
    Program,
    Relation2,
    Relation3,
    active_events,
    event_sort_key,
)
from services.values import ValueDependencyCycleError, reconstruct_values

CONJUNCTS = ("RBF", "HB", "CR", "TFR", "SCA")
VALUE_CONJUNCT = "VAL"

ASSERTIONS = (
    "HB-irreflexive",
    "HB-transitive",
    "MO-total",
    "MO-contains-HB",
    "SW-in-HB",
    "RF-projection",
)


class HappensBeforeCycleError(ValueError):
    pass


@dataclass(frozen=True)
class CandidateExecution:
    program: Program
    cv: Mapping[str, bool]
    rbf: Relation3


@dataclass(frozen=True)
class ExecutionWitness:
    rbf: Relation3
    rf: Relation2
    sw: Relation2
    hb: Relation2
    mo: Tuple[str, ...]
    values: Mapping[str, Number]


def derive_rf(rbf: Iterable[Tuple[str, str, int]]) -> Relation2:
    return frozenset((read, write) for read, write, _ in rbf)


def _sources_by_read(rbf: Iterable[Tuple[str, str, int]]) -> Dict[str, set]:
    sources: Dict[str, set] = defaultdict(set)
    for read, write, _ in rbf:
        sources[read].add(write)
    return sources


def derive_sw(ce: CandidateExecution, rf: Relation2) -> Relation2:
    program = ce.program
    sources = _sources_by_read(ce.rbf)
    sw = set()
    for read_id, write_id in rf:
        if read_id == write_id:
            continue
        read = program.event(read_id)
        write = program.event(write_id)
        if not read.is_seq_cst:
            continue
        if write.is_seq_cst and write.range == read.range:
            sw.add((write_id, read_id))
        elif write.is_init and all(program.event(s).is_init for s in sources[read_id]):
            sw.add((write_id, read_id))
    return frozenset(sw)


def base_order_graph(p: Program, active: Collection[str]) -> nx.DiGraph:
    """AO plus init edges over the active events, before closure."""
    graph = nx.DiGraph()
    graph.add_nodes_from(sorted(active, key=event_sort_key))
    graph.add_edges_from((a, b) for a, b in p.agent_order if a in active and b in active)
    for init in p.init_events:
        for event in p.events:
            if event.id in active and not event.is_init and event.range.overlaps(init.range):
                graph.add_edge(init.id, event.id)
    return graph


def derive_hb(p: Program, cv: ControlValuation, sw: Relation2) -> Relation2:
    active = active_events(p, cv)
    graph = base_order_graph(p, active)
    graph.add_edges_from((a, b) for a, b in sw if a != b and a in active and b in active)
    if not nx.is_directed_acyclic_graph(graph):
        cycle = nx.find_cycle(graph)
        raise HappensBeforeCycleError(f"HB cyclique: {' -> '.join(a for a, _ in cycle)}")
    return frozenset(nx.transitive_closure_dag(graph).edges())


def mo_witness(p: Program, cv: ControlValuation, hb: Relation2, sw: Relation2) -> Optional[Tuple[str, ...]]:
    """Search one total order over active SeqCst events that contains HB on those events and
    keeps every SeqCst write/read synchronization free of an intervening overlapping SeqCst write."""
    active = active_events(p, cv)
    sc_events = sorted((e for e in active if p.event(e).is_seq_cst), key=event_sort_key)
    sc_set = set(sc_events)
    preds = {e: {a for a, b in hb if b == e and a in sc_set} for e in sc_events}

    guarded: Dict[str, List[Tuple[str, List[str]]]] = defaultdict(list)
    for write, read in sw:
        if write in sc_set and read in sc_set and write != read:
            read_range = p.event(read).range
            rivals = [
                v
                for v in sc_events
                if v not in (write, read) and p.event(v).is_write and p.event(v).range.overlaps(read_range)
            ]
            guarded[read].append((write, rivals))
            preds[read].add(write)

    order: List[str] = []
    position: Dict[str, int] = {}

    def _extend() -> bool:
        if len(order) == len(sc_events):
            return True
        for event in sc_events:
            if event in position or not preds[event] <= position.keys():
                continue
            blocked = any(
                any(position.get(v, -1) > position[write] for v in rivals)
                for write, rivals in guarded.get(event, ())
            )
            if blocked:
                continue
            position[event] = len(order)
            order.append(event)
            if _extend():
                return True
            order.pop()
            del position[event]
        return False

    return tuple(order) if _extend() else None


def rbf_well_formed(ce: CandidateExecution) -> bool:
    program = ce.program
    active = active_events(program, ce.cv)
    covered: Dict[str, List[int]] = defaultdict(list)
    for read_id, write_id, index in ce.rbf:
        if read_id == write_id or read_id not in active or write_id not in active:
            return False
        read = program.event(read_id)
        write = program.event(write_id)
        if not read.is_read or not write.is_write:
            return False
        block = read.range.block.name
        if not (read.range.contains(block, index) and write.range.contains(block, index)):
            return False
        covered[read_id].append(index)
    for event_id in active:
        event = program.event(event_id)
        if event.is_read and sorted(covered.get(event_id, [])) != list(event.range.addresses):
            return False
    return True


def coherent_reads(ce: CandidateExecution, hb: Relation2) -> bool:
    program = ce.program
    active = active_events(program, ce.cv)
    for read_id, write_id, index in ce.rbf:
        if (read_id, write_id) in hb:
            return False
        block = program.event(read_id).range.block.name
        for other in program.writers_of(block, index):
            if other.id in (write_id, read_id) or other.id not in active:
                continue
            if (write_id, other.id) in hb and (other.id, read_id) in hb:
                return False
    return True


def tear_free_reads(ce: CandidateExecution, rf: Relation2) -> bool:
    program = ce.program
    writers: Dict[str, set] = defaultdict(set)
    for read_id, write_id in rf:
        read = program.event(read_id)
        write = program.event(write_id)
        if not read.tear and not write.tear and write.range == read.range:
            writers[read_id].add(write_id)
    return all(len(sources) <= 1 for sources in writers.values())


def check_conjuncts(
    ce: CandidateExecution, falsified: Collection[str] = ()
) -> Tuple[Optional[ExecutionWitness], Optional[str]]:
    """Evaluate the validity formula conjunct by conjunct.

    Returns (witness, None) for a valid candidate, otherwise (None, name of the first failing
    conjunct). Names listed in ``falsified`` are forced to fail.
    """

    def _fails(name: str, holds: bool) -> bool:
        return not holds or name in falsified

    if _fails("RBF", rbf_well_formed(ce)):
        return None, "RBF"
    rf = derive_rf(ce.rbf)
    sw = derive_sw(ce, rf)
    try:
        hb = derive_hb(ce.program, ce.cv, sw)
    except HappensBeforeCycleError:
        return None, "HB"
    if _fails("HB", True):
        return None, "HB"
    if _fails("CR", coherent_reads(ce, hb)):
        return None, "CR"
    if _fails("TFR", tear_free_reads(ce, rf)):
        return None, "TFR"
    mo = mo_witness(ce.program, ce.cv, hb, sw)
    if _fails("SCA", mo is not None):
        return None, "SCA"
    try:
        values = reconstruct_values(ce.program, ce.cv, ce.rbf)
    except ValueDependencyCycleError:
        return None, VALUE_CONJUNCT
    return ExecutionWitness(rbf=frozenset(ce.rbf), rf=rf, sw=sw, hb=hb, mo=mo, values=values), None


def is_valid_execution(ce: CandidateExecution) -> Optional[ExecutionWitness]:
    witness, _ = check_conjuncts(ce)
    return witness


def assert_witness(p: Program, cv: ControlValuation, witness: ExecutionWitness) -> List[str]:
    failed = []
    hb = witness.hb
    if any(a == b for a, b in hb):
        failed.append("HB-irreflexive")
    successors: Dict[str, set] = defaultdict(set)
    for a, b in hb:
        successors[a].add(b)
    if any((a, c) not in hb for a, b in hb for c in successors[b]):
        failed.append("HB-transitive")

    active = active_events(p, cv)
    sc_events = {e for e in active if p.event(e).is_seq_cst}
    position = {e: i for i, e in enumerate(witness.mo)}
    if len(position) != len(witness.mo) or set(witness.mo) != sc_events:
        failed.append("MO-total")
    elif any(position[a] >= position[b] for a, b in hb if a in sc_events and b in sc_events):
        failed.append("MO-contains-HB")

    if not witness.sw <= hb:
        failed.append("SW-in-HB")
    if witness.rf != derive_rf(witness.rbf):
        failed.append("RF-projection")
    return failed
