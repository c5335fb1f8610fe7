import json
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Sequence, Tuple

from services.execution_enumerator import ValidExecution
from services.program_model import Program, active_events

Evaluator = Callable[[Program, ValidExecution], bool]


@dataclass(frozen=True)
class Predicate:
    id: str
    description: str
    evaluator: Evaluator

    def __call__(self, program: Program, execution: ValidExecution) -> bool:
        return bool(self.evaluator(program, execution))


def _reads_happen_after_sources(program: Program, execution: ValidExecution) -> bool:
    hb = execution.witness.hb
    return all((write, read) in hb for read, write in execution.witness.rf)


def _sw_nonempty(program: Program, execution: ValidExecution) -> bool:
    return bool(execution.witness.sw)


def _mo_nonempty(program: Program, execution: ValidExecution) -> bool:
    return bool(execution.witness.mo)


def _reads_non_init(program: Program, execution: ValidExecution) -> bool:
    return any(not program.event(write).is_init for _, write in execution.witness.rf)


def _mixed_read(program: Program, execution: ValidExecution) -> bool:
    sources = defaultdict(set)
    for read, write in execution.witness.rf:
        sources[read].add(write)
    return any(len(writers) > 1 for writers in sources.values())


def _hb_maximal_sources(program: Program, execution: ValidExecution) -> bool:
    witness = execution.witness
    active = active_events(program, execution.cv_map)
    for read, write, index in witness.rbf:
        block = program.event(read).range.block.name
        for other in program.writers_of(block, index):
            if other.id in (read, write) or other.id not in active:
                continue
            if (write, other.id) in witness.hb:
                return False
    return True


def _rf_within_agent_order(program: Program, execution: ValidExecution) -> bool:
    ao = program.agent_order
    return all((write, read) in ao for read, write in execution.witness.rf)


def _cross_thread_rf(program: Program, execution: ValidExecution) -> bool:
    for read, write in execution.witness.rf:
        source = program.event(write)
        if not source.is_init and source.thread != program.thread_of(read):
            return True
    return False


def _sw_is_sc_hb(program: Program, execution: ValidExecution) -> bool:
    witness = execution.witness

    def _both_sc(pair: Tuple[str, str]) -> bool:
        return program.event(pair[0]).is_seq_cst and program.event(pair[1]).is_seq_cst

    return {p for p in witness.sw if _both_sc(p)} == {p for p in witness.hb if _both_sc(p)}


def _mo_extends_ao(program: Program, execution: ValidExecution) -> bool:
    position = {event: i for i, event in enumerate(execution.witness.mo)}
    return all(position[a] < position[b] for a, b in program.agent_order if a in position and b in position)


def _init_despite_writer(program: Program, execution: ValidExecution) -> bool:
    active = active_events(program, execution.cv_map)
    for read, write, index in execution.witness.rbf:
        if not program.event(write).is_init:
            continue
        block = program.event(read).range.block.name
        if any(
            not other.is_init and other.id != read and other.id in active
            for other in program.writers_of(block, index)
        ):
            return True
    return False


REGISTRY: Dict[str, Predicate] = {
    p.id: p
    for p in (
        Predicate("R2H", "toute paire lue-depuis est ordonnée par happens-before", _reads_happen_after_sources),
        Predicate("SW_NONEMPTY", "au moins une synchronisation", _sw_nonempty),
        Predicate("MO_NONEMPTY", "au moins un événement SeqCst actif", _mo_nonempty),
        Predicate("READS_NON_INIT", "une lecture prend un octet d'une écriture non initiale", _reads_non_init),
        Predicate("MIXED_READ", "une lecture combine plusieurs écritures", _mixed_read),
        Predicate("HB_MAXIMAL", "chaque octet lu vient de la dernière écriture selon HB", _hb_maximal_sources),
        Predicate("RF_IN_AO", "toute lecture lit une écriture antérieure du même thread", _rf_within_agent_order),
        Predicate("CROSS_THREAD_RF", "une lecture lit une écriture d'un autre thread", _cross_thread_rf),
        Predicate("SW_IS_SC_HB", "SW coïncide avec HB restreint aux événements SeqCst", _sw_is_sc_hb),
        Predicate("MO_EXTENDS_AO", "MO respecte l'ordre des threads sur les événements SeqCst", _mo_extends_ao),
        Predicate("INIT_DESPITE_WRITER", "une lecture prend la valeur initiale malgré un écrivain", _init_despite_writer),
    )
}


def default_predicates() -> List[Predicate]:
    return list(REGISTRY.values())


def load_predicates(path: Path) -> List[Predicate]:
    with Path(path).open("r", encoding="utf-8") as handle:
        names = json.load(handle)
    if not isinstance(names, list) or not names:
        raise ValueError(f"{path}: liste JSON de noms de prédicats attendue")
    unknown = [name for name in names if name not in REGISTRY]
    if unknown:
        raise ValueError(f"Prédicats inconnus: {', '.join(unknown)} (connus: {', '.join(REGISTRY)})")
    return [REGISTRY[name] for name in names]


def eval_cube_vector(program: Program, execution: ValidExecution, predicates: Sequence[Predicate]) -> Tuple[bool, ...]:
    return tuple(predicate(program, execution) for predicate in predicates)
