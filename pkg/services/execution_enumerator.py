import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, Iterator, List, Mapping, Optional, Tuple

import networkx as nx

from services.axioms import (
    CandidateExecution,
    ExecutionWitness,
    base_order_graph,
    check_conjuncts,
)
from services.program_model import (
    MemoryEvent,
    Number,
    Program,
    active_events,
    event_sort_key,
)
from services.values import format_value

DEFAULT_MAX_CANDIDATES = 1_000_000
NO_OUTPUT = "(none)"


class CandidateLimitExceeded(RuntimeError):
    def __init__(self, limit: int):
        self.limit = limit
        super().__init__(f"Plus de {limit} candidats examinés: augmentez --max-candidates")


@dataclass(frozen=True)
class ValidExecution:
    witness: ExecutionWitness
    cv: Tuple[Tuple[str, bool], ...]
    output: Tuple[Tuple[str, Number], ...]

    @property
    def cv_map(self) -> Dict[str, bool]:
        return dict(self.cv)

    @property
    def sorted_rbf(self) -> Tuple[Tuple[str, str, int], ...]:
        return tuple(sorted(self.witness.rbf, key=_triple_key))

    @property
    def key(self) -> tuple:
        return (self.cv, self.sorted_rbf)


def _triple_key(triple: Tuple[str, str, int]) -> tuple:
    read, write, index = triple
    return (event_sort_key(read), event_sort_key(write), index)


def _execution_order(execution: ValidExecution) -> tuple:
    return (tuple(_triple_key(t) for t in execution.sorted_rbf), execution.cv)


def control_valuations(p: Program) -> Iterator[Dict[str, bool]]:
    """Valuations of the control variables, with a variable fixed to false whenever its
    condition read is itself inactive."""
    names = [c.id for c in p.control_vars]
    for bits in itertools.product((False, True), repeat=len(names)):
        cv = dict(zip(names, bits))
        active = active_events(p, cv)
        if any(cv[c.id] and c.read_event not in active for c in p.control_vars):
            continue
        yield cv


def _byte_slots(p: Program, active) -> List[Tuple[MemoryEvent, int]]:
    reads = sorted((p.event(e) for e in active if p.event(e).is_read), key=lambda e: event_sort_key(e.id))
    return [(read, index) for read in reads for index in read.range.addresses]


def _source_choices(p: Program, active, static_hb, read: MemoryEvent, index: int, prune: bool) -> List[str]:
    block = read.range.block.name
    writers = [w for w in p.writers_of(block, index) if w.id in active and w.id != read.id]
    if not prune:
        return [w.id for w in writers]
    choices = []
    for writer in writers:
        if (read.id, writer.id) in static_hb:
            continue
        shadowed = any(
            other.id not in (writer.id, read.id)
            and (writer.id, other.id) in static_hb
            and (other.id, read.id) in static_hb
            for other in writers
        )
        if not shadowed:
            choices.append(writer.id)
    return choices


def iter_candidates(p: Program, cv: Mapping[str, bool], prune: bool = True) -> Iterator[CandidateExecution]:
    """Candidate executions for one control valuation, by backtracking over per-byte sources.

    With ``prune`` the search skips sources that AO and init edges alone already make
    incoherent, and non-tear reads that would mix two same-range non-tear writers.
    """
    active = active_events(p, cv)
    static_hb = frozenset(nx.transitive_closure_dag(base_order_graph(p, active)).edges()) if prune else frozenset()
    slots = _byte_slots(p, active)
    choices = [_source_choices(p, active, static_hb, read, index, prune) for read, index in slots]
    chosen: List[str] = []

    def _conflicts(read: MemoryEvent, writer_id: str) -> bool:
        if not prune or read.tear:
            return False
        writer = p.event(writer_id)
        if writer.tear or writer.range != read.range:
            return False
        for (other_read, _), other_writer in zip(slots, chosen):
            if other_read.id != read.id or other_writer == writer_id:
                continue
            other = p.event(other_writer)
            if not other.tear and other.range == read.range:
                return True
        return False

    def _search(depth: int) -> Iterator[CandidateExecution]:
        if depth == len(slots):
            rbf = frozenset((read.id, writer, index) for (read, index), writer in zip(slots, chosen))
            yield CandidateExecution(p, dict(cv), rbf)
            return
        read, _ = slots[depth]
        for writer in choices[depth]:
            if _conflicts(read, writer):
                continue
            chosen.append(writer)
            yield from _search(depth + 1)
            chosen.pop()

    yield from _search(0)


def condition_consistent(p: Program, cv: Mapping[str, bool], values: Mapping[str, Number]) -> bool:
    for control in p.control_vars:
        if control.read_event in values and control.holds(values[control.read_event]) != cv[control.id]:
            return False
    return True


def _enumerate_valuation(p: Program, cv: Dict[str, bool], max_candidates: int) -> Tuple[List[ValidExecution], int, int]:
    executions = []
    checked = 0
    discarded = 0
    output_ids = [e.id for e in p.output_events()]
    cv_items = tuple(sorted(cv.items()))
    for candidate in iter_candidates(p, cv):
        checked += 1
        if checked > max_candidates:
            raise CandidateLimitExceeded(max_candidates)
        witness, _ = check_conjuncts(candidate)
        if witness is None:
            continue
        if not condition_consistent(p, cv, witness.values):
            discarded += 1
            continue
        output = tuple((e, witness.values[e]) for e in output_ids if e in witness.values)
        executions.append(ValidExecution(witness=witness, cv=cv_items, output=output))
    return executions, checked, discarded


class ExecutionEnumerator:
    def __init__(
        self,
        max_candidates: int = DEFAULT_MAX_CANDIDATES,
        jobs: int = 1,
        logger: Optional[Callable[[str], None]] = None,
    ):
        self.max_candidates = max_candidates
        self.jobs = max(1, jobs)
        self._logger = logger

    def _log(self, message: str) -> None:
        if self._logger:
            self._logger(message)

    def enumerate(self, p: Program) -> List[ValidExecution]:
        valuations = list(control_valuations(p))
        if self.jobs > 1 and len(valuations) > 1:
            with ProcessPoolExecutor(max_workers=self.jobs) as pool:
                results = list(
                    pool.map(_enumerate_valuation, [p] * len(valuations), valuations, [self.max_candidates] * len(valuations))
                )
        else:
            results = [_enumerate_valuation(p, cv, self.max_candidates) for cv in valuations]

        unique: Dict[tuple, ValidExecution] = {}
        checked = 0
        discarded = 0
        for executions, count, dropped in results:
            checked += count
            discarded += dropped
            if checked > self.max_candidates:
                raise CandidateLimitExceeded(self.max_candidates)
            for execution in executions:
                unique.setdefault(execution.key, execution)
        ordered = sorted(unique.values(), key=_execution_order)
        self._log(
            f"{len(ordered)} exécutions valides ({checked} candidats, "
            f"{discarded} écartées par incohérence de branche, {len(valuations)} valuations)"
        )
        return ordered


def enumerate_executions(
    p: Program,
    max_candidates: int = DEFAULT_MAX_CANDIDATES,
    jobs: int = 1,
    logger: Optional[Callable[[str], None]] = None,
) -> List[ValidExecution]:
    return ExecutionEnumerator(max_candidates=max_candidates, jobs=jobs, logger=logger).enumerate(p)


def _json_number(value: Number):
    if isinstance(value, float) and (value != value or value in (float("inf"), float("-inf"))):
        return format_value(value)
    return value


def output_key(p: Program, execution: ValidExecution) -> str:
    """Canonical output string: sorted `thread:event=value` tuples joined by `;`, or
    NO_OUTPUT for a program without reads."""
    parts = [f"{p.thread_of(event_id)}:{event_id}={format_value(value)}" for event_id, value in execution.output]
    return ";".join(sorted(parts)) if parts else NO_OUTPUT


def execution_to_dict(p: Program, execution: ValidExecution) -> dict:
    witness = execution.witness
    return {
        "cv": execution.cv_map,
        "rbf": [list(t) for t in execution.sorted_rbf],
        "rf": sorted([list(pair) for pair in witness.rf], key=lambda e: [event_sort_key(x) for x in e]),
        "sw": sorted([list(pair) for pair in witness.sw], key=lambda e: [event_sort_key(x) for x in e]),
        "hb": sorted([list(pair) for pair in witness.hb], key=lambda e: [event_sort_key(x) for x in e]),
        "mo": list(witness.mo),
        "values": {k: _json_number(v) for k, v in sorted(witness.values.items(), key=lambda kv: event_sort_key(kv[0]))},
        "output": [[event_id, _json_number(value)] for event_id, value in execution.output],
        "output_key": output_key(p, execution),
    }
