from dataclasses import dataclass, field
from typing import Callable, Collection, List, Optional

from services.axioms import CONJUNCTS, VALUE_CONJUNCT, assert_witness, check_conjuncts
from services.execution_enumerator import condition_consistent, control_valuations, iter_candidates
from services.program_generator import GenConfig, enumerate_programs
from services.program_model import BlockId, EventKind, Order, Program, Signedness, ViewKind
from services.program_parser import emit_source

DEFAULT_BOUND = 5
DEFAULT_MAX_BOUND = 6
BLAME_ORDER = CONJUNCTS + (VALUE_CONJUNCT,)


def default_consistency_config(event_count: int) -> GenConfig:
    return GenConfig(
        event_count=event_count,
        max_threads=2,
        blocks=(BlockId("x", 1),),
        views=(ViewKind(Signedness.SIGNED, 8),),
        orders=(Order.UNORDERED, Order.SEQ_CST),
        kinds=(EventKind.READ, EventKind.WRITE, EventKind.RMW),
    )


@dataclass
class ConsistencyViolation:
    program_source: str
    kind: str
    conjunct: Optional[str] = None
    assertion: Optional[str] = None
    rbf: List[list] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "program": self.program_source,
            "kind": self.kind,
            "conjunct": self.conjunct,
            "assertion": self.assertion,
            "rbf": self.rbf,
        }


@dataclass
class ConsistencyReport:
    bound: int
    programs_checked: int = 0
    candidates_checked: int = 0
    executions_checked: int = 0
    violations: List[ConsistencyViolation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "bound": self.bound,
            "programs_checked": self.programs_checked,
            "candidates_checked": self.candidates_checked,
            "executions_checked": self.executions_checked,
            "ok": self.ok,
            "violations": [v.to_dict() for v in self.violations],
        }


class ConsistencyChecker:
    def __init__(
        self,
        config_factory: Callable[[int], GenConfig] = default_consistency_config,
        max_bound: int = DEFAULT_MAX_BOUND,
        falsified: Collection[str] = (),
        logger: Optional[Callable[[str], None]] = None,
    ):
        self.config_factory = config_factory
        self.max_bound = max_bound
        self.falsified = frozenset(falsified)
        self._logger = logger

    def _log(self, message: str) -> None:
        if self._logger:
            self._logger(message)

    def check_program(self, program: Program, report: ConsistencyReport) -> None:
        found = False
        latest = -1
        for cv in control_valuations(program):
            for candidate in iter_candidates(program, cv, prune=False):
                report.candidates_checked += 1
                witness, failed = check_conjuncts(candidate, self.falsified)
                if witness is None:
                    latest = max(latest, BLAME_ORDER.index(failed))
                    continue
                if not condition_consistent(program, cv, witness.values):
                    continue
                found = True
                report.executions_checked += 1
                for assertion in assert_witness(program, cv, witness):
                    report.violations.append(
                        ConsistencyViolation(
                            program_source=emit_source(program),
                            kind="assertion",
                            assertion=assertion,
                            rbf=[list(t) for t in sorted(witness.rbf)],
                        )
                    )
        if not found:
            report.violations.append(
                ConsistencyViolation(
                    program_source=emit_source(program),
                    kind="empty-ve",
                    conjunct=BLAME_ORDER[latest] if latest >= 0 else None,
                )
            )

    def check(self, bound: int = DEFAULT_BOUND) -> ConsistencyReport:
        if bound < 1 or bound > self.max_bound:
            raise ValueError(f"Borne {bound} hors de [1, {self.max_bound}]")
        report = ConsistencyReport(bound=bound)
        for size in range(1, bound + 1):
            before = len(report.violations)
            for program in enumerate_programs(self.config_factory(size)):
                report.programs_checked += 1
                self.check_program(program, report)
            self._log(
                f"Cohérence à {size} événements: {report.programs_checked} programmes cumulés, "
                f"{len(report.violations) - before} violations"
            )
        return report


def check_model_consistency(
    bound: int = DEFAULT_BOUND,
    max_bound: int = DEFAULT_MAX_BOUND,
    falsified: Collection[str] = (),
    logger: Optional[Callable[[str], None]] = None,
) -> ConsistencyReport:
    return ConsistencyChecker(max_bound=max_bound, falsified=falsified, logger=logger).check(bound)
