import re
import shlex
import subprocess
import tempfile
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence, Tuple

from services.execution_enumerator import NO_OUTPUT
from services.litmus_generator import LitmusTest

ENTRY = r"[A-Za-z_][\w-]*:[A-Za-z_]\w*=[^;\s]+"
OUTPUT_LINE_RE = re.compile(rf"^(?:{ENTRY}(?:;{ENTRY})*|{re.escape(NO_OUTPUT)})$")


class LogFormatError(ValueError):
    def __init__(self, line_numbers: Sequence[int]):
        self.line_numbers = list(line_numbers)
        shown = ", ".join(str(n) for n in self.line_numbers[:20])
        super().__init__(f"Lignes de journal illisibles: {shown}")


class EngineLaunchError(RuntimeError):
    pass


class EngineTimeoutError(RuntimeError):
    pass


class EngineOutputError(RuntimeError):
    pass


class Verdict(str, Enum):
    VIOLATION = "violation"
    EXACT = "exact"
    SUBSET = "subset"


@dataclass(frozen=True)
class EngineConfig:
    command: str
    timeout: float = 30.0
    jobs: int = 1


@dataclass
class RunReport:
    counts: Counter
    expected: Tuple[str, ...] = ()

    @property
    def runs(self) -> int:
        return sum(self.counts.values())

    @property
    def observed(self) -> Tuple[str, ...]:
        return tuple(sorted(self.counts))

    @property
    def violations(self) -> Tuple[str, ...]:
        expected = set(self.expected)
        return tuple(sorted(o for o in self.counts if o not in expected))

    @property
    def coverage_fraction(self) -> float:
        if not self.expected:
            return 0.0
        return len(set(self.counts) & set(self.expected)) / len(set(self.expected))


@dataclass(frozen=True)
class Classification:
    verdict: Verdict
    violations: Tuple[str, ...] = ()
    unobserved: Tuple[str, ...] = ()
    observed: Tuple[str, ...] = field(default_factory=tuple)


def canonicalize_output(line: str) -> str:
    entries = [entry for entry in line.strip().split(";") if entry]
    return ";".join(sorted(entries))


def ingest_observed(log: str) -> Counter:
    counts: Counter = Counter()
    bad = []
    for number, raw in enumerate(log.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if not OUTPUT_LINE_RE.match(line):
            bad.append(number)
            continue
        counts[canonicalize_output(line)] += 1
    if bad:
        raise LogFormatError(bad)
    return counts


def report_from_log(text: str, test: LitmusTest) -> RunReport:
    return RunReport(counts=ingest_observed(text), expected=test.expected_outputs)


def _run_once(cfg: EngineConfig, path: Path, index: int) -> str:
    args = shlex.split(cfg.command.replace("{file}", shlex.quote(str(path))).replace("{run}", str(index)))
    if not args:
        raise EngineLaunchError("Commande moteur vide")
    try:
        completed = subprocess.run(args, capture_output=True, text=True, timeout=cfg.timeout, check=False)
    except subprocess.TimeoutExpired as exc:
        raise EngineTimeoutError(f"Exécution {index} interrompue après {cfg.timeout} s") from exc
    except OSError as exc:
        raise EngineLaunchError(f"Impossible de lancer le moteur: {exc}") from exc
    lines = [line.strip() for line in completed.stdout.splitlines() if line.strip()]
    if not lines:
        stderr = completed.stderr.strip().splitlines()
        detail = stderr[-1] if stderr else f"code {completed.returncode}"
        raise EngineOutputError(f"Exécution {index} sans sortie ({detail})")
    last = lines[-1]
    if not OUTPUT_LINE_RE.match(last):
        raise EngineOutputError(f"Exécution {index}: sortie illisible {last!r}")
    return canonicalize_output(last)


def run_harness(
    cfg: EngineConfig,
    test: LitmusTest,
    runs: int,
    logger: Optional[Callable[[str], None]] = None,
) -> RunReport:
    counts: Counter = Counter()
    with tempfile.TemporaryDirectory(prefix="sabmm-") as workdir:
        path = Path(workdir) / f"{test.name}.js"
        path.write_text(test.source, encoding="utf-8")
        with ThreadPoolExecutor(max_workers=max(1, cfg.jobs)) as pool:
            for output in pool.map(lambda index: _run_once(cfg, path, index), range(runs)):
                counts[output] += 1
    if logger:
        logger(f"{runs} exécutions du moteur, {len(counts)} sorties distinctes")
    return RunReport(counts=counts, expected=test.expected_outputs)


def classify(report: RunReport, expected: Iterable[str]) -> Classification:
    expected_set = set(expected)
    observed = set(report.counts)
    stray = tuple(sorted(observed - expected_set))
    unobserved = tuple(sorted(expected_set - observed))
    if stray:
        verdict = Verdict.VIOLATION
    elif observed == expected_set:
        verdict = Verdict.EXACT
    else:
        verdict = Verdict.SUBSET
    return Classification(verdict=verdict, violations=stray, unobserved=unobserved, observed=tuple(sorted(observed)))


def report_to_dict(report: RunReport, classification: Classification) -> dict:
    return {
        "runs": report.runs,
        "counts": dict(sorted(report.counts.items())),
        "observed": list(classification.observed),
        "violations": list(classification.violations),
        "unobserved": list(classification.unobserved),
        "coverage_fraction": report.coverage_fraction,
        "verdict": classification.verdict.value,
    }
