import argparse
import json
import sys
import traceback
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from services.consistency_checker import check_model_consistency
from services.coverage import UnknownObservedOutputError, synthesize
from services.dot_emitter import emit_dot
from services.execution_enumerator import CandidateLimitExceeded, enumerate_executions, execution_to_dict
from services.litmus_generator import EmptyExecutionSetError, generate_litmus
from services.litmus_runner import (
    EngineConfig,
    EngineLaunchError,
    EngineOutputError,
    EngineTimeoutError,
    LogFormatError,
    Verdict,
    classify,
    ingest_observed,
    report_from_log,
    report_to_dict,
    run_harness,
)
from services.predicates import default_predicates, load_predicates
from services.program_generator import GenConfig, SampleSizeError, enumerate_programs, sample_corpus
from services.program_model import BlockId, EventKind, IncompleteValuationError, Order, ViewKind, program_to_dict
from services.program_parser import (
    InvalidProgramError,
    ParameterError,
    ProgramParser,
    ProgramSyntaxError,
    SourceProgram,
    emit_source,
)
from utils.logging_util import append_log
from utils.paths import get_log_file_path, get_output_dir
from utils.settings_service import SettingsService

APP_NAME = "sabmm"
EXIT_OK = 0
EXIT_FINDINGS = 1
EXIT_ERROR = 2

KNOWN_ERRORS = (
    ProgramSyntaxError,
    ParameterError,
    InvalidProgramError,
    IncompleteValuationError,
    CandidateLimitExceeded,
    EmptyExecutionSetError,
    LogFormatError,
    EngineLaunchError,
    EngineTimeoutError,
    EngineOutputError,
    UnknownObservedOutputError,
    SampleSizeError,
    FileNotFoundError,
    ValueError,
)
ORDER_NAMES = {"U": Order.UNORDERED, "SC": Order.SEQ_CST}
KIND_NAMES = {"R": EventKind.READ, "W": EventKind.WRITE, "M": EventKind.RMW}


@dataclass
class CliConfig:
    subcommand: str
    inputs: List[Path] = field(default_factory=list)
    output_dir: Optional[Path] = None
    params: Dict[str, int] = field(default_factory=dict)
    engine: Optional[str] = None
    from_log: Optional[Path] = None
    observed: Optional[Path] = None
    predicates: Optional[Path] = None
    runs: int = 1000
    timeout: float = 30.0
    jobs: int = 1
    max_candidates: int = 1_000_000
    events: int = 3
    threads: int = 2
    block_size: int = 2
    views: List[str] = field(default_factory=lambda: ["I8"])
    orders: List[str] = field(default_factory=lambda: ["U", "SC"])
    kinds: List[str] = field(default_factory=lambda: ["R", "W"])
    branches: bool = False
    sample: Optional[int] = None
    seed: int = 0
    bound: int = 5
    max_bound: int = 6
    settings: dict = field(default_factory=dict)


def _parse_param(text: str) -> tuple:
    name, sep, value = text.partition("=")
    if not sep or not name.strip():
        raise argparse.ArgumentTypeError(f"paramètre attendu sous la forme nom=valeur: {text!r}")
    try:
        return name.strip().lstrip("$"), int(value)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"valeur entière attendue pour {name}: {value!r}") from exc


def _csv(text: str) -> List[str]:
    return [item.strip() for item in text.split(",") if item.strip()]


def build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=APP_NAME,
        description="Vérificateur du modèle mémoire SharedArrayBuffer: exécutions valides, tests litmus, couverture.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--out", type=Path, default=None, help="dossier de sortie (défaut: $SABMM_OUTPUT_DIR ou ./sabmm-output)")
        p.add_argument("--jobs", type=int, default=None, help="parallélisme")

    def program_args(p: argparse.ArgumentParser) -> None:
        p.add_argument("program", type=Path, help="programme .sab")
        p.add_argument("--param", action="append", type=_parse_param, default=[], help="liaison de paramètre k=0")
        p.add_argument("--max-candidates", type=int, default=None, help="plafond de candidats examinés")

    run = sub.add_parser("run", help="énumère les exécutions valides et écrit JSON + graphes dot")
    program_args(run)
    common(run)

    litmus = sub.add_parser("litmus", help="génère le test litmus et classe les sorties observées")
    program_args(litmus)
    common(litmus)
    source = litmus.add_mutually_exclusive_group()
    source.add_argument("--engine", default=None, help='commande moteur, ex. "d8 {file}"')
    source.add_argument("--from-log", type=Path, default=None, help="journal de sorties enregistré")
    litmus.add_argument("--runs", type=int, default=None, help="nombre d'exécutions du moteur")
    litmus.add_argument("--timeout", type=float, default=None, help="délai par exécution (s)")

    coverage = sub.add_parser("coverage", help="synthétise Σ_OBS / Σ_UNOBS")
    program_args(coverage)
    common(coverage)
    coverage.add_argument("--observed", type=Path, required=True, help="rapport .report.json ou journal de sorties")
    coverage.add_argument("--predicates", type=Path, default=None, help="liste JSON de prédicats")

    gen = sub.add_parser("gen", help="énumère ou échantillonne des programmes")
    common(gen)
    gen.add_argument("--events", type=int, required=True)
    gen.add_argument("--threads", type=int, default=2)
    gen.add_argument("--block-size", type=int, default=2)
    gen.add_argument("--views", type=_csv, default=["I8"])
    gen.add_argument("--orders", type=_csv, default=["U", "SC"])
    gen.add_argument("--kinds", type=_csv, default=["R", "W"])
    gen.add_argument("--branches", action="store_true")
    gen.add_argument("--sample", type=int, default=None, help="taille d'échantillon")
    gen.add_argument("--seed", type=int, default=0)

    check = sub.add_parser("check-model", help="vérifie la cohérence des axiomes jusqu'à une borne")
    common(check)
    check.add_argument("--bound", type=int, default=None)
    return parser


def config_from_args(args: argparse.Namespace, settings: dict) -> CliConfig:
    def pick(value, key):
        return settings[key] if value is None else value

    cfg = CliConfig(subcommand=args.subcommand, settings=settings)
    cfg.output_dir = args.out
    cfg.jobs = pick(getattr(args, "jobs", None), "jobs")
    if hasattr(args, "program"):
        cfg.inputs = [args.program]
        cfg.params = dict(args.param)
        cfg.max_candidates = pick(args.max_candidates, "max_candidates")
    if args.subcommand == "litmus":
        cfg.engine = args.engine
        cfg.from_log = args.from_log
        cfg.runs = pick(args.runs, "runs")
        cfg.timeout = pick(args.timeout, "run_timeout")
    if args.subcommand == "coverage":
        cfg.observed = args.observed
        predicates = args.predicates or settings.get("predicates") or None
        cfg.predicates = Path(predicates) if predicates else None
    if args.subcommand == "gen":
        cfg.events = args.events
        cfg.threads = args.threads
        cfg.block_size = args.block_size
        cfg.views = args.views
        cfg.orders = args.orders
        cfg.kinds = args.kinds
        cfg.branches = args.branches
        cfg.sample = args.sample
        cfg.seed = args.seed
    if args.subcommand == "check-model":
        cfg.bound = pick(args.bound, "consistency_bound")
        cfg.max_bound = settings["consistency_max_bound"]
    return cfg


class CommandRunner:
    def __init__(self, cfg: CliConfig, log_file_path: Optional[Path] = None):
        self.cfg = cfg
        self.settings = cfg.settings
        self.log_file_path = log_file_path or get_log_file_path(APP_NAME)
        self.output_dir = cfg.output_dir or get_output_dir(APP_NAME, self.settings.get("output_dir", ""))

    def log(self, message: str) -> None:
        print(message, file=sys.stderr)
        self.log_to_file(message)

    def log_to_file(self, message: str) -> None:
        try:
            append_log(self.log_file_path, message, source=self.cfg.subcommand)
        except OSError:
            pass

    def _write(self, name: str, content: str) -> Path:
        self.output_dir.mkdir(parents=True, exist_ok=True)
        path = self.output_dir / name
        path.write_text(content, encoding="utf-8")
        return path

    def _write_json(self, name: str, data) -> Path:
        return self._write(name, json.dumps(data, indent=2, ensure_ascii=False) + "\n")

    def _load_program(self):
        path = self.cfg.inputs[0]
        text = path.read_text(encoding="utf-8")
        parser = ProgramParser(
            max_if_depth=self.settings["max_if_depth"],
            max_loop_bound=self.settings["max_loop_bound"],
            default_block_size=self.settings["default_block_size"],
            logger=self.log_to_file,
        )
        program = parser.parse(SourceProgram(text, dict(self.cfg.params)))
        self.log(f"Programme chargé: {path.name} ({len(program.events)} événements)")
        return path.stem, program

    def _executions(self, program):
        return enumerate_executions(
            program, max_candidates=self.cfg.max_candidates, jobs=self.cfg.jobs, logger=self.log
        )

    def run(self) -> int:
        handler = getattr(self, "_cmd_" + self.cfg.subcommand.replace("-", "_"))
        return handler()

    def _cmd_run(self) -> int:
        stem, program = self._load_program()
        executions = self._executions(program)
        self._write_json(
            "executions.json",
            {
                "program": program_to_dict(program),
                "source": emit_source(program),
                "executions": [execution_to_dict(program, x) for x in executions],
            },
        )
        for number, execution in enumerate(executions, start=1):
            self._write_json(f"exec_{number:03d}.json", execution_to_dict(program, execution))
            self._write(f"exec_{number:03d}.dot", emit_dot(program, execution) + "\n")
        self.log(f"{stem}: {len(executions)} exécutions écrites dans {self.output_dir}")
        return EXIT_OK

    def _cmd_litmus(self) -> int:
        stem, program = self._load_program()
        executions = self._executions(program)
        test = generate_litmus(program, executions, name=stem)
        self._write(f"{stem}.js", test.source)
        self._write(f"{stem}.expected", "\n".join(test.expected_outputs) + "\n")
        self.log(f"Test litmus {stem}.js: {len(test.expected_outputs)} sorties attendues")
        if self.cfg.from_log:
            report = report_from_log(self.cfg.from_log.read_text(encoding="utf-8"), test)
        elif self.cfg.engine:
            engine = EngineConfig(command=self.cfg.engine, timeout=self.cfg.timeout, jobs=self.cfg.jobs)
            report = run_harness(engine, test, self.cfg.runs, logger=self.log)
        else:
            return EXIT_OK
        classification = classify(report, test.expected_outputs)
        self._write_json(f"{stem}.report.json", report_to_dict(report, classification))
        self.log(
            f"Verdict: {classification.verdict.value} "
            f"(couverture {report.coverage_fraction:.0%}, {len(classification.violations)} sorties interdites)"
        )
        for output in classification.violations:
            self.log(f"  sortie interdite: {output}")
        return EXIT_FINDINGS if classification.verdict is Verdict.VIOLATION else EXIT_OK

    def _observed_keys(self) -> List[str]:
        text = self.cfg.observed.read_text(encoding="utf-8")
        if self.cfg.observed.suffix.lower() == ".json":
            data = json.loads(text)
            return list(data.get("observed", data.get("counts", {})))
        return list(ingest_observed(text))

    def _cmd_coverage(self) -> int:
        stem, program = self._load_program()
        executions = self._executions(program)
        predicates = load_predicates(self.cfg.predicates) if self.cfg.predicates else default_predicates()
        try:
            result = synthesize(
                program,
                executions,
                self._observed_keys(),
                predicates,
                unrealized_as_dont_care=self.settings["unrealized_as_dont_care"],
                logger=self.log,
            )
        except UnknownObservedOutputError as exc:
            self.log(f"Violation: {exc}")
            return EXIT_FINDINGS
        self._write_json(f"{stem}.coverage.json", result.to_dict())
        return EXIT_OK

    def _gen_config(self) -> GenConfig:
        cfg = self.cfg
        return GenConfig(
            event_count=cfg.events,
            max_threads=cfg.threads,
            blocks=(BlockId("x", cfg.block_size),),
            views=tuple(ViewKind.parse(v) for v in cfg.views),
            orders=tuple(ORDER_NAMES[o.upper()] for o in cfg.orders),
            kinds=tuple(KIND_NAMES[k.upper()] for k in cfg.kinds),
            allow_branches=cfg.branches,
        )

    def _cmd_gen(self) -> int:
        gen_cfg = self._gen_config()
        if self.cfg.sample:
            programs = sample_corpus(gen_cfg, self.cfg.sample, seed=self.cfg.seed, logger=self.log)
        else:
            programs = enumerate_programs(gen_cfg)
        count = 0
        for count, program in enumerate(programs, start=1):
            self._write(f"prog_{count:05d}.sab", emit_source(program))
        self.log(f"{count} programmes écrits dans {self.output_dir}")
        return EXIT_OK

    def _cmd_check_model(self) -> int:
        report = check_model_consistency(self.cfg.bound, max_bound=self.cfg.max_bound, logger=self.log)
        self._write_json("consistency.json", report.to_dict())
        self.log(
            f"Cohérence (borne {report.bound}): {report.programs_checked} programmes, "
            f"{report.executions_checked} exécutions, {len(report.violations)} violations"
        )
        return EXIT_OK if report.ok else EXIT_FINDINGS


def run_command(cfg: CliConfig, log_file_path: Optional[Path] = None) -> int:
    runner = CommandRunner(cfg, log_file_path)
    try:
        return runner.run()
    except KNOWN_ERRORS as exc:
        runner.log(f"Erreur: {exc.__class__.__name__}: {str(exc).strip() or exc.__class__.__name__}")
        return EXIT_ERROR
    except Exception as exc:  # pylint: disable=broad-except
        runner.log(f"Erreur inattendue: {exc.__class__.__name__}: {exc}")
        runner.log_to_file(traceback.format_exc())
        return EXIT_ERROR


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_arg_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_ERROR if exc.code else EXIT_OK
    settings = SettingsService(APP_NAME).load()
    try:
        cfg = config_from_args(args, settings)
    except (KeyError, ValueError) as exc:
        print(f"Erreur: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return run_command(cfg)


if __name__ == "__main__":
    sys.exit(main())
