"""Seeded performance sample: enumeration time per generated program.

Usage: python -m scripts.run_benchmark --programs 20 --events 7 --seed 0
"""
import argparse
import sys
import time

from services.execution_enumerator import enumerate_executions
from services.program_generator import GenConfig, sample_corpus
from services.program_model import BlockId, EventKind
from services.program_parser import emit_source

TARGET_SECONDS = 10.0
LIMIT_SECONDS = 30.0
MAX_SLOW = 2


def main() -> int:
    parser = argparse.ArgumentParser(description="Mesure le temps d'énumération sur un échantillon de programmes")
    parser.add_argument("--programs", type=int, default=20)
    parser.add_argument("--events", type=int, default=7)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--block-size", type=int, default=2)
    parser.add_argument("--show", action="store_true", help="affiche le source des programmes lents")
    args = parser.parse_args()

    cfg = GenConfig(
        event_count=args.events,
        blocks=(BlockId("x", args.block_size),),
        kinds=(EventKind.READ, EventKind.WRITE, EventKind.RMW),
    )
    programs = sample_corpus(cfg, args.programs, seed=args.seed, logger=print)

    slow = 0
    failed = 0
    for number, program in enumerate(programs, start=1):
        start = time.perf_counter()
        executions = enumerate_executions(program)
        elapsed = time.perf_counter() - start
        flag = ""
        if elapsed >= LIMIT_SECONDS:
            failed += 1
            flag = "  ÉCHEC"
        elif elapsed >= TARGET_SECONDS:
            slow += 1
            flag = "  LENT"
        print(f"{number:3d}  {elapsed:7.2f} s  {len(executions):5d} exécutions{flag}")
        if flag and args.show:
            print(emit_source(program))

    print(f"{len(programs)} programmes, {slow} lents (< {LIMIT_SECONDS:.0f} s), {failed} au-delà de {LIMIT_SECONDS:.0f} s")
    return 0 if failed == 0 and slow <= MAX_SLOW else 1


if __name__ == "__main__":
    sys.exit(main())
