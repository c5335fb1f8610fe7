import itertools
import random
from dataclasses import dataclass
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple

from services.program_model import (
    ALWAYS,
    BlockId,
    EventKind,
    Order,
    Program,
    ProgramBuilder,
    Signedness,
    ViewKind,
)

EXACT_SAMPLE_LIMIT = 200_000
RANDOM_ATTEMPTS_PER_PROGRAM = 1000

# (kind, order, view label, block name, byte index)
Slot = Tuple[str, str, str, str, int]
# (then-branch length or 0, slots); a branching thread starts with its condition read.
RawThread = Tuple[int, Tuple[Slot, ...]]
RawProgram = Tuple[RawThread, ...]


class SampleSizeError(ValueError):
    pass


@dataclass(frozen=True)
class GenConfig:
    event_count: int
    max_threads: int = 2
    blocks: Tuple[BlockId, ...] = (BlockId("x", 2),)
    views: Tuple[ViewKind, ...] = (ViewKind(Signedness.SIGNED, 8),)
    orders: Tuple[Order, ...] = (Order.UNORDERED, Order.SEQ_CST)
    kinds: Tuple[EventKind, ...] = (EventKind.READ, EventKind.WRITE)
    allow_branches: bool = False
    dedupe: bool = True

    def __post_init__(self):
        if self.event_count < 1:
            raise ValueError("event_count doit être ≥ 1")
        if self.max_threads < 1:
            raise ValueError("max_threads doit être ≥ 1")
        if not self.blocks or not self.views or not self.orders or not self.kinds:
            raise ValueError("alphabet vide: blocs, vues, ordres et types requis")
        if Order.INIT in self.orders:
            raise ValueError("l'ordre Init est réservé aux événements initiaux")


def alphabet(cfg: GenConfig) -> List[Slot]:
    slots = []
    for kind in cfg.kinds:
        for order in cfg.orders:
            for view in cfg.views:
                if kind is EventKind.RMW and view.is_float:
                    continue
                size = view.element_size
                for block in cfg.blocks:
                    for index in range(0, block.size_bytes - size + 1, size):
                        slots.append((kind.value, order.value, view.label, block.name, index))
    return sorted(slots)


def _read_slots(slots: Sequence[Slot]) -> List[Slot]:
    return [slot for slot in slots if slot[0] == EventKind.READ.value]


def compositions(total: int, max_parts: int) -> Iterator[Tuple[int, ...]]:
    for parts in range(1, min(total, max_parts) + 1):
        for cuts in itertools.combinations(range(1, total), parts - 1):
            bounds = (0,) + cuts + (total,)
            yield tuple(bounds[i + 1] - bounds[i] for i in range(parts))


def _layouts(size: int, allow_branches: bool) -> List[int]:
    if not allow_branches or size < 2:
        return [0]
    return [0] + list(range(1, size))


def space_size(cfg: GenConfig) -> int:
    """Number of raw programs (before quotienting by thread and block renaming)."""
    slots = alphabet(cfg)
    reads = len(_read_slots(slots))
    width = len(slots)

    def per_thread(size: int) -> int:
        count = width**size
        if cfg.allow_branches and size >= 2:
            count += (size - 1) * reads * width ** (size - 1)
        return count

    total = 0
    for shape in compositions(cfg.event_count, cfg.max_threads):
        product = 1
        for size in shape:
            product *= per_thread(size)
        total += product
    return total


def _thread_variants(size: int, slots: Sequence[Slot], reads: Sequence[Slot], allow_branches: bool) -> Iterator[RawThread]:
    for layout in _layouts(size, allow_branches):
        if layout:
            for head in reads:
                for tail in itertools.product(slots, repeat=size - 1):
                    yield (layout, (head,) + tail)
        else:
            for body in itertools.product(slots, repeat=size):
                yield (0, body)


def _block_renamings(cfg: GenConfig) -> List[Dict[str, str]]:
    by_size: Dict[int, List[str]] = {}
    for block in cfg.blocks:
        by_size.setdefault(block.size_bytes, []).append(block.name)
    groups = list(by_size.values())
    renamings = []
    for perms in itertools.product(*(itertools.permutations(group) for group in groups)):
        mapping = {}
        for group, perm in zip(groups, perms):
            mapping.update(dict(zip(group, perm)))
        renamings.append(mapping)
    return renamings


def canonical_form(raw: RawProgram, renamings: Sequence[Dict[str, str]]) -> RawProgram:
    """Least representative of ``raw`` under thread reordering and same-size block renaming."""
    best = None
    for mapping in renamings:
        renamed = tuple(
            sorted(
                (layout, tuple((k, o, v, mapping[b], i) for k, o, v, b, i in slots))
                for layout, slots in raw
            )
        )
        if best is None or renamed < best:
            best = renamed
    return best


def _raw_programs(cfg: GenConfig) -> Iterator[RawProgram]:
    slots = alphabet(cfg)
    reads = _read_slots(slots)
    renamings = _block_renamings(cfg)
    for shape in compositions(cfg.event_count, cfg.max_threads):
        by_size = {size: list(_thread_variants(size, slots, reads, cfg.allow_branches)) for size in set(shape)}
        for raw in itertools.product(*(by_size[size] for size in shape)):
            if cfg.dedupe and raw != canonical_form(raw, renamings):
                continue
            yield raw


def build_program(cfg: GenConfig, raw: RawProgram) -> Program:
    builder = ProgramBuilder(cfg.blocks)
    payload = 0
    for number, (layout, slots) in enumerate(raw, start=1):
        thread = f"t{number}"
        builder.add_thread(thread)
        guard = ALWAYS
        control = None
        for position, (kind, order, label, block, index) in enumerate(slots):
            view = ViewKind.parse(label)
            if layout and position == 1:
                guard = ALWAYS.extended(control.id, True)
            if layout and position == layout + 1:
                guard = ALWAYS.extended(control.id, False)
            event_kind = EventKind(kind)
            value = None
            modify_op = None
            if event_kind is EventKind.WRITE:
                payload += 1
                value = payload
            elif event_kind is EventKind.RMW:
                value, modify_op = 1, "+"
            event = builder.add_event(
                thread, event_kind, Order(order), block, index, view,
                guard=guard, payload=value, modify_op=modify_op,
            )
            if layout and position == 0:
                control = builder.add_control_var(event.id, "==", 1)
    return builder.build()


def enumerate_programs(cfg: GenConfig) -> Iterator[Program]:
    for raw in _raw_programs(cfg):
        yield build_program(cfg, raw)


def _random_raw(cfg: GenConfig, rng: random.Random, slots: Sequence[Slot], reads: Sequence[Slot], shapes) -> RawProgram:
    shape = rng.choice(shapes)
    threads = []
    for size in shape:
        layout = rng.choice(_layouts(size, cfg.allow_branches))
        body = [rng.choice(slots) for _ in range(size)]
        if layout:
            body[0] = rng.choice(reads)
        threads.append((layout, tuple(body)))
    return tuple(threads)


def sample_corpus(
    cfg: GenConfig,
    n: int,
    seed: int = 0,
    logger: Optional[Callable[[str], None]] = None,
) -> List[Program]:
    rng = random.Random(seed)
    size = space_size(cfg)
    if size <= EXACT_SAMPLE_LIMIT:
        raws = list(_raw_programs(cfg))
        if n > len(raws):
            raise SampleSizeError(f"{n} programmes demandés, seulement {len(raws)} disponibles")
        chosen = rng.sample(raws, n)
        if logger:
            logger(f"Échantillon exact: {n} programmes parmi {len(raws)}")
        return [build_program(cfg, raw) for raw in chosen]

    slots = alphabet(cfg)
    reads = _read_slots(slots)
    if cfg.allow_branches and not reads:
        raise SampleSizeError("branches demandées sans lecture dans l'alphabet")
    shapes = list(compositions(cfg.event_count, cfg.max_threads))
    renamings = _block_renamings(cfg)
    seen = set()
    chosen: List[RawProgram] = []
    attempts = 0
    while len(chosen) < n:
        attempts += 1
        if attempts > n * RANDOM_ATTEMPTS_PER_PROGRAM:
            raise SampleSizeError(f"Impossible de tirer {n} programmes distincts (obtenu {len(chosen)})")
        raw = _random_raw(cfg, rng, slots, reads, shapes)
        key = canonical_form(raw, renamings) if cfg.dedupe else raw
        if key in seen:
            continue
        seen.add(key)
        chosen.append(key)
    if logger:
        logger(f"Échantillon aléatoire: {n} programmes (espace brut {size}, {attempts} tirages)")
    return [build_program(cfg, raw) for raw in chosen]
