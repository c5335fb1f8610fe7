import re
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Iterable, Mapping, Optional, Union

Number = Union[int, float]
Relation2 = frozenset[tuple[str, str]]
Relation3 = frozenset[tuple[str, str, int]]
ControlValuation = Mapping[str, bool]

INIT_THREAD = "init"
ELEMENT_SIZES = (1, 2, 4, 8)
VIEW_RE = re.compile(r"^([IUF])(8|16|32|64)$")
EVENT_ID_RE = re.compile(r"^(\D*)(\d+)$")
MODIFY_OPS = ("+", "-", "&", "|", "^")
CONDITION_OPS = ("==", "!=")


class EventKind(str, Enum):
    READ = "R"
    WRITE = "W"
    RMW = "M"


class Order(str, Enum):
    INIT = "I"
    SEQ_CST = "SC"
    UNORDERED = "U"


class Signedness(str, Enum):
    SIGNED = "I"
    UNSIGNED = "U"
    FLOAT = "F"


class IncompleteValuationError(ValueError):
    def __init__(self, missing: Iterable[str]):
        self.missing = sorted(missing)
        super().__init__(f"Valuation incomplète, variables manquantes: {', '.join(self.missing)}")


def event_sort_key(event_id: str) -> tuple:
    """Natural ordering for event ids, so that ev2 sorts before ev10."""
    match = EVENT_ID_RE.match(event_id)
    if match:
        return (match.group(1), int(match.group(2)), event_id)
    return (event_id, -1, event_id)


@dataclass(frozen=True)
class BlockId:
    name: str
    size_bytes: int


@dataclass(frozen=True)
class ViewKind:
    signedness: Signedness
    width_bits: int

    @classmethod
    def parse(cls, label: str) -> "ViewKind":
        match = VIEW_RE.match((label or "").strip().upper())
        if not match:
            raise ValueError(f"Vue inconnue: {label!r}")
        signedness = Signedness(match.group(1))
        width = int(match.group(2))
        if signedness is Signedness.FLOAT and width not in (32, 64):
            raise ValueError(f"Vue flottante invalide: {label!r} (F32 ou F64 uniquement)")
        return cls(signedness, width)

    @property
    def label(self) -> str:
        return f"{self.signedness.value}{self.width_bits}"

    @property
    def element_size(self) -> int:
        return self.width_bits // 8

    @property
    def is_float(self) -> bool:
        return self.signedness is Signedness.FLOAT

    @property
    def is_signed(self) -> bool:
        return self.signedness is Signedness.SIGNED


@dataclass(frozen=True)
class ByteRange:
    block: BlockId
    byte_index: int
    element_size: int

    @property
    def addresses(self) -> range:
        return range(self.byte_index, self.byte_index + self.element_size)

    @property
    def end(self) -> int:
        return self.byte_index + self.element_size

    def contains(self, block_name: str, index: int) -> bool:
        return self.block.name == block_name and self.byte_index <= index < self.end

    def overlaps(self, other: "ByteRange") -> bool:
        return (
            self.block.name == other.block.name
            and self.byte_index < other.end
            and other.byte_index < self.end
        )


@dataclass(frozen=True)
class ActivationGuard:
    literals: tuple[tuple[str, bool], ...] = ()

    @property
    def variables(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.literals)

    def evaluate(self, cv: ControlValuation) -> bool:
        return all(cv[name] == polarity for name, polarity in self.literals)

    def extended(self, name: str, polarity: bool) -> "ActivationGuard":
        return ActivationGuard(self.literals + ((name, polarity),))

    def polarity_of(self, name: str) -> Optional[bool]:
        for var, polarity in self.literals:
            if var == name:
                return polarity
        return None


ALWAYS = ActivationGuard()


@dataclass(frozen=True)
class ControlVar:
    id: str
    read_event: str
    op: str
    constant: Number

    def holds(self, value: Number) -> bool:
        equal = value == self.constant
        return equal if self.op == "==" else not equal


@dataclass(frozen=True)
class MemoryEvent:
    id: str
    kind: EventKind
    order: Order
    range: ByteRange
    view: Optional[ViewKind]
    tear: bool = False
    activation: ActivationGuard = ALWAYS
    payload: Optional[Number] = None
    modify_op: Optional[str] = None
    thread: str = ""

    @property
    def is_read(self) -> bool:
        return self.kind in (EventKind.READ, EventKind.RMW)

    @property
    def is_write(self) -> bool:
        return self.kind in (EventKind.WRITE, EventKind.RMW)

    @property
    def is_init(self) -> bool:
        return self.order is Order.INIT

    @property
    def is_seq_cst(self) -> bool:
        return self.order is Order.SEQ_CST

    @property
    def access_text(self) -> str:
        view = self.view.label if self.view else "U8"
        return f"{self.range.block.name}-{view}[{self.range.byte_index}]"


@dataclass(frozen=True)
class Thread:
    name: str
    events: tuple[MemoryEvent, ...]


@dataclass(frozen=True)
class Program:
    blocks: tuple[BlockId, ...]
    threads: tuple[Thread, ...]
    control_vars: tuple[ControlVar, ...] = ()

    @cached_property
    def init_events(self) -> tuple[MemoryEvent, ...]:
        return tuple(
            MemoryEvent(
                id=f"ev{index + 1}",
                kind=EventKind.WRITE,
                order=Order.INIT,
                range=ByteRange(block, 0, block.size_bytes),
                view=None,
                payload=0,
                thread=INIT_THREAD,
            )
            for index, block in enumerate(self.blocks)
        )

    @cached_property
    def events(self) -> tuple[MemoryEvent, ...]:
        return self.init_events + tuple(e for thread in self.threads for e in thread.events)

    @cached_property
    def _index(self) -> dict[str, MemoryEvent]:
        return {e.id: e for e in self.events}

    @cached_property
    def agent_order(self) -> Relation2:
        return agent_order(self)

    def event(self, event_id: str) -> MemoryEvent:
        return self._index[event_id]

    def has_event(self, event_id: str) -> bool:
        return event_id in self._index

    def thread_of(self, event_id: str) -> str:
        return self._index[event_id].thread

    def init_event(self, block_name: str) -> MemoryEvent:
        for event in self.init_events:
            if event.range.block.name == block_name:
                return event
        raise KeyError(block_name)

    def output_events(self) -> tuple[MemoryEvent, ...]:
        return tuple(
            e
            for thread in self.threads
            for e in thread.events
            if e.is_read
        )

    def writers_of(self, block_name: str, index: int) -> tuple[MemoryEvent, ...]:
        return tuple(e for e in self.events if e.is_write and e.range.contains(block_name, index))


def agent_order(p: Program) -> Relation2:
    pairs = set()
    for thread in p.threads:
        ids = [e.id for e in thread.events]
        for position, first in enumerate(ids):
            for second in ids[position + 1 :]:
                pairs.add((first, second))
    return frozenset(pairs)


def active_events(p: Program, cv: ControlValuation) -> frozenset[str]:
    missing = [var.id for var in p.control_vars if var.id not in cv]
    if missing:
        raise IncompleteValuationError(missing)
    return frozenset(e.id for e in p.events if e.is_init or e.activation.evaluate(cv))


@dataclass
class Branch:
    condition: MemoryEvent
    control_var: ControlVar
    then_nodes: list = field(default_factory=list)
    else_nodes: list = field(default_factory=list)


def statement_tree(p: Program, events: Iterable[MemoryEvent]) -> list:
    """Regroup a flat, agent-ordered event list into statements and if-then-else branches.

    Each node is either a MemoryEvent or a Branch whose condition read is followed by the
    events guarded by the positive literal, then by those guarded by the negative one.
    """
    by_read = {cv.read_event: cv for cv in p.control_vars}
    pending = list(events)
    nodes: list = []
    position = 0
    while position < len(pending):
        event = pending[position]
        position += 1
        control = by_read.get(event.id)
        if control is None:
            nodes.append(event)
            continue
        then_events = []
        else_events = []
        while position < len(pending):
            polarity = pending[position].activation.polarity_of(control.id)
            if polarity is None:
                break
            (then_events if polarity else else_events).append(pending[position])
            position += 1
        nodes.append(
            Branch(
                condition=event,
                control_var=control,
                then_nodes=statement_tree(p, then_events),
                else_nodes=statement_tree(p, else_events),
            )
        )
    return nodes


class ProgramBuilder:
    def __init__(self, blocks: Iterable[BlockId]):
        self.blocks = tuple(blocks)
        self._counter = len(self.blocks)
        self._threads: dict[str, list[MemoryEvent]] = {}
        self._control_vars: list[ControlVar] = []

    def block(self, name: str) -> BlockId:
        for block in self.blocks:
            if block.name == name:
                return block
        raise KeyError(name)

    def add_thread(self, name: str) -> None:
        if name in self._threads or name == INIT_THREAD:
            raise ValueError(f"Thread en double: {name}")
        self._threads[name] = []

    def add_event(
        self,
        thread: str,
        kind: EventKind,
        order: Order,
        block_name: str,
        byte_index: int,
        view: ViewKind,
        tear: bool = False,
        guard: ActivationGuard = ALWAYS,
        payload: Optional[Number] = None,
        modify_op: Optional[str] = None,
    ) -> MemoryEvent:
        self._counter += 1
        event = MemoryEvent(
            id=f"ev{self._counter}",
            kind=kind,
            order=order,
            range=ByteRange(self.block(block_name), byte_index, view.element_size),
            view=view,
            tear=tear,
            activation=guard,
            payload=payload,
            modify_op=modify_op,
            thread=thread,
        )
        self._threads[thread].append(event)
        return event

    def add_control_var(self, read_event: str, op: str, constant: Number) -> ControlVar:
        control = ControlVar(f"cond{len(self._control_vars) + 1}", read_event, op, constant)
        self._control_vars.append(control)
        return control

    def build(self) -> Program:
        return Program(
            blocks=self.blocks,
            threads=tuple(Thread(name, tuple(events)) for name, events in self._threads.items()),
            control_vars=tuple(self._control_vars),
        )


def _event_to_dict(event: MemoryEvent) -> dict:
    return {
        "id": event.id,
        "kind": event.kind.value,
        "order": event.order.value,
        "tear": event.tear,
        "block": event.range.block.name,
        "byte_index": event.range.byte_index,
        "view": event.view.label if event.view else None,
        "guard": [[name, polarity] for name, polarity in event.activation.literals],
        "payload": event.payload,
        "modify_op": event.modify_op,
    }


def program_to_dict(p: Program) -> dict:
    return {
        "blocks": [{"name": b.name, "size": b.size_bytes} for b in p.blocks],
        "control_vars": [
            {"id": c.id, "read": c.read_event, "op": c.op, "constant": c.constant} for c in p.control_vars
        ],
        "threads": [
            {"name": t.name, "events": [_event_to_dict(e) for e in t.events]} for t in p.threads
        ],
    }


def program_from_dict(data: dict) -> Program:
    blocks = tuple(BlockId(b["name"], int(b["size"])) for b in data.get("blocks", []))
    by_name = {b.name: b for b in blocks}
    threads = []
    for thread in data.get("threads", []):
        events = []
        for raw in thread.get("events", []):
            view = ViewKind.parse(raw["view"])
            events.append(
                MemoryEvent(
                    id=raw["id"],
                    kind=EventKind(raw["kind"]),
                    order=Order(raw["order"]),
                    range=ByteRange(by_name[raw["block"]], int(raw["byte_index"]), view.element_size),
                    view=view,
                    tear=bool(raw.get("tear", False)),
                    activation=ActivationGuard(tuple((name, bool(pol)) for name, pol in raw.get("guard", []))),
                    payload=raw.get("payload"),
                    modify_op=raw.get("modify_op"),
                    thread=thread["name"],
                )
            )
        threads.append(Thread(thread["name"], tuple(events)))
    control_vars = tuple(
        ControlVar(c["id"], c["read"], c["op"], c["constant"]) for c in data.get("control_vars", [])
    )
    return Program(blocks=blocks, threads=tuple(threads), control_vars=control_vars)
