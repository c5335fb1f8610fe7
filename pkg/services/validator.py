from dataclasses import dataclass, field
from typing import List

from services.program_model import (
    CONDITION_OPS,
    ELEMENT_SIZES,
    INIT_THREAD,
    MODIFY_OPS,
    EventKind,
    Order,
    Program,
)


@dataclass(frozen=True)
class Violation:
    code: str
    event: str
    message: str

    def __str__(self) -> str:
        return f"[{self.code}] {self.event}: {self.message}" if self.event else f"[{self.code}] {self.message}"


@dataclass
class ValidationReport:
    violations: List[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def codes(self) -> set:
        return {v.code for v in self.violations}

    def add(self, code: str, event: str, message: str) -> None:
        self.violations.append(Violation(code, event, message))


def _check_blocks(p: Program, report: ValidationReport) -> None:
    seen = set()
    for block in p.blocks:
        if block.name in seen:
            report.add("block-name", "", f"bloc déclaré deux fois: {block.name}")
        seen.add(block.name)
        if block.size_bytes <= 0:
            report.add("block-size", "", f"taille de bloc invalide: {block.name} ({block.size_bytes})")


def _check_event(p: Program, event, report: ValidationReport) -> None:
    block_names = {b.name for b in p.blocks}
    if event.range.block.name not in block_names:
        report.add("unknown-block", event.id, f"bloc inconnu {event.range.block.name}")
        return
    if event.is_init or event.thread == INIT_THREAD:
        report.add("init", event.id, "seuls les événements implicites peuvent avoir l'ordre Init")
    if event.view is None:
        report.add("view", event.id, "vue manquante")
        return
    size = event.range.element_size
    if size not in ELEMENT_SIZES or size != event.view.element_size:
        report.add("element-size", event.id, f"taille d'élément {size} incompatible avec {event.view.label}")
    if event.view.is_float and event.view.width_bits not in (32, 64):
        report.add("view", event.id, f"vue flottante invalide {event.view.label}")
    if event.range.byte_index % max(size, 1) != 0:
        report.add("alignment", event.id, f"accès non aligné {event.access_text}")
    if event.range.byte_index < 0 or event.range.end > event.range.block.size_bytes:
        report.add("bounds", event.id, f"accès hors du bloc {event.access_text}")
    if event.kind is EventKind.WRITE and event.payload is None:
        report.add("payload", event.id, "écriture sans valeur")
    if event.kind is EventKind.READ and event.payload is not None:
        report.add("payload", event.id, "lecture avec une valeur")
    if event.kind is EventKind.RMW:
        if event.modify_op not in MODIFY_OPS:
            report.add("modify-op", event.id, f"opération RMW inconnue {event.modify_op!r}")
        if event.payload is None:
            report.add("payload", event.id, "RMW sans opérande")
        if event.view.is_float:
            report.add("modify-op", event.id, "RMW sur vue flottante")


def _check_guards(p: Program, report: ValidationReport) -> None:
    known = {c.id: c for c in p.control_vars}
    positions = {}
    for thread in p.threads:
        for position, event in enumerate(thread.events):
            positions[event.id] = (thread.name, position)

    for control in p.control_vars:
        if control.op not in CONDITION_OPS:
            report.add("condition-read", control.read_event, f"opérateur de condition inconnu {control.op!r}")
        if not p.has_event(control.read_event) or p.event(control.read_event).kind is not EventKind.READ:
            report.add("condition-read", control.read_event, f"{control.id} ne désigne pas une lecture")

    for thread in p.threads:
        for event in thread.events:
            names = event.activation.variables
            if len(set(names)) != len(names):
                report.add("guard-repeat", event.id, "variable de contrôle répétée dans la garde")
            for name in names:
                control = known.get(name)
                if control is None:
                    report.add("guard-unknown", event.id, f"variable de contrôle inconnue {name}")
                    continue
                origin = positions.get(control.read_event)
                if origin is None or origin[0] != thread.name or origin[1] >= positions[event.id][1]:
                    report.add(
                        "guard-order",
                        event.id,
                        f"{name} doit être lue plus tôt dans le même thread",
                    )


def validate_program(p: Program) -> ValidationReport:
    report = ValidationReport()
    _check_blocks(p, report)
    seen = set()
    for event in p.events:
        if event.id in seen:
            report.add("duplicate-id", event.id, "identifiant d'événement en double")
        seen.add(event.id)
    thread_names = set()
    for thread in p.threads:
        if thread.name in thread_names or thread.name == INIT_THREAD:
            report.add("thread-name", "", f"nom de thread invalide ou en double: {thread.name}")
        thread_names.add(thread.name)
        for event in thread.events:
            if event.thread != thread.name:
                report.add("thread-name", event.id, f"événement rattaché à {event.thread!r} au lieu de {thread.name!r}")
            _check_event(p, event, report)
    _check_guards(p, report)
    for event in p.init_events:
        if event.order is not Order.INIT:
            report.add("init", event.id, "événement initial sans ordre Init")
    return report
