"""Straight-line reference evaluator used only by the tests.

No pruning: every per-byte source assignment is generated, happens-before is closed with a
plain loop and the memory order is searched over all permutations.
"""

import itertools

from services.program_model import active_events
from services.values import ValueDependencyCycleError, reconstruct_values


def _closure(pairs):
    closed = set(pairs)
    changed = True
    while changed:
        changed = False
        for a, b in list(closed):
            for c, d in list(closed):
                if b == c and (a, d) not in closed:
                    closed.add((a, d))
                    changed = True
    return closed


def valuations(program):
    names = [c.id for c in program.control_vars]
    for bits in itertools.product((False, True), repeat=len(names)):
        cv = dict(zip(names, bits))
        active = active_events(program, cv)
        if all(not cv[c.id] or c.read_event in active for c in program.control_vars):
            yield cv


def candidates(program, cv):
    active = active_events(program, cv)
    slots = []
    for event in program.events:
        if event.id in active and event.is_read:
            for index in event.range.addresses:
                slots.append((event.id, index))
    options = []
    for read_id, index in slots:
        block = program.event(read_id).range.block.name
        options.append(
            [
                w.id
                for w in program.events
                if w.id in active and w.is_write and w.id != read_id and w.range.contains(block, index)
            ]
        )
    for choice in itertools.product(*options):
        yield frozenset((read_id, writer, index) for (read_id, index), writer in zip(slots, choice))


def is_valid(program, cv, rbf):
    active = active_events(program, cv)
    ev = program.event
    rf = {(r, w) for r, w, _ in rbf}

    sw = set()
    for r, w in rf:
        if not ev(r).is_seq_cst:
            continue
        if ev(w).is_seq_cst and ev(w).range == ev(r).range:
            sw.add((w, r))
        if ev(w).is_init and all(ev(w2).is_init for r2, w2 in rf if r2 == r):
            sw.add((w, r))

    base = set()
    for thread in program.threads:
        ids = [e.id for e in thread.events if e.id in active]
        for i in range(len(ids)):
            for j in range(i + 1, len(ids)):
                base.add((ids[i], ids[j]))
    base |= sw
    for init in program.init_events:
        for e in program.events:
            if e.id in active and not e.is_init and e.range.overlaps(init.range):
                base.add((init.id, e.id))
    hb = _closure(base)
    if any(a == b for a, b in hb):
        return False

    for r, w, i in rbf:
        if (r, w) in hb:
            return False
        block = ev(r).range.block.name
        for v in program.events:
            if v.id in active and v.is_write and v.id not in (r, w) and v.range.contains(block, i):
                if (w, v.id) in hb and (v.id, r) in hb:
                    return False

    for r in {r for r, _ in rf}:
        if ev(r).tear:
            continue
        same = {w for r2, w in rf if r2 == r and not ev(w).tear and ev(w).range == ev(r).range}
        if len(same) > 1:
            return False

    sc = [e for e in active if ev(e).is_seq_cst]
    found = not sc
    for order in itertools.permutations(sc):
        pos = {e: k for k, e in enumerate(order)}
        if any(pos[a] > pos[b] for a, b in hb if a in pos and b in pos):
            continue
        ok = True
        for w, r in sw:
            if w not in pos or r not in pos:
                continue
            for v in sc:
                if v in (w, r) or not ev(v).is_write or not ev(v).range.overlaps(ev(r).range):
                    continue
                if pos[w] < pos[v] < pos[r]:
                    ok = False
        if ok:
            found = True
            break
    return found


def executions(program):
    """Set of (cv items, rbf) for every valid, branch-consistent execution."""
    result = set()
    for cv in valuations(program):
        for rbf in candidates(program, cv):
            if not is_valid(program, cv, rbf):
                continue
            try:
                values = reconstruct_values(program, cv, rbf)
            except ValueDependencyCycleError:
                continue
            consistent = all(
                c.read_event not in values or c.holds(values[c.read_event]) == cv[c.id]
                for c in program.control_vars
            )
            if consistent:
                result.add((tuple(sorted(cv.items())), rbf))
    return result
