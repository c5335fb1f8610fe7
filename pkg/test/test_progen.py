import pytest

from services.program_generator import (
    GenConfig,
    SampleSizeError,
    alphabet,
    enumerate_programs,
    sample_corpus,
    space_size,
)
from services.program_model import BlockId, EventKind, Order, ViewKind
from services.program_parser import emit_source, parse
from services.validator import validate_program


def tiny_config(event_count: int, **overrides) -> GenConfig:
    options = dict(
        event_count=event_count,
        blocks=(BlockId("x", 1),),
        orders=(Order.UNORDERED,),
        kinds=(EventKind.READ, EventKind.WRITE),
    )
    options.update(overrides)
    return GenConfig(**options)


def test_single_event_programs():
    programs = list(enumerate_programs(tiny_config(1, max_threads=1)))
    assert len(programs) == 2
    assert {p.events[1].kind for p in programs} == {EventKind.READ, EventKind.WRITE}


def test_thread_permutations_are_deduplicated():
    assert len(list(enumerate_programs(tiny_config(2)))) == 7
    assert len(list(enumerate_programs(tiny_config(2, dedupe=False)))) == 8


def test_same_size_blocks_are_interchangeable():
    cfg = tiny_config(2, blocks=(BlockId("x", 1), BlockId("y", 1)), kinds=(EventKind.WRITE,))
    sources = {emit_source(p) for p in enumerate_programs(cfg)}
    assert len(sources) == 4


@pytest.mark.parametrize(
    "cfg",
    [
        tiny_config(3, dedupe=False),
        tiny_config(3, dedupe=False, allow_branches=True),
        tiny_config(2, dedupe=False, blocks=(BlockId("x", 2),), orders=(Order.UNORDERED, Order.SEQ_CST)),
        tiny_config(4, dedupe=False, max_threads=3, allow_branches=True),
    ],
)
def test_space_size_matches_enumeration(cfg):
    assert space_size(cfg) == sum(1 for _ in enumerate_programs(cfg))


def test_alphabet_respects_alignment():
    cfg = tiny_config(1, blocks=(BlockId("x", 4),), views=(ViewKind.parse("I16"),))
    assert sorted(slot[4] for slot in alphabet(cfg) if slot[0] == "R") == [0, 2]


def test_generated_programs_are_valid_and_reparse():
    for program in enumerate_programs(tiny_config(3, allow_branches=True)):
        assert validate_program(program).ok
        assert parse(emit_source(program)) == program


def test_sampling_is_deterministic():
    cfg = tiny_config(3, allow_branches=True)
    first = [emit_source(p) for p in sample_corpus(cfg, 10, seed=3)]
    second = [emit_source(p) for p in sample_corpus(cfg, 10, seed=3)]
    assert first == second


def test_sample_of_two_hundred_distinct_programs():
    cfg = GenConfig(event_count=5)
    programs = sample_corpus(cfg, 200, seed=0)
    assert len({emit_source(p) for p in programs}) == 200
    assert all(len(p.events) == 6 for p in programs)


def test_random_sampling_beyond_exact_limit():
    cfg = GenConfig(event_count=7, kinds=(EventKind.READ, EventKind.WRITE, EventKind.RMW))
    programs = sample_corpus(cfg, 20, seed=1)
    assert len({emit_source(p) for p in programs}) == 20


def test_oversized_sample_is_refused():
    with pytest.raises(SampleSizeError):
        sample_corpus(tiny_config(1, max_threads=1), 3)


def test_invalid_configuration():
    with pytest.raises(ValueError):
        GenConfig(event_count=0)
    with pytest.raises(ValueError):
        tiny_config(1, orders=(Order.INIT,))
