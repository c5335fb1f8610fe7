import itertools
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

import z3
from sympy import And, Not, Or, Symbol
from sympy.logic import SOPform
from sympy.logic.boolalg import BooleanFalse, BooleanTrue

from services.execution_enumerator import ValidExecution, output_key
from services.predicates import Predicate, eval_cube_vector
from services.program_model import Program

Cube = Tuple[bool, ...]
Literal = Tuple[str, bool]


class UnknownObservedOutputError(ValueError):
    def __init__(self, outputs: Iterable[str]):
        self.outputs = sorted(outputs)
        super().__init__(
            "Sorties observées hors des exécutions valides (violation à traiter d'abord): " + ", ".join(self.outputs)
        )


@dataclass(frozen=True)
class Dnf:
    terms: Tuple[Tuple[Literal, ...], ...] = ()

    @classmethod
    def false(cls) -> "Dnf":
        return cls(())

    @classmethod
    def true(cls) -> "Dnf":
        return cls(((),))

    @property
    def is_false(self) -> bool:
        return not self.terms

    @property
    def is_true(self) -> bool:
        return any(not term for term in self.terms)

    def evaluate(self, assignment: Mapping[str, bool]) -> bool:
        return any(all(assignment[name] == polarity for name, polarity in term) for term in self.terms)

    def literals(self) -> Set[Literal]:
        return {literal for term in self.terms for literal in term}

    def variables(self) -> Set[str]:
        return {name for name, _ in self.literals()}

    def to_z3(self, variables: Mapping[str, z3.BoolRef]) -> z3.BoolRef:
        if not self.terms:
            return z3.BoolVal(False)
        clauses = []
        for term in self.terms:
            lits = [variables[name] if polarity else z3.Not(variables[name]) for name, polarity in term]
            clauses.append(z3.And(*lits) if lits else z3.BoolVal(True))
        return z3.Or(*clauses) if len(clauses) > 1 else clauses[0]

    def to_list(self) -> List[List[str]]:
        return [[format_literal(literal) for literal in term] for term in self.terms]

    def __str__(self) -> str:
        if self.is_false:
            return "false"
        if self.is_true:
            return "true"
        parts = []
        for term in self.terms:
            text = " & ".join(format_literal(literal) for literal in term)
            parts.append(f"({text})" if len(term) > 1 and len(self.terms) > 1 else text)
        return " | ".join(parts)


def format_literal(literal: Literal) -> str:
    name, polarity = literal
    return name if polarity else f"~{name}"


def _from_sympy(expr, names: Sequence[str]) -> Dnf:
    if isinstance(expr, BooleanTrue):
        return Dnf.true()
    if isinstance(expr, BooleanFalse):
        return Dnf.false()
    rank = {name: i for i, name in enumerate(names)}

    def _literal(arg) -> Literal:
        if isinstance(arg, Not):
            return (str(arg.args[0]), False)
        return (str(arg), True)

    def _term(arg) -> Tuple[Literal, ...]:
        args = arg.args if isinstance(arg, And) else (arg,)
        return tuple(sorted((_literal(a) for a in args), key=lambda lit: rank[lit[0]]))

    terms = [_term(arg) for arg in (expr.args if isinstance(expr, Or) else (expr,))]
    terms.sort(key=lambda term: [(rank[name], not polarity) for name, polarity in term])
    return Dnf(tuple(terms))


def minimize(cubes: Iterable[Cube], names: Sequence[str], dont_cares: Iterable[Cube] = ()) -> Dnf:
    """Two-level minimization of a cube set; cubes in ``dont_cares`` may be covered or not."""
    on_set = sorted({tuple(bool(b) for b in cube) for cube in cubes})
    if not on_set:
        return Dnf.false()
    if not names:
        return Dnf.true()
    symbols = [Symbol(name) for name in names]
    dc_set = sorted({tuple(bool(b) for b in cube) for cube in dont_cares} - set(on_set))
    expr = SOPform(
        symbols,
        [[int(b) for b in cube] for cube in on_set],
        [[int(b) for b in cube] for cube in dc_set],
    )
    return _from_sympy(expr, names)


def _reduced_columns(realized: Sequence[Cube], width: int) -> List[int]:
    """Predicate columns that still discriminate the realized cubes: constant columns are
    dropped, and a column equal or complementary to an earlier kept one is folded into it."""
    kept: List[int] = []
    seen: Set[Tuple[bool, ...]] = set()
    for index in range(width):
        column = tuple(cube[index] for cube in realized)
        if len(set(column)) < 2:
            continue
        complement = tuple(not value for value in column)
        if column in seen or complement in seen:
            continue
        seen.add(column)
        kept.append(index)
    return kept


def minimize_on_realized(on_cubes: Iterable[Cube], realized: Iterable[Cube], names: Sequence[str]) -> Dnf:
    on_cubes = sorted(set(on_cubes))
    if not on_cubes:
        return Dnf.false()
    realized = sorted(set(realized) | set(on_cubes))
    kept = _reduced_columns(realized, len(names))
    if not kept:
        return Dnf.true()

    def project(cube: Cube) -> Cube:
        return tuple(cube[i] for i in kept)

    realized_projected = {project(c) for c in realized}
    dont_cares = [
        cube for cube in itertools.product((False, True), repeat=len(kept)) if cube not in realized_projected
    ]
    return minimize((project(c) for c in on_cubes), [names[i] for i in kept], dont_cares)


def dnf_models(formula: z3.BoolRef, variables: Mapping[str, z3.BoolRef], names: Sequence[str]) -> List[Cube]:
    """All assignments of ``names`` satisfying ``formula`` (AllSAT with blocking clauses)."""
    solver = z3.Solver()
    solver.add(formula)
    models = []
    while solver.check() == z3.sat:
        model = solver.model()
        cube = tuple(z3.is_true(model.eval(variables[name], model_completion=True)) for name in names)
        models.append(cube)
        solver.add(z3.Or([variables[n] != z3.BoolVal(value) for n, value in zip(names, cube)]) if names else z3.BoolVal(False))
    return sorted(models)


def _valid(formula: z3.BoolRef) -> bool:
    solver = z3.Solver()
    solver.add(z3.Not(formula))
    return solver.check() == z3.unsat


def _satisfiable(formula: z3.BoolRef) -> bool:
    solver = z3.Solver()
    solver.add(formula)
    return solver.check() == z3.sat


@dataclass(frozen=True)
class ComparisonReport:
    obs_implies_unobs: bool
    unobs_implies_obs: bool
    obs_implies_not_unobs: bool
    intersection_satisfiable: bool
    equivalent: bool
    intersection: Dnf
    union: Dnf
    shared_literals: Tuple[str, ...]
    obs_only_literals: Tuple[str, ...]
    unobs_only_literals: Tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "obs_implies_unobs": self.obs_implies_unobs,
            "unobs_implies_obs": self.unobs_implies_obs,
            "obs_implies_not_unobs": self.obs_implies_not_unobs,
            "intersection_satisfiable": self.intersection_satisfiable,
            "equivalent": self.equivalent,
            "intersection": self.intersection.to_list(),
            "union": self.union.to_list(),
            "shared_literals": list(self.shared_literals),
            "obs_only_literals": list(self.obs_only_literals),
            "unobs_only_literals": list(self.unobs_only_literals),
        }


def compare(sigma_obs: Dnf, sigma_unobs: Dnf, names: Sequence[str]) -> ComparisonReport:
    variables = {name: z3.Bool(name) for name in names}
    obs = sigma_obs.to_z3(variables)
    unobs = sigma_unobs.to_z3(variables)
    used = [name for name in names if name in sigma_obs.variables() | sigma_unobs.variables()]

    intersection = minimize(dnf_models(z3.And(obs, unobs), variables, used), used)
    union = minimize(dnf_models(z3.Or(obs, unobs), variables, used), used)
    rank = {name: i for i, name in enumerate(names)}

    def _sorted(literals: Set[Literal]) -> Tuple[str, ...]:
        return tuple(format_literal(lit) for lit in sorted(literals, key=lambda lit: (rank[lit[0]], not lit[1])))

    obs_literals = sigma_obs.literals()
    unobs_literals = sigma_unobs.literals()
    return ComparisonReport(
        obs_implies_unobs=_valid(z3.Implies(obs, unobs)),
        unobs_implies_obs=_valid(z3.Implies(unobs, obs)),
        obs_implies_not_unobs=_valid(z3.Implies(obs, z3.Not(unobs))),
        intersection_satisfiable=_satisfiable(z3.And(obs, unobs)),
        equivalent=_valid(obs == unobs),
        intersection=intersection,
        union=union,
        shared_literals=_sorted(obs_literals & unobs_literals),
        obs_only_literals=_sorted(obs_literals - unobs_literals),
        unobs_only_literals=_sorted(unobs_literals - obs_literals),
    )


@dataclass
class CoverageResult:
    names: Tuple[str, ...]
    delta_obs: List[Cube]
    delta_unobs: List[Cube]
    sigma_obs: Dnf
    sigma_unobs: Dnf
    comparison: ComparisonReport
    matched_keys: List[str] = field(default_factory=list)
    unmatched_keys: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        def _cubes(cubes: List[Cube]) -> List[List[str]]:
            return [[format_literal((n, v)) for n, v in zip(self.names, cube)] for cube in cubes]

        return {
            "predicates": list(self.names),
            "matched": self.matched_keys,
            "unmatched": self.unmatched_keys,
            "delta_obs": _cubes(self.delta_obs),
            "delta_unobs": _cubes(self.delta_unobs),
            "sigma_obs": self.sigma_obs.to_list(),
            "sigma_unobs": self.sigma_unobs.to_list(),
            "sigma_obs_text": str(self.sigma_obs),
            "sigma_unobs_text": str(self.sigma_unobs),
            "comparison": self.comparison.to_dict(),
        }


def synthesize(
    program: Program,
    executions: Sequence[ValidExecution],
    observed_keys: Iterable[str],
    predicates: Sequence[Predicate],
    unrealized_as_dont_care: bool = True,
    logger: Optional[Callable[[str], None]] = None,
) -> CoverageResult:
    observed = set(observed_keys)
    keys = [output_key(program, execution) for execution in executions]
    unknown = observed - set(keys)
    if unknown:
        raise UnknownObservedOutputError(unknown)

    names = tuple(p.id for p in predicates)
    delta_obs: Set[Cube] = set()
    delta_unobs: Set[Cube] = set()
    for execution, key in zip(executions, keys):
        cube = eval_cube_vector(program, execution, predicates)
        (delta_obs if key in observed else delta_unobs).add(cube)

    if unrealized_as_dont_care:
        realized = delta_obs | delta_unobs
        sigma_obs = minimize_on_realized(delta_obs, realized, names)
        sigma_unobs = minimize_on_realized(delta_unobs, realized, names)
    else:
        sigma_obs = minimize(delta_obs, names)
        sigma_unobs = minimize(delta_unobs, names)
    if logger:
        logger(f"Couverture: {len(delta_obs)} cubes observés, {len(delta_unobs)} non observés")
        logger(f"Σ_OBS = {sigma_obs} ; Σ_UNOBS = {sigma_unobs}")

    return CoverageResult(
        names=names,
        delta_obs=sorted(delta_obs),
        delta_unobs=sorted(delta_unobs),
        sigma_obs=sigma_obs,
        sigma_unobs=sigma_unobs,
        comparison=compare(sigma_obs, sigma_unobs, names),
        matched_keys=sorted({k for k in keys if k in observed}),
        unmatched_keys=sorted({k for k in keys if k not in observed}),
    )


def truth_table(dnf: Dnf, names: Sequence[str]) -> Dict[Cube, bool]:
    return {
        cube: dnf.evaluate(dict(zip(names, cube)))
        for cube in itertools.product((False, True), repeat=len(names))
    }
