"""Moment-matrix relaxations bounding outcome predictability in games.

The quantum set is relaxed by a hierarchy of moment matrices indexed by
a list of operator words.  Binary outcomes are represented by a single
outcome-0 projector per (party, input); the outcome-1 operator is
identity minus it.  A word is a product of projectors, stored as one
subword per party (parties commute, same-party factors do not).

The moment matrix M[i,j] = <w_i^dagger w_j> is real symmetric positive
semidefinite, with algebraically equal entries (idempotence,
commutation, adjoint symmetry) tied together.  Maximizing a linear
functional of the moments subject to a success-probability floor gives
an upper bound on how predictable any single party's outcome can be,
which is the quantity that drives all the amplification curves.

Levels: Q1 (identity + single projectors), Q1+AB (plus cross-party
pairs), Q1+ABC (cross-party pairs plus one-projector-per-party
triples), Q2 (all words of length <= 2), Q2+ABC (Q2 plus the triples).
Q1+ABC must include the pair words: without them the relaxation admits
pseudo-moment matrices whose "win probability" exceeds 1, and the
success floor loses all force.  With them, every outcome probability is
a PSD quadratic form of the moment matrix, so win probabilities stay in
[0, 1] and a success floor of exactly 1 pins the matrix to the face
where every losing outcome has probability zero.  Queries at floor 1
are solved on that face directly (facial reduction): the unreduced
problem has no interior there and interior-point accuracy collapses.

Q2 and Q2+ABC exceed the smallest useful level and exist for
cross-checking that bounds tighten down the hierarchy.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

import numpy as np

from .games import GameSpec, InputDistribution
from .sdp import (
    Constraint,
    SdpProblem,
    SdpSolution,
    SolverSettings,
    STATUS_INFEASIBLE,
    STATUS_OPTIMAL,
    STATUS_UNBOUNDED,
    solve,
)
from .sources import ExtremalSource, canonical_mermin_source
from .strategies import DeterministicStrategy, biased_mermin_classical_value
from .games import input_distribution_from_source, mermin_game

LEVEL_Q1 = "Q1"
LEVEL_Q1_AB = "Q1+AB"
LEVEL_Q1_ABC = "Q1+ABC"
LEVEL_Q2 = "Q2"
LEVEL_Q2_ABC = "Q2+ABC"
LEVELS = (LEVEL_Q1, LEVEL_Q1_AB, LEVEL_Q1_ABC, LEVEL_Q2, LEVEL_Q2_ABC)

# A word is a tuple over parties; each per-party subword is an ordered
# tuple of input indices (outcome-0 projectors), adjacent-duplicate free.
Word = tuple[tuple[int, ...], ...]
Functional = dict[int, float]


class UnsupportedScenarioError(ValueError):
    """Scenario outside the projector-per-input representation."""


class MomentNotAvailableError(ValueError):
    """Requested functional needs a moment the basis does not generate."""


class SolverFailureError(RuntimeError):
    """The SDP solver failed to reach a conclusive status."""


class InfeasibleSuccessError(RuntimeError):
    """The success floor exceeds the scenario's quantum maximum."""


class BracketingError(RuntimeError):
    """Bisection endpoints do not bracket the requested threshold."""


@dataclass(frozen=True)
class Scenario:
    n_parties: int
    input_cardinalities: tuple[int, ...]
    output_cardinalities: tuple[int, ...]

    @classmethod
    def from_game(cls, game: GameSpec) -> "Scenario":
        return cls(game.n_parties, tuple(game.input_cardinalities), tuple(game.output_cardinalities))


@dataclass(frozen=True)
class MonomialBasis:
    scenario: Scenario
    level: str
    words: tuple[Word, ...]

    def __len__(self) -> int:
        return len(self.words)


@dataclass(frozen=True)
class MomentMatrixStructure:
    basis: MonomialBasis
    moment_index: Mapping[Word, int]
    cell_ids: np.ndarray
    id_cells: tuple[tuple[tuple[int, int], ...], ...]
    unit_id: int

    @property
    def dimension(self) -> int:
        return len(self.basis.words)

    @property
    def n_moments(self) -> int:
        return len(self.id_cells)


@dataclass(frozen=True)
class RandomnessBoundQuery:
    game: GameSpec
    dist: InputDistribution
    success_floor: float
    target: tuple[int, int, int]

    def __post_init__(self) -> None:
        if not 0.0 <= self.success_floor <= 1.0:
            raise ValueError(f"success floor must lie in [0, 1], got {self.success_floor}")
        party, x, outcome = self.target
        if not 0 <= party < self.game.n_parties:
            raise ValueError(f"target party {party} out of range")
        if not 0 <= x < self.game.input_cardinalities[party]:
            raise ValueError(f"target input {x} out of range for party {party}")
        if not 0 <= outcome < self.game.output_cardinalities[party]:
            raise ValueError(f"target outcome {outcome} out of range for party {party}")


@dataclass(frozen=True)
class BoundResult:
    value: Optional[float]
    status: str
    solution: SdpSolution


def _identity_word(n_parties: int) -> Word:
    return tuple(() for _ in range(n_parties))


def _single(n_parties: int, party: int, x: int) -> Word:
    return tuple((x,) if p == party else () for p in range(n_parties))


def build_basis(scenario: Scenario, level: str) -> MonomialBasis:
    """Canonical ordered word list for the requested hierarchy level."""
    if level not in LEVELS:
        raise ValueError(f"unknown level {level!r}, expected one of {LEVELS}")
    if any(c != 2 for c in scenario.output_cardinalities):
        raise UnsupportedScenarioError(
            "moment bases use one outcome-0 projector per (party, input); "
            f"outputs {scenario.output_cardinalities} are not binary"
        )
    n = scenario.n_parties
    if level in (LEVEL_Q1_ABC, LEVEL_Q2_ABC) and n != 3:
        raise UnsupportedScenarioError(f"level {level} requires 3 parties, scenario has {n}")
    if level == LEVEL_Q1_AB and n < 2:
        raise UnsupportedScenarioError(f"level {level} requires at least 2 parties")

    words: list[Word] = [_identity_word(n)]
    for p in range(n):
        for x in range(scenario.input_cardinalities[p]):
            words.append(_single(n, p, x))

    def cross_pairs() -> Iterable[Word]:
        for p, q in itertools.combinations(range(n), 2):
            for x in range(scenario.input_cardinalities[p]):
                for y in range(scenario.input_cardinalities[q]):
                    w = list(_identity_word(n))
                    w[p], w[q] = (x,), (y,)
                    yield tuple(w)

    def same_party_pairs() -> Iterable[Word]:
        for p in range(n):
            for x1, x2 in itertools.permutations(range(scenario.input_cardinalities[p]), 2):
                w = list(_identity_word(n))
                w[p] = (x1, x2)
                yield tuple(w)

    def triples() -> Iterable[Word]:
        for xs in itertools.product(*(range(scenario.input_cardinalities[p]) for p in range(3))):
            yield tuple((x,) for x in xs)

    if level == LEVEL_Q1_AB:
        words.extend(cross_pairs())
    elif level == LEVEL_Q1_ABC:
        words.extend(cross_pairs())
        words.extend(triples())
    elif level == LEVEL_Q2:
        words.extend(same_party_pairs())
        words.extend(cross_pairs())
    elif level == LEVEL_Q2_ABC:
        words.extend(same_party_pairs())
        words.extend(cross_pairs())
        words.extend(triples())
    return MonomialBasis(scenario, level, tuple(words))


def _collapse(seq: Iterable[int]) -> tuple[int, ...]:
    # projector^2 = projector: merge adjacent duplicates in one pass
    out: list[int] = []
    for s in seq:
        if not out or out[-1] != s:
            out.append(s)
    return tuple(out)


def _word_adjoint(word: Word) -> Word:
    return tuple(tuple(reversed(sub)) for sub in word)


def _cell_word(w_i: Word, w_j: Word) -> Word:
    """Reduced word of w_i^dagger w_j, party by party."""
    return tuple(
        _collapse(tuple(reversed(si)) + sj) for si, sj in zip(w_i, w_j)
    )


def canonical_moment(word: Word) -> Word:
    """Representative of {word, adjoint}: real moment matrices make the
    two moments equal, so they share one variable."""
    adj = _word_adjoint(word)
    return word if word <= adj else adj


def build_moment_structure(basis: MonomialBasis) -> MomentMatrixStructure:
    m = len(basis.words)
    moment_index: dict[Word, int] = {}
    cells_of: list[list[tuple[int, int]]] = []
    cell_ids = np.empty((m, m), dtype=int)
    for i in range(m):
        for j in range(i, m):
            word = canonical_moment(_cell_word(basis.words[i], basis.words[j]))
            idx = moment_index.get(word)
            if idx is None:
                idx = len(moment_index)
                moment_index[word] = idx
                cells_of.append([])
            cells_of[idx].append((i, j))
            cell_ids[i, j] = cell_ids[j, i] = idx
    unit = moment_index[_identity_word(basis.scenario.n_parties)]
    return MomentMatrixStructure(
        basis=basis,
        moment_index=dict(moment_index),
        cell_ids=cell_ids,
        id_cells=tuple(tuple(c) for c in cells_of),
        unit_id=unit,
    )


def _moment_id(structure: MomentMatrixStructure, word: Word) -> int:
    idx = structure.moment_index.get(canonical_moment(word))
    if idx is None:
        raise MomentNotAvailableError(
            f"moment {word} is not generated by basis level {structure.basis.level}"
        )
    return idx


def outcome_probability_functional(
    structure: MomentMatrixStructure, outputs: tuple[int, ...], inputs: tuple[int, ...]
) -> Functional:
    """Coefficients over moment ids expressing P(outputs | inputs).

    Outcome-1 operators expand as identity minus the projector, so the
    probability is an inclusion-exclusion sum over the parties that
    answered 1.
    """
    n = structure.basis.scenario.n_parties
    if len(outputs) != n or len(inputs) != n:
        raise ValueError("outputs and inputs must have one entry per party")
    zeros = [p for p in range(n) if outputs[p] == 0]
    ones = [p for p in range(n) if outputs[p] == 1]
    functional: Functional = {}
    for k in range(len(ones) + 1):
        for subset in itertools.combinations(ones, k):
            parties = sorted(zeros + list(subset))
            word = tuple((inputs[p],) if p in parties else () for p in range(n))
            idx = _moment_id(structure, word)
            functional[idx] = functional.get(idx, 0.0) + (-1.0) ** k
    return functional


def marginal_functional(
    structure: MomentMatrixStructure, party: int, x: int, outcome: int
) -> Functional:
    """P(party answers `outcome` on input x), as moment coefficients."""
    single = _moment_id(structure, _single(structure.basis.scenario.n_parties, party, x))
    if outcome == 0:
        return {single: 1.0}
    return {structure.unit_id: 1.0, single: -1.0}


def success_functional(
    structure: MomentMatrixStructure, game: GameSpec, dist: InputDistribution
) -> Functional:
    """Win probability under `dist` as moment coefficients."""
    total: Functional = {}
    for x in game.admissible_inputs():
        px = dist.prob(x)
        if px == 0.0:
            continue
        for o in game.all_outputs():
            if not game.win(x, o):
                continue
            for idx, coeff in outcome_probability_functional(structure, o, x).items():
                total[idx] = total.get(idx, 0.0) + px * coeff
    return {idx: c for idx, c in total.items() if c != 0.0}


def _functional_matrix(structure: MomentMatrixStructure, functional: Functional) -> np.ndarray:
    """Symmetric matrix F with <F, M> = functional(moments of M).

    Each id's coefficient sits on its first (representative) cell; ties
    make the placement immaterial.
    """
    m = structure.dimension
    F = np.zeros((m, m))
    for idx, coeff in functional.items():
        i, j = structure.id_cells[idx][0]
        if i == j:
            F[i, i] += coeff
        else:
            F[i, j] += coeff / 2.0
            F[j, i] += coeff / 2.0
    return F


def _cell_matrix(m: int, i: int, j: int) -> np.ndarray:
    M = np.zeros((m, m))
    if i == j:
        M[i, i] = 1.0
    else:
        M[i, j] = M[j, i] = 0.5
    return M


def compile_problem(
    structure: MomentMatrixStructure,
    objective: Functional,
    success: Optional[Functional] = None,
    success_floor: float = 0.0,
) -> SdpProblem:
    """Assemble the moment SDP: maximize `objective` over PSD moment
    matrices with tied equal cells, unit normalization, and optionally a
    success-probability floor."""
    m = structure.dimension
    constraints: list[Constraint] = []
    i0, j0 = structure.id_cells[structure.unit_id][0]
    constraints.append(Constraint(_cell_matrix(m, i0, j0), 1.0, "eq"))
    for cells in structure.id_cells:
        ri, rj = cells[0]
        rep = _cell_matrix(m, ri, rj)
        for (i, j) in cells[1:]:
            constraints.append(Constraint(rep - _cell_matrix(m, i, j), 0.0, "eq"))
    if success is not None:
        constraints.append(
            Constraint(_functional_matrix(structure, success), float(success_floor), "geq")
        )
    return SdpProblem(_functional_matrix(structure, objective), tuple(constraints))


def structure_for(game: GameSpec, level: str) -> MomentMatrixStructure:
    return build_moment_structure(build_basis(Scenario.from_game(game), level))


def outcome_operator_vector(
    structure: MomentMatrixStructure, outputs: tuple[int, ...], inputs: tuple[int, ...]
) -> np.ndarray:
    """Expansion of the joint outcome operator over the basis words.

    The product of per-party outcome operators (projector for outcome 0,
    identity minus projector for outcome 1) is itself a projector Q, and
    P(outputs|inputs) = <Q> = v^T M v with this vector v, provided every
    subset word lives in the basis.
    """
    n = structure.basis.scenario.n_parties
    index = {w: i for i, w in enumerate(structure.basis.words)}
    zeros = [p for p in range(n) if outputs[p] == 0]
    ones = [p for p in range(n) if outputs[p] == 1]
    vec = np.zeros(len(structure.basis.words))
    for k in range(len(ones) + 1):
        for subset in itertools.combinations(ones, k):
            parties = sorted(zeros + list(subset))
            word = tuple((inputs[p],) if p in parties else () for p in range(n))
            if word not in index:
                raise MomentNotAvailableError(
                    f"word {word} is not a basis word at level {structure.basis.level}"
                )
            vec[index[word]] += (-1.0) ** k
    return vec


def success_face_basis(
    structure: MomentMatrixStructure, game: GameSpec, dist: InputDistribution
) -> np.ndarray:
    """Orthonormal basis V of the face where the win probability is 1.

    Win probabilities cannot exceed 1 on this relaxation (each losing
    probability is a PSD quadratic form), so success = 1 forces
    M v = 0 for every losing outcome vector v; feasible matrices are
    exactly M = V Y V^T with Y PSD.  Columns of V span the orthogonal
    complement of the losing vectors.
    """
    rows = []
    for x in game.admissible_inputs():
        if dist.prob(x) <= 0.0:
            continue
        for o in game.all_outputs():
            if not game.win(x, o):
                rows.append(outcome_operator_vector(structure, o, x))
    if not rows:
        return np.eye(structure.dimension)
    N = np.vstack(rows)
    _, s, vt = np.linalg.svd(N)
    rank = int(np.sum(s > max(1.0, s[0]) * 1e-10))
    return vt[rank:].T.copy()


def _independent_reduced_constraints(
    structure: MomentMatrixStructure, V: np.ndarray
) -> tuple[Constraint, ...]:
    """Unit and tie constraints projected onto the face, with linearly
    dependent rows dropped (dependence includes the right-hand side, so
    a dropped row is automatically consistent)."""
    d = V.shape[1]
    pairs: list[tuple[np.ndarray, float]] = []
    i0, j0 = structure.id_cells[structure.unit_id][0]
    m = structure.dimension
    pairs.append((_cell_matrix(m, i0, j0), 1.0))
    for cells in structure.id_cells:
        ri, rj = cells[0]
        rep = _cell_matrix(m, ri, rj)
        for (i, j) in cells[1:]:
            pairs.append((rep - _cell_matrix(m, i, j), 0.0))

    kept: list[Constraint] = []
    ortho: list[np.ndarray] = []
    for A, b in pairs:
        Ar = V.T @ A @ V
        Ar = (Ar + Ar.T) / 2.0
        v = np.concatenate([Ar.ravel(), [b]])
        r = v.copy()
        for q in ortho:
            r -= (q @ r) * q
        for q in ortho:
            # second Gram-Schmidt pass for numerical hygiene
            r -= (q @ r) * q
        norm = float(np.linalg.norm(r))
        if norm > 1e-10 * max(1.0, float(np.linalg.norm(v))):
            ortho.append(r / norm)
            kept.append(Constraint(Ar, b, "eq"))
    return tuple(kept)


def _empty_face_solution() -> SdpSolution:
    return SdpSolution(
        X=np.zeros((0, 0)),
        objective_value=float("nan"),
        status=STATUS_INFEASIBLE,
        duality_gap=float("nan"),
        min_eigenvalue=0.0,
        max_constraint_residual=0.0,
        y=np.zeros(0),
        Z_dual=np.zeros((0, 0)),
        iterations=0,
        certificate={"kind": "empty_face"},
    )


class SuccessFaceContext:
    """Reusable facial reduction data for success-floor-1 queries."""

    def __init__(self, structure: MomentMatrixStructure, game: GameSpec, dist: InputDistribution):
        self.structure = structure
        self.V = success_face_basis(structure, game, dist)
        self.constraints = (
            _independent_reduced_constraints(structure, self.V) if self.V.shape[1] else ()
        )

    def bound(self, objective: Functional, settings: SolverSettings) -> SdpSolution:
        if self.V.shape[1] == 0:
            return _empty_face_solution()
        F = _functional_matrix(self.structure, objective)
        C = self.V.T @ F @ self.V
        return solve(SdpProblem((C + C.T) / 2.0, self.constraints), settings)

    def lift(self, Y: np.ndarray) -> np.ndarray:
        """Moment matrix corresponding to a reduced solution."""
        return self.V @ Y @ self.V.T


FULL_SUCCESS_FLOOR = 1.0 - 1e-12


def max_outcome_probability(
    query: RandomnessBoundQuery,
    level: str = LEVEL_Q1_ABC,
    settings: SolverSettings = SolverSettings(),
    structure: Optional[MomentMatrixStructure] = None,
    face: Optional[SuccessFaceContext] = None,
) -> BoundResult:
    """Upper bound on P(target outcome | target input) over all quantum
    behaviors winning with probability at least the success floor.

    Floors at 1 are solved on the face where every losing probability
    vanishes; the unreduced problem has no interior there and loses the
    interior-point method several digits of accuracy.
    """
    if structure is None:
        structure = structure_for(query.game, level)
    party, x, outcome = query.target
    objective = marginal_functional(structure, party, x, outcome)
    if query.success_floor >= FULL_SUCCESS_FLOOR:
        if face is None:
            face = SuccessFaceContext(structure, query.game, query.dist)
        solution = face.bound(objective, settings)
    else:
        success = success_functional(structure, query.game, query.dist)
        problem = compile_problem(structure, objective, success, query.success_floor)
        solution = solve(problem, settings)
    if solution.status == STATUS_OPTIMAL:
        return BoundResult(float(solution.objective_value), solution.status, solution)
    if solution.status == STATUS_INFEASIBLE:
        return BoundResult(None, solution.status, solution)
    raise SolverFailureError(
        f"solver returned {solution.status} for target {query.target} "
        f"at success floor {query.success_floor}"
    )


def max_success_probability(
    game: GameSpec,
    dist: InputDistribution,
    level: str = LEVEL_Q1_ABC,
    settings: SolverSettings = SolverSettings(),
) -> float:
    """Upper bound on the quantum game value under `dist`."""
    structure = structure_for(game, level)
    problem = compile_problem(structure, success_functional(structure, game, dist))
    solution = solve(problem, settings)
    if solution.status != STATUS_OPTIMAL:
        raise SolverFailureError(f"solver returned {solution.status} for game value")
    return float(solution.objective_value)


def p_max(
    game: GameSpec,
    dist: InputDistribution,
    success_floor: float,
    level: str = LEVEL_Q1_ABC,
    settings: SolverSettings = SolverSettings(),
) -> float:
    """Worst-case single-outcome predictability at the given success floor.

    Maximizes over every (party, input, outcome) target; all targets are
    solved, symmetry is exploited only as a test-time cross-check.
    """
    structure = structure_for(game, level)
    face = None
    if success_floor >= FULL_SUCCESS_FLOOR:
        face = SuccessFaceContext(structure, game, dist)
    best = -np.inf
    for party in range(game.n_parties):
        for x in range(game.input_cardinalities[party]):
            for outcome in range(game.output_cardinalities[party]):
                query = RandomnessBoundQuery(game, dist, success_floor, (party, x, outcome))
                result = max_outcome_probability(query, level, settings, structure, face)
                if result.status == STATUS_INFEASIBLE:
                    raise InfeasibleSuccessError(
                        f"success floor {success_floor} exceeds the quantum maximum"
                    )
                best = max(best, result.value)
    return float(best)


def eps_prime(
    epsilon: float,
    success_floor: float,
    level: str = LEVEL_Q1_ABC,
    settings: SolverSettings = SolverSettings(),
) -> float:
    """Output bias bound for the tripartite protocol at the given
    observed success probability: p_max - 1/2, clamped to [0, 1/2]."""
    game = mermin_game()
    dist = input_distribution_from_source(game, canonical_mermin_source(epsilon))
    bound = p_max(game, dist, success_floor, level, settings)
    return float(min(0.5, max(0.0, bound - 0.5)))


def critical_success(
    epsilon: float,
    target_eps_prime: float,
    tol: float = 1e-4,
    level: str = LEVEL_Q1_ABC,
) -> float:
    """Smallest success floor whose output-bias bound is below target.

    Bisection over [biased classical value, 1].  The lower endpoint
    always fails (a deterministic strategy is fully predictable there);
    if the upper endpoint does not satisfy the target the bracket is
    invalid and BracketingError is raised.  Infeasible probes shrink the
    bracket from above.  SDP tolerance runs one order tighter than the
    bisection tolerance.  A tol coarser than the classical-to-1 gap
    cannot certify any floor below 1 and raises BracketingError.
    """
    if not 0.0 < target_eps_prime <= 0.5:
        raise ValueError(f"target bias must lie in (0, 1/2], got {target_eps_prime}")
    if not 0.0 <= epsilon < 0.5:
        raise ValueError(f"epsilon must lie in [0, 1/2), got {epsilon}")
    settings = SolverSettings(tolerance=tol / 10.0)

    def bias_below_target(p_s: float) -> Optional[bool]:
        try:
            return eps_prime(epsilon, p_s, level, settings) < target_eps_prime
        except InfeasibleSuccessError:
            return None

    lo = biased_mermin_classical_value(epsilon)
    hi = 1.0
    ok_hi = bias_below_target(hi)
    if ok_hi is None:
        # Quantum maximum below 1 would be a scenario bug for this game;
        # shrink until feasible so the bracket is still usable.
        while hi - lo > tol:
            hi = (lo + hi) / 2.0
            ok_hi = bias_below_target(hi)
            if ok_hi is not None:
                break
    if ok_hi is False:
        raise BracketingError(
            f"output bias bound at success floor 1 is not below {target_eps_prime}"
        )
    while hi - lo > tol:
        mid = (lo + hi) / 2.0
        ok = bias_below_target(mid)
        if ok is False:
            lo = mid
        else:
            # ok True, or infeasible probe (threshold must be below mid)
            hi = mid
    if hi >= 1.0:
        # the bracket closed without ever separating the answer from 1
        # (tol is coarser than the classical-to-1 gap at this bias)
        raise BracketingError(
            f"tolerance {tol} cannot certify a critical success below 1 "
            f"at epsilon {epsilon}; tighten tol below {1.0 - lo:.3g}"
        )
    return float(hi)


def moment_vector_of_deterministic(
    structure: MomentMatrixStructure, strategy: DeterministicStrategy
) -> np.ndarray:
    """Basis-word values of a deterministic strategy (projector value is
    1 when the strategy answers 0 on that input, else 0)."""

    def word_value(word: Word) -> float:
        v = 1.0
        for party, sub in enumerate(word):
            for x in sub:
                v *= 1.0 if strategy.output(party, x) == 0 else 0.0
        return v

    return np.array([word_value(w) for w in structure.basis.words])


def moment_matrix_of_deterministic(
    structure: MomentMatrixStructure, strategy: DeterministicStrategy
) -> np.ndarray:
    """Rank-1 PSD moment matrix embedding a deterministic strategy; it
    satisfies every tie constraint and reproduces the strategy's
    behavior under the outcome functionals."""
    v = moment_vector_of_deterministic(structure, strategy)
    return np.outer(v, v)


def evaluate_functional(functional: Functional, moments: Mapping[int, float]) -> float:
    return float(sum(coeff * moments[idx] for idx, coeff in functional.items()))


def moments_of_matrix(structure: MomentMatrixStructure, M: np.ndarray) -> dict[int, float]:
    """Read one value per moment id from a (consistent) moment matrix."""
    out = {}
    for idx, cells in enumerate(structure.id_cells):
        i, j = cells[0]
        out[idx] = float(M[i, j])
    return out
