import itertools
from functools import reduce

import numpy as np
import pytest

from randamp import npa
from randamp.games import (
    chsh_game,
    input_distribution_from_source,
    magic_square_game,
    mermin_game,
    uniform_distribution,
)
from randamp.npa import (
    LEVEL_Q1,
    LEVEL_Q1_AB,
    LEVEL_Q1_ABC,
    LEVEL_Q2,
    LEVEL_Q2_ABC,
    BracketingError,
    InfeasibleSuccessError,
    MomentNotAvailableError,
    RandomnessBoundQuery,
    Scenario,
    SuccessFaceContext,
    UnsupportedScenarioError,
    build_basis,
    build_moment_structure,
    critical_success,
    eps_prime,
    evaluate_functional,
    max_outcome_probability,
    max_success_probability,
    moment_matrix_of_deterministic,
    moments_of_matrix,
    outcome_probability_functional,
    outcome_operator_vector,
    p_max,
    structure_for,
    success_face_basis,
    success_functional,
)
from randamp.sdp import SolverSettings
from randamp.sources import canonical_mermin_source
from randamp.strategies import (
    behavior_of_deterministic,
    enumerate_deterministic,
    ghz_mermin_strategy,
)

SWEEP_SETTINGS = SolverSettings(tolerance=1e-6)


def test_basis_word_counts():
    tri = Scenario(3, (2, 2, 2), (2, 2, 2))
    duo = Scenario(2, (2, 2), (2, 2))
    assert len(build_basis(tri, LEVEL_Q1)) == 7
    assert len(build_basis(tri, LEVEL_Q1_AB)) == 19
    assert len(build_basis(tri, LEVEL_Q1_ABC)) == 27
    assert len(build_basis(tri, LEVEL_Q2)) == 25
    assert len(build_basis(tri, LEVEL_Q2_ABC)) == 33
    assert len(build_basis(duo, LEVEL_Q1)) == 5
    assert len(build_basis(duo, LEVEL_Q2)) == 13


def test_basis_words_are_canonical():
    tri = Scenario(3, (2, 2, 2), (2, 2, 2))
    for level in (LEVEL_Q1_ABC, LEVEL_Q2_ABC):
        words = build_basis(tri, level).words
        assert len(set(words)) == len(words)
        for w in words:
            assert len(w) == 3
            for sub in w:
                # no adjacent repeats survive projector idempotence
                assert all(a != b for a, b in zip(sub, sub[1:]))


def test_scenario_level_validation():
    duo = Scenario(2, (2, 2), (2, 2))
    with pytest.raises(ValueError):
        build_basis(duo, "Q3")
    with pytest.raises(UnsupportedScenarioError):
        build_basis(duo, LEVEL_Q1_ABC)
    with pytest.raises(UnsupportedScenarioError):
        build_basis(Scenario.from_game(magic_square_game()), LEVEL_Q1)


def test_moment_structure_is_symmetric_with_unit():
    structure = structure_for(mermin_game(), LEVEL_Q1_ABC)
    ids = structure.cell_ids
    assert np.array_equal(ids, ids.T)
    i0, j0 = structure.id_cells[structure.unit_id][0]
    assert (i0, j0) == (0, 0)


def test_query_validation():
    game = mermin_game()
    dist = uniform_distribution(game)
    with pytest.raises(ValueError):
        RandomnessBoundQuery(game, dist, 1.5, (0, 0, 0))
    with pytest.raises(ValueError):
        RandomnessBoundQuery(game, dist, 0.5, (3, 0, 0))
    with pytest.raises(ValueError):
        RandomnessBoundQuery(game, dist, 0.5, (0, 2, 0))


def test_mermin_success_needs_triple_moments():
    game = mermin_game()
    dist = uniform_distribution(game)
    structure = structure_for(game, LEVEL_Q1)
    with pytest.raises(MomentNotAvailableError):
        success_functional(structure, game, dist)


def test_deterministic_embedding_all_strategies():
    """Every deterministic strategy embeds as a rank-1 PSD moment matrix
    that honors all cell ties and reproduces the exact behavior."""
    game = mermin_game()
    structure = structure_for(game, LEVEL_Q1_ABC)
    for strategy in enumerate_deterministic(game):
        M = moment_matrix_of_deterministic(structure, strategy)
        eigs = np.linalg.eigvalsh(M)
        assert eigs.min() >= -1e-12
        assert sum(e > 1e-9 for e in eigs) == 1
        for cells in structure.id_cells:
            vals = {M[i, j] for i, j in cells}
            assert len(vals) == 1
        moments = moments_of_matrix(structure, M)
        assert moments[structure.unit_id] == 1.0
        behavior = behavior_of_deterministic(strategy, game)
        for x in game.admissible_inputs():
            for o in game.all_outputs():
                functional = outcome_probability_functional(structure, o, x)
                assert abs(evaluate_functional(functional, moments) - behavior.prob(o, x)) <= 1e-12


def test_success_functional_matches_game_evaluation():
    game = mermin_game()
    dist = input_distribution_from_source(game, canonical_mermin_source(0.25))
    structure = structure_for(game, LEVEL_Q1_ABC)
    functional = success_functional(structure, game, dist)
    from randamp.games import success_probability

    for strategy in itertools.islice(enumerate_deterministic(game), 0, 64, 7):
        M = moment_matrix_of_deterministic(structure, strategy)
        via_moments = evaluate_functional(functional, moments_of_matrix(structure, M))
        direct = success_probability(game, dist, behavior_of_deterministic(strategy, game))
        assert abs(via_moments - direct) <= 1e-12


def ghz_moment_matrix(structure):
    """Exact quantum moment matrix of the perfect tripartite strategy."""
    strat = ghz_mermin_strategy()
    rho = strat.state
    eye = np.eye(2, dtype=complex)

    def party_op(party, sub):
        op = eye
        for x in sub:
            op = op @ strat.measurements[party][x][0]
        return op

    def word_op(word):
        return reduce(np.kron, (party_op(p, sub) for p, sub in enumerate(word)))

    ops = [word_op(w) for w in structure.basis.words]
    m = len(ops)
    M = np.zeros((m, m))
    for i in range(m):
        for j in range(m):
            M[i, j] = float(np.real(np.trace(rho @ ops[i].conj().T @ ops[j])))
    return M


def test_perfect_strategy_lies_on_success_face():
    game = mermin_game()
    dist = input_distribution_from_source(game, canonical_mermin_source(0.3))
    structure = structure_for(game, LEVEL_Q1_ABC)
    M = ghz_moment_matrix(structure)

    losing = [
        outcome_operator_vector(structure, o, x)
        for x in game.admissible_inputs()
        for o in game.all_outputs()
        if not game.win(x, o)
    ]
    worst = max(float(np.max(np.abs(M @ u))) for u in losing)
    assert worst <= 1e-9

    V = success_face_basis(structure, game, dist)
    assert V.shape == (27, 11)
    # M reconstructs exactly from its face coordinates
    Y = V.T @ M @ V
    assert np.max(np.abs(V @ Y @ V.T - M)) <= 1e-9


def test_face_bound_of_marginal_is_half():
    """On the success-1 face no outcome is predictable beyond 1/2."""
    game = mermin_game()
    dist = input_distribution_from_source(game, canonical_mermin_source(0.2))
    structure = structure_for(game, LEVEL_Q1_ABC)
    face = SuccessFaceContext(structure, game, dist)
    query = RandomnessBoundQuery(game, dist, 1.0, (0, 0, 0))
    result = max_outcome_probability(query, face=face, structure=structure)
    assert result.value is not None
    assert abs(result.value - 0.5) <= 1e-6


def test_chsh_cannot_win_always():
    game = chsh_game()
    dist = uniform_distribution(game)
    with pytest.raises(InfeasibleSuccessError):
        p_max(game, dist, 1.0, LEVEL_Q2)


def test_chsh_level1_value():
    game = chsh_game()
    value = max_success_probability(game, uniform_distribution(game), LEVEL_Q1)
    assert abs(value - (0.5 + np.sqrt(2) / 4.0)) <= 1e-4


def test_mermin_relaxation_value_is_one():
    game = mermin_game()
    dist = input_distribution_from_source(game, canonical_mermin_source(0.3))
    value = max_success_probability(game, dist, LEVEL_Q1_ABC)
    assert abs(value - 1.0) <= 1e-6


def test_hierarchy_levels_never_loosen():
    """Tighter moment bases can only shrink the feasible set."""
    floor = 0.97
    loose = eps_prime(0.3, floor, LEVEL_Q1_AB, SWEEP_SETTINGS)
    mid = eps_prime(0.3, floor, LEVEL_Q1_ABC, SWEEP_SETTINGS)
    tight = eps_prime(0.3, floor, LEVEL_Q2_ABC, SWEEP_SETTINGS)
    assert mid <= loose + 1e-5
    assert tight <= mid + 1e-5

    game = chsh_game()
    dist = uniform_distribution(game)
    q1 = max_success_probability(game, dist, LEVEL_Q1)
    q2 = max_success_probability(game, dist, LEVEL_Q2)
    assert q2 <= q1 + 1e-6


def test_symmetry_of_targets_under_party_permutation():
    """The game and the uniform distribution are invariant under party
    permutations, so every permuted target gives the same bound."""
    game = mermin_game()
    dist = uniform_distribution(game)
    structure = structure_for(game, LEVEL_Q1_ABC)
    for x, outcome in ((0, 0), (1, 1)):
        bounds = []
        for party in range(3):
            query = RandomnessBoundQuery(game, dist, 0.9, (party, x, outcome))
            result = max_outcome_probability(query, settings=SWEEP_SETTINGS, structure=structure)
            bounds.append(result.value)
        assert max(bounds) - min(bounds) <= 2e-4


def test_symmetry_of_first_two_parties_under_source_distribution():
    """The induced input distribution treats the first two parties
    identically, so their targets are exchangeable."""
    game = mermin_game()
    dist = input_distribution_from_source(game, canonical_mermin_source(0.3))
    structure = structure_for(game, LEVEL_Q1_ABC)
    for x in (0, 1):
        for outcome in (0, 1):
            r0 = max_outcome_probability(
                RandomnessBoundQuery(game, dist, 0.97, (0, x, outcome)),
                settings=SWEEP_SETTINGS, structure=structure,
            )
            r1 = max_outcome_probability(
                RandomnessBoundQuery(game, dist, 0.97, (1, x, outcome)),
                settings=SWEEP_SETTINGS, structure=structure,
            )
            assert abs(r0.value - r1.value) <= 2e-4


def test_output_bias_bound_monotone_on_grid():
    """Nonincreasing in the success floor, nondecreasing in the source
    bias, on a 10x10 grid."""
    eps_grid = np.linspace(0.05, 0.45, 10)
    ps_grid = np.linspace(0.9, 1.0, 10)
    table = np.empty((10, 10))
    for i, eps in enumerate(eps_grid):
        for j, ps in enumerate(ps_grid):
            table[i, j] = eps_prime(float(eps), float(ps), settings=SWEEP_SETTINGS)
    for i in range(10):
        col = table[i]
        assert all(col[j + 1] <= col[j] + 1e-5 for j in range(9)), f"eps={eps_grid[i]}"
    for j in range(10):
        row = table[:, j]
        assert all(row[i + 1] >= row[i] - 1e-5 for i in range(9)), f"ps={ps_grid[j]}"


def test_perfect_success_gives_unbiased_outputs():
    for eps in (0.1, 0.45):
        assert eps_prime(eps, 1.0) <= 1e-6


def test_classical_floor_gives_full_bias():
    from randamp.strategies import biased_mermin_classical_value

    eps = 0.2
    floor = biased_mermin_classical_value(eps)
    assert eps_prime(eps, floor, settings=SWEEP_SETTINGS) >= 0.5 - 1e-4


def test_critical_success_validation():
    with pytest.raises(ValueError):
        critical_success(0.2, 0.0)
    with pytest.raises(ValueError):
        critical_success(0.2, 0.6)
    with pytest.raises(ValueError):
        critical_success(0.5, 0.2)


def test_critical_success_rejects_unresolvable_tolerance():
    """At eps=0.45 the classical value is 0.9975; a 5e-3 bisection step
    can never separate the answer from 1."""
    with pytest.raises(BracketingError, match="tighten tol"):
        critical_success(0.45, 0.45, tol=5e-3)
