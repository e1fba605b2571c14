import numpy as np
import pytest

from seqsample import corpus
from seqsample.belief import DirichletPrior
from seqsample.equilibrium import (CONVERGED, EquilibriumError, ExtendedGame, best_response_map,
                                   coarsen_payoffs, cost_sweep, dynamics_run, priors_from_center,
                                   profile_distance, push_forward, rationalizability_sweep,
                                   reachability_experiment, residual, sse_solve, stability_check)
from seqsample.stopping import joint_action_time


@pytest.fixture(scope="module")
def unit_pennies():
    return ExtendedGame.uniform(corpus.matching_pennies(), 0.05)


def test_symmetric_pennies_equilibrium(unit_pennies):
    result = sse_solve(unit_pennies)
    assert result.status == CONVERGED
    assert result.sigma[0] == pytest.approx([0.5, 0.5])
    assert result.sigma[1] == pytest.approx([0.5, 0.5])


def test_best_response_map_is_the_choice_law(unit_pennies):
    sigma = np.array([0.3, 0.7])
    law = joint_action_time(unit_pennies.policies[1], sigma).marginal()
    assert best_response_map(unit_pennies, "Clasher", sigma) == pytest.approx(law)


def test_best_response_map_is_continuous(unit_pennies):
    xs = np.linspace(0, 1, 201)
    vals = np.array([best_response_map(unit_pennies, 0, np.array([1 - x, x]))[0] for x in xs])
    assert np.abs(np.diff(vals)).max() < 0.05


def test_damped_and_bisection_agree():
    ext = ExtendedGame.uniform(corpus.matching_pennies(4.0), 0.05)
    a = sse_solve(ext, method="bisection")
    b = sse_solve(ext, method="damped", tol=1e-7)
    assert a.converged and b.converged
    assert profile_distance(a.sigma, b.sigma) < 1e-5


def test_three_action_game_uses_damped_iteration():
    ext = ExtendedGame.uniform(corpus.rock_paper_scissors(), 0.1)
    result = sse_solve(ext, tol=1e-7)
    assert result.converged
    assert result.sigma[0] == pytest.approx([1 / 3] * 3, abs=1e-6)


def test_solver_warm_start_selects_nearby_root():
    ext = ExtendedGame.uniform(corpus.coordination(), 0.05)
    high = sse_solve(ext, warm_start=[[0.95, 0.05], [0.95, 0.05]])
    low = sse_solve(ext, warm_start=[[0.05, 0.95], [0.05, 0.95]])
    assert high.converged and low.converged
    assert high.sigma[0][0] > 0.5 > low.sigma[0][0]


def test_cesaro_dynamics_reach_equilibrium(unit_pennies):
    trace = dynamics_run(unit_pennies, [[0.9, 0.1], [0.1, 0.9]], steps=20000, stop_below=1e-4)
    assert trace.residuals[-1] < 1e-4


def test_exponential_dynamics(unit_pennies):
    trace = dynamics_run(unit_pennies, [[0.8, 0.2], [0.3, 0.7]], "exponential", steps=2000, beta=0.9,
                         stop_below=1e-8)
    assert trace.residuals[-1] < 1e-8


def test_finite_population_is_seeded(unit_pennies):
    run = lambda seed: dynamics_run(unit_pennies, [[0.9, 0.1], [0.1, 0.9]], "finite_population",
                                    steps=30, population=50, seed=seed)
    a, b, c = run(3), run(3), run(4)
    assert a.rows(unit_pennies.game) == b.rows(unit_pennies.game)
    assert a.rows(unit_pennies.game) != c.rows(unit_pennies.game)


def test_stability_of_pennies(unit_pennies):
    report = stability_check(unit_pennies, sse_solve(unit_pennies).sigma)
    assert report["product"] <= 0
    assert report["max_real_part"] < 0
    assert report["derivatives"] == pytest.approx(report["finite_difference"], abs=1e-3)


def test_coarsening_and_push_forward():
    mat = np.array([[1.0, 0.0, 3.0], [0.0, 1.0, -1.0]])
    assert coarsen_payoffs(mat, [0, 1, 1]).tolist() == [[1.0, 1.5], [0.0, 0.0]]
    assert push_forward(np.array([0.2, 0.3, 0.5]), [0, 1, 1]).tolist() == pytest.approx([0.2, 0.8])


def test_extended_game_validation():
    game = corpus.matching_pennies()
    with pytest.raises(EquilibriumError):
        ExtendedGame(game, (DirichletPrior.uniform(2), DirichletPrior.uniform(3)), (0.1, 0.1))
    with pytest.raises(EquilibriumError):
        ExtendedGame(game, (DirichletPrior.uniform(2),) * 2, (0.1, 0.0))


def test_cost_sweep_threads_match_serial():
    ext = ExtendedGame.uniform(corpus.matching_pennies(4.0), 0.2)
    grid = [0.2, 0.1, 0.05]
    serial = cost_sweep(ext, grid, warm=False)
    parallel = cost_sweep(ext, grid, warm=False, threads=3)
    assert [p.row(ext.game) for p in serial] == [p.row(ext.game) for p in parallel]


def test_equilibrium_cost_monotone_distance_tail():
    ext = ExtendedGame.uniform(corpus.matching_pennies(4.0), 0.02)
    path = cost_sweep(ext, [0.02, 0.01, 0.005])
    d = [p.distance for p in path]
    assert d[0] >= d[1] >= d[2]


def test_reachability_of_strict_equilibrium():
    rep = reachability_experiment(corpus.coordination(), ["A", "A"], [[0.9, 0.1], [0.9, 0.1]],
                                  [0.2, 0.05, 0.02])
    assert rep["reached"]


def test_weakly_dominated_equilibrium_not_reached():
    for center in ([[0.5, 0.5], [0.5, 0.5]], [[0.2, 0.8], [0.2, 0.8]]):
        rep = reachability_experiment(corpus.weakly_dominated(), ["D", "R"], center, [0.2, 0.05, 0.01])
        assert not rep["reached"]


def test_priors_from_center_mean():
    priors = priors_from_center(corpus.coordination(), [[0.25, 0.75], [0.6, 0.4]], concentration=4)
    assert priors[0].mean == pytest.approx([0.6, 0.4])
    assert priors[0].alpha0 == pytest.approx(4)


def test_rationalizability_sweep_two_step():
    ext = ExtendedGame.uniform(corpus.two_step_dominance(), 1.0)
    rep = rationalizability_sweep(ext, [1.0, 0.2, 0.05, 0.02])
    ks = [r["certified_k"] for r in rep["rows"]]
    assert ks == sorted(ks)
    assert ks[-1] == rep["solvability_depth"] == 2


def test_residual_zero_at_solution(unit_pennies):
    assert residual(unit_pennies, [[0.5, 0.5], [0.5, 0.5]]) < 1e-12
