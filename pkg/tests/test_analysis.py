import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seqsample import corpus
from seqsample.analysis import (abee_violation, analogy_game, analogy_limit, analogy_transform,
                                comparative_statics_payoff, comparative_statics_prior,
                                comparative_statics_sigma, information_gain, misspec_detector,
                                one_step_gain, time_revealed_indifference, weighted_rank_correlation)
from seqsample.belief import BeliefError, DirichletPrior, FiniteSupportPrior
from seqsample.game import Game, GameError, is_nash, nash_equilibria
from seqsample.stopping import StoppingProblem, solve

PRIOR = FiniteSupportPrior.exact([["1/2", "1/6", "1/3"], ["1/6", "1/2", "1/3"]], ["1/2", "1/2"])
MATCH = [[Fraction(1), Fraction(0), Fraction(0)], [Fraction(0), Fraction(1), Fraction(0)]]


def clasher(cost=0.05, prior=None):
    return StoppingProblem.from_game(corpus.matching_pennies(), "Clasher", prior or DirichletPrior.beta(1, 1), cost)


def test_one_step_gain_by_hand():
    # stop value 1/3 now; after a or b the better action is worth 5/12, after c still 1/3
    expected = Fraction(1, 3) * Fraction(5, 12) * 2 + Fraction(1, 3) * Fraction(1, 3) - Fraction(1, 3)
    assert one_step_gain(MATCH, PRIOR) == expected == Fraction(1, 18)
    assert information_gain(MATCH, PRIOR) == Fraction(1, 6)


@pytest.mark.parametrize("cost, never", [(0.01, 1.0), (0.05, 1.0), (0.2, 0.0), (0.4, 0.0)])
def test_absorbing_path_decided_exactly(cost, never):
    rep = misspec_detector(corpus.misspecified_sampler(), "P", PRIOR, cost, [0, 0, 1])
    assert rep.exact
    assert rep.never_stop == never


def test_dirichlet_prior_never_stalls():
    rep = misspec_detector(corpus.misspecified_sampler(), "P", DirichletPrior.uniform(3), 0.05, [0, 0, 1])
    assert rep.never_stop == 0.0


def test_probe_bounds_are_consistent():
    rep = misspec_detector(corpus.misspecified_sampler(), "P", PRIOR, 0.05, [0.2, 0.2, 0.6], probe_depth=8)
    assert 0 <= rep.stop_mass_lower <= 1 - rep.never_stop_upper + rep.undetermined_mass + 1e-12
    assert rep.stop_mass_lower + rep.undetermined_mass <= 1 + 1e-12


def test_payoff_statics_clasher_and_matcher():
    game = corpus.matching_pennies()
    for player in ("Matcher", "Clasher"):
        problem = StoppingProblem.from_game(game, player, DirichletPrior.beta(1, 1), 0.05)
        assert comparative_statics_payoff(problem, 0, [0, 0.5, 1, 3]).verdict == "pass"


def test_payoff_statics_three_symbols():
    problem = StoppingProblem.from_game(corpus.rock_paper_scissors(), 0, DirichletPrior.uniform(3), 0.1)
    assert comparative_statics_payoff(problem, 0, [0, 0.5, 1, 3]).verdict == "pass"


def test_prior_statics_chain():
    chain = [DirichletPrior.beta(1, 2), DirichletPrior.beta(1, 1), DirichletPrior.beta(2, 1)]
    assert comparative_statics_prior(clasher(), chain).verdict == "pass"


def test_prior_chain_must_be_ordered():
    with pytest.raises(BeliefError):
        comparative_statics_prior(clasher(), [DirichletPrior.beta(2, 1), DirichletPrior.beta(1, 1)])


def test_sigma_statics_with_polynomial_form():
    report = comparative_statics_sigma(clasher(0.02))
    assert report.verdict == "pass"
    assert report.extra["polynomial_mismatch"] < 1e-10


def test_rank_correlation_basics():
    assert weighted_rank_correlation([1, 2, 3], [3, 2, 1], [1, 1, 1]) == pytest.approx(-1.0)
    assert math.isnan(weighted_rank_correlation([1, 1], [1, 2], [1, 1]))


def test_slower_choices_are_closer_to_indifference():
    policy = solve(clasher(0.01))
    for x in (0.3, 0.5, 0.7):
        rep = time_revealed_indifference(policy, [1 - x, x])
        assert rep["verdict"] == "pass"
        assert rep["rank_correlation"] < 0


def test_single_stopping_depth_gives_undefined_correlation():
    rep = time_revealed_indifference(solve(clasher(0.05)), [0.5, 0.5])
    assert list(rep["mean_distance_by_depth"]) == [1]
    assert math.isnan(rep["rank_correlation"])


def test_identity_partition_is_noop():
    game = corpus.analogy_demo()
    tr = analogy_transform(game, "Row", [0, 1, 2])
    assert np.array_equal(tr.payoffs, game.payoff_matrix("Row"))
    assert np.array_equal(analogy_game(game, [None, None]).payoffs, game.payoffs)


def test_coarsened_payoff_is_class_mean():
    tr = analogy_transform(corpus.analogy_demo(), "Row", [0, 1, 1])
    assert tr.payoffs.tolist() == [[1.0, 0.0], [0.0, 2.0]]
    assert tr.class_labels == ["x", "y|z"]


def test_partition_must_be_surjective():
    with pytest.raises(GameError):
        analogy_transform(corpus.analogy_demo(), "Row", [0, 2, 2])


def test_analogy_equilibria_satisfy_abee_conditions():
    game = corpus.analogy_demo()
    parts = list(corpus.ANALOGY_PARTITIONS)
    for eq in nash_equilibria(analogy_game(game, parts)):
        assert abee_violation(game, parts, eq) < 1e-9
    for eq in nash_equilibria(game):
        assert abee_violation(game, [None, None], eq) < 1e-9


def test_analogy_limit_sweep():
    rep = analogy_limit(corpus.analogy_demo(), list(corpus.ANALOGY_PARTITIONS), [0.1, 0.02, 0.005])
    assert rep["verdict"] == "pass"
    assert rep["final_violation"] <= 0.05


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(-3, 3), min_size=6, max_size=6), st.lists(st.integers(-3, 3), min_size=6, max_size=6))
def test_abee_with_identity_partitions_is_nash(row, col):
    game = Game.bimatrix(np.reshape(row, (2, 3)), np.reshape(col, (2, 3)))
    for eq in nash_equilibria(game):
        assert abee_violation(game, [None, None], eq) < 1e-8
        assert is_nash(game, eq)
