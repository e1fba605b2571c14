import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seqsample import corpus
from seqsample.game import (Game, GameError, UnsupportedSizeError, best_responses, expected_payoff,
                            is_nash, k_rationalizable_sets, nash_equilibria, opponent_distribution,
                            payoff_bonus, rationalizability_levels, strictly_dominated, weakly_dominated)


def test_json_round_trip(pennies):
    again = Game.from_json(json.loads(json.dumps(pennies.to_json())))
    assert again.players == pennies.players
    assert np.array_equal(again.payoffs, pennies.payoffs)


def test_bad_payoff_shape_reports_path(pennies):
    data = pennies.to_json()
    data["payoffs"]["Clasher"] = [[1, 2, 3]]
    with pytest.raises(GameError) as info:
        Game.from_json(data)
    assert info.value.path == "/payoffs/Clasher"


def test_duplicate_actions_rejected():
    with pytest.raises(GameError):
        Game.bimatrix([[0, 0], [0, 0]], [[0, 0], [0, 0]], actions=(("a", "a"), ("x", "y")))


def test_expected_payoff_is_linear_in_opponent_mix(pennies4):
    # Matcher gets 4 on (a, a) and 1 on (b, b)
    assert expected_payoff(pennies4, "Matcher", "a", [0.5, 0.5]) == pytest.approx(2.0)
    assert expected_payoff(pennies4, "Matcher", "b", [0.5, 0.5]) == pytest.approx(0.5)


def test_best_response_of_clasher():
    game = corpus.matching_pennies()
    # against Matcher playing a with 0.6 the Clasher prefers b, worth 0.6
    acts, value = best_responses(game, "Clasher", [0.6, 0.4])
    assert acts == [1]
    assert value == pytest.approx(0.6)


def test_opponent_distribution_product_order():
    game = Game(("A", "B", "C"), (("x", "y"), ("p", "q"), ("u", "v")), np.zeros((3, 2, 2, 2)))
    dist = opponent_distribution(game, "A", [[1, 0], [0.25, 0.75], [0.4, 0.6]])
    assert dist == pytest.approx([0.1, 0.15, 0.3, 0.45])
    assert game.opponent_labels("A") == ["p,u", "p,v", "q,u", "q,v"]


def test_dominance_by_mixture_needs_lp():
    # M is beaten only by the half-half mixture of T and B
    game = Game.bimatrix([[3, 0], [1, 1], [0, 3]], [[0, 0], [0, 0], [0, 0]])
    assert strictly_dominated(game, 0, 1)
    assert not strictly_dominated(game, 0, 0)


def test_weak_dominance(pennies):
    weak = corpus.weakly_dominated()
    assert weakly_dominated(weak, "Row", "D")
    assert weakly_dominated(weak, "Col", "R")
    assert not weakly_dominated(pennies, "Matcher", "a")


def test_rationalizability_depths():
    assert len(rationalizability_levels(corpus.two_step_dominance())) - 1 == 2
    assert len(rationalizability_levels(corpus.three_step_dominance())) - 1 == 3
    assert k_rationalizable_sets(corpus.three_step_dominance(), math.inf) == [[0], [0]]
    assert k_rationalizable_sets(corpus.matching_pennies(), 5) == [[0, 1], [0, 1]]


def test_nash_fig_one(pennies4):
    (eq,) = nash_equilibria(pennies4)
    assert eq[0] == pytest.approx([0.5, 0.5])
    assert eq[1] == pytest.approx([0.2, 0.8])


def test_nash_oracle_size_limit():
    game = Game.bimatrix(np.zeros((5, 2)), np.zeros((5, 2)))
    with pytest.raises(UnsupportedSizeError):
        nash_equilibria(game)


def test_rps_has_unique_uniform_equilibrium():
    (eq,) = nash_equilibria(corpus.rock_paper_scissors())
    assert eq[0] == pytest.approx([1 / 3] * 3)


def test_payoff_bonus_moves_only_one_row(pennies):
    boosted = payoff_bonus(pennies, "Matcher", "a", 2.0)
    diff = boosted.payoffs - pennies.payoffs
    assert diff[0, 0].tolist() == [2.0, 2.0]
    assert np.count_nonzero(diff) == 2


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(-5, 5), min_size=4, max_size=4), st.lists(st.integers(-5, 5), min_size=4, max_size=4))
def test_every_oracle_equilibrium_is_nash(row, col):
    game = Game.bimatrix(np.reshape(row, (2, 2)), np.reshape(col, (2, 2)))
    for eq in nash_equilibria(game):
        assert is_nash(game, eq)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(-3, 3), min_size=6, max_size=6), st.floats(0, 1), st.floats(0, 1))
def test_expected_payoff_linearity(values, w, p):
    game = Game.bimatrix(np.reshape(values, (3, 2)), np.zeros((3, 2)))
    mix = lambda q: [q, 1 - q]
    blend = expected_payoff(game, 0, 1, mix(w * p + (1 - w) * 0.3))
    parts = w * expected_payoff(game, 0, 1, mix(p)) + (1 - w) * expected_payoff(game, 0, 1, mix(0.3))
    assert blend == pytest.approx(parts, abs=1e-9)
