"""Small named games used by the examples, the check suites and the tests."""

from __future__ import annotations

from .belief import DirichletPrior
from .game import Game


def matching_pennies(matcher_bonus: float = 1.0, clasher_bonus: float = 1.0) -> Game:
    """Generalized matching pennies: the Matcher wants to match, the Clasher to mismatch.

    ``matcher_bonus`` scales the Matcher's payoff from matching on ``a`` and
    ``clasher_bonus`` the Clasher's payoff from playing ``a`` against ``b``.
    """
    return Game.bimatrix([[matcher_bonus, 0], [0, 1]], [[0, 1], [clasher_bonus, 0]],
                         ("Matcher", "Clasher"), (("a", "b"), ("a", "b")))


def two_step_dominance() -> Game:
    # Row's D is strictly dominated; Col then prefers L.
    return Game.bimatrix([[1, 1], [0, 0]], [[1, 0], [0, 2]], ("Row", "Col"), (("U", "D"), ("L", "R")))


def three_step_dominance() -> Game:
    return Game.bimatrix([[2, 2, 0], [1, 1, 3], [0, 0, -1]], [[2, 1, 0], [0, 2, -1], [0, 1, -1]],
                         ("Row", "Col"), (("T", "M", "B"), ("L", "C", "R")))


def coordination() -> Game:
    return Game.bimatrix([[2, 0], [0, 1]], [[2, 0], [0, 1]], ("Row", "Col"), (("A", "B"), ("A", "B")))


def weakly_dominated() -> Game:
    """(D, R) is a Nash equilibrium in weakly dominated actions."""
    return Game.bimatrix([[1, 1], [0, 1]], [[1, 0], [1, 1]], ("Row", "Col"), (("U", "D"), ("L", "R")))


def rock_paper_scissors() -> Game:
    rps = [[0, -1, 1], [1, 0, -1], [-1, 1, 0]]
    return Game.bimatrix(rps, [[-x for x in row] for row in rps], ("Row", "Col"),
                         (("R", "P", "S"), ("R", "P", "S")))


def analogy_demo() -> Game:
    """Under ``ANALOGY_PARTITIONS`` Row observes Col's ``y`` and ``z`` as a single class."""
    return Game.bimatrix([[1, 0, 0], [0, 1, 3]], [[0, 1, 0.9], [1, 0, -0.1]], ("Row", "Col"),
                         (("a", "b"), ("x", "y", "z")))


ANALOGY_PARTITIONS = ([0, 1, 1], None)


def misspecified_sampler() -> Game:
    """A two-action player facing three opponent actions, one of which the prior rules out."""
    return Game.bimatrix([[1, 0, 0], [0, 1, 0]], [[0, 0, 0], [0, 0, 0]], ("P", "O"),
                         (("a", "b"), ("a", "b", "c")))


def myopic_demo_priors() -> tuple[DirichletPrior, DirichletPrior]:
    """Priors on the unit matching-pennies game for which myopic sampling stalls at a pure profile."""
    return DirichletPrior.beta(1, 1), DirichletPrior([1.0, 2.2])


def binary_corpus() -> list[tuple[str, Game]]:
    return [
        ("pennies", matching_pennies()),
        ("pennies_matcher4", matching_pennies(4.0)),
        ("two_step", two_step_dominance()),
        ("coordination", coordination()),
        ("weakly_dominated", weakly_dominated()),
    ]


def full_corpus() -> list[tuple[str, Game]]:
    return binary_corpus() + [
        ("three_step", three_step_dominance()),
        ("rps", rock_paper_scissors()),
        ("analogy_demo", analogy_demo()),
    ]
