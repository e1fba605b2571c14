"""Sequential sampling equilibrium: costly Bayesian sampling before play in normal-form games."""

from .belief import DirichletPrior, FiniteSupportPrior, PosteriorState
from .equilibrium import ExtendedGame, best_response_map, cost_sweep, dynamics_run, sse_solve, stability_check
from .game import Game, GameError, nash_equilibria
from .stopping import StoppingProblem, boundaries, joint_action_time, myopic_policy, solve

__all__ = [
    "DirichletPrior", "FiniteSupportPrior", "PosteriorState", "ExtendedGame", "best_response_map",
    "cost_sweep", "dynamics_run", "sse_solve", "stability_check", "Game", "GameError", "nash_equilibria",
    "StoppingProblem", "boundaries", "joint_action_time", "myopic_policy", "solve",
]
