"""Sequential sampling equilibria, learning dynamics and vanishing-cost experiments."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .belief import DirichletPrior
from .game import (Game, GameError, UnsupportedSizeError, check_distribution, nash_equilibria,
                   opponent_distribution, rationalizability_levels)
from .stopping import (OPTIMAL, ActionTimeDistribution, StoppingBeliefs, StoppingPolicy,
                       StoppingProblem, joint_action_time, solve, stopping_belief_distribution)

logger = logging.getLogger(__name__)

CONVERGED = "converged"
MAX_ITER = "max_iter"


class EquilibriumError(ValueError):
    pass


def coarsen_payoffs(matrix: np.ndarray, partition: Sequence[int]) -> np.ndarray:
    """Average the payoff columns inside each class of ``partition``."""
    part = np.asarray(partition, dtype=int)
    classes = int(part.max()) + 1
    if part.size != matrix.shape[1]:
        raise EquilibriumError(f"partition covers {part.size} profiles, expected {matrix.shape[1]}")
    if sorted(set(part.tolist())) != list(range(classes)):
        raise EquilibriumError("partition must map onto classes 0..k-1 with every class used")
    out = np.zeros((matrix.shape[0], classes))
    for z in range(classes):
        out[:, z] = matrix[:, part == z].mean(axis=1)
    return out


def push_forward(dist: np.ndarray, partition: Sequence[int] | None) -> np.ndarray:
    if partition is None:
        return dist
    part = np.asarray(partition, dtype=int)
    return np.bincount(part, weights=dist, minlength=int(part.max()) + 1)


@dataclass(frozen=True, eq=False)
class ExtendedGame:
    """A game with a Dirichlet prior and a sampling cost for every player.

    ``partitions[i]``, when given, maps each opponent profile of player i to
    the class the player observes. All stopping policies are solved when the
    object is built and never change afterwards.
    """

    game: Game
    priors: tuple[DirichletPrior, ...]
    costs: tuple[float, ...]
    stopping_rule: str = OPTIMAL
    partitions: tuple | None = None
    problems: tuple = field(init=False, repr=False)
    policies: tuple = field(init=False, repr=False)

    def __post_init__(self):
        n = self.game.n_players
        priors = tuple(self.priors)
        costs = tuple(float(c) for c in self.costs)
        if len(priors) != n or len(costs) != n:
            raise EquilibriumError("need one prior and one cost per player")
        parts = tuple(self.partitions) if self.partitions is not None else (None,) * n
        problems = []
        for i in range(n):
            if not isinstance(priors[i], DirichletPrior):
                raise EquilibriumError(f"prior of {self.game.players[i]} must be a full-support Dirichlet")
            if not costs[i] > 0:
                raise EquilibriumError(f"cost of {self.game.players[i]} must be positive")
            matrix = self.game.payoff_matrix(i)
            labels = tuple(self.game.opponent_labels(i))
            if parts[i] is not None:
                matrix = coarsen_payoffs(matrix, parts[i])
                labels = tuple(f"class{z}" for z in range(matrix.shape[1]))
            if priors[i].size != matrix.shape[1]:
                raise EquilibriumError(
                    f"prior of {self.game.players[i]} has {priors[i].size} symbols, expected {matrix.shape[1]}")
            problems.append(StoppingProblem(matrix, priors[i], costs[i], self.game.actions[i], labels,
                                            self.game.payoff_span()))
        object.__setattr__(self, "priors", priors)
        object.__setattr__(self, "costs", costs)
        object.__setattr__(self, "partitions", parts)
        object.__setattr__(self, "problems", tuple(problems))
        policies = tuple(solve(p, kind=self.stopping_rule) for p in problems)
        for pol in policies:
            _ = pol.choice_model
        object.__setattr__(self, "policies", policies)

    @classmethod
    def uniform(cls, game: Game, cost: float, **kw) -> "ExtendedGame":
        priors = tuple(DirichletPrior.uniform(len(game.opponent_profiles(i))) for i in range(game.n_players))
        return cls(game, priors, (cost,) * game.n_players, **kw)

    def with_costs(self, cost: float | Sequence[float]) -> "ExtendedGame":
        costs = (cost,) * self.game.n_players if np.isscalar(cost) else tuple(cost)
        return ExtendedGame(self.game, self.priors, costs, self.stopping_rule, self.partitions)

    def observation(self, i: int, profile: Sequence) -> np.ndarray:
        """Distribution of what player i observes when everyone plays ``profile``."""
        return push_forward(opponent_distribution(self.game, i, profile), self.partitions[i])

    def is_2x2(self) -> bool:
        return self.game.shape == (2, 2) and all(p is None for p in self.partitions)


def _profile(game: Game, sigma: Sequence) -> list[np.ndarray]:
    if len(sigma) != game.n_players:
        raise GameError(f"profile needs {game.n_players} mixes")
    return [check_distribution(s, game.shape[i], f"mix of {game.players[i]}") for i, s in enumerate(sigma)]


def best_response_map(ext: ExtendedGame, i: int | str, sigma_minus_i) -> np.ndarray:
    """Distribution of player i's choice when observations follow ``sigma_minus_i``.

    ``sigma_minus_i`` is a distribution over the symbols player i observes
    (opponent profiles, or classes when a partition is set).
    """
    i = ext.game.player_index(i)
    sig = check_distribution(sigma_minus_i, ext.problems[i].size, "observation distribution")
    return ext.policies[i].choice_model.action_probs(sig)


def response(ext: ExtendedGame, sigma: Sequence) -> list[np.ndarray]:
    return [best_response_map(ext, i, ext.observation(i, sigma)) for i in range(ext.game.n_players)]


def residual(ext: ExtendedGame, sigma: Sequence) -> float:
    br = response(ext, sigma)
    return float(max(np.abs(b - np.asarray(s)).max() for b, s in zip(br, sigma)))


@dataclass
class EquilibriumResult:
    sigma: list[np.ndarray]
    residual: float
    status: str
    iterations: int
    method: str
    action_time: list[ActionTimeDistribution] = field(default_factory=list)
    stopping_beliefs: list[StoppingBeliefs] = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED

    def to_json(self, game: Game) -> dict:
        return {
            "sigma": {p: self.sigma[i].tolist() for i, p in enumerate(game.players)},
            "residual": self.residual,
            "status": self.status,
            "iterations": self.iterations,
            "method": self.method,
            "diagnostics": self.diagnostics,
        }


def _finish(ext: ExtendedGame, sigma, status, iterations, method, diagnostics) -> EquilibriumResult:
    sigma = [np.asarray(s, dtype=float) for s in sigma]
    res = residual(ext, sigma)
    tables, beliefs = [], []
    for i in range(ext.game.n_players):
        obs = ext.observation(i, sigma)
        tables.append(joint_action_time(ext.policies[i], obs))
        beliefs.append(stopping_belief_distribution(ext.policies[i], obs))
    diagnostics = dict(diagnostics)
    diagnostics["root_tie_players"] = [ext.game.players[i] for i, pol in enumerate(ext.policies)
                                       if pol.diagnostics["root_tie"]]
    diagnostics["horizons"] = [pol.horizon for pol in ext.policies]
    return EquilibriumResult(sigma, res, status, iterations, method, tables, beliefs, diagnostics)


def sse_solve(ext: ExtendedGame, method: str = "auto", tol: float = 1e-8, max_iter: int = 10000,
              warm_start: Sequence | None = None, scan_points: int = 65) -> EquilibriumResult:
    """Find a profile with max_i |b_i(sigma_-i) - sigma_i| <= tol.

    ``auto`` uses bisection on a composed one-dimensional map when the game
    has two players and one of them has two actions, and damped iteration
    otherwise.
    """
    game = ext.game
    if warm_start is None:
        start = [np.full(s, 1.0 / s) for s in game.shape]
    else:
        start = _profile(game, warm_start)
    br = response(ext, start)
    if max(np.abs(b - s).max() for b, s in zip(br, start)) <= tol:
        return _finish(ext, start, CONVERGED, 0, "initial", {})
    if residual(ext, br) <= tol:
        return _finish(ext, br, CONVERGED, 0, "direct", {})
    pivot = _bisection_pivot(ext)
    if method == "auto":
        method = "bisection" if pivot is not None else "damped"
    if method == "bisection":
        if pivot is None:
            raise EquilibriumError("bisection needs 2 players with a 2-action player")
        return _solve_bisection(ext, pivot, tol, start, scan_points)
    if method == "damped":
        return _solve_damped(ext, start, tol, max_iter)
    raise EquilibriumError(f"unknown method {method!r}")


def _bisection_pivot(ext: ExtendedGame) -> int | None:
    if ext.game.n_players != 2:
        return None
    for i in (0, 1):
        if ext.game.shape[i] == 2:
            return i
    return None


def _solve_bisection(ext: ExtendedGame, p: int, tol: float, start, scan_points: int) -> EquilibriumResult:
    q = 1 - p

    def profile_at(x: float) -> list[np.ndarray]:
        sig = [np.full(s, 1.0 / s) for s in ext.game.shape]
        sig[p] = np.array([1.0 - x, x])
        # player q's observation ignores q's own entry
        sig[q] = best_response_map(ext, q, ext.observation(q, sig))
        return sig

    def gap(x: float) -> float:
        sig = profile_at(x)
        return float(best_response_map(ext, p, ext.observation(p, sig))[1] - x)

    xs = np.linspace(0.0, 1.0, scan_points)
    fs = np.array([gap(x) for x in xs])
    evals = scan_points
    brackets = []
    for k in range(scan_points):
        if fs[k] == 0.0:
            brackets.append((xs[k], xs[k]))
        elif k + 1 < scan_points and fs[k] * fs[k + 1] < 0:
            brackets.append((xs[k], xs[k + 1]))
    roots = []
    for lo, hi in brackets:
        f_lo = gap(lo)
        x = lo
        fx = f_lo
        while hi - lo > 1e-15 and abs(fx) > tol:
            mid = 0.5 * (lo + hi)
            fx = gap(mid)
            evals += 1
            x = mid
            if fx == 0:
                break
            if (fx > 0) == (f_lo > 0):
                lo, f_lo = mid, fx
            else:
                hi = mid
        if abs(fx) > tol:
            # take the better endpoint if the midpoint stalled
            cands = [(abs(gap(v)), v) for v in (lo, hi)]
            fx, x = min(cands)
        roots.append((float(x), float(abs(fx))))
    if not roots:
        best = int(np.argmin(np.abs(fs)))
        roots = [(float(xs[best]), float(abs(fs[best])))]
    target = float(start[p][1])
    x, err = min(roots, key=lambda r: (abs(r[0] - target), r[0]))
    status = CONVERGED if err <= tol else MAX_ITER
    diag = {"pivot_player": ext.game.players[p], "roots": [r[0] for r in roots], "evaluations": evals}
    return _finish(ext, profile_at(x), status, evals, "bisection", diag)


def _solve_damped(ext: ExtendedGame, start, tol: float, max_iter: int) -> EquilibriumResult:
    sigma = [s.copy() for s in start]
    lam = 0.5
    prev = math.inf
    best = (math.inf, sigma)
    cesaro_from = max_iter // 2
    for it in range(1, max_iter + 1):
        br = response(ext, sigma)
        res = float(max(np.abs(b - s).max() for b, s in zip(br, sigma)))
        if res < best[0]:
            best = (res, [s.copy() for s in sigma])
        if res <= tol:
            return _finish(ext, sigma, CONVERGED, it - 1, "damped", {"step": lam})
        if it <= cesaro_from:
            if res > prev:
                lam = max(lam / 2, 1e-6)
            step = lam
        else:
            step = 1.0 / (it - cesaro_from + 1)
        prev = res
        sigma = [(1 - step) * s + step * b for s, b in zip(sigma, br)]
    res, sigma = best
    return _finish(ext, sigma, CONVERGED if res <= tol else MAX_ITER, max_iter, "damped",
                   {"step": lam, "fallback": "cesaro"})


# dynamics ------------------------------------------------------------------

@dataclass
class DynamicsTrace:
    variant: str
    sigmas: list[list[np.ndarray]]
    residuals: list[float]
    seed: int | None = None
    params: dict = field(default_factory=dict)

    def rows(self, game: Game) -> list[list]:
        out = []
        for n, (sig, res) in enumerate(zip(self.sigmas, self.residuals)):
            out.append([n] + [float(x) for s in sig for x in s] + [res])
        return out

    def header(self, game: Game) -> list[str]:
        cols = [f"{p}:{a}" for i, p in enumerate(game.players) for a in game.actions[i]]
        return ["step"] + cols + ["residual"]


def dynamics_run(ext: ExtendedGame, sigma0: Sequence, variant: str = "cesaro", steps: int = 1000,
                 beta: float = 0.9, population: int = 100, seed: int = 0,
                 stop_below: float | None = None) -> DynamicsTrace:
    """Iterate a learning process driven by the best-response map.

    ``cesaro``: running average of best responses. ``exponential``: geometric
    discounting with weight ``beta`` on the past. ``finite_population``: each
    period ``population`` agents per role draw actions from the best response
    and the running average tracks empirical frequencies; draws come from a
    PCG64 generator seeded with ``seed``.
    """
    if variant not in ("cesaro", "exponential", "finite_population"):
        raise EquilibriumError(f"unknown dynamics variant {variant!r}")
    if variant == "exponential" and not 0 < beta < 1:
        raise EquilibriumError("beta must lie in (0, 1)")
    if variant == "finite_population" and population < 1:
        raise EquilibriumError("population must be at least 1")
    rng = np.random.Generator(np.random.PCG64(seed)) if variant == "finite_population" else None
    sigma = _profile(ext.game, sigma0)
    br = response(ext, sigma)
    sigmas = [sigma]
    residuals = [float(max(np.abs(b - s).max() for b, s in zip(br, sigma)))]
    for n in range(1, steps + 1):
        if variant == "cesaro":
            sigma = [b / (n + 1) + n * s / (n + 1) for s, b in zip(sigma, br)]
        elif variant == "exponential":
            sigma = [beta * s + (1 - beta) * b for s, b in zip(sigma, br)]
        else:
            draws = [rng.multinomial(population, b / b.sum()) / population for b in br]
            sigma = [d / (n + 1) + n * s / (n + 1) for s, d in zip(sigma, draws)]
        br = response(ext, sigma)
        sigmas.append(sigma)
        residuals.append(float(max(np.abs(b - s).max() for b, s in zip(br, sigma))))
        if stop_below is not None and residuals[-1] < stop_below:
            break
    params = {"steps": steps}
    if variant == "exponential":
        params["beta"] = beta
    if variant == "finite_population":
        params["population"] = population
    return DynamicsTrace(variant, sigmas, residuals, seed if rng is not None else None, params)


# stability -----------------------------------------------------------------

def stability_check(ext: ExtendedGame, sigma_star: Sequence, h: float = 1e-4) -> dict:
    """Linearised stability of the continuous-time best-response dynamics in a 2x2 game."""
    if not ext.is_2x2():
        raise UnsupportedSizeError("stability check supports 2x2 games without partitions")
    sigma = _profile(ext.game, sigma_star)
    exact, numeric = [], []
    boundary = False
    for i in (0, 1):
        j = 1 - i
        x = float(sigma[j][1])
        model = ext.policies[i].choice_model
        exact.append(float(model.derivative(x)[1]))
        lo, hi = max(0.0, x - h), min(1.0, x + h)
        if lo != x - h or hi != x + h:
            boundary = True
        f = lambda z: best_response_map(ext, i, np.array([1 - z, z]))[1]
        numeric.append(float((f(hi) - f(lo)) / (hi - lo)))
    product = exact[0] * exact[1]
    root = np.sqrt(complex(product))
    eig = [complex(-1 + root), complex(-1 - root)]
    return {
        "derivatives": exact,
        "finite_difference": numeric,
        "product": product,
        "eigenvalues": [[e.real, e.imag] for e in eig],
        "max_real_part": max(e.real for e in eig),
        "stable": max(e.real for e in eig) < 0,
        "boundary": boundary,
    }


# sweeps --------------------------------------------------------------------

def profile_distance(a: Sequence, b: Sequence) -> float:
    return float(max(np.abs(np.asarray(x) - np.asarray(y)).max() for x, y in zip(a, b)))


@dataclass
class SweepPoint:
    cost: float
    result: EquilibriumResult
    distance: float | None

    def row(self, game: Game) -> list:
        sig = [float(x) for s in self.result.sigma for x in s]
        return [self.cost] + sig + [self.result.residual, self.result.status,
                                    "" if self.distance is None else self.distance]


def _reference_profiles(ext: ExtendedGame) -> list | None:
    try:
        return nash_equilibria(ext.game)
    except UnsupportedSizeError:
        return None


def cost_sweep(ext: ExtendedGame, cost_grid: Sequence[float], reference: list | None = None,
               warm: bool = True, threads: int = 1, tol: float = 1e-8) -> list[SweepPoint]:
    """Equilibria along a grid of common sampling costs, with distance to the nearest reference.

    References default to the Nash equilibria of the game. With ``warm`` each
    solve starts from the previous equilibrium; otherwise points are independent
    and may run on ``threads`` workers (results keep grid order).
    """
    grid = [float(c) for c in cost_grid]
    if not grid or min(grid) <= 0:
        raise EquilibriumError("cost grid must hold positive values")
    refs = _reference_profiles(ext) if reference is None else reference

    def distance(sigma):
        if not refs:
            return None
        return min(profile_distance(sigma, r) for r in refs)

    def point(cost, warm_start=None):
        result = sse_solve(ext.with_costs(cost), tol=tol, warm_start=warm_start)
        if not result.converged:
            logger.warning("sweep point c=%g did not converge (residual %.3g)", cost, result.residual)
        return SweepPoint(cost, result, distance(result.sigma))

    if warm:
        out = []
        prev = None
        for cost in grid:
            pt = point(cost, prev)
            prev = pt.result.sigma
            out.append(pt)
        return out
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(point, grid))
    return [point(c) for c in grid]


def pure_profile(game: Game, target: Sequence) -> list[np.ndarray]:
    prof = []
    for i, a in enumerate(target):
        vec = np.zeros(game.shape[i])
        vec[game.action_index(i, a)] = 1.0
        prof.append(vec)
    return prof


def priors_from_center(game: Game, center: Sequence, concentration: float | None = None) -> tuple[DirichletPrior, ...]:
    """Dirichlet priors whose means are the product of the opponents' centre mixes."""
    center = _profile(game, center)
    if min(float(x.min()) for x in center) <= 0:
        raise EquilibriumError("prior centre must be interior")
    priors = []
    for i in range(game.n_players):
        mean = opponent_distribution(game, i, center)
        scale = mean.size if concentration is None else concentration
        priors.append(DirichletPrior.from_mean(mean, scale))
    return tuple(priors)


def reachability_experiment(game: Game, target: Sequence, prior_center: Sequence, cost_grid: Sequence[float],
                            concentration: float | None = None, tol: float = 0.05,
                            stopping_rule: str = OPTIMAL) -> dict:
    """Does the equilibrium path approach the pure profile ``target`` as costs vanish?"""
    priors = priors_from_center(game, prior_center, concentration)
    ext = ExtendedGame(game, priors, (max(cost_grid),) * game.n_players, stopping_rule)
    ref = pure_profile(game, target)
    path = cost_sweep(ext, cost_grid, reference=[ref], warm=True)
    final = path[-1].distance
    return {"reached": bool(final is not None and final <= tol), "final_distance": final,
            "target": [game.actions[i][game.action_index(i, a)] for i, a in enumerate(target)],
            "path": path}


def rationalizability_sweep(ext: ExtendedGame, cost_grid: Sequence[float], support_eps: float = 1e-6,
                            tol: float = 1e-8) -> dict:
    """Largest rationalizability level containing every equilibrium support, per cost."""
    levels = rationalizability_levels(ext.game)
    depth = len(levels) - 1
    rows = []
    for pt in cost_sweep(ext, cost_grid, reference=[], warm=True, tol=tol):
        supports = [sorted(int(a) for a in np.flatnonzero(s > support_eps)) for s in pt.result.sigma]
        certified = 0
        for k in range(depth + 1):
            if all(set(supports[i]) <= set(levels[k][i]) for i in range(ext.game.n_players)):
                certified = k
            else:
                break
        rows.append({"cost": pt.cost, "supports": supports, "certified_k": certified,
                     "status": pt.result.status, "sigma": [s.tolist() for s in pt.result.sigma]})
    return {"solvability_depth": depth, "levels": levels, "rows": rows}
