"""Executable checks of comparative statics, decision times, misspecification and analogy limits."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .belief import SSD, BeliefError, DirichletPrior, FiniteSupportPrior, ssd_compare, update_finite
from .equilibrium import (ExtendedGame, coarsen_payoffs, cost_sweep, profile_distance, push_forward)
from .game import Game, GameError, nash_equilibria, opponent_distribution
from .stopping import (StoppingPolicy, StoppingProblem, joint_action_time, solve,
                       stopping_belief_distribution)

SLACK = 1e-10


def binary_grid(points: int = 21) -> list[np.ndarray]:
    return [np.array([1 - x, x]) for x in np.linspace(0.0, 1.0, points)]


def simplex_grid(size: int, steps: int) -> list[np.ndarray]:
    """All distributions with entries in multiples of 1/steps."""
    out = []
    for combo in itertools.product(range(steps + 1), repeat=size - 1):
        if sum(combo) <= steps:
            out.append(np.array(list(combo) + [steps - sum(combo)], dtype=float) / steps)
    return out


@dataclass
class StaticsReport:
    """Tabulated probabilities along a parameter grid and the monotonicity verdict.

    ``values[k, s, t]`` is the tracked probability at parameter k, grid
    distribution s and time t; it must be nondecreasing in k. ``complement``
    (if present) must be nonincreasing in k.
    """

    name: str
    parameters: list
    sigmas: list[np.ndarray]
    times: list[int]
    values: np.ndarray
    complement: np.ndarray | None = None
    extra: dict = field(default_factory=dict)

    @property
    def worst_violation(self) -> float:
        worst = float(np.max(np.diff(self.values, axis=0) * -1, initial=0.0))
        if self.complement is not None:
            worst = max(worst, float(np.max(np.diff(self.complement, axis=0), initial=0.0)))
        for key in ("polynomial_mismatch", "negative_derivative"):
            worst = max(worst, float(self.extra.get(key, 0.0)))
        return max(0.0, worst)

    @property
    def verdict(self) -> str:
        return "pass" if self.worst_violation <= SLACK else "fail"

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "parameters": [str(p) for p in self.parameters],
            "sigmas": [s.tolist() for s in self.sigmas],
            "times": list(self.times),
            "worst_violation": self.worst_violation,
            "verdict": self.verdict,
            "extra": {k: v for k, v in self.extra.items() if not isinstance(v, np.ndarray)},
        }

    def rows(self) -> list[list]:
        out = []
        for k, s, t in itertools.product(range(len(self.parameters)), range(len(self.sigmas)),
                                         range(len(self.times))):
            row = [str(self.parameters[k]), s, self.times[t], float(self.values[k, s, t])]
            if self.complement is not None:
                row.append(float(self.complement[k, s, t]))
            out.append(row)
        return out


def _cdf_in_ties(policy: StoppingPolicy, sigma: np.ndarray, action: int, times: Sequence[int]):
    dist = joint_action_time(policy, sigma)
    inside = dist.cdf(action, ties=True)
    total = np.cumsum(dist.table.sum(axis=0))
    idx = np.minimum(np.asarray(times), policy.horizon)
    return inside[idx], total[idx] - inside[idx]


def _default_times(policies: Sequence[StoppingPolicy]) -> list[int]:
    return list(range(max(p.horizon for p in policies) + 1))


def comparative_statics_payoff(problem: StoppingProblem, action: int, bonus_grid: Sequence[float],
                               sigma_grid: Sequence | None = None,
                               t_grid: Sequence[int] | None = None) -> StaticsReport:
    """Raising the payoff of ``action`` by a constant should make it chosen more often and sooner."""
    bonuses = [float(b) for b in bonus_grid]
    if any(b < 0 for b in bonuses) or any(b2 < b1 for b1, b2 in zip(bonuses, bonuses[1:])):
        raise ValueError("bonus grid must be nonnegative and increasing")
    sigmas = sigma_grid if sigma_grid is not None else simplex_grid(problem.size, 20 if problem.size == 2 else 5)
    policies = []
    for b in bonuses:
        pay = np.array(problem.payoffs)
        pay[action] += b
        policies.append(solve(problem.replace(payoffs=pay)))
    times = list(t_grid) if t_grid is not None else _default_times(policies)
    vals = np.zeros((len(bonuses), len(sigmas), len(times)))
    comp = np.zeros_like(vals)
    for k, pol in enumerate(policies):
        for s, sig in enumerate(sigmas):
            vals[k, s], comp[k, s] = _cdf_in_ties(pol, np.asarray(sig), action, times)
    return StaticsReport("payoff", bonuses, [np.asarray(s) for s in sigmas], times, vals, comp,
                         {"action": action, "horizons": [p.horizon for p in policies]})


def comparative_statics_prior(problem: StoppingProblem, prior_chain: Sequence[DirichletPrior],
                              sigma_grid: Sequence | None = None,
                              t_grid: Sequence[int] | None = None) -> StaticsReport:
    """Moving the prior up in the likelihood-ratio order should favour the upper action."""
    for k, (lo, hi) in enumerate(zip(prior_chain, prior_chain[1:])):
        if ssd_compare(hi, lo) not in (SSD.P_DOMINATES, SSD.EQUAL):
            raise BeliefError(f"prior chain is not increasing between positions {k} and {k + 1}: "
                              f"{lo.alpha.tolist()} -> {hi.alpha.tolist()}")
    sigmas = sigma_grid if sigma_grid is not None else binary_grid()
    up = problem.upper_action()
    policies = [solve(problem.replace(prior=p)) for p in prior_chain]
    times = list(t_grid) if t_grid is not None else _default_times(policies)
    vals = np.zeros((len(policies), len(sigmas), len(times)))
    for k, pol in enumerate(policies):
        for s, sig in enumerate(sigmas):
            vals[k, s], _ = _cdf_in_ties(pol, np.asarray(sig), up, times)
    return StaticsReport("prior", [p.alpha.tolist() for p in prior_chain], [np.asarray(s) for s in sigmas],
                         times, vals, None, {"action": up})


def comparative_statics_sigma(problem: StoppingProblem, sigma_grid: Sequence | None = None,
                              t_grid: Sequence[int] | None = None, dense: int = 401) -> StaticsReport:
    """P(upper action in the tie set, stop by t) should rise with the probability of symbol 1.

    The report also rebuilds each curve from its monomial coefficients and
    checks the exact derivative on a dense grid of [0, 1).
    """
    if problem.size != 2:
        raise ValueError("sigma statics need a binary alphabet")
    sigmas = [np.asarray(s) for s in (sigma_grid if sigma_grid is not None else binary_grid())]
    order = np.argsort([s[1] for s in sigmas], kind="stable")
    sigmas = [sigmas[k] for k in order]
    policy = solve(problem)
    up = problem.upper_action()
    times = list(t_grid) if t_grid is not None else _default_times([policy])
    vals = np.zeros((len(sigmas), 1, len(times)))
    for s, sig in enumerate(sigmas):
        vals[s, 0], _ = _cdf_in_ties(policy, sig, up, times)
    model = policy.choice_model
    in_ties = (model.ties >> up) & 1 == 1
    mismatch = 0.0
    negative = 0.0
    coefficients = {}
    xs = np.linspace(0.0, 1.0, dense, endpoint=False)
    for j, t in enumerate(times):
        select = in_ties & (model.depth <= t)
        if policy.horizon <= 30:
            coef = model.coefficients(select)
            coefficients[int(t)] = coef.tolist()
            poly = np.polynomial.polynomial.polyval([s[1] for s in sigmas], coef)
            mismatch = max(mismatch, float(np.abs(poly - vals[:, 0, j]).max()))
        slopes = np.array([model.derivative(x, select).sum() for x in xs])
        negative = max(negative, float(-slopes.min()))
    extra = {"action": up, "degree_bound": policy.horizon, "coefficients": coefficients,
             "polynomial_mismatch": mismatch, "negative_derivative": max(negative, 0.0)}
    return StaticsReport("sigma", [float(s[1]) for s in sigmas], [np.array([1.0])], times, vals, None, extra)


def weighted_rank_correlation(x, y, w) -> float:
    """Spearman correlation with observation weights (weighted midranks, weighted Pearson)."""
    x, y, w = (np.asarray(v, dtype=float) for v in (x, y, w))
    if w.sum() <= 0:
        return float("nan")
    w = w / w.sum()
    rx, ry = _weighted_ranks(x, w), _weighted_ranks(y, w)
    mx, my = (w * rx).sum(), (w * ry).sum()
    cov = (w * (rx - mx) * (ry - my)).sum()
    vx, vy = (w * (rx - mx) ** 2).sum(), (w * (ry - my) ** 2).sum()
    if vx <= 0 or vy <= 0:
        return float("nan")
    return float(cov / np.sqrt(vx * vy))


def _weighted_ranks(v: np.ndarray, w: np.ndarray) -> np.ndarray:
    ranks = np.zeros_like(v)
    below = 0.0
    for value in np.unique(v):
        mask = v == value
        mass = w[mask].sum()
        ranks[mask] = below + mass / 2
        below += mass
    return ranks


def time_revealed_indifference(policy: StoppingPolicy, sigma_true, indifference_point: float | None = None) -> dict:
    """Expected distance of the stopping belief from indifference, by stopping time."""
    sig_tilde = policy.problem.indifference_point() if indifference_point is None else indifference_point
    if sig_tilde is None:
        raise ValueError("problem has no interior indifference point")
    beliefs = stopping_belief_distribution(policy, np.asarray(sigma_true, dtype=float))
    dist = np.abs(beliefs.binary_mean() - sig_tilde)
    per_depth = {}
    for t in np.unique(beliefs.depth):
        mask = beliefs.depth == t
        mass = beliefs.prob[mask].sum()
        if mass > 0:
            per_depth[int(t)] = float((beliefs.prob[mask] * dist[mask]).sum() / mass)
    seq = [per_depth[t] for t in sorted(per_depth)]
    worst = max([b - a for a, b in zip(seq, seq[1:])], default=0.0)
    return {
        "indifference_point": sig_tilde,
        "mean_distance_by_depth": per_depth,
        "worst_increase": max(worst, 0.0),
        "verdict": "pass" if worst <= SLACK else "fail",
        "rank_correlation": weighted_rank_correlation(beliefs.depth, dist, beliefs.prob),
    }


# misspecification ----------------------------------------------------------

@dataclass
class MisspecReport:
    true_sigma: list[float]
    cost: float
    never_stop: float | None
    never_stop_upper: float
    stop_mass_lower: float
    undetermined_mass: float
    exact: bool
    gain_trace: list
    zero_likelihood_mass: float = 0.0
    note: str = ""

    def to_json(self) -> dict:
        return {
            "true_sigma": self.true_sigma,
            "cost": self.cost,
            "never_stop": self.never_stop,
            "never_stop_upper": self.never_stop_upper,
            "stop_mass_lower": self.stop_mass_lower,
            "undetermined_mass": self.undetermined_mass,
            "exact": self.exact,
            "gain_trace": [str(g) for g in self.gain_trace],
            "zero_likelihood_mass": self.zero_likelihood_mass,
            "note": self.note,
        }


def _stop_value(payoffs, mean):
    return max(sum(u * m for u, m in zip(row, mean)) for row in payoffs)


def one_step_gain(payoffs, prior: FiniteSupportPrior):
    """Expected stop value after one more observation minus the stop value now (exact for Fractions)."""
    now = _stop_value(payoffs, prior.mean())
    ahead = 0
    for y in range(prior.size):
        p = prior.predictive(y)
        if p:
            ahead += p * _stop_value(payoffs, update_finite(prior, y).mean())
    return ahead - now


def information_gain(payoffs, prior: FiniteSupportPrior):
    """Value of learning the true distribution outright, minus the stop value now."""
    full = sum(w * _stop_value(payoffs, atom) for w, atom in zip(prior.weights, prior.atoms))
    return full - _stop_value(payoffs, prior.mean())


def misspec_detector(game: Game, player, prior, cost, true_sigma, probe_depth: int = 20) -> MisspecReport:
    """Probability that a player never stops when the truth may lie outside the prior's support."""
    i = game.player_index(player)
    matrix = game.payoff_matrix(i)
    sigma = [float(x) for x in true_sigma]
    if isinstance(prior, DirichletPrior):
        policy = solve(StoppingProblem.from_game(game, i, prior, float(cost)))
        mass = joint_action_time(policy, np.array(sigma)).total
        never = max(0.0, 1.0 - mass)
        return MisspecReport(sigma, float(cost), never, never, mass, 0.0, True, [],
                             note="full-support prior: bounded stopping time")
    exact_pay = [[Fraction(x) for x in row] for row in matrix.tolist()]
    c = Fraction(str(cost)) if not isinstance(cost, Fraction) else cost
    support = [y for y, p in enumerate(sigma) if p > 0]
    trace = []
    if len(support) == 1:
        y = support[0]
        state = prior
        absorbing = False
        for _ in range(probe_depth + 1):
            trace.append(one_step_gain(exact_pay, state))
            if state.predictive(y) == 0:
                return MisspecReport(sigma, float(c), None, 1.0, 0.0, 1.0, False, trace, 1.0,
                                     "true symbol has zero prior likelihood")
            nxt = update_finite(state, y)
            if nxt.weights == state.weights:
                absorbing = True
                break
            state = nxt
        if absorbing and state.weights == prior.weights:
            if trace[0] > c:
                return MisspecReport(sigma, float(c), 1.0, 1.0, 0.0, 0.0, True, trace,
                                     note="belief never moves and one more sample always looks worth its cost")
            if information_gain(exact_pay, prior) <= c:
                return MisspecReport(sigma, float(c), 0.0, 0.0, 1.0, 0.0, True, trace,
                                     note="even perfect information is not worth one sample")
    return _certified_probe(exact_pay, prior, c, sigma, probe_depth, trace)


def _certified_probe(payoffs, prior: FiniteSupportPrior, cost, sigma, depth, trace) -> MisspecReport:
    """Bounds on the stopping mass from nodes where the optimal decision is certain.

    A node certainly stops when perfect information is worth at most the cost,
    and certainly continues when the truncated recursion already beats stopping.
    Other nodes are left undetermined.
    """
    m = prior.size
    pay = np.array(payoffs, dtype=float)
    c = float(cost)
    scale = float(pay.max() - pay.min())
    eps = 1e-9 * scale
    states = {}

    def state(counts):
        if counts not in states:
            cur = prior
            for y, n in enumerate(counts):
                for _ in range(n):
                    cur = update_finite(cur, y)
            states[counts] = cur
        return states[counts]

    nodes = [[tuple(n) for n in _compositions(t, m)] for t in range(depth + 1)]
    value = {}
    cont_gain = {}
    for t in range(depth, -1, -1):
        for n in nodes[t]:
            try:
                st = state(n)
            except BeliefError:
                continue
            stop_v = float(_stop_value(payoffs, st.mean()))
            if t == depth:
                value[n] = stop_v
                continue
            cont = -c
            for y in range(m):
                p = float(st.predictive(y))
                if p > 0:
                    cont += p * value[n[:y] + (n[y] + 1,) + n[y + 1:]]
            value[n] = max(stop_v, cont)
            cont_gain[n] = cont - stop_v
    mass = {nodes[0][0]: 1.0}
    stopped = undetermined = lost = 0.0
    for t in range(depth + 1):
        for n in nodes[t]:
            w = mass.get(n, 0.0)
            if w == 0:
                continue
            try:
                st = state(n)
            except BeliefError:
                lost += w
                continue
            if float(information_gain(payoffs, st)) <= c + eps:
                stopped += w
            elif t < depth and cont_gain[n] > eps:
                for y in range(m):
                    if sigma[y] > 0:
                        child = n[:y] + (n[y] + 1,) + n[y + 1:]
                        mass[child] = mass.get(child, 0.0) + w * sigma[y]
            elif t < depth:
                undetermined += w
    return MisspecReport(sigma, c, None, 1.0 - stopped, stopped, undetermined, False, trace, lost,
                         "bounds from certified nodes within the probe depth")


def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


# analogy partitions --------------------------------------------------------

@dataclass
class AnalogyTransform:
    player: int
    partition: list[int]
    class_labels: list[str]
    payoffs: np.ndarray
    prior: DirichletPrior

    def class_distribution(self, sigma_minus_i) -> np.ndarray:
        return push_forward(np.asarray(sigma_minus_i, dtype=float), self.partition)

    def problem(self, cost: float, action_labels=()) -> StoppingProblem:
        return StoppingProblem(self.payoffs, self.prior, cost, tuple(action_labels), tuple(self.class_labels))


def analogy_transform(game: Game, player, partition: Sequence[int],
                      prior: DirichletPrior | None = None) -> AnalogyTransform:
    """Coarsen what ``player`` observes: classes of opponent profiles with averaged payoffs."""
    i = game.player_index(player)
    part = [int(z) for z in partition]
    n_prof = len(game.opponent_profiles(i))
    if len(part) != n_prof:
        raise GameError(f"partition must assign all {n_prof} opponent profiles")
    classes = max(part) + 1
    if sorted(set(part)) != list(range(classes)):
        raise GameError("partition is not surjective onto its classes")
    payoffs = coarsen_payoffs(game.payoff_matrix(i), part)
    labels = game.opponent_labels(i)
    class_labels = ["|".join(labels[k] for k in range(n_prof) if part[k] == z) for z in range(classes)]
    prior = prior if prior is not None else DirichletPrior.uniform(classes)
    return AnalogyTransform(i, part, class_labels, payoffs, prior)


def analogy_game(game: Game, partitions: Sequence) -> Game:
    """Game in which each partitioned player's payoff is replaced by its class average."""
    pay = np.array(game.payoffs)
    for i, part in enumerate(partitions):
        if part is None:
            continue
        coarse = coarsen_payoffs(game.payoff_matrix(i), part)
        expanded = coarse[:, np.asarray(part)]
        shape = (game.shape[i],) + tuple(game.shape[j] for j in game.opponents(i))
        pay[i] = np.moveaxis(expanded.reshape(shape), 0, i)
    return Game(game.players, game.actions, pay)


def abee_violation(game: Game, partitions: Sequence, profile: Sequence) -> float:
    """Largest expected shortfall against the coarse best reply over players."""
    worst = 0.0
    for i in range(game.n_players):
        part = partitions[i]
        q = opponent_distribution(game, i, profile)
        mat = game.payoff_matrix(i)
        if part is not None:
            q = push_forward(q, part)
            mat = coarsen_payoffs(mat, part)
        vals = mat @ q
        worst = max(worst, float(np.asarray(profile[i]) @ (vals.max() - vals)))
    return worst


def analogy_limit(game: Game, partitions: Sequence, cost_grid: Sequence[float],
                  priors: Sequence[DirichletPrior] | None = None, tol: float = 0.05) -> dict:
    """Sweep costs with coarsened observations and compare the end point with analogy-based equilibria."""
    parts = [None if p is None else [int(z) for z in p] for p in partitions]
    if priors is None:
        priors = []
        for i in range(game.n_players):
            size = len(game.opponent_profiles(i)) if parts[i] is None else max(parts[i]) + 1
            priors.append(DirichletPrior.uniform(size))
    ext = ExtendedGame(game, tuple(priors), (max(cost_grid),) * game.n_players, partitions=tuple(parts))
    targets = nash_equilibria(analogy_game(game, parts))
    path = cost_sweep(ext, cost_grid, reference=targets, warm=True)
    final = path[-1]
    nash = nash_equilibria(game)
    return {
        "targets": [[s.tolist() for s in t] for t in targets],
        "path": path,
        "final_distance": final.distance,
        "final_violation": abee_violation(game, parts, final.result.sigma),
        "nash_distance": min(profile_distance(final.result.sigma, n) for n in nash) if nash else None,
        "verdict": "pass" if abee_violation(game, parts, final.result.sigma) <= tol else "fail",
    }
