"""Optimal sequential sampling for one player on the Dirichlet count lattice.

Nodes at depth ``t`` are count vectors ``n`` with ``sum(n) == t``. They are
stored densely in arrays of shape ``(t + 1,) * (m - 1)`` indexed by the first
``m - 1`` counts; the last count is implied. Cells whose implied last count
is negative are padding and always hold zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterator, Sequence

import numpy as np

from .belief import DirichletPrior
from .game import Game, check_distribution

OPTIMAL = "optimal"
MYOPIC = "myopic"


class StoppingError(ValueError):
    pass


class HorizonCheckError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class StoppingProblem:
    """Decision problem: choose an action after sampling i.i.d. symbols at a cost.

    ``payoffs[a, y]`` is the payoff of action ``a`` when the sampled opponent
    profile is ``y``.
    """

    payoffs: np.ndarray
    prior: DirichletPrior
    cost: float
    action_labels: tuple[str, ...] = ()
    symbol_labels: tuple[str, ...] = ()
    scale: float | None = None

    def __post_init__(self):
        pay = np.array(self.payoffs, dtype=float)
        if pay.ndim != 2 or pay.shape[0] < 1 or pay.shape[1] < 1:
            raise StoppingError(f"payoff matrix must be 2-d and non-empty, got shape {pay.shape}")
        if not np.all(np.isfinite(pay)):
            raise StoppingError("payoffs must be finite")
        if pay.shape[1] != self.prior.size:
            raise StoppingError(
                f"prior alphabet has {self.prior.size} symbols, payoffs have {pay.shape[1]}")
        if not (self.cost > 0 and math.isfinite(self.cost)):
            raise StoppingError(f"cost must be positive, got {self.cost}")
        pay.setflags(write=False)
        object.__setattr__(self, "payoffs", pay)
        object.__setattr__(self, "cost", float(self.cost))
        if not self.action_labels:
            object.__setattr__(self, "action_labels", tuple(str(a) for a in range(pay.shape[0])))
        if not self.symbol_labels:
            object.__setattr__(self, "symbol_labels", tuple(str(y) for y in range(pay.shape[1])))
        if self.scale is None:
            object.__setattr__(self, "scale", float(pay.max() - pay.min()))

    @classmethod
    def from_game(cls, game: Game, player: int | str, prior: DirichletPrior, cost: float) -> "StoppingProblem":
        i = game.player_index(player)
        return cls(game.payoff_matrix(i), prior, cost, game.actions[i],
                   tuple(game.opponent_labels(i)), game.payoff_span())

    def replace(self, **changes) -> "StoppingProblem":
        fields = dict(payoffs=self.payoffs, prior=self.prior, cost=self.cost,
                      action_labels=self.action_labels, symbol_labels=self.symbol_labels,
                      scale=self.scale)
        fields.update(changes)
        return StoppingProblem(**fields)

    @property
    def n_actions(self) -> int:
        return self.payoffs.shape[0]

    @property
    def size(self) -> int:
        return self.payoffs.shape[1]

    @property
    def eps(self) -> float:
        return 1e-9 * self.scale

    @property
    def is_binary(self) -> bool:
        return self.payoffs.shape == (2, 2)

    def indifference_point(self) -> float | None:
        """Probability of symbol 1 at which a 2x2 problem is indifferent, if interior."""
        if not self.is_binary:
            raise StoppingError("indifference point is defined for 2 actions and 2 symbols")
        d0, d1 = self.payoffs[1] - self.payoffs[0]
        if d0 * d1 >= 0:
            return None
        return float(d0 / (d0 - d1))

    def upper_action(self) -> int:
        """Action preferred when symbol 1 is likely (ties go to the lower index)."""
        col = self.payoffs[:, -1]
        return int(np.argmax(col))

    def gain_constant(self) -> float:
        """Largest one-step gain times (parameter sum + 1) in the 2x2 case."""
        sig = self.indifference_point()
        if sig is None:
            return 0.0
        d0, d1 = self.payoffs[1] - self.payoffs[0]
        return float(abs(d1 - d0) * sig * (1 - sig))

    def gain_bound_numerator(self) -> float:
        """Span bound S with one-step gain <= S / (parameter sum + 1) for any alphabet."""
        pay = self.payoffs
        diffs = pay[:, None, :] - pay[None, :, :]
        return float((diffs.max(axis=2) - diffs.min(axis=2)).max())

    def has_dominant_action(self) -> bool:
        pay = self.payoffs
        return bool(np.any(np.all(pay[:, None, :] >= pay[None, :, :], axis=(1, 2))))


def _ceil(x: float) -> int:
    # guard against 9.000000000000002 style round-off in cost ratios
    return math.ceil(x - 1e-9 * max(1.0, abs(x)))


def horizon_bound(problem: StoppingProblem) -> int:
    """Depth at and beyond which stopping is optimal at every belief."""
    if problem.is_binary:
        if problem.indifference_point() is None:
            return 0
        return max(0, _ceil(problem.gain_constant() / problem.cost - 1))
    if problem.has_dominant_action():
        return 0
    span = problem.gain_bound_numerator()
    return max(0, _ceil(span / problem.cost - problem.prior.alpha0 - 1))


# lattice helpers -----------------------------------------------------------

def _shape(m: int, t: int) -> tuple[int, ...]:
    return (t + 1,) * (m - 1)


def _counts(m: int, t: int) -> tuple[np.ndarray, np.ndarray]:
    """Count arrays of shape (m, *grid) and the validity mask."""
    if m == 1:
        return np.full((1,), t, dtype=np.int64), np.ones((), dtype=bool)
    head = np.indices(_shape(m, t), dtype=np.int64)
    last = t - head.sum(axis=0)
    return np.concatenate([head, last[None]], axis=0), last >= 0


def _child(m: int, t: int, y: int) -> tuple[slice, ...]:
    """Slice of a depth t+1 array aligned with depth-t parents observing ``y``."""
    return tuple(slice(1, t + 2) if k == y else slice(0, t + 1) for k in range(m - 1))


def _means(problem: StoppingProblem, counts: np.ndarray, t: int) -> np.ndarray:
    alpha = problem.prior.alpha.reshape((-1,) + (1,) * (counts.ndim - 1))
    return (alpha + counts) / (problem.prior.alpha0 + t)


@dataclass
class StoppingPolicy:
    """Decisions and values on every lattice node up to ``horizon``.

    ``action[t]`` holds the chosen action at Stop nodes and -1 at Continue
    nodes; ``ties[t]`` is the best-response set at the posterior mean as a
    bit mask over actions.
    """

    problem: StoppingProblem
    horizon: int
    kind: str
    stop: list[np.ndarray]
    action: list[np.ndarray]
    ties: list[np.ndarray]
    value: list[np.ndarray]
    stop_value: list[np.ndarray]
    valid: list[np.ndarray]
    diagnostics: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return self.problem.size

    def _index(self, counts: Sequence[int]) -> tuple:
        counts = tuple(int(c) for c in counts)
        if len(counts) != self.size or min(counts) < 0:
            raise StoppingError(f"bad count vector {counts}")
        return counts[:-1]

    def node(self, counts: Sequence[int]) -> dict:
        t = int(sum(counts))
        if t > self.horizon:
            raise StoppingError(f"depth {t} beyond horizon {self.horizon}")
        idx = self._index(counts)
        mask = int(self.ties[t][idx])
        return {
            "depth": t,
            "counts": [int(c) for c in counts],
            "stop": bool(self.stop[t][idx]),
            "action": int(self.action[t][idx]),
            "ties": [a for a in range(self.problem.n_actions) if mask >> a & 1],
            "value": float(self.value[t][idx]),
            "stop_value": float(self.stop_value[t][idx]),
        }

    def iter_nodes(self) -> Iterator[dict]:
        m = self.size
        for t in range(self.horizon + 1):
            counts, valid = _counts(m, t)
            for idx in np.argwhere(valid) if m > 1 else [()]:
                idx = tuple(idx)
                yield self.node(tuple(int(c) for c in counts[(slice(None),) + idx]))

    def export_rows(self) -> list[dict]:
        labels = self.problem.action_labels
        rows = []
        for node in self.iter_nodes():
            rows.append({
                "depth": node["depth"],
                "counts": node["counts"],
                "decision": "stop" if node["stop"] else "continue",
                "action": labels[node["action"]] if node["stop"] else None,
                "value": node["value"],
                "stop_value": node["stop_value"],
            })
        return rows

    @cached_property
    def choice_model(self) -> "ChoiceModel":
        return ChoiceModel.from_policy(self)

    def stop_region(self) -> list[np.ndarray]:
        return [s & v for s, v in zip(self.stop, self.valid)]


def solve(problem: StoppingProblem, kind: str = OPTIMAL, horizon: int | None = None,
          self_check: bool = False) -> StoppingPolicy:
    """Backward recursion with earliest stopping (ties between stopping and continuing stop)."""
    if kind not in (OPTIMAL, MYOPIC):
        raise StoppingError(f"unknown policy kind {kind!r}")
    T = horizon_bound(problem) if horizon is None else int(horizon)
    m = problem.size
    n_a = problem.n_actions
    eps = problem.eps
    pay = problem.payoffs
    bits = (1 << np.arange(n_a, dtype=np.int64)).reshape((-1,) + (1,) * (m - 1))
    stop_l, act_l, tie_l, val_l, sv_l, valid_l = ([None] * (T + 1) for _ in range(6))
    knife = 0
    next_value = next_stop_value = None
    for t in range(T, -1, -1):
        counts, valid = _counts(m, t)
        means = _means(problem, counts, t)
        q = np.tensordot(pay, means, axes=(1, 0))
        v = q.max(axis=0)
        tied = q >= v - eps
        ties = (tied * bits).sum(axis=0)
        chosen = np.argmax(tied, axis=0)
        if t == T:
            stop = np.ones_like(valid)
            value = v
        else:
            cont = np.zeros_like(v)
            look = np.zeros_like(v)
            for y in range(m):
                sl = _child(m, t, y)
                cont += means[y] * next_value[sl]
                look += means[y] * next_stop_value[sl]
            cont -= problem.cost
            look -= problem.cost
            test = cont if kind == OPTIMAL else look
            stop = test <= v + eps
            knife += int(np.count_nonzero(valid & (np.abs(test - v) <= eps) & (test > v)))
            value = np.where(stop, v, cont)
        value = np.where(valid, value, 0.0)
        v = np.where(valid, v, 0.0)
        stop_l[t] = stop & valid
        act_l[t] = np.where(stop & valid, chosen, -1).astype(np.int16)
        tie_l[t] = np.where(valid, ties, 0)
        val_l[t] = value
        sv_l[t] = v
        valid_l[t] = valid
        next_value, next_stop_value = value, v
    root_ties = int(tie_l[0][()] if m == 1 else tie_l[0].ravel()[0])
    diagnostics = {
        "horizon": T,
        "knife_edge_nodes": knife,
        "root_stop": bool(stop_l[0].ravel()[0]),
        "root_tie": bool(stop_l[0].ravel()[0]) and bin(root_ties).count("1") > 1,
    }
    policy = StoppingPolicy(problem, T, kind, stop_l, act_l, tie_l, val_l, sv_l, valid_l, diagnostics)
    if self_check and T > 0:
        doubled = solve(problem, kind=kind, horizon=2 * T)
        same = (doubled.node((0,) * m)["stop"] == policy.node((0,) * m)["stop"]
                and doubled.node((0,) * m)["action"] == policy.node((0,) * m)["action"])
        if not same:
            raise HorizonCheckError(f"root policy changed when the horizon doubled from {T}")
        policy.diagnostics["doubling_check"] = "passed"
    return policy


def myopic_policy(problem: StoppingProblem, horizon: int | None = None) -> StoppingPolicy:
    """Stop as soon as one more observation is not expected to gain more than its cost."""
    return solve(problem, kind=MYOPIC, horizon=horizon)


# forward passes ------------------------------------------------------------

def _forward(policy: StoppingPolicy, weight: Callable[[int, int], np.ndarray | float]) -> list[np.ndarray]:
    """Mass arriving at each node when Continue nodes pass ``weight(t, y)`` to child y."""
    m = policy.size
    arrive = []
    w = np.ones(_shape(m, 0))
    for t in range(policy.horizon + 1):
        arrive.append(w)
        if t == policy.horizon:
            break
        flow = np.where(policy.stop[t], 0.0, w)
        nxt = np.zeros(_shape(m, t + 1))
        if m == 1:
            nxt = flow * weight(t, 0)
        else:
            for y in range(m):
                nxt[_child(m, t, y)] += flow * weight(t, y)
        w = nxt
    return arrive


@dataclass
class ActionTimeDistribution:
    """``table[a, t] = P(choose a, stop at t)``; ``tie_table`` counts every action in the tie set."""

    table: np.ndarray
    tie_table: np.ndarray
    action_labels: tuple[str, ...]

    @property
    def horizon(self) -> int:
        return self.table.shape[1] - 1

    @property
    def total(self) -> float:
        return float(self.table.sum())

    def marginal(self) -> np.ndarray:
        return self.table.sum(axis=1)

    def cdf(self, action: int, ties: bool = False) -> np.ndarray:
        """P(choose action, tau <= t) for every t."""
        src = self.tie_table if ties else self.table
        return np.cumsum(src[action])

    def conditional_cdf(self, action: int) -> np.ndarray:
        mass = self.table[action].sum()
        if mass <= 0:
            return np.full(self.table.shape[1], np.nan)
        return np.cumsum(self.table[action]) / mass

    def rows(self) -> list[tuple[str, int, float]]:
        return [(self.action_labels[a], t, float(self.table[a, t]))
                for a in range(self.table.shape[0]) for t in range(self.table.shape[1])]


def joint_action_time(policy: StoppingPolicy, sigma_true) -> ActionTimeDistribution:
    """Exact law of (chosen action, stopping time) when symbols are i.i.d. ``sigma_true``."""
    sigma = check_distribution(sigma_true, policy.size, "true opponent distribution")
    arrive = _forward(policy, lambda t, y: sigma[y])
    return _deposit(policy, arrive)


def _deposit(policy: StoppingPolicy, arrive: list[np.ndarray]) -> ActionTimeDistribution:
    n_a = policy.problem.n_actions
    T = policy.horizon
    table = np.zeros((n_a, T + 1))
    tie_table = np.zeros((n_a, T + 1))
    for t in range(T + 1):
        stop = policy.stop[t]
        mass = arrive[t][stop]
        table[:, t] = np.bincount(policy.action[t][stop], weights=mass, minlength=n_a)
        masks = policy.ties[t][stop]
        for a in range(n_a):
            tie_table[a, t] = mass[(masks >> a) & 1 == 1].sum()
    return ActionTimeDistribution(table, tie_table, policy.problem.action_labels)


def stop_time_tail_under_prior(policy: StoppingPolicy) -> np.ndarray:
    """P(tau > T) for T = 0..horizon when symbols follow the prior predictive."""
    problem = policy.problem
    m = policy.size
    cache = {}

    def weight(t, y):
        if t not in cache:
            counts, _ = _counts(m, t)
            cache.clear()
            cache[t] = _means(problem, counts, t)
        return cache[t][y]

    arrive = _forward(policy, weight)
    tail = np.zeros(policy.horizon + 1)
    for t in range(policy.horizon):
        tail[t] = float(arrive[t + 1].sum())
    return tail


@dataclass
class StoppingBeliefs:
    """Posterior means at the moment of stopping, with depth and probability."""

    means: np.ndarray
    depth: np.ndarray
    prob: np.ndarray
    action: np.ndarray

    def binary_mean(self) -> np.ndarray:
        return self.means[:, -1]

    def cdf(self, points) -> np.ndarray:
        vals = self.binary_mean()
        return np.array([self.prob[vals <= x].sum() for x in np.atleast_1d(points)])


def stopping_belief_distribution(policy: StoppingPolicy, sigma_true) -> StoppingBeliefs:
    sigma = check_distribution(sigma_true, policy.size, "true opponent distribution")
    arrive = _forward(policy, lambda t, y: sigma[y])
    m = policy.size
    means, depth, prob, action = [], [], [], []
    for t in range(policy.horizon + 1):
        counts, _ = _counts(m, t)
        mu = _means(policy.problem, counts, t)
        keep = policy.stop[t] & (arrive[t] > 0)
        if not np.any(keep):
            continue
        means.append(mu[:, keep].T if m > 1 else mu[:, None].T)
        depth.append(np.full(int(keep.sum()), t))
        prob.append(arrive[t][keep] if m > 1 else np.atleast_1d(arrive[t]))
        action.append(policy.action[t][keep] if m > 1 else np.atleast_1d(policy.action[t]))
    return StoppingBeliefs(np.concatenate(means), np.concatenate(depth),
                           np.concatenate(prob), np.concatenate(action))


# polynomial form -----------------------------------------------------------

def _log_power(exponent: np.ndarray, base: np.ndarray) -> np.ndarray:
    """exponent * log(base) with 0 * log 0 = 0."""
    with np.errstate(divide="ignore"):
        logs = np.log(base)
    out = exponent * np.where(base > 0, logs, 0.0)
    return np.where((exponent > 0) & (base <= 0), -np.inf, out)


@dataclass
class ChoiceModel:
    """Reachable Stop nodes with their path counts.

    P(choose a, stop at t) = sum over such nodes of count * prod_y sigma_y ** n_y,
    a polynomial in the true distribution.
    """

    counts: np.ndarray
    log_paths: np.ndarray
    depth: np.ndarray
    action: np.ndarray
    ties: np.ndarray
    n_actions: int
    horizon: int

    @classmethod
    def from_policy(cls, policy: StoppingPolicy) -> "ChoiceModel":
        m = policy.size
        logw = [np.zeros(_shape(m, 0))]
        for t in range(policy.horizon):
            flow = np.where(policy.stop[t], -np.inf, logw[t])
            nxt = np.full(_shape(m, t + 1), -np.inf)
            if m == 1:
                nxt = flow
            else:
                for y in range(m):
                    sl = _child(m, t, y)
                    nxt[sl] = np.logaddexp(nxt[sl], flow)
            logw.append(nxt)
        rows = {k: [] for k in ("counts", "log", "depth", "action", "ties")}
        for t in range(policy.horizon + 1):
            counts, _ = _counts(m, t)
            keep = policy.stop[t] & np.isfinite(logw[t])
            if m == 1:
                keep = np.atleast_1d(keep)
                rows["counts"].append(counts[None, :][keep])
                rows["log"].append(np.atleast_1d(logw[t])[keep])
                rows["action"].append(np.atleast_1d(policy.action[t])[keep])
                rows["ties"].append(np.atleast_1d(policy.ties[t])[keep])
            else:
                rows["counts"].append(counts[:, keep].T)
                rows["log"].append(logw[t][keep])
                rows["action"].append(policy.action[t][keep])
                rows["ties"].append(policy.ties[t][keep])
            rows["depth"].append(np.full(int(keep.sum()), t))
        cat = {k: np.concatenate(v) for k, v in rows.items()}
        return cls(cat["counts"].astype(np.int64), cat["log"], cat["depth"],
                   cat["action"].astype(np.int64), cat["ties"].astype(np.int64),
                   policy.problem.n_actions, policy.horizon)

    def _terms(self, sigma: np.ndarray) -> np.ndarray:
        logs = _log_power(self.counts, sigma[None, :]).sum(axis=1)
        return np.exp(self.log_paths + logs)

    def action_probs(self, sigma) -> np.ndarray:
        sigma = np.asarray(sigma, dtype=float)
        return np.bincount(self.action, weights=self._terms(sigma), minlength=self.n_actions)

    def action_time(self, sigma) -> np.ndarray:
        sigma = np.asarray(sigma, dtype=float)
        table = np.zeros((self.n_actions, self.horizon + 1))
        np.add.at(table, (self.action, self.depth), self._terms(sigma))
        return table

    def _binary_check(self):
        if self.counts.shape[1] != 2:
            raise StoppingError("derivatives are available for binary alphabets only")

    def derivative(self, x: float, select: np.ndarray | None = None) -> np.ndarray:
        """d/dx of P(choose a) per action, where symbol 1 has probability x."""
        self._binary_check()
        n0 = self.counts[:, 0].astype(float)
        n1 = self.counts[:, 1].astype(float)
        up = np.where(n1 > 0, np.exp(self.log_paths + np.log(np.maximum(n1, 1))
                                     + _log_power(n1 - 1, np.array(x)) + _log_power(n0, np.array(1 - x))), 0.0)
        down = np.where(n0 > 0, np.exp(self.log_paths + np.log(np.maximum(n0, 1))
                                       + _log_power(n1, np.array(x)) + _log_power(n0 - 1, np.array(1 - x))), 0.0)
        terms = up - down
        if select is not None:
            terms = np.where(select, terms, 0.0)
        return np.bincount(self.action, weights=terms, minlength=self.n_actions)

    def coefficients(self, select: np.ndarray) -> np.ndarray:
        """Monomial coefficients in x of the sum over the selected nodes."""
        self._binary_check()
        coef = np.zeros(self.horizon + 1)
        for n0, n1, lp in zip(self.counts[select, 0], self.counts[select, 1], self.log_paths[select]):
            k = np.arange(n0 + 1)
            binom = np.array([math.comb(int(n0), int(j)) for j in k], dtype=float)
            coef[n1 + k] += math.exp(lp) * binom * (-1.0) ** k
        return coef


# boundaries ----------------------------------------------------------------

@dataclass
class Boundaries:
    """Posterior-mean thresholds per depth for a 2x2 problem.

    ``upper[t]`` is the smallest mean at which the player stops with the
    action favoured by symbol 1; ``lower[t]`` the largest mean at which it
    stops with the other action. The ``*_lattice`` arrays are the same
    quantities read off the nodes of the given prior (NaN when absent).
    """

    depth: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    indifference: float
    horizon: int
    lower_lattice: np.ndarray
    upper_lattice: np.ndarray

    def rows(self) -> list[tuple[int, float, float]]:
        return [(int(t), float(lo), float(up)) for t, lo, up in zip(self.depth, self.lower, self.upper)]


def _root_stops_with(problem: StoppingProblem, mean: float, strength: float, action: int,
                     gain: float) -> bool:
    alpha = np.array([(1 - mean) * strength, mean * strength])
    if np.any(alpha <= 0):
        return True
    sub = problem.replace(prior=DirichletPrior(alpha))
    depth = max(0, _ceil(gain / problem.cost - 1 - strength))
    node = solve(sub, horizon=depth).node((0, 0))
    return node["stop"] and action in node["ties"]


def boundaries(problem: StoppingProblem, resolution: float = 1e-10) -> Boundaries:
    """Stopping thresholds on the posterior mean of symbol 1, depth by depth."""
    if not problem.is_binary:
        raise StoppingError("boundaries need 2 actions and 2 symbols")
    sig = problem.indifference_point()
    if sig is None:
        raise StoppingError("no indifference point; boundaries undefined")
    T = horizon_bound(problem)
    up = problem.upper_action()
    low = 1 - up
    gain = problem.gain_constant()
    policy = solve(problem)
    upper = np.full(T + 1, sig)
    lower = np.full(T + 1, sig)
    upper_lat = np.full(T + 1, np.nan)
    lower_lat = np.full(T + 1, np.nan)
    for t in range(T + 1):
        counts, valid = _counts(2, t)
        mean1 = _means(problem, counts, t)[1]
        stop = policy.stop[t]
        ties = policy.ties[t]
        hit_up = stop & valid & ((ties >> up) & 1 == 1) & (mean1 >= sig)
        hit_low = stop & valid & ((ties >> low) & 1 == 1) & (mean1 <= sig)
        if hit_up.any():
            upper_lat[t] = mean1[hit_up].min()
        if hit_low.any():
            lower_lat[t] = mean1[hit_low].max()
        if t == T:
            continue
        strength = problem.prior.alpha0 + t
        upper[t] = _bisect_threshold(problem, sig, 1.0, strength, up, gain, resolution, rising=True)
        lower[t] = _bisect_threshold(problem, 0.0, sig, strength, low, gain, resolution, rising=False)
    return Boundaries(np.arange(T + 1), lower, upper, sig, T, lower_lat, upper_lat)


def _bisect_threshold(problem, lo, hi, strength, action, gain, resolution, rising) -> float:
    """Boundary of the set of means where the root stops with ``action``.

    ``rising`` means the set is [threshold, hi]; otherwise it is [lo, threshold].
    """
    inner = lo if rising else hi
    if _root_stops_with(problem, inner, strength, action, gain):
        return inner
    a, b = lo, hi
    while b - a > resolution:
        mid = 0.5 * (a + b)
        hit = _root_stops_with(problem, mid, strength, action, gain)
        if hit == rising:
            b = mid
        else:
            a = mid
    return b if rising else a


# structural checks ---------------------------------------------------------

def never_indifferent_violations(policy: StoppingPolicy) -> list[dict]:
    """Stop nodes reached after continuing whose choice is not the best reply to the last symbol.

    Returns one record per offending (parent, symbol) pair.
    """
    pay = policy.problem.payoffs
    m = policy.size
    out = []
    for y in range(m):
        col = pay[:, y]
        best = np.flatnonzero(col >= col.max() - policy.problem.eps)
        expect = int(sum(1 << int(a) for a in best))
        for t in range(policy.horizon):
            parent_cont = policy.valid[t] & ~policy.stop[t]
            if m == 1:
                child_stop = policy.stop[t + 1]
                child_ties = policy.ties[t + 1]
            else:
                sl = _child(m, t, y)
                child_stop = policy.stop[t + 1][sl]
                child_ties = policy.ties[t + 1][sl]
            bad = parent_cont & child_stop & (child_ties != expect)
            for idx in np.argwhere(np.atleast_1d(bad)):
                out.append({"depth": t + 1, "parent_index": idx.tolist(), "symbol": y,
                            "ties": int(np.atleast_1d(child_ties)[tuple(idx)]), "expected": expect})
    return out


def contains_stop_region(outer: StoppingPolicy, inner: StoppingPolicy) -> bool:
    """True iff every Stop node of ``inner`` is also a Stop node of ``outer``."""
    depth = min(outer.horizon, inner.horizon)
    for t in range(depth + 1):
        if np.any(inner.stop[t] & ~outer.stop[t]):
            return False
    return True
