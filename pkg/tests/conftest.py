import itertools
from functools import lru_cache

import numpy as np
import pytest

from seqsample import corpus
from seqsample.belief import DirichletPrior
from seqsample.stopping import StoppingProblem, horizon_bound


def enumerate_action_time(policy, sigma):
    """Walk every observation sequence symbol by symbol; independent of the lattice forward pass."""
    m = policy.size
    n_a = policy.problem.n_actions
    table = np.zeros((n_a, policy.horizon + 1))
    for length in range(policy.horizon + 1):
        for seq in itertools.product(range(m), repeat=length):
            counts = [0] * m
            stopped_early = False
            # every proper prefix must be a Continue node
            for k in range(length):
                if policy.node(counts)["stop"]:
                    stopped_early = True
                    break
                counts[seq[k]] += 1
            if stopped_early:
                continue
            node = policy.node(counts)
            if not node["stop"]:
                continue
            prob = float(np.prod([sigma[y] for y in seq])) if length else 1.0
            table[node["action"], length] += prob
    return table


def brute_value(payoffs, alpha, cost, horizon):
    """Plain recursion on count vectors with the horizon forcing a stop."""
    payoffs = np.asarray(payoffs, dtype=float)
    alpha = np.asarray(alpha, dtype=float)

    @lru_cache(maxsize=None)
    def value(counts):
        t = sum(counts)
        mean = (alpha + np.array(counts)) / (alpha.sum() + t)
        stop = float((payoffs @ mean).max())
        if t == horizon:
            return stop
        cont = sum(mean[y] * value(tuple(c + (k == y) for k, c in enumerate(counts)))
                   for y in range(len(counts))) - cost
        return max(stop, cont)

    return value


def random_binary_problems(count, seed=12345, max_horizon=12):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        payoffs = np.round(rng.uniform(-1, 1, size=(2, 2)), 3)
        prior = DirichletPrior(np.round(rng.uniform(0.5, 3.0, size=2), 3))
        cost = float(np.round(rng.uniform(0.01, 0.2), 4))
        problem = StoppingProblem(payoffs, prior, cost)
        if 1 <= horizon_bound(problem) <= max_horizon:
            out.append(problem)
    return out


@pytest.fixture
def pennies():
    return corpus.matching_pennies()


@pytest.fixture
def pennies4():
    return corpus.matching_pennies(4.0)
