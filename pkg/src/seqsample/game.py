"""Finite normal-form games, dominance, rationalizability and a small Nash oracle."""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import linprog

logger = logging.getLogger(__name__)

PROB_TOL = 1e-12
NASH_TOL = 1e-9


class GameError(ValueError):
    """Invalid game data or query. ``path`` points at the offending field."""

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class LPError(RuntimeError):
    def __init__(self, message: str, instance: dict):
        super().__init__(message)
        self.instance = instance


class UnsupportedSizeError(GameError):
    pass


@dataclass(frozen=True, eq=False)
class Game:
    """Normal-form game.

    ``payoffs`` has shape ``(n_players, |A_0|, ..., |A_{n-1}|)``; entry
    ``payoffs[i][a_0, ..., a_{n-1}]`` is player i's payoff at that profile.
    """

    players: tuple[str, ...]
    actions: tuple[tuple[str, ...], ...]
    payoffs: np.ndarray

    def __post_init__(self):
        players = tuple(str(p) for p in self.players)
        actions = tuple(tuple(str(a) for a in acts) for acts in self.actions)
        object.__setattr__(self, "players", players)
        object.__setattr__(self, "actions", actions)
        if len(players) < 2:
            raise GameError("a game needs at least 2 players", "/players")
        if len(set(players)) != len(players):
            raise GameError("player names must be unique", "/players")
        if len(actions) != len(players):
            raise GameError("one action list per player required", "/actions")
        for name, acts in zip(players, actions):
            if len(acts) < 1:
                raise GameError("at least one action required", f"/actions/{name}")
            if len(set(acts)) != len(acts):
                raise GameError("action labels must be unique", f"/actions/{name}")
        pay = np.array(self.payoffs, dtype=float)
        expected = (len(players),) + self.shape
        if pay.shape != expected:
            for i, name in enumerate(players):
                if pay.ndim < 1 or pay.shape[0] <= i:
                    raise GameError("missing payoff tensor", f"/payoffs/{name}")
                sub = pay[i].shape
                for axis, (got, want) in enumerate(zip(sub, self.shape)):
                    if got != want:
                        raise GameError(
                            f"axis {axis} ({players[axis]}) has length {got}, expected {want}",
                            f"/payoffs/{name}",
                        )
            raise GameError(f"payoff tensor shape {pay.shape} != {expected}", "/payoffs")
        if not np.all(np.isfinite(pay)):
            bad = np.argwhere(~np.isfinite(pay))[0]
            raise GameError("non-finite payoff entry", f"/payoffs/{players[bad[0]]}")
        pay.setflags(write=False)
        object.__setattr__(self, "payoffs", pay)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(a) for a in self.actions)

    @property
    def n_players(self) -> int:
        return len(self.players)

    def player_index(self, player: int | str) -> int:
        if isinstance(player, (int, np.integer)):
            if not 0 <= int(player) < self.n_players:
                raise GameError(f"unknown player index {player}")
            return int(player)
        try:
            return self.players.index(player)
        except ValueError:
            raise GameError(f"unknown player {player!r}") from None

    def action_index(self, player: int | str, action: int | str) -> int:
        i = self.player_index(player)
        if isinstance(action, (int, np.integer)):
            if not 0 <= int(action) < len(self.actions[i]):
                raise GameError(f"unknown action index {action} for {self.players[i]}")
            return int(action)
        try:
            return self.actions[i].index(action)
        except ValueError:
            raise GameError(f"unknown action {action!r} for {self.players[i]}") from None

    def opponents(self, player: int | str) -> list[int]:
        i = self.player_index(player)
        return [j for j in range(self.n_players) if j != i]

    def opponent_profiles(self, player: int | str) -> list[tuple[int, ...]]:
        """Opponent action profiles in lexicographic order (the observation alphabet)."""
        i = self.player_index(player)
        sizes = [self.shape[j] for j in self.opponents(i)]
        return list(itertools.product(*[range(s) for s in sizes]))

    def opponent_labels(self, player: int | str) -> list[str]:
        i = self.player_index(player)
        opp = self.opponents(i)
        return [
            ",".join(self.actions[j][a] for j, a in zip(opp, prof))
            for prof in self.opponent_profiles(i)
        ]

    def payoff_matrix(self, player: int | str) -> np.ndarray:
        """u_i as a matrix: rows are own actions, columns opponent profiles."""
        i = self.player_index(player)
        mat = np.moveaxis(self.payoffs[i], i, 0).reshape(self.shape[i], -1)
        return mat

    def payoff_span(self, player: int | str | None = None) -> float:
        block = self.payoffs if player is None else self.payoffs[self.player_index(player)]
        return float(block.max() - block.min())

    def tie_tolerance(self, player: int | str | None = None) -> float:
        return 1e-9 * self.payoff_span(player)

    def to_json(self) -> dict:
        return {
            "players": list(self.players),
            "actions": {p: list(a) for p, a in zip(self.players, self.actions)},
            "payoffs": {p: self.payoffs[i].tolist() for i, p in enumerate(self.players)},
        }

    @classmethod
    def from_json(cls, data: dict) -> "Game":
        if not isinstance(data, dict):
            raise GameError("game must be an object", "")
        for key in ("players", "actions", "payoffs"):
            if key not in data:
                raise GameError(f"missing field {key!r}", f"/{key}")
        players = list(data["players"])
        actions = []
        for p in players:
            if p not in data["actions"]:
                raise GameError("missing action list", f"/actions/{p}")
            actions.append(list(data["actions"][p]))
        shape = tuple(len(a) for a in actions)
        tensors = []
        for p in players:
            if p not in data["payoffs"]:
                raise GameError("missing payoff tensor", f"/payoffs/{p}")
            try:
                arr = np.array(data["payoffs"][p], dtype=float)
            except (ValueError, TypeError):
                raise GameError("payoff tensor is ragged or non-numeric", f"/payoffs/{p}") from None
            if arr.shape != shape:
                raise GameError(f"payoff tensor shape {arr.shape} != {shape}", f"/payoffs/{p}")
            tensors.append(arr)
        return cls(tuple(players), tuple(tuple(a) for a in actions), np.stack(tensors))

    @classmethod
    def bimatrix(cls, row: Sequence[Sequence[float]], col: Sequence[Sequence[float]],
                 players: Sequence[str] = ("Row", "Col"),
                 actions: Sequence[Sequence[str]] | None = None) -> "Game":
        row = np.asarray(row, dtype=float)
        col = np.asarray(col, dtype=float)
        if actions is None:
            actions = ([f"r{k}" for k in range(row.shape[0])], [f"c{k}" for k in range(row.shape[1])])
        return cls(tuple(players), tuple(tuple(a) for a in actions), np.stack([row, col]))


def check_distribution(dist, size: int | None = None, what: str = "distribution") -> np.ndarray:
    arr = np.asarray(dist, dtype=float)
    if arr.ndim != 1:
        raise GameError(f"{what} must be a vector")
    if size is not None and arr.size != size:
        raise GameError(f"{what} has length {arr.size}, expected {size}")
    if np.any(arr < -PROB_TOL) or abs(arr.sum() - 1.0) > PROB_TOL * max(1, arr.size):
        raise GameError(f"{what} is not a probability vector: {arr.tolist()}")
    return np.clip(arr, 0.0, None)


def opponent_distribution(game: Game, player: int | str, profile: Sequence) -> np.ndarray:
    """Product distribution over opponent profiles built from per-player mixes.

    ``profile`` holds one mix per player; the entry for ``player`` is ignored.
    """
    i = game.player_index(player)
    out = np.ones(1)
    for j in game.opponents(i):
        mix = check_distribution(profile[j], game.shape[j], f"mix of {game.players[j]}")
        out = np.outer(out, mix).ravel()
    return out


def expected_payoff(game: Game, player: int | str, action: int | str, sigma_minus_i) -> float:
    i = game.player_index(player)
    a = game.action_index(i, action)
    mat = game.payoff_matrix(i)
    sig = np.asarray(sigma_minus_i, dtype=float)
    if sig.shape != (mat.shape[1],):
        raise GameError(
            f"opponent distribution has shape {sig.shape}, expected ({mat.shape[1]},) "
            f"over opponent profiles of {game.players[i]}",
            f"/sigma_minus_i",
        )
    sig = check_distribution(sig, mat.shape[1], "opponent distribution")
    return float(mat[a] @ sig)


def best_responses(game: Game, player: int | str, sigma_minus_i) -> tuple[list[int], float]:
    i = game.player_index(player)
    mat = game.payoff_matrix(i)
    sig = check_distribution(sigma_minus_i, mat.shape[1], "opponent distribution")
    values = mat @ sig
    best = float(values.max())
    tol = game.tie_tolerance()
    return [int(a) for a in np.flatnonzero(values >= best - tol)], best


def _dominance_lp(mat: np.ndarray, a: int, cols: Sequence[int]) -> tuple[float, np.ndarray]:
    """Max over mixtures p of min_y (p @ mat[:, y] - mat[a, y]) for y in cols."""
    n = mat.shape[0]
    sub = mat[:, list(cols)]
    # variables: p_0..p_{n-1}, eps ; minimize -eps
    c = np.zeros(n + 1)
    c[-1] = -1.0
    a_ub = np.hstack([-sub.T, np.ones((sub.shape[1], 1))])
    b_ub = -sub[a]
    a_eq = np.hstack([np.ones((1, n)), np.zeros((1, 1))])
    bounds = [(0, None)] * n + [(None, None)]
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=[1.0], bounds=bounds, method="highs")
    if res.status != 0:
        raise LPError(f"dominance LP failed: {res.message}",
                      {"c": c, "A_ub": a_ub, "b_ub": b_ub, "A_eq": a_eq, "b_eq": [1.0]})
    return float(-res.fun), res.x[:n]


def _allowed_columns(game: Game, i: int, allowed) -> list[int]:
    profiles = game.opponent_profiles(i)
    if allowed is None:
        return list(range(len(profiles)))
    index = {p: k for k, p in enumerate(profiles)}
    cols = []
    for prof in allowed:
        key = tuple(int(x) for x in prof)
        if key not in index:
            raise GameError(f"unknown opponent profile {prof}")
        cols.append(index[key])
    if not cols:
        raise GameError("allowed opponent profiles must be non-empty")
    return sorted(set(cols))


def strictly_dominated(game: Game, player: int | str, action: int | str,
                       allowed_opponent_profiles: Iterable | None = None) -> bool:
    """True iff some mixture over own actions beats ``action`` against every allowed profile."""
    i = game.player_index(player)
    a = game.action_index(i, action)
    cols = _allowed_columns(game, i, allowed_opponent_profiles)
    gap, _ = _dominance_lp(game.payoff_matrix(i), a, cols)
    return gap > game.tie_tolerance()


def weakly_dominated(game: Game, player: int | str, action: int | str) -> bool:
    i = game.player_index(player)
    a = game.action_index(i, action)
    mat = game.payoff_matrix(i)
    tol = game.tie_tolerance()
    cols = list(range(mat.shape[1]))
    gap, _ = _dominance_lp(mat, a, cols)
    if gap > tol:
        return True
    # second stage: p @ mat >= mat[a] everywhere, maximise the total surplus
    n = mat.shape[0]
    c = -(mat.sum(axis=1) - mat[a].sum())
    a_ub = -mat.T
    b_ub = -mat[a]
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=np.ones((1, n)), b_eq=[1.0],
                  bounds=[(0, None)] * n, method="highs")
    if res.status != 0:
        raise LPError(f"weak dominance LP failed: {res.message}",
                      {"c": c, "A_ub": a_ub, "b_ub": b_ub})
    return float(-res.fun) > tol


def k_rationalizable_sets(game: Game, k: int | float) -> list[list[int]]:
    """Actions surviving k rounds of elimination; ``k=math.inf`` iterates to the fixed point."""
    if k != float("inf") and (int(k) != k or k < 0):
        raise GameError("k must be a nonnegative integer or inf")
    sets = [list(range(s)) for s in game.shape]
    limit = sum(game.shape) if k == float("inf") else int(k)
    for _ in range(limit):
        new_sets = _eliminate_round(game, sets)
        if new_sets == sets:
            break
        sets = new_sets
    return sets


def _eliminate_round(game: Game, sets: list[list[int]]) -> list[list[int]]:
    new_sets = []
    for i in range(game.n_players):
        allowed = list(itertools.product(*[sets[j] for j in game.opponents(i)]))
        keep = [a for a in sets[i] if not strictly_dominated(game, i, a, allowed)]
        new_sets.append(keep)
    return new_sets


def rationalizability_levels(game: Game) -> list[list[list[int]]]:
    """Sequence A^0, A^1, ... up to and including the fixed point."""
    levels = [[list(range(s)) for s in game.shape]]
    while True:
        nxt = _eliminate_round(game, levels[-1])
        if nxt == levels[-1]:
            return levels
        levels.append(nxt)


def payoff_bonus(game: Game, player: int | str, action: int | str, bonus: float) -> Game:
    if bonus < 0:
        raise GameError("bonus must be nonnegative")
    i = game.player_index(player)
    a = game.action_index(i, action)
    pay = np.array(game.payoffs)
    index = [slice(None)] * game.n_players
    index[i] = a
    pay[(i,) + tuple(index)] += bonus
    return Game(game.players, game.actions, pay)


def nash_equilibria(game: Game) -> list[list[np.ndarray]]:
    """All isolated Nash equilibria of a 2-player game with at most 4 actions each.

    Support enumeration over equally sized supports. Supports whose indifference
    system is singular are skipped and logged.
    """
    if game.n_players != 2 or max(game.shape) > 4:
        raise UnsupportedSizeError(f"Nash oracle supports 2 players with <= 4 actions, got {game.shape}")
    row = game.payoffs[0]
    col = game.payoffs[1].T  # rows: column player's actions
    m, n = game.shape
    found: list[list[np.ndarray]] = []
    for size in range(1, min(m, n) + 1):
        for sup_r in itertools.combinations(range(m), size):
            for sup_c in itertools.combinations(range(n), size):
                q = _indifference(row, sup_r, sup_c)
                p = _indifference(col, sup_c, sup_r)
                if q is None or p is None:
                    logger.debug("singular support pair %s %s skipped", sup_r, sup_c)
                    continue
                x = np.zeros(m)
                y = np.zeros(n)
                x[list(sup_r)] = p
                y[list(sup_c)] = q
                if min(x.min(), y.min()) < -NASH_TOL:
                    continue
                x = np.clip(x, 0, None)
                y = np.clip(y, 0, None)
                x /= x.sum()
                y /= y.sum()
                if not is_nash(game, [x, y]):
                    continue
                if not any(max(np.abs(x - f[0]).max(), np.abs(y - f[1]).max()) < 1e-9 for f in found):
                    found.append([x, y])
    return found


def _indifference(mat: np.ndarray, own: Sequence[int], other: Sequence[int]) -> np.ndarray | None:
    """Mix over ``other`` that makes every action in ``own`` equally good under ``mat``."""
    k = len(own)
    sub = mat[np.ix_(own, other)]
    system = np.zeros((k + 1, k + 1))
    system[:k, :k] = sub
    system[:k, k] = -1.0
    system[k, :k] = 1.0
    rhs = np.zeros(k + 1)
    rhs[k] = 1.0
    if np.linalg.matrix_rank(system) < k + 1:
        return None
    sol = np.linalg.solve(system, rhs)
    return sol[:k]


def is_nash(game: Game, profile: Sequence, tol: float = NASH_TOL) -> bool:
    for i in range(game.n_players):
        mix = np.asarray(profile[i], dtype=float)
        values = game.payoff_matrix(i) @ opponent_distribution(game, i, profile)
        best = values.max()
        if np.any(values[mix > tol] < best - tol):
            return False
    return True
