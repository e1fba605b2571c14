"""Conjugate beliefs over an opponent's action distribution."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np


class BeliefError(ValueError):
    pass


class AlphabetError(BeliefError):
    pass


class ZeroLikelihoodError(BeliefError):
    pass


@dataclass(frozen=True, eq=False)
class DirichletPrior:
    """Dirichlet pseudo-counts indexed by the opponent-profile alphabet."""

    alpha: np.ndarray

    def __post_init__(self):
        alpha = np.array(self.alpha, dtype=float).ravel()
        if alpha.size < 1:
            raise BeliefError("alpha must be non-empty")
        if not np.all(np.isfinite(alpha)) or np.any(alpha <= 0):
            raise BeliefError(f"alpha must be strictly positive, got {alpha.tolist()}")
        alpha.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)

    @property
    def alpha0(self) -> float:
        return float(self.alpha.sum())

    @property
    def size(self) -> int:
        return self.alpha.size

    @property
    def mean(self) -> np.ndarray:
        return self.alpha / self.alpha0

    @classmethod
    def beta(cls, success: float, failure: float) -> "DirichletPrior":
        """Beta(success, failure) where symbol 1 counts as a success."""
        return cls(np.array([failure, success], dtype=float))

    @classmethod
    def uniform(cls, size: int) -> "DirichletPrior":
        return cls(np.ones(size))

    @classmethod
    def from_mean(cls, mean: Sequence[float], concentration: float) -> "DirichletPrior":
        mean = np.asarray(mean, dtype=float)
        return cls(mean / mean.sum() * concentration)

    def to_json(self) -> dict:
        return {"type": "dirichlet", "alpha": self.alpha.tolist()}

    def __eq__(self, other):
        return isinstance(other, DirichletPrior) and np.array_equal(self.alpha, other.alpha)

    def __hash__(self):
        return hash(self.alpha.tobytes())


@dataclass(frozen=True)
class PosteriorState:
    prior: DirichletPrior
    counts: tuple[int, ...] = field(default=())

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts) or (0,) * self.prior.size
        if len(counts) != self.prior.size:
            raise AlphabetError(f"counts have length {len(counts)}, alphabet has {self.prior.size}")
        if any(c < 0 for c in counts):
            raise BeliefError("counts must be nonnegative")
        object.__setattr__(self, "counts", counts)

    @property
    def depth(self) -> int:
        return sum(self.counts)

    @property
    def params(self) -> np.ndarray:
        return self.prior.alpha + np.array(self.counts, dtype=float)


def update(state: PosteriorState, y: int) -> PosteriorState:
    if not 0 <= int(y) < state.prior.size:
        raise AlphabetError(f"symbol {y} outside alphabet of size {state.prior.size}")
    counts = list(state.counts)
    counts[int(y)] += 1
    return PosteriorState(state.prior, tuple(counts))


def update_many(state: PosteriorState, ys: Sequence[int]) -> PosteriorState:
    for y in ys:
        state = update(state, y)
    return state


def posterior_mean(state: PosteriorState) -> np.ndarray:
    params = state.params
    return params / params.sum()


def predictive_prob(state: PosteriorState, y: int) -> float:
    if not 0 <= int(y) < state.prior.size:
        raise AlphabetError(f"symbol {y} outside alphabet of size {state.prior.size}")
    return float((state.prior.alpha[y] + state.counts[y]) / (state.prior.alpha0 + state.depth))


@dataclass(frozen=True)
class FiniteSupportPrior:
    """Prior with finitely many atoms. Entries may be floats or Fractions."""

    atoms: tuple[tuple, ...]
    weights: tuple

    def __post_init__(self):
        atoms = tuple(tuple(a) for a in self.atoms)
        weights = tuple(self.weights)
        if not atoms or len(atoms) != len(weights):
            raise BeliefError("need one weight per atom")
        size = len(atoms[0])
        for atom in atoms:
            if len(atom) != size:
                raise BeliefError("atoms must share an alphabet")
            if any(p < 0 for p in atom) or abs(sum(atom) - 1) > 1e-12:
                raise BeliefError(f"atom {atom} is not a distribution")
        if any(w < 0 for w in weights) or abs(sum(weights) - 1) > 1e-12:
            raise BeliefError("weights must form a distribution")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @property
    def size(self) -> int:
        return len(self.atoms[0])

    def mean(self) -> tuple:
        return tuple(sum(w * atom[y] for w, atom in zip(self.weights, self.atoms))
                     for y in range(self.size))

    def predictive(self, y: int):
        return sum(w * atom[y] for w, atom in zip(self.weights, self.atoms))

    @classmethod
    def exact(cls, atoms, weights) -> "FiniteSupportPrior":
        """Build with Fraction entries parsed from strings or numbers."""
        return cls(tuple(tuple(Fraction(x) for x in a) for a in atoms),
                   tuple(Fraction(w) for w in weights))

    def to_json(self) -> dict:
        return {"type": "finite", "atoms": [[float(x) for x in a] for a in self.atoms],
                "weights": [float(w) for w in self.weights]}


def update_finite(prior: FiniteSupportPrior, y: int) -> FiniteSupportPrior:
    if not 0 <= int(y) < prior.size:
        raise AlphabetError(f"symbol {y} outside alphabet of size {prior.size}")
    raw = [w * atom[y] for w, atom in zip(prior.weights, prior.atoms)]
    total = sum(raw)
    if total == 0:
        raise ZeroLikelihoodError(f"every atom assigns probability 0 to symbol {y}")
    return FiniteSupportPrior(prior.atoms, tuple(r / total for r in raw))


class SSD(enum.Enum):
    P_DOMINATES = "p_dominates"
    Q_DOMINATES = "q_dominates"
    EQUAL = "equal"
    INCOMPARABLE = "incomparable"


def ssd_compare(p: DirichletPrior, q: DirichletPrior) -> SSD:
    """Likelihood-ratio order between two Beta priors (symbol 1 is the success)."""
    if p.size != 2 or q.size != 2:
        raise BeliefError("strong stochastic dominance is only supported for binary alphabets")
    fail_p, succ_p = p.alpha
    fail_q, succ_q = q.alpha
    if succ_p == succ_q and fail_p == fail_q:
        return SSD.EQUAL
    if succ_p >= succ_q and fail_p <= fail_q:
        return SSD.P_DOMINATES
    if succ_q >= succ_p and fail_q <= fail_p:
        return SSD.Q_DOMINATES
    return SSD.INCOMPARABLE
