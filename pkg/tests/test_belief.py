from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seqsample.belief import (SSD, AlphabetError, BeliefError, DirichletPrior, FiniteSupportPrior,
                              PosteriorState, ZeroLikelihoodError, posterior_mean, predictive_prob,
                              ssd_compare, update, update_finite, update_many)

TWO_ATOM_PRIOR = FiniteSupportPrior.exact([["1/2", "1/6", "1/3"], ["1/6", "1/2", "1/3"]], ["1/2", "1/2"])


def test_prior_validation():
    with pytest.raises(BeliefError):
        DirichletPrior([1.0, 0.0])
    with pytest.raises(BeliefError):
        DirichletPrior([])


def test_beta_layout():
    prior = DirichletPrior.beta(2, 5)
    assert prior.alpha.tolist() == [5.0, 2.0]
    assert prior.mean[1] == pytest.approx(2 / 7)


def test_update_and_predictive():
    state = update_many(PosteriorState(DirichletPrior.uniform(3)), [0, 0, 2])
    assert state.counts == (2, 0, 1)
    assert predictive_prob(state, 0) == pytest.approx(3 / 6)
    assert posterior_mean(state) == pytest.approx([0.5, 1 / 6, 1 / 3])
    with pytest.raises(AlphabetError):
        update(state, 3)


def test_finite_prior_uninformative_symbol_leaves_weights():
    assert update_finite(TWO_ATOM_PRIOR, 2).weights == (Fraction(1, 2), Fraction(1, 2))


def test_finite_prior_informative_symbol():
    assert update_finite(TWO_ATOM_PRIOR, 0).weights == (Fraction(3, 4), Fraction(1, 4))


def test_zero_likelihood_reported():
    prior = FiniteSupportPrior.exact([["1", "0"]], ["1"])
    with pytest.raises(ZeroLikelihoodError):
        update_finite(prior, 1)


def test_ssd_parameter_criterion():
    assert ssd_compare(DirichletPrior.beta(2, 1), DirichletPrior.beta(1, 1)) is SSD.P_DOMINATES
    assert ssd_compare(DirichletPrior.beta(1, 2), DirichletPrior.beta(1, 1)) is SSD.Q_DOMINATES
    assert ssd_compare(DirichletPrior.beta(2, 2), DirichletPrior.beta(1, 1)) is SSD.INCOMPARABLE
    with pytest.raises(BeliefError):
        ssd_compare(DirichletPrior.uniform(3), DirichletPrior.uniform(3))


alphas = st.lists(st.floats(0.1, 10), min_size=2, max_size=4)


@settings(max_examples=60, deadline=None)
@given(alphas, st.lists(st.integers(0, 3), max_size=8))
def test_posterior_mean_is_martingale(alpha, history):
    prior = DirichletPrior(alpha)
    state = update_many(PosteriorState(prior), [y % prior.size for y in history])
    expected = sum(predictive_prob(state, y) * posterior_mean(update(state, y)) for y in range(prior.size))
    assert expected == pytest.approx(posterior_mean(state), abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(alphas, st.lists(st.integers(0, 3), max_size=8))
def test_update_order_is_irrelevant(alpha, history):
    prior = DirichletPrior(alpha)
    ys = [y % prior.size for y in history]
    assert update_many(PosteriorState(prior), ys) == update_many(PosteriorState(prior), ys[::-1])


@settings(max_examples=60, deadline=None)
@given(st.floats(0.2, 5), st.floats(0.2, 5), st.floats(0, 3), st.floats(0, 3), st.integers(0, 1))
def test_ssd_survives_common_update(succ, fail, up, down, y):
    low = DirichletPrior.beta(succ, fail + down)
    high = DirichletPrior.beta(succ + up, fail)
    assert ssd_compare(high, low) in (SSD.P_DOMINATES, SSD.EQUAL)
    after_low = DirichletPrior(update(PosteriorState(low), y).params)
    after_high = DirichletPrior(update(PosteriorState(high), y).params)
    assert ssd_compare(after_high, after_low) in (SSD.P_DOMINATES, SSD.EQUAL)


def test_finite_prior_rejects_bad_weights():
    with pytest.raises(BeliefError):
        FiniteSupportPrior.exact([["1/2", "1/2"]], ["1/2"])
    assert np.isclose(float(TWO_ATOM_PRIOR.predictive(2)), 1 / 3)
