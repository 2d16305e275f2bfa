import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import chisquare

from hhinfer.datasets import (HighInfoDataset, LowInfoDataset, aggregate_to_low,
                              aggregate_to_medium, initial_structure, is_compatible)
from hhinfer.enumeration import encode, outcome_space_size
from hhinfer.errors import DomainError
from hhinfer.proposals import (LOW, MEDIUM, proposal_distribution, proposal_log_prob,
                               propose_low, propose_medium)

from conftest import compatible_structures


def vec(outcomes, m):
    return HighInfoDataset.from_outcomes(outcomes, m).counts.copy()


def test_low_no_move_without_receiver():
    rng = np.random.default_rng(0)
    assert propose_low(vec({(2, 0): 1}, 3), 3, rng) is None
    assert proposal_distribution(vec({(2, 0): 1}, 3), LOW, 3) == {}


def test_low_no_move_without_donor():
    rng = np.random.default_rng(0)
    assert propose_low(vec({(1, 0): 2, (1, 1): 1}, 3), 3, rng) is None


def test_low_two_household_swap_is_identity():
    # the only move hands the (2,0) household's non-case to the (1,0) household
    c = vec({(2, 0): 1, (1, 0): 1}, 3)
    rng = np.random.default_rng(1)
    for _ in range(50):
        new, (k1, s, k2) = propose_low(c, 3, rng)
        assert (k1, s, k2) == (encode(2, 0, 3), 0, encode(1, 0, 3))
        np.testing.assert_array_equal(new, c)
    assert proposal_log_prob(c, c, LOW, 3) == pytest.approx(0.0, abs=1e-15)


def test_low_case_move_preserves_cases():
    c = vec({(3, 2): 2, (1, 0): 1}, 3)
    rng = np.random.default_rng(2)
    for _ in range(200):
        new, (k1, s, k2) = propose_low(c, 3, rng)
        assert new @ np.array([0, 1, 0, 1, 2, 0, 1, 2, 3]) == 4


def test_medium_unique_move():
    c = vec({(2, 2): 1, (2, 0): 1}, 2)
    new, (k1, k2) = propose_medium(c, 2, np.random.default_rng(0))
    np.testing.assert_array_equal(new, vec({(2, 1): 2}, 2))
    assert (k1, k2) == (encode(2, 2, 2), encode(2, 0, 2))
    # P1[k1] = 1 and P2[k2] = 1
    assert proposal_log_prob(c, new, MEDIUM, 2) == pytest.approx(0.0, abs=1e-15)
    back = proposal_distribution(new, MEDIUM, 2)
    assert back == pytest.approx({tuple(c): 1.0})


def test_medium_no_move_when_fully_infected():
    assert propose_medium(vec({(2, 2): 2, (3, 3): 1, (1, 1): 4}, 3), 3,
                          np.random.default_rng(0)) is None
    assert propose_medium(vec({(2, 2): 1, (3, 0): 1}, 3), 3, np.random.default_rng(0)) is None


def test_unreachable_is_minus_inf():
    c = vec({(2, 0): 1, (1, 0): 2}, 3)
    far = vec({(1, 0): 1, (3, 0): 1, (1, 1): 1}, 3)
    assert proposal_log_prob(c, far, LOW, 3) == -math.inf
    with pytest.raises(DomainError):
        proposal_log_prob(c, far[:5], LOW, 3)
    with pytest.raises(DomainError):
        proposal_log_prob(c, c, "high", 3)


@pytest.mark.parametrize("level", [LOW, MEDIUM])
def test_total_probability_audit(level):
    states = compatible_structures(3, 5, 2, 3)
    assert len(states) > 1
    for c in states:
        dist = proposal_distribution(c, level, 3)
        if level == LOW:
            total = sum(math.exp(proposal_log_prob(c, np.array(k), level, 3)) for k in dist)
            assert abs(total - 1) < 1e-10
            assert abs(sum(dist.values()) - 1) < 1e-10


@st.composite
def states(draw, max_m=4):
    m = draw(st.integers(2, max_m))
    counts = draw(st.lists(st.integers(0, 3), min_size=outcome_space_size(m),
                           max_size=outcome_space_size(m)))
    return m, np.array(counts)


@given(states(), st.sampled_from([LOW, MEDIUM]))
def test_exact_probability_matches_brute_force(state, level):
    m, c = state
    dist = proposal_distribution(c, level, m)
    for key, p in dist.items():
        assert math.exp(proposal_log_prob(c, np.array(key), level, m)) == pytest.approx(p, rel=1e-12)
    if dist:
        assert sum(dist.values()) <= 1 + 1e-12


@pytest.mark.parametrize("level", [LOW, MEDIUM])
def test_sampled_proposals_follow_distribution(level):
    c = vec({(1, 0): 2, (2, 1): 2, (3, 1): 1, (3, 3): 1}, 3)
    dist = proposal_distribution(c, level, 3)
    keys = list(dist) + [None]
    index = {k: i for i, k in enumerate(keys)}
    rng = np.random.default_rng(3)
    draws = 40_000
    obs = np.zeros(len(keys))
    propose = propose_low if level == LOW else propose_medium
    for _ in range(draws):
        out = propose(c, 3, rng)
        obs[index[None if out is None else tuple(int(x) for x in out[0])]] += 1
    # leftover mass is the no-move outcome
    probs = np.array([dist[k] for k in keys[:-1]] + [1 - sum(dist.values())])
    keep = probs > 1e-12
    assert obs[~keep].sum() == 0
    assert chisquare(obs[keep], probs[keep] * draws).pvalue > 1e-3


def test_compatibility_preserved_over_sweeps():
    rng = np.random.default_rng(9)
    low = LowInfoDataset(40, 110, 37, 5)
    c = initial_structure(low)
    for _ in range(10_000):
        out = propose_low(c, 5, rng)
        if out is not None:
            c = out[0]
            assert is_compatible(c, low)
    high = HighInfoDataset(5, c)
    med = aggregate_to_medium(high)
    for _ in range(10_000):
        out = propose_medium(c, 5, rng)
        if out is not None:
            c = out[0]
            assert is_compatible(c, med)
    assert aggregate_to_low(HighInfoDataset(5, c)) == low
