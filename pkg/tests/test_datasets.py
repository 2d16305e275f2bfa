import numpy as np
import pytest
from hypothesis import given, strategies as st

from hhinfer.datasets import (HighInfoDataset, LowInfoDataset, MediumInfoDataset,
                              aggregate_to_low, aggregate_to_medium, initial_structure,
                              is_compatible)
from hhinfer.enumeration import encode, outcome_space_size
from hhinfer.errors import DomainError, InfeasibleDatasetError


def high_datasets(max_m=5, max_count=30):
    return st.integers(1, max_m).flatmap(lambda m: st.lists(
        st.integers(0, max_count), min_size=outcome_space_size(m),
        max_size=outcome_space_size(m)).map(lambda c: HighInfoDataset(m, c)))


def test_single_household_readoff():
    d = HighInfoDataset.from_outcomes({(2, 1): 1}, 5)
    med = aggregate_to_medium(d)
    assert med.contacts_by_size.tolist() == [0, 2, 0, 0, 0]
    assert med.cases_by_size.tolist() == [0, 1, 0, 0, 0]
    assert aggregate_to_low(HighInfoDataset.from_outcomes({(3, 2): 1}, 5)).as_tuple() == (1, 3, 2)


def test_empty_dataset():
    d = HighInfoDataset(3, np.zeros(9, dtype=int))
    med = aggregate_to_medium(d)
    assert med.contacts_by_size.tolist() == [0, 0, 0]
    assert med.cases_by_size.tolist() == [0, 0, 0]
    assert aggregate_to_low(d).as_tuple() == (0, 0, 0)


def test_low_information_example_totals():
    # 24 households with 45 contacts and 25 cases at m = 3
    households = ([(1, 1)] * 6 + [(1, 0)] * 4 + [(2, 2)] * 4 + [(2, 1)] * 2 + [(2, 0)] * 1
                  + [(3, 3)] * 1 + [(3, 2)] * 3 + [(3, 0)] * 3)
    d = HighInfoDataset.from_outcomes(households, 3)
    assert aggregate_to_low(d).as_tuple() == (24, 45, 25)
    med = aggregate_to_medium(d)
    assert med.households_by_size().tolist() == [10, 7, 7]
    assert med.contacts_by_size.tolist() == [10, 14, 21]
    assert med.cases_by_size.tolist() == [6, 10, 9]


@given(high_datasets())
def test_aggregation_commutes(d):
    assert aggregate_to_low(aggregate_to_medium(d)) == aggregate_to_low(d)
    assert is_compatible(d.counts, aggregate_to_medium(d))
    assert is_compatible(d.counts, aggregate_to_low(d))


def test_random_aggregation_commutes_100():
    rng = np.random.default_rng(0)
    for _ in range(100):
        m = int(rng.integers(1, 8))
        d = HighInfoDataset(m, rng.integers(0, 40, outcome_space_size(m)))
        assert aggregate_to_low(aggregate_to_medium(d)) == aggregate_to_low(d)


def test_extra_household_incompatible():
    d = HighInfoDataset.from_outcomes({(2, 1): 3, (1, 0): 2}, 3)
    low, med = aggregate_to_low(d), aggregate_to_medium(d)
    c = d.counts.copy()
    assert is_compatible(c, low) and is_compatible(c, med)
    c[encode(1, 0, 3)] += 1
    assert not is_compatible(c, low) and not is_compatible(c, med)
    with pytest.raises(DomainError):
        is_compatible(np.zeros(5, dtype=int), low)


@pytest.mark.parametrize("tup,expected", [((2, 4, 0, 3), {(2, 0): 2}), ((1, 3, 3, 3), {(3, 3): 1})])
def test_initial_structure_examples(tup, expected):
    N, n, z, m = tup
    c = initial_structure(LowInfoDataset(N, n, z, m))
    assert HighInfoDataset(m, c).outcomes() == expected


@pytest.mark.parametrize("tup", [(2, 7, 0, 3), (3, 2, 0, 3), (0, 1, 0, 3)])
def test_initial_structure_infeasible(tup):
    N, n, z, m = tup
    with pytest.raises(InfeasibleDatasetError):
        initial_structure(LowInfoDataset(N, n, z, m))


@given(st.integers(1, 5), st.integers(1, 30), st.data())
def test_initial_structure_compatible_low(m, N, data):
    n = data.draw(st.integers(N, m * N))
    z = data.draw(st.integers(0, n))
    d = LowInfoDataset(N, n, z, m)
    assert is_compatible(initial_structure(d), d)


@given(high_datasets())
def test_initial_structure_compatible_medium(d):
    med = aggregate_to_medium(d)
    assert is_compatible(initial_structure(med), med)


def test_medium_validation():
    with pytest.raises(DomainError, match="multiple of 2"):
        MediumInfoDataset(3, [1, 3, 0], [0, 0, 0])
    with pytest.raises(DomainError):
        MediumInfoDataset(2, [1, 2], [2, 0])


def test_low_validation():
    with pytest.raises(DomainError):
        LowInfoDataset(2, 3, 4)
    with pytest.raises(DomainError):
        LowInfoDataset(-1, 3, 0)


def test_high_counts_read_only_and_validated():
    d = HighInfoDataset(2, [1, 0, 0, 2, 0])
    with pytest.raises(ValueError):
        d.counts[0] = 3
    with pytest.raises(DomainError):
        HighInfoDataset(2, [1, 0, 0])
    with pytest.raises(DomainError):
        HighInfoDataset(2, [1, 0, 0, -2, 0])
