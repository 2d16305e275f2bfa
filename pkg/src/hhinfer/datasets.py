"""Household final-size datasets at three reporting resolutions.

* high: counts of households for every (contacts, cases) outcome,
* medium: total contacts and cases per household-size stratum,
* low: total households, contacts and cases.

A high-resolution outcome vector ``C`` is *compatible* with a coarser dataset
when it aggregates to it exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping, Union

import numpy as np

from .enumeration import (
    DEFAULT_MAX_CONTACTS,
    cases_of,
    contacts_of,
    encode,
    outcome_space_size,
    stratum_slice,
)
from .errors import DomainError, InfeasibleDatasetError


def _as_counts(values, length: int | None = None) -> np.ndarray:
    arr = np.asarray(values)
    if arr.ndim != 1:
        raise DomainError("count vectors must be one-dimensional")
    if arr.size and not np.all(np.equal(np.mod(arr, 1), 0)):
        raise DomainError("counts must be integers")
    arr = arr.astype(np.int64)
    if np.any(arr < 0):
        raise DomainError("counts must be non-negative")
    if length is not None and len(arr) != length:
        raise DomainError(f"expected a vector of length {length}, got {len(arr)}")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class HighInfoDataset:
    """Household counts per outcome, indexed by :func:`~hhinfer.enumeration.encode`."""

    m: int
    counts: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "counts", _as_counts(self.counts, outcome_space_size(self.m)))

    @classmethod
    def from_outcomes(cls, outcomes: Mapping[tuple[int, int], int] | Iterable[tuple[int, int]],
                      m: int = DEFAULT_MAX_CONTACTS) -> "HighInfoDataset":
        """Build from ``{(n, z): households}`` or an iterable of ``(n, z)`` households."""
        counts = np.zeros(outcome_space_size(m), dtype=np.int64)
        items = outcomes.items() if isinstance(outcomes, Mapping) else ((o, 1) for o in outcomes)
        for (n, z), h in items:
            counts[encode(n, z, m)] += h
        return cls(m, counts)

    @property
    def households(self) -> int:
        return int(self.counts.sum())

    def stratum_households(self) -> np.ndarray:
        """Number of households with ``n = 1..m`` contacts."""
        return household_strata(self.counts, self.m)

    def outcomes(self) -> dict[tuple[int, int], int]:
        w, v = contacts_of(self.m), cases_of(self.m)
        return {(int(w[k]), int(v[k])): int(c) for k, c in enumerate(self.counts) if c}

    def __eq__(self, other):
        if not isinstance(other, HighInfoDataset):
            return NotImplemented
        return self.m == other.m and np.array_equal(self.counts, other.counts)

    def __repr__(self):
        return f"HighInfoDataset(m={self.m}, outcomes={self.outcomes()})"


@dataclass(frozen=True, eq=False)
class MediumInfoDataset:
    """Total contacts and cases among households with ``i = 1..m`` contacts.

    Stratum ``i`` holds ``contacts_by_size[i-1] / i`` households.
    """

    m: int
    contacts_by_size: np.ndarray
    cases_by_size: np.ndarray

    def __post_init__(self):
        n = _as_counts(self.contacts_by_size, self.m)
        z = _as_counts(self.cases_by_size, self.m)
        if np.any(z > n):
            raise DomainError("cases exceed contacts in some stratum")
        sizes = np.arange(1, self.m + 1)
        bad = np.nonzero(n % sizes)[0]
        if len(bad):
            i = int(bad[0]) + 1
            raise DomainError(
                f"stratum {i}: {int(n[i - 1])} contacts is not a multiple of {i}")
        object.__setattr__(self, "contacts_by_size", n)
        object.__setattr__(self, "cases_by_size", z)

    def households_by_size(self) -> np.ndarray:
        return self.contacts_by_size // np.arange(1, self.m + 1)

    def __eq__(self, other):
        if not isinstance(other, MediumInfoDataset):
            return NotImplemented
        return (self.m == other.m
                and np.array_equal(self.contacts_by_size, other.contacts_by_size)
                and np.array_equal(self.cases_by_size, other.cases_by_size))

    def __repr__(self):
        return (f"MediumInfoDataset(m={self.m}, contacts={self.contacts_by_size.tolist()}, "
                f"cases={self.cases_by_size.tolist()})")


@dataclass(frozen=True)
class LowInfoDataset:
    """Study totals ``(N, n, z)``: households, contacts and cases.

    ``m`` is the largest number of contacts a household may have. Feasibility
    (``N <= n <= m N``) is checked by :meth:`check_feasible`, not on
    construction.
    """

    households: int
    contacts: int
    cases: int
    m: int = field(default=DEFAULT_MAX_CONTACTS)

    def __post_init__(self):
        for name in ("households", "contacts", "cases"):
            value = getattr(self, name)
            if int(value) != value or value < 0:
                raise DomainError(f"{name} must be a non-negative integer, got {value}")
            object.__setattr__(self, name, int(value))
        if self.cases > self.contacts:
            raise DomainError(f"cases ({self.cases}) exceed contacts ({self.contacts})")
        if self.m < 1:
            raise DomainError(f"max contacts must be >= 1, got {self.m}")

    def check_feasible(self) -> None:
        N, n = self.households, self.contacts
        if n < N:
            raise InfeasibleDatasetError(
                f"contacts ({n}) fewer than households ({N}): every household needs a contact")
        if n > self.m * N:
            raise InfeasibleDatasetError(
                f"contacts ({n}) exceed max contacts times households ({self.m}*{N})")
        if N == 0 and n > 0:
            raise InfeasibleDatasetError("contacts reported with zero households")

    def as_tuple(self) -> tuple[int, int, int]:
        return self.households, self.contacts, self.cases


Dataset = Union[HighInfoDataset, MediumInfoDataset, LowInfoDataset]


@lru_cache(maxsize=None)
def stratum_matrices(m: int) -> tuple[np.ndarray, np.ndarray]:
    """Matrices ``A`` and ``B`` with ``A C`` the contacts and ``B C`` the cases
    per stratum."""
    K1 = outcome_space_size(m)
    A = np.zeros((m, K1), dtype=np.int64)
    B = np.zeros((m, K1), dtype=np.int64)
    for i in range(1, m + 1):
        s = stratum_slice(i)
        A[i - 1, s] = i
        B[i - 1, s] = np.arange(i + 1)
    A.flags.writeable = False
    B.flags.writeable = False
    return A, B


def household_strata(counts: np.ndarray, m: int) -> np.ndarray:
    """Households per contact count ``n = 1..m`` of an outcome vector."""
    return np.add.reduceat(np.asarray(counts), [stratum_slice(n).start for n in range(1, m + 1)])


def aggregate_to_medium(d: HighInfoDataset) -> MediumInfoDataset:
    A, B = stratum_matrices(d.m)
    return MediumInfoDataset(d.m, A @ d.counts, B @ d.counts)


def aggregate_to_low(d: HighInfoDataset | MediumInfoDataset) -> LowInfoDataset:
    if isinstance(d, HighInfoDataset):
        c = d.counts
        return LowInfoDataset(int(c.sum()), int(c @ contacts_of(d.m)), int(c @ cases_of(d.m)), d.m)
    if isinstance(d, MediumInfoDataset):
        return LowInfoDataset(int(d.households_by_size().sum()), int(d.contacts_by_size.sum()),
                              int(d.cases_by_size.sum()), d.m)
    raise DomainError(f"cannot aggregate {type(d).__name__} to low information")


def is_compatible(c, d: LowInfoDataset | MediumInfoDataset | HighInfoDataset) -> bool:
    """Whether outcome vector ``c`` aggregates exactly to dataset ``d``."""
    if isinstance(c, HighInfoDataset):
        c = c.counts
    c = np.asarray(c)
    if c.ndim != 1 or len(c) != outcome_space_size(d.m):
        raise DomainError(
            f"outcome vector of length {len(c)} does not match m={d.m} "
            f"(expected {outcome_space_size(d.m)})")
    if np.any(c < 0):
        return False
    if isinstance(d, LowInfoDataset):
        return (int(c.sum()) == d.households
                and int(c @ contacts_of(d.m)) == d.contacts
                and int(c @ cases_of(d.m)) == d.cases)
    if isinstance(d, MediumInfoDataset):
        A, B = stratum_matrices(d.m)
        return bool(np.array_equal(A @ c, d.contacts_by_size)
                    and np.array_equal(B @ c, d.cases_by_size))
    if isinstance(d, HighInfoDataset):
        return bool(np.array_equal(c, d.counts))
    raise DomainError(f"unsupported dataset type {type(d).__name__}")


def _fill_cases(sizes: list[int], cases: int) -> list[tuple[int, int]]:
    out = []
    for n in sizes:
        z = min(n, cases)
        cases -= z
        out.append((n, z))
    return out


def initial_structure(d: LowInfoDataset | MediumInfoDataset) -> np.ndarray:
    """A deterministic compatible outcome vector used to start a chain.

    Low: contacts are spread as evenly as possible over the ``N`` households
    (the first ``n mod N`` get one extra); medium: each stratum keeps its
    household count. Cases are then assigned greedily, filling households in
    order.
    """
    m = d.m
    if isinstance(d, LowInfoDataset):
        d.check_feasible()
        N, n = d.households, d.contacts
        if N == 0:
            households = []
        else:
            base, extra = divmod(n, N)
            households = _fill_cases([base + 1] * extra + [base] * (N - extra), d.cases)
    elif isinstance(d, MediumInfoDataset):
        households = []
        for i, (h, z) in enumerate(zip(d.households_by_size(), d.cases_by_size), start=1):
            households += _fill_cases([i] * int(h), int(z))
    else:
        raise DomainError(f"no structure to impute for {type(d).__name__}")
    counts = np.zeros(outcome_space_size(m), dtype=np.int64)
    for n, z in households:
        counts[encode(n, z, m)] += 1
    if not is_compatible(counts, d):
        raise InfeasibleDatasetError(f"could not construct a structure compatible with {d}")
    return counts
