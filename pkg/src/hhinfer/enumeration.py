"""Flat indexing of household outcomes.

An outcome is a pair ``(n, z)`` of contacts and cases with ``1 <= n <= m`` and
``0 <= z <= n``. Outcomes are ordered by ``n`` then ``z`` and numbered from
zero, so ``(1, 0) -> 0``, ``(1, 1) -> 1``, ``(2, 0) -> 2`` and so on up to
``(m, m) -> K``.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .errors import DomainError

DEFAULT_MAX_CONTACTS = 5
MAX_SUPPORTED_CONTACTS = 20


def _index(n: int, z: int) -> int:
    return (n - 1) * (n + 2) // 2 + z


def check_max_contacts(m: int) -> int:
    if not 1 <= m <= MAX_SUPPORTED_CONTACTS:
        raise DomainError(f"max contacts must lie in 1..{MAX_SUPPORTED_CONTACTS}, got {m}")
    return m


def encode(n: int, z: int, m: int = DEFAULT_MAX_CONTACTS) -> int:
    """Index of the outcome with ``n`` contacts and ``z`` cases."""
    check_max_contacts(m)
    if not 1 <= n <= m or not 0 <= z <= n:
        raise DomainError(f"invalid outcome (n={n}, z={z}) for m={m}")
    return _index(n, z)


def outcome_space_size(m: int = DEFAULT_MAX_CONTACTS) -> int:
    """Length of an outcome vector, ``f(m, m) + 1``."""
    check_max_contacts(m)
    return _index(m, m) + 1


@lru_cache(maxsize=None)
def _tables(m: int) -> tuple[np.ndarray, np.ndarray]:
    size = outcome_space_size(m)
    contacts = np.empty(size, dtype=np.int64)
    cases = np.empty(size, dtype=np.int64)
    for n in range(1, m + 1):
        start = _index(n, 0)
        contacts[start:start + n + 1] = n
        cases[start:start + n + 1] = np.arange(n + 1)
    contacts.flags.writeable = False
    cases.flags.writeable = False
    return contacts, cases


def decode(k: int, m: int = DEFAULT_MAX_CONTACTS) -> tuple[int, int]:
    """Inverse of :func:`encode`: ``k -> (n, z)``."""
    contacts, cases = _tables(m)
    if not 0 <= k < len(contacts):
        raise DomainError(f"outcome index {k} out of range for m={m}")
    return int(contacts[k]), int(cases[k])


def contacts_of(m: int) -> np.ndarray:
    """Read-only vector ``w`` with ``w[k]`` the contact count of outcome ``k``."""
    return _tables(m)[0]


def cases_of(m: int) -> np.ndarray:
    """Read-only vector ``v`` with ``v[k]`` the case count of outcome ``k``."""
    return _tables(m)[1]


def stratum_slice(n: int) -> slice:
    """Slice of an outcome vector covering all outcomes with ``n`` contacts."""
    start = _index(n, 0)
    return slice(start, start + n + 1)
