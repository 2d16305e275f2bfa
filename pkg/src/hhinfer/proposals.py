"""Structure proposals on compatible outcome vectors.

``propose_low`` moves one contact (infected or not) from a household with at
least two contacts to another household with fewer than ``m`` contacts, which
preserves the numbers of households, contacts and cases. ``propose_medium``
moves one case to a non-case position in another household of the same size,
which preserves contacts and cases in every stratum.

Both return ``None`` when no move is possible. :func:`proposal_log_prob`
computes the exact probability that a proposal maps ``c`` to ``c'`` by summing
over every selection that produces ``c'``.
"""

from __future__ import annotations

import math
from functools import lru_cache
from itertools import product

import numpy as np

from .enumeration import cases_of, contacts_of, outcome_space_size
from .errors import DomainError

LOW = "low"
MEDIUM = "medium"


def _f(n: int, z: int) -> int:
    return (n - 1) * (n + 2) // 2 + z


@lru_cache(maxsize=None)
def _lists(m: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    return tuple(int(x) for x in contacts_of(m)), tuple(int(x) for x in cases_of(m))


def _draw(weights, total, u) -> int:
    target = u * total
    acc = 0
    last = -1
    for k, w in enumerate(weights):
        if w > 0:
            acc += w
            last = k
            if target < acc:
                return k
    return last


# ---------------------------------------------------------------------------
# Low information: Algorithm with selection triple (k1, s, k2)

def _low_dest_weights(c, m, w, k1):
    weights = [c[k] if w[k] < m else 0 for k in range(len(c))]
    if w[k1] < m:
        weights[k1] -= 1
    return weights


def _low_apply(c, k1, s, k2, m):
    w, v = _lists(m)
    out = list(c)
    out[k1] -= 1
    out[k2] -= 1
    out[_f(w[k1] - 1, v[k1] - s)] += 1
    out[_f(w[k2] + 1, v[k2] + s)] += 1
    return out


def propose_low(c, m: int, rng: np.random.Generator):
    """Draw a contact move. Returns ``(c', (k1, s, k2))`` or ``None``."""
    w, v = _lists(m)
    c = [int(x) for x in c]
    src = [c[k] if w[k] >= 2 else 0 for k in range(len(c))]
    s1 = sum(src)
    if s1 == 0:
        return None
    k1 = _draw(src, s1, rng.random())
    s = 1 if rng.random() < v[k1] / w[k1] else 0
    dest = _low_dest_weights(c, m, w, k1)
    s2 = sum(dest)
    if s2 == 0:
        return None
    k2 = _draw(dest, s2, rng.random())
    return np.array(_low_apply(c, k1, s, k2, m), dtype=np.int64), (k1, s, k2)


def _low_selection_prob(c, m, k1, s, k2, s1, s2_base=None):
    w, v = _lists(m)
    if w[k1] < 2 or c[k1] < 1:
        return 0.0
    p_s = v[k1] / w[k1] if s else 1 - v[k1] / w[k1]
    if p_s == 0:
        return 0.0
    if w[k2] >= m:
        return 0.0
    dest_k2 = c[k2] - (1 if k2 == k1 else 0)
    if dest_k2 <= 0:
        return 0.0
    if s2_base is None:
        s2_base = sum(c[k] for k in range(len(c)) if w[k] < m)
    return c[k1] / s1 * p_s * dest_k2 / (s2_base - (1 if w[k1] < m else 0))


# ---------------------------------------------------------------------------
# Medium information: case moves within a stratum, selection pair (k1, k2)

def _medium_dest_weights(c, m, w, v, k1):
    n1 = w[k1]
    weights = [c[k] * (n1 - v[k]) if w[k] == n1 else 0 for k in range(len(c))]
    weights[k1] -= n1 - v[k1]
    return weights


def _medium_apply(c, k1, k2):
    out = list(c)
    out[k1] -= 1
    out[k2] -= 1
    out[k1 - 1] += 1
    out[k2 + 1] += 1
    return out


def propose_medium(c, m: int, rng: np.random.Generator):
    """Draw a case move. Returns ``(c', (k1, k2))`` or ``None``."""
    w, v = _lists(m)
    c = [int(x) for x in c]
    src = [c[k] * v[k] if w[k] >= 2 else 0 for k in range(len(c))]
    s1 = sum(src)
    if s1 == 0:
        return None
    k1 = _draw(src, s1, rng.random())
    dest = _medium_dest_weights(c, m, w, v, k1)
    s2 = sum(dest)
    if s2 == 0:
        return None
    k2 = _draw(dest, s2, rng.random())
    return np.array(_medium_apply(c, k1, k2), dtype=np.int64), (k1, k2)


def _medium_selection_prob(c, m, k1, k2, s1):
    w, v = _lists(m)
    if w[k1] < 2 or c[k1] < 1 or v[k1] < 1:
        return 0.0
    n1 = w[k1]
    if w[k2] != n1 or v[k2] >= n1:
        return 0.0
    dest = _medium_dest_weights(c, m, w, v, k1)
    if dest[k2] <= 0:
        return 0.0
    return c[k1] * v[k1] / s1 * dest[k2] / sum(dest)


# ---------------------------------------------------------------------------
# Exact proposal probabilities
#
# In a contact move k1 == k4 holds exactly when k2 == k3, and in a case move
# k2 == k1 - 1 exactly when k2 + 1 == k1. A selection therefore either
# changes the vector at all of its indices (counting repeats) or leaves it
# unchanged, so the selections reaching a changed vector are found by
# assigning its two decremented indices to (k1, k2) in both orders.

def _split_diff(c, c_new):
    neg, pos = [], []
    for k, (a, b) in enumerate(zip(c, c_new)):
        d = b - a
        if d < 0:
            neg += [k] * -d
        elif d > 0:
            pos += [k] * d
    return neg, pos


def _low_log_prob(c, c_new, m):
    w, v = _lists(m)
    s1 = sum(c[k] for k in range(len(c)) if w[k] >= 2)
    if s1 == 0:
        return -math.inf
    s2 = sum(c[k] for k in range(len(c)) if w[k] < m)
    neg, pos = _split_diff(c, c_new)
    total = 0.0
    if not neg and not pos:
        for k1 in range(len(c)):
            for s in (0, 1):
                if w[k1] >= 2 and 0 <= v[k1] - s <= w[k1] - 1:
                    k2 = _f(w[k1] - 1, v[k1] - s)
                    total += _low_selection_prob(c, m, k1, s, k2, s1, s2)
    elif len(neg) == 2 and len(pos) == 2:
        pos = sorted(pos)
        for k1, k2 in {(neg[0], neg[1]), (neg[1], neg[0])}:
            if w[k1] < 2 or w[k2] >= m:
                continue
            for s in (0, 1):
                if not 0 <= v[k1] - s <= w[k1] - 1 or v[k2] + s > w[k2] + 1:
                    continue
                k3 = _f(w[k1] - 1, v[k1] - s)
                k4 = _f(w[k2] + 1, v[k2] + s)
                if sorted((k3, k4)) == pos:
                    total += _low_selection_prob(c, m, k1, s, k2, s1, s2)
    return math.log(total) if total > 0 else -math.inf


def _medium_log_prob(c, c_new, m):
    w, v = _lists(m)
    s1 = sum(c[k] * v[k] for k in range(len(c)) if w[k] >= 2)
    if s1 == 0:
        return -math.inf
    neg, pos = _split_diff(c, c_new)
    total = 0.0
    if not neg and not pos:
        for k1 in range(len(c)):
            if w[k1] >= 2 and v[k1] >= 1:
                total += _medium_selection_prob(c, m, k1, k1 - 1, s1)
    elif len(neg) == 2 and len(pos) == 2:
        pos = sorted(pos)
        for k1, k2 in {(neg[0], neg[1]), (neg[1], neg[0])}:
            if v[k1] >= 1 and v[k2] < w[k2] and sorted((k1 - 1, k2 + 1)) == pos:
                total += _medium_selection_prob(c, m, k1, k2, s1)
    return math.log(total) if total > 0 else -math.inf


def proposal_log_prob(c, c_new, level: str, m: int) -> float:
    """Log probability that the ``level`` structure proposal maps ``c`` to
    ``c_new``; ``-inf`` when unreachable in one move."""
    size = outcome_space_size(m)
    if len(c) != size or len(c_new) != size:
        raise DomainError(f"outcome vectors must have length {size} for m={m}")
    c = [int(x) for x in c]
    c_new = [int(x) for x in c_new]
    if level == LOW:
        return _low_log_prob(c, c_new, m)
    if level == MEDIUM:
        return _medium_log_prob(c, c_new, m)
    raise DomainError(f"unknown information level {level!r}")


def proposal_distribution(c, level: str, m: int) -> dict[tuple[int, ...], float]:
    """Full proposal distribution from ``c`` by brute force over all selections.

    Keys are candidate vectors as tuples. Probability mass of selections with
    no valid move is omitted, so values sum to less than one only when a
    no-move outcome is possible. Intended for small ``m`` in tests.
    """
    c = [int(x) for x in c]
    w, v = _lists(m)
    K1 = len(c)
    out: dict[tuple[int, ...], float] = {}
    if level == LOW:
        s1 = sum(c[k] for k in range(K1) if w[k] >= 2)
        if s1 == 0:
            return out
        for k1, s, k2 in product(range(K1), (0, 1), range(K1)):
            p = _low_selection_prob(c, m, k1, s, k2, s1)
            if p > 0:
                key = tuple(_low_apply(c, k1, s, k2, m))
                out[key] = out.get(key, 0.0) + p
    elif level == MEDIUM:
        s1 = sum(c[k] * v[k] for k in range(K1) if w[k] >= 2)
        if s1 == 0:
            return out
        for k1, k2 in product(range(K1), range(K1)):
            p = _medium_selection_prob(c, m, k1, k2, s1)
            if p > 0:
                key = tuple(_medium_apply(c, k1, k2))
                out[key] = out.get(key, 0.0) + p
    else:
        raise DomainError(f"unknown information level {level!r}")
    return out
