"""Final-size distribution of a household outbreak seeded by one primary case.

Each of the ``n`` contacts of a household is infected by each infective at
rate ``beta / n**eta`` during that infective's infectious period ``I``, with
``I ~ Gamma(a, a)`` (mean one) or ``I == 1`` in the fixed-period limit.
The distribution of the number of contacts eventually infected is obtained
exactly from a triangular linear system in the moment generating function of
``I``; a Sellke-construction simulator provides an independent check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .enumeration import MAX_SUPPORTED_CONTACTS, outcome_space_size
from .errors import DomainError, NumericalInstabilityError

INFINITE = math.inf

_ENTRY_TOL = 1e-9
_SUM_TOL = 1e-9


@dataclass(frozen=True)
class Theta:
    """Transmission parameters: base rate ``beta`` and mixing exponent ``eta``.

    Instances may lie outside the support (MCMC proposals do); use
    :attr:`in_support` or :meth:`check` where a valid value is required.
    """

    beta: float
    eta: float

    @property
    def in_support(self) -> bool:
        return self.beta >= 0.0 and 0.0 <= self.eta <= 1.0

    def check(self) -> "Theta":
        if not self.in_support:
            raise DomainError(f"theta outside support: beta={self.beta}, eta={self.eta}")
        return self


@dataclass(frozen=True)
class InfectiousPeriodModel:
    """Gamma(a, a) infectious period, or a fixed period of one when ``shape`` is
    :data:`INFINITE`."""

    shape: float = 2.0

    def __post_init__(self):
        if not (self.shape > 0):
            raise DomainError(f"infectious-period shape must be positive, got {self.shape}")

    @property
    def is_fixed(self) -> bool:
        return math.isinf(self.shape)

    @classmethod
    def fixed(cls) -> "InfectiousPeriodModel":
        return cls(INFINITE)

    @classmethod
    def parse(cls, text: str | float) -> "InfectiousPeriodModel":
        """Build from ``"fixed"``/``"inf"`` or a numeric shape."""
        if isinstance(text, str) and text.strip().lower() in ("fixed", "inf", "infinite"):
            return cls.fixed()
        return cls(float(text))

    def __str__(self) -> str:
        return "fixed" if self.is_fixed else f"{self.shape:g}"

    def sample(self, rng: np.random.Generator, size=None):
        if self.is_fixed:
            return np.ones(size) if size is not None else 1.0
        return rng.gamma(self.shape, 1.0 / self.shape, size=size)


def mgf(model: InfectiousPeriodModel, t: float) -> float:
    """Moment generating function ``E[exp(t I)]`` of the infectious period."""
    if model.is_fixed:
        return math.exp(t)
    a = model.shape
    if t >= a:
        raise DomainError(f"MGF of Gamma({a}, {a}) undefined at t={t}")
    return (1.0 - t / a) ** (-a)


def household_rate(theta: Theta, n: int) -> float:
    """Per-pair transmission rate ``beta / n**eta`` in a household with ``n`` contacts."""
    if n < 1:
        raise DomainError(f"contact count must be >= 1, got {n}")
    return theta.beta / n ** theta.eta


def _solve(beta_n: float, model: InfectiousPeriodModel, n: int) -> np.ndarray:
    # Forward substitution, multiplied through by phi_j**(1+j) so that only
    # non-negative powers of phi_j <= 1 appear.
    q = np.zeros(n + 1)
    for j in range(n + 1):
        phi = mgf(model, beta_n * (j - n))
        acc = math.comb(n, j) * phi ** (1 + j)
        for z in range(j):
            acc -= math.comb(n - z, j - z) * q[z] * phi ** (j - z)
        q[j] = acc
    return q


def final_size_distribution(theta: Theta, model: InfectiousPeriodModel, n: int) -> np.ndarray:
    """Probabilities ``P(Z = z | n, theta)`` for ``z = 0..n``.

    Raises
    ------
    NumericalInstabilityError
        If an entry falls outside ``[-1e-9, 1 + 1e-9]`` or the vector sum
        differs from one by more than ``1e-9`` before clamping.
    """
    theta.check()
    if not 1 <= n <= MAX_SUPPORTED_CONTACTS:
        raise DomainError(f"contact count must be in 1..{MAX_SUPPORTED_CONTACTS}, got {n}")
    return _distribution(theta.beta, theta.eta, model, n).copy()


@lru_cache(maxsize=4096)
def _distribution(beta: float, eta: float, model: InfectiousPeriodModel, n: int) -> np.ndarray:
    q = _solve(beta / n ** eta, model, n)
    total = q.sum()
    if (q.min() < -_ENTRY_TOL or q.max() > 1 + _ENTRY_TOL
            or abs(total - 1.0) > _SUM_TOL):
        raise NumericalInstabilityError(
            f"final-size solve failed residual check at n={n}, beta={beta}, eta={eta}, "
            f"model={model} (min={q.min():.3g}, max={q.max():.3g}, sum={total:.12g})")
    q = np.clip(q, 0.0, 1.0)
    q /= q.sum()
    q.flags.writeable = False
    return q


def final_size_table(theta: Theta, model: InfectiousPeriodModel, m: int) -> np.ndarray:
    """Final-size probabilities for ``n = 1..m`` concatenated in outcome order.

    Entry ``k`` is ``P(Z = f_z(k) | f_n(k), theta)``. The returned array is
    read-only and shared between callers with equal arguments.
    """
    theta.check()
    if not 1 <= m <= MAX_SUPPORTED_CONTACTS:
        raise DomainError(f"max contacts must be in 1..{MAX_SUPPORTED_CONTACTS}, got {m}")
    return _table(theta.beta, theta.eta, model, m)


@lru_cache(maxsize=256)
def _table(beta: float, eta: float, model: InfectiousPeriodModel, m: int) -> np.ndarray:
    table = np.concatenate([_distribution(beta, eta, model, n) for n in range(1, m + 1)])
    assert len(table) == outcome_space_size(m)
    table.flags.writeable = False
    return table


def expected_sar(theta: Theta, model: InfectiousPeriodModel, n: int) -> float:
    """Expected fraction of the ``n`` contacts infected."""
    q = final_size_distribution(theta, model, n)
    return float(np.dot(np.arange(n + 1), q) / n)


def simulate_household_outbreaks(theta: Theta, model: InfectiousPeriodModel, n: int,
                                 size: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``size`` independent final sizes by the Sellke construction.

    Contacts carry Exp(1) resistance thresholds. With the primary and the
    first ``k`` cases infectious, the accumulated pressure on every remaining
    contact is ``beta_n`` times their summed infectious periods; the outbreak
    stops at the first ``k`` for which the ``(k+1)``-th smallest threshold
    exceeds that pressure.
    """
    theta.check()
    if n < 1:
        raise DomainError(f"contact count must be >= 1, got {n}")
    beta_n = household_rate(theta, n)
    thresholds = np.sort(rng.exponential(1.0, size=(size, n)), axis=1)
    periods = model.sample(rng, size=(size, n + 1))
    # pressure[:, k] is the pressure once the primary and k cases have recovered
    pressure = beta_n * np.cumsum(periods, axis=1)[:, :n]
    escaped = thresholds > pressure
    return np.where(escaped.any(axis=1), escaped.argmax(axis=1), n)


def simulate_household_outbreak(theta: Theta, model: InfectiousPeriodModel, n: int,
                                rng: np.random.Generator) -> int:
    """One Sellke realisation of the number of contacts infected."""
    return int(simulate_household_outbreaks(theta, model, n, 1, rng)[0])
