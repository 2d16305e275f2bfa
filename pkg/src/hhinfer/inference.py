"""Log-target for transmission parameters given a household outcome vector.

The household-size distribution ``p`` is given a Dirichlet prior and
integrated out, so the likelihood of an outcome vector ``C`` with ``N_i``
households in stratum ``i`` is

    multinomial(C) * prod_k P_k(theta)**C_k * B(N + alpha) / B(alpha)

with ``B`` the multivariate beta function and ``P_k`` the final-size
probabilities of outcome ``k``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import gammaln, logsumexp, ndtr

from .datasets import HighInfoDataset, household_strata
from .enumeration import outcome_space_size
from .errors import DomainError
from .final_size import InfectiousPeriodModel, Theta, final_size_table


@dataclass(frozen=True, eq=False)
class DirichletSpec:
    """Dirichlet concentration over households with ``1..m`` contacts."""

    alpha: np.ndarray

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=float)
        if alpha.ndim != 1 or len(alpha) == 0:
            raise DomainError("alpha must be a non-empty vector")
        if not np.all(np.isfinite(alpha)) or np.any(alpha <= 0):
            raise DomainError(f"all Dirichlet concentrations must be positive, got {alpha}")
        alpha.flags.writeable = False
        object.__setattr__(self, "alpha", alpha)

    @property
    def m(self) -> int:
        return len(self.alpha)

    @property
    def alpha0(self) -> float:
        return float(self.alpha.sum())

    @classmethod
    def uniform(cls, m: int, alpha0: float = 1.0) -> "DirichletSpec":
        return cls(np.full(m, alpha0 / m))

    def __repr__(self):
        return f"DirichletSpec(alpha={self.alpha.tolist()})"


# ---------------------------------------------------------------------------
# Priors

@dataclass(frozen=True)
class ImproperPositive:
    """Flat prior on ``[0, inf)``."""

    name = "improper-positive"

    def log_density(self, x: float) -> float:
        return 0.0 if x >= 0 else -math.inf

    def to_dict(self):
        return {"type": self.name}


@dataclass(frozen=True)
class HalfNormal:
    scale: float

    name = "half-normal"

    def __post_init__(self):
        if self.scale <= 0:
            raise DomainError("half-normal scale must be positive")

    def log_density(self, x: float) -> float:
        if x < 0:
            return -math.inf
        return 0.5 * math.log(2 / math.pi) - math.log(self.scale) - 0.5 * (x / self.scale) ** 2

    def to_dict(self):
        return {"type": self.name, "scale": self.scale}


@dataclass(frozen=True)
class UniformUnit:
    """Uniform prior on ``[0, 1]``."""

    name = "uniform"

    def log_density(self, x: float) -> float:
        return 0.0 if 0.0 <= x <= 1.0 else -math.inf

    def to_dict(self):
        return {"type": self.name}


@dataclass(frozen=True)
class PointMass:
    value: float

    name = "point-mass"

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise DomainError(f"point mass for eta must lie in [0, 1], got {self.value}")

    def log_density(self, x: float) -> float:
        return 0.0 if x == self.value else -math.inf

    def to_dict(self):
        return {"type": self.name, "value": self.value}


@dataclass(frozen=True, eq=False)
class EmpiricalKDE:
    """Gaussian kernel density of posterior samples, truncated to ``[0, 1]``."""

    samples: np.ndarray
    bandwidth: float = 0.02

    name = "empirical-samples"

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float).ravel()
        if len(s) == 0:
            raise DomainError("empirical prior needs at least one sample")
        if self.bandwidth <= 0:
            raise DomainError("kernel bandwidth must be positive")
        s.flags.writeable = False
        object.__setattr__(self, "samples", s)
        h = self.bandwidth
        mass = np.mean(ndtr((1.0 - s) / h) - ndtr(-s / h))
        object.__setattr__(self, "_log_norm",
                           math.log(len(s)) + math.log(h) + 0.5 * math.log(2 * math.pi)
                           + math.log(mass))

    def log_density(self, x: float) -> float:
        if not 0.0 <= x <= 1.0:
            return -math.inf
        u = (x - self.samples) / self.bandwidth
        return float(logsumexp(-0.5 * u * u)) - self._log_norm

    def to_dict(self):
        return {"type": self.name, "n_samples": len(self.samples), "bandwidth": self.bandwidth}


@dataclass(frozen=True)
class PriorSpec:
    """Independent priors on ``beta`` and ``eta``."""

    beta_prior: ImproperPositive | HalfNormal = field(default_factory=ImproperPositive)
    eta_prior: UniformUnit | PointMass | EmpiricalKDE = field(default_factory=UniformUnit)

    def to_dict(self):
        return {"beta": self.beta_prior.to_dict(), "eta": self.eta_prior.to_dict()}


def log_prior(theta: Theta, prior: PriorSpec) -> float:
    lp = prior.beta_prior.log_density(theta.beta)
    if lp == -math.inf:
        return lp
    return lp + prior.eta_prior.log_density(theta.eta)


# ---------------------------------------------------------------------------
# Likelihood

def _counts(c) -> np.ndarray:
    if isinstance(c, HighInfoDataset):
        return c.counts
    return np.asarray(c, dtype=np.int64)


class LikelihoodKernel:
    """Likelihood evaluator with the final-size table of one ``theta`` cached.

    Used by the sampler so that structure moves at fixed ``theta`` do not
    re-solve the final-size system.
    """

    def __init__(self, alpha: DirichletSpec, model: InfectiousPeriodModel):
        self.alpha = alpha
        self.model = model
        self.m = alpha.m
        self._starts = [outcome_space_size(n - 1) if n > 1 else 0 for n in range(1, self.m + 1)]
        self._stratum = np.repeat(np.arange(self.m), np.arange(2, self.m + 2)).tolist()
        self._log_beta_alpha = float(gammaln(alpha.alpha).sum() - gammaln(alpha.alpha0))
        self._theta = None
        self._recent: dict[Theta, tuple[np.ndarray, np.ndarray]] = {}

    def set_theta(self, theta: Theta) -> None:
        if theta == self._theta:
            return
        entry = self._recent.get(theta)
        if entry is None:
            theta.check()
            table = final_size_table(theta, self.model, self.m)
            positive = table > 0
            entry = (np.where(positive, np.log(np.where(positive, table, 1.0)), 0.0), ~positive)
            # current and last proposed theta are enough for MH
            if len(self._recent) >= 2:
                self._recent.pop(next(iter(self._recent)))
            self._recent[theta] = entry
        self._log_p, self._zero = entry
        self._theta = theta

    def __call__(self, counts: np.ndarray) -> float:
        if self._zero.any() and np.any(counts[self._zero] > 0):
            return -math.inf
        strata = np.add.reduceat(counts, self._starts)
        total = strata.sum()
        shifted = strata + self.alpha.alpha
        return float(gammaln(total + 1.0) - gammaln(counts + 1.0).sum()
                     + counts @ self._log_p
                     + gammaln(shifted).sum() - gammaln(shifted.sum())
                     - self._log_beta_alpha)

    def log_ratio(self, counts: np.ndarray, new_counts: np.ndarray) -> float:
        """``self(new_counts) - self(counts)`` for vectors with equal totals,
        computed from the changed entries only."""
        changed = np.flatnonzero(counts != new_counts)
        lg = math.lgamma
        alpha = self.alpha.alpha
        out = 0.0
        strata_delta: dict[int, int] = {}
        for k in changed.tolist():
            a, b = int(counts[k]), int(new_counts[k])
            if b > 0 and self._zero[k]:
                return -math.inf
            out += lg(a + 1) - lg(b + 1) + (b - a) * self._log_p[k]
            n = self._stratum[k]
            strata_delta[n] = strata_delta.get(n, 0) + b - a
        if strata_delta:
            strata = np.add.reduceat(counts, self._starts)
            for n, d in strata_delta.items():
                if d:
                    base = strata[n] + alpha[n]
                    out += lg(base + d) - lg(base)
        return out


def log_likelihood(c, theta: Theta, alpha: DirichletSpec, model: InfectiousPeriodModel) -> float:
    """Log probability of outcome vector ``c`` with the household-size
    distribution integrated out."""
    counts = _counts(c)
    if len(counts) != outcome_space_size(alpha.m):
        raise DomainError(
            f"outcome vector length {len(counts)} does not match alpha of length {alpha.m}")
    if np.any(counts < 0):
        raise DomainError("outcome counts must be non-negative")
    kernel = LikelihoodKernel(alpha, model)
    kernel.set_theta(theta)
    return kernel(counts)


def log_target(c, theta: Theta, alpha: DirichletSpec, model: InfectiousPeriodModel,
               prior: PriorSpec) -> float:
    """Unnormalised log posterior of ``(theta, c)``."""
    lp = log_prior(theta, prior)
    if lp == -math.inf:
        return lp
    return lp + log_likelihood(c, theta, alpha, model)


def stratum_totals(c, m: int) -> np.ndarray:
    return household_strata(_counts(c), m)


def load_eta_samples(path, bandwidth: float = 0.02) -> EmpiricalKDE:
    """Read a single-column ``eta`` CSV into an empirical prior."""
    import csv

    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "eta" not in reader.fieldnames:
            raise DomainError(f"{path}: expected a CSV with an 'eta' column")
        values: Sequence[float] = [float(row["eta"]) for row in reader]
    return EmpiricalKDE(np.array(values), bandwidth)
