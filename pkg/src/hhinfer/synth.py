"""Synthetic household data and the coverage experiment.

Replicate seeding: the dataset for replicate ``r`` of parameter set ``i`` and
distribution ``j`` is generated from ``SeedSequence([seed, i, j, r])`` and the
chain fitting it with the ``a``-th concentration uses
``SeedSequence([seed, i, j, r, a + 1])``. The same synthetic dataset is thus
fitted under every concentration, and results do not depend on execution
order.
"""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.stats import binomtest

from .datasets import HighInfoDataset, aggregate_to_low
from .enumeration import outcome_space_size
from .errors import DomainError
from .final_size import InfectiousPeriodModel, Theta, final_size_distribution
from .inference import DirichletSpec, PointMass, PriorSpec
from .mcmc import ChainConfig, run_chain

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ContactDistribution:
    """Probability that a study household has ``n = 1..m`` contacts."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 1 or len(p) == 0 or np.any(p < 0) or not np.isfinite(p).all():
            raise DomainError(f"invalid contact distribution {self.probs!r}")
        if abs(p.sum() - 1.0) > 1e-12:
            raise DomainError(f"contact probabilities sum to {p.sum()}, not 1")
        p.flags.writeable = False
        object.__setattr__(self, "probs", p)

    @property
    def m(self) -> int:
        return len(self.probs)

    @classmethod
    def from_weights(cls, weights) -> "ContactDistribution":
        w = np.asarray(weights, dtype=float)
        if w.sum() <= 0:
            raise DomainError("weights must have positive total")
        return cls(w / w.sum())

    def mean_size(self) -> float:
        """Mean household size (contacts plus the index case)."""
        return float(self.probs @ np.arange(2, self.m + 2))

    def __repr__(self):
        return f"ContactDistribution({np.round(self.probs, 6).tolist()})"


def size_weight(population) -> ContactDistribution:
    """Size-weight a distribution over household sizes ``2..m+1``.

    A household of size ``k`` is ``k`` times as likely to contain the index
    case of a study, so the returned probability of ``n`` contacts is
    proportional to ``(n + 1) * population[n - 1]``.
    """
    p = np.asarray(population, dtype=float)
    if p.ndim != 1 or np.any(p < 0):
        raise DomainError("population distribution must be a non-negative vector")
    if not np.any(p > 0):
        raise DomainError("population distribution is all zero")
    return ContactDistribution.from_weights(p * np.arange(2, len(p) + 2))


def read_distribution(path) -> ContactDistribution:
    """Load a ``size,probability`` (size weighted on load) or
    ``contacts,probability`` CSV. Rows may be in any order; missing sizes
    get probability zero."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = [h.strip() for h in (reader.fieldnames or [])]
        rows = [{k.strip(): v for k, v in row.items()} for row in reader]
    if "probability" not in header or not ({"size", "contacts"} & set(header)):
        raise DomainError(f"{path}: expected header 'size,probability' or 'contacts,probability'")
    by_size = "size" in header
    key = "size" if by_size else "contacts"
    values = {int(r[key]): float(r["probability"]) for r in rows}
    offset = 1 if by_size else 0
    m = max(values) - offset
    lo = min(values) - offset
    if lo < 1:
        raise DomainError(f"{path}: households need at least one contact")
    vec = np.zeros(m)
    for k, p in values.items():
        vec[k - offset - 1] = p
    return size_weight(vec) if by_size else ContactDistribution.from_weights(vec)


def builtin_distribution(name: str) -> ContactDistribution:
    """One of the bundled distributions: ``uk_lfs_2023``, ``split`` or
    ``quebec_2021``."""
    ref = resources.files("hhinfer") / "data" / f"{name}.csv"
    if not ref.is_file():
        raise DomainError(f"no bundled distribution named {name!r}")
    with resources.as_file(ref) as path:
        return read_distribution(path)


def resolve_distribution(spec: str) -> ContactDistribution:
    """A bundled distribution name or a path to a distribution CSV."""
    if Path(spec).suffix == "" and not Path(spec).exists():
        return builtin_distribution(spec)
    return read_distribution(spec)


def generate_dataset(dist: ContactDistribution, theta: Theta, model: InfectiousPeriodModel,
                     households: int, rng: np.random.Generator) -> HighInfoDataset:
    """Draw household sizes from ``dist`` and final sizes from the exact
    final-size distribution (inverse CDF)."""
    if households < 1:
        raise DomainError(f"need at least one household, got {households}")
    m = dist.m
    contacts = rng.choice(np.arange(1, m + 1), size=households, p=dist.probs)
    u = rng.random(households)
    counts = np.zeros(outcome_space_size(m), dtype=np.int64)
    for n in range(1, m + 1):
        sel = contacts == n
        if not sel.any():
            continue
        cdf = np.cumsum(final_size_distribution(theta, model, n))
        z = np.minimum(np.searchsorted(cdf, u[sel], side="right"), n)
        start = (n - 1) * (n + 2) // 2
        counts[start:start + n + 1] += np.bincount(z, minlength=n + 1)
    return HighInfoDataset(m, counts)


def dirichlet_from_distribution(dist: ContactDistribution, alpha0: float) -> DirichletSpec:
    """Dirichlet with mean ``dist`` and total concentration ``alpha0``."""
    if alpha0 <= 0:
        raise DomainError(f"alpha0 must be positive, got {alpha0}")
    return DirichletSpec(alpha0 * dist.probs)


# ---------------------------------------------------------------------------
# Coverage experiment

@dataclass(frozen=True)
class CoverageSpec:
    thetas: Sequence[Theta]
    distributions: dict[str, ContactDistribution]
    alpha0s: Sequence[float] = (100.0, 1000.0)
    replicates: int = 100
    households: int = 1000
    generator_model: InfectiousPeriodModel = field(default_factory=lambda: InfectiousPeriodModel(2.0))
    fit_model: InfectiousPeriodModel = field(default_factory=lambda: InfectiousPeriodModel(2.0))
    chain: ChainConfig = field(default_factory=ChainConfig)
    seed: int = 0
    workers: int = 1


@dataclass(frozen=True)
class ReplicateFit:
    beta_true: float
    eta_true: float
    distribution: str
    alpha0: float
    replicate: int
    mean: float
    lower: float
    upper: float

    @property
    def covered(self) -> bool:
        return self.lower <= self.beta_true <= self.upper


def _fit_replicate(task) -> list[ReplicateFit]:
    spec, i, j, name, r = task
    theta = spec.thetas[i]
    dist = spec.distributions[name]
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, i, j, r]))
    low = aggregate_to_low(generate_dataset(dist, theta, spec.generator_model, spec.households, rng))
    prior = PriorSpec(eta_prior=PointMass(theta.eta))
    out = []
    for a, alpha0 in enumerate(spec.alpha0s):
        seed = int(np.random.SeedSequence([spec.seed, i, j, r, a + 1]).generate_state(1)[0])
        config = replace(spec.chain, seed=seed, init_eta=theta.eta,
                         proposal=replace(spec.chain.proposal, fit_eta=False))
        result = run_chain(low, dirichlet_from_distribution(dist, alpha0), spec.fit_model,
                           prior, config)
        b = result.samples.beta
        lo, hi = np.quantile(b, [0.025, 0.975])
        out.append(ReplicateFit(theta.beta, theta.eta, name, alpha0, r,
                                float(b.mean()), float(lo), float(hi)))
    return out


def coverage_table(fits: Sequence[ReplicateFit]) -> list[dict]:
    """Coverage percentage with a Clopper-Pearson 95% interval per cell."""
    cells: dict[tuple, list[ReplicateFit]] = {}
    for f in fits:
        cells.setdefault((f.beta_true, f.eta_true, f.distribution, f.alpha0), []).append(f)
    rows = []
    for (beta, eta, name, alpha0), group in cells.items():
        k = sum(f.covered for f in group)
        n = len(group)
        ci = binomtest(k, n).proportion_ci(confidence_level=0.95, method="exact")
        rows.append({
            "beta_true": beta, "eta_true": eta, "distribution": name, "alpha0": alpha0,
            "replicates": n, "covered": k, "coverage_pct": 100.0 * k / n,
            "binomial_ci_lo": 100.0 * ci.low, "binomial_ci_hi": 100.0 * ci.high,
        })
    return rows


def coverage_experiment(spec: CoverageSpec) -> tuple[list[dict], list[ReplicateFit]]:
    """Fit ``beta`` (``eta`` fixed at truth) to low-information reductions of
    synthetic datasets and report how often the 95% interval covers truth.

    Returns the coverage table and the per-replicate fits.
    """
    if spec.replicates < 1:
        raise DomainError("need at least one replicate")
    tasks = [(spec, i, j, name, r)
             for i in range(len(spec.thetas))
             for j, name in enumerate(spec.distributions)
             for r in range(spec.replicates)]
    if spec.workers > 1:
        with ProcessPoolExecutor(spec.workers) as pool:
            results = list(pool.map(_fit_replicate, tasks))
    else:
        results = []
        for t in tasks:
            results.append(_fit_replicate(t))
            log.info("replicate %s/%s done", len(results), len(tasks))
    fits = [f for group in results for f in group]
    return coverage_table(fits), fits
