"""Metropolis-Hastings sampling of ``(theta, C)`` and posterior summaries.

Each iteration proposes, with probability ``s``, a Gaussian move of ``theta``
at fixed structure and otherwise a structure move at fixed ``theta``. For
high-information data the structure is the data itself and ``s`` is forced to
one.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Iterable

import numpy as np

from .datasets import (
    HighInfoDataset,
    LowInfoDataset,
    MediumInfoDataset,
    household_strata,
    initial_structure,
    is_compatible,
)
from .errors import DomainError, NumericalInstabilityError
from .final_size import InfectiousPeriodModel, Theta, expected_sar
from .inference import (
    DirichletSpec,
    HalfNormal,
    LikelihoodKernel,
    PointMass,
    PriorSpec,
    UniformUnit,
    log_prior,
)
from .proposals import LOW, MEDIUM, proposal_log_prob, propose_low, propose_medium

log = logging.getLogger(__name__)

THETA_MOVE = "theta"
STRUCTURE_MOVE = "structure"
TARGET_ACCEPTANCE = 0.234


@dataclass(frozen=True)
class ProposalConfig:
    """Mixture proposal settings.

    ``s`` is the probability of a ``theta`` move; ``adapt`` enables
    Robbins-Monro scaling of both standard deviations during burn-in only.
    """

    s: float = 0.2
    sigma_beta: float = 0.05
    sigma_eta: float = 0.05
    fit_eta: bool = True
    adapt: bool = False

    def validate(self, needs_structure_moves: bool) -> None:
        if needs_structure_moves and not 0 < self.s < 1:
            raise DomainError(f"s must lie in (0, 1) for low/medium data, got {self.s}")
        if self.sigma_beta <= 0:
            raise DomainError("sigma_beta must be positive")
        if self.fit_eta and self.sigma_eta <= 0:
            raise DomainError("sigma_eta must be positive when eta is fitted")


@dataclass(frozen=True)
class ChainConfig:
    iterations: int = 200_000
    burn_in: int = 20_000
    thinning: int = 10
    seed: int | None = None
    proposal: ProposalConfig = field(default_factory=ProposalConfig)
    # None draws the initial value from the prior where it is proper
    init_beta: float | None = 0.5
    init_eta: float | None = 0.5


@dataclass
class ChainState:
    theta: Theta
    structure: np.ndarray
    cached_log_target: float


@dataclass(frozen=True)
class MoveRecord:
    kind: str
    proposed: bool
    accepted: bool


@dataclass
class PosteriorSamples:
    """Thinned post burn-in draws, one row per recorded iteration."""

    iteration: np.ndarray
    beta: np.ndarray
    eta: np.ndarray
    log_target: np.ndarray
    strata: np.ndarray  # (samples, m) households per contact count

    def __len__(self):
        return len(self.iteration)

    @property
    def m(self) -> int:
        return self.strata.shape[1]

    @classmethod
    def concatenate(cls, parts: Iterable["PosteriorSamples"]) -> "PosteriorSamples":
        parts = list(parts)
        return cls(*(np.concatenate([getattr(p, name) for p in parts])
                     for name in ("iteration", "beta", "eta", "log_target", "strata")))


@dataclass
class ChainResult:
    samples: PosteriorSamples
    beta_trace: np.ndarray
    eta_trace: np.ndarray
    log_target_trace: np.ndarray
    proposed: dict[str, int]
    accepted: dict[str, int]
    no_move: int
    final_state: ChainState
    sigma_beta: float
    sigma_eta: float

    @property
    def acceptance_rates(self) -> dict[str, float]:
        return {kind: (self.accepted[kind] / self.proposed[kind] if self.proposed[kind] else 0.0)
                for kind in self.proposed}


def dataset_level(dataset) -> str:
    if isinstance(dataset, HighInfoDataset):
        return "high"
    if isinstance(dataset, MediumInfoDataset):
        return MEDIUM
    if isinstance(dataset, LowInfoDataset):
        return LOW
    raise DomainError(f"unsupported dataset type {type(dataset).__name__}")


class Sampler:
    """Transition kernel for one dataset, Dirichlet spec, model and prior."""

    def __init__(self, dataset, alpha: DirichletSpec, model: InfectiousPeriodModel,
                 prior: PriorSpec, proposal: ProposalConfig):
        if dataset.m != alpha.m:
            raise DomainError(f"dataset m={dataset.m} does not match alpha of length {alpha.m}")
        self.dataset = dataset
        self.level = dataset_level(dataset)
        self.m = alpha.m
        self.prior = prior
        self.kernel = LikelihoodKernel(alpha, model)
        if self.level == "high":
            proposal = replace(proposal, s=1.0)
        proposal.validate(self.level != "high")
        self.proposal = proposal
        self.sigma_beta = proposal.sigma_beta
        self.sigma_eta = proposal.sigma_eta if proposal.fit_eta else 0.0
        self._propose = {LOW: propose_low, MEDIUM: propose_medium}.get(self.level)

    def log_target(self, structure: np.ndarray, theta: Theta) -> float:
        lp = log_prior(theta, self.prior)
        if lp == -math.inf:
            return lp
        try:
            self.kernel.set_theta(theta)
        except NumericalInstabilityError as exc:
            log.warning("rejecting theta=%s: %s", theta, exc)
            return -math.inf
        return lp + self.kernel(structure)

    def initial_state(self, theta: Theta) -> ChainState:
        if self.level == "high":
            structure = self.dataset.counts.copy()
        else:
            structure = initial_structure(self.dataset)
        return ChainState(theta, structure, self.log_target(structure, theta))

    def propose_theta(self, theta: Theta, rng: np.random.Generator) -> Theta:
        beta = theta.beta + self.sigma_beta * rng.standard_normal()
        eta = theta.eta + self.sigma_eta * rng.standard_normal() if self.sigma_eta > 0 else theta.eta
        return Theta(beta, eta)

    def step(self, state: ChainState, rng: np.random.Generator) -> tuple[ChainState, MoveRecord]:
        if self.proposal.s >= 1.0 or rng.random() < self.proposal.s:
            return self.theta_step(state, rng)
        return self.structure_step(state, rng)

    def theta_step(self, state: ChainState, rng: np.random.Generator) -> tuple[ChainState, MoveRecord]:
        candidate = self.propose_theta(state.theta, rng)
        new_target = self.log_target(state.structure, candidate)
        log_ratio = new_target - state.cached_log_target
        if new_target > -math.inf and (log_ratio >= 0 or math.log(rng.random()) < log_ratio):
            return (ChainState(candidate, state.structure, new_target),
                    MoveRecord(THETA_MOVE, True, True))
        return state, MoveRecord(THETA_MOVE, True, False)

    def structure_step(self, state: ChainState,
                       rng: np.random.Generator) -> tuple[ChainState, MoveRecord]:
        """Metropolis-Hastings update of the imputed structure at fixed theta."""
        move = self._propose(state.structure, self.m, rng)
        if move is None:
            return state, MoveRecord(STRUCTURE_MOVE, False, False)
        candidate, _ = move
        if np.array_equal(candidate, state.structure):
            return state, MoveRecord(STRUCTURE_MOVE, True, True)
        self.kernel.set_theta(state.theta)
        delta = self.kernel.log_ratio(state.structure, candidate)
        if delta == -math.inf:
            return state, MoveRecord(STRUCTURE_MOVE, True, False)
        forward = proposal_log_prob(state.structure, candidate, self.level, self.m)
        backward = proposal_log_prob(candidate, state.structure, self.level, self.m)
        if forward == -math.inf or backward == -math.inf:
            return state, MoveRecord(STRUCTURE_MOVE, True, False)
        log_ratio = delta + backward - forward
        if log_ratio >= 0 or math.log(rng.random()) < log_ratio:
            return (ChainState(state.theta, candidate, state.cached_log_target + delta),
                    MoveRecord(STRUCTURE_MOVE, True, True))
        return state, MoveRecord(STRUCTURE_MOVE, True, False)


def propose_theta(state: ChainState, config: ProposalConfig,
                  rng: np.random.Generator) -> tuple[Theta, bool]:
    """Gaussian random-walk candidate for ``theta``; the flag marks the
    proposal as symmetric."""
    sigma_eta = config.sigma_eta if config.fit_eta else 0.0
    beta = state.theta.beta + config.sigma_beta * rng.standard_normal()
    eta = state.theta.eta + sigma_eta * rng.standard_normal() if sigma_eta > 0 else state.theta.eta
    return Theta(beta, eta), True


def mh_step(state: ChainState, dataset, alpha: DirichletSpec, model: InfectiousPeriodModel,
            prior: PriorSpec, config: ProposalConfig,
            rng: np.random.Generator) -> tuple[ChainState, MoveRecord]:
    """One Metropolis-Hastings transition. Builds a :class:`Sampler` per call;
    use :func:`run_chain` for long runs."""
    return Sampler(dataset, alpha, model, prior, config).step(state, rng)


def _initial_theta(config: ChainConfig, prior: PriorSpec, rng: np.random.Generator) -> Theta:
    beta = config.init_beta
    if beta is None:
        bp = prior.beta_prior
        beta = abs(bp.scale * rng.standard_normal()) if isinstance(bp, HalfNormal) else 0.5
    eta = config.init_eta
    ep = prior.eta_prior
    if isinstance(ep, PointMass):
        eta = ep.value
    elif eta is None:
        eta = rng.random() if isinstance(ep, UniformUnit) else float(rng.choice(ep.samples))
    return Theta(float(beta), float(eta))


def run_chain(dataset, alpha: DirichletSpec, model: InfectiousPeriodModel, prior: PriorSpec,
              config: ChainConfig = ChainConfig()) -> ChainResult:
    """Run one chain and return thinned post burn-in samples with diagnostics."""
    if config.iterations <= config.burn_in:
        raise DomainError("iterations must exceed burn_in")
    if config.thinning < 1:
        raise DomainError("thinning must be >= 1")
    rng = np.random.default_rng(config.seed)
    sampler = Sampler(dataset, alpha, model, prior, config.proposal)
    theta0 = _initial_theta(config, prior, rng)
    state = sampler.initial_state(theta0)
    if state.cached_log_target == -math.inf:
        raise DomainError(f"initial state has zero posterior density at theta={theta0}")

    n_iter = config.iterations
    beta_trace = np.empty(n_iter)
    eta_trace = np.empty(n_iter)
    lt_trace = np.empty(n_iter)
    n_keep = (n_iter - config.burn_in) // config.thinning
    it_s = np.empty(n_keep, dtype=np.int64)
    strata_s = np.empty((n_keep, sampler.m), dtype=np.int64)
    proposed = {THETA_MOVE: 0, STRUCTURE_MOVE: 0}
    accepted = {THETA_MOVE: 0, STRUCTURE_MOVE: 0}
    no_move = 0
    theta_moves = 0
    strata = household_strata(state.structure, sampler.m)
    j = 0
    for i in range(1, n_iter + 1):
        state, record = sampler.step(state, rng)
        if record.proposed:
            proposed[record.kind] += 1
            accepted[record.kind] += record.accepted
        else:
            no_move += 1
            proposed[record.kind] += 1
        if record.accepted and record.kind == STRUCTURE_MOVE:
            strata = household_strata(state.structure, sampler.m)
        if (config.proposal.adapt and record.kind == THETA_MOVE and i <= config.burn_in):
            theta_moves += 1
            scale = math.exp((record.accepted - TARGET_ACCEPTANCE) / theta_moves ** 0.6)
            sampler.sigma_beta *= scale
            if sampler.sigma_eta > 0:
                sampler.sigma_eta *= scale
        beta_trace[i - 1] = state.theta.beta
        eta_trace[i - 1] = state.theta.eta
        lt_trace[i - 1] = state.cached_log_target
        if i > config.burn_in and (i - config.burn_in) % config.thinning == 0:
            it_s[j] = i
            strata_s[j] = strata
            j += 1

    mask = it_s - 1
    samples = PosteriorSamples(it_s, beta_trace[mask], eta_trace[mask], lt_trace[mask], strata_s)
    if sampler.level != "high":
        assert is_compatible(state.structure, dataset)
    return ChainResult(samples, beta_trace, eta_trace, lt_trace, proposed, accepted, no_move,
                       state, sampler.sigma_beta, sampler.sigma_eta)


# ---------------------------------------------------------------------------
# Summaries

def interval_summary(values) -> dict[str, float]:
    """Mean and equal-tailed 95% interval (linear order-statistic interpolation)."""
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise DomainError("cannot summarise an empty sample")
    lo, hi = np.quantile(x, [0.025, 0.975])
    return {"mean": float(x.mean()), "lower": float(lo), "upper": float(hi)}


def summarize(samples: PosteriorSamples) -> dict:
    """Posterior means and 95% intervals of ``beta``, ``eta`` and the number
    of households with each contact count."""
    if len(samples) == 0:
        raise DomainError("cannot summarise an empty sample")
    return {
        "beta": interval_summary(samples.beta),
        "eta": interval_summary(samples.eta),
        "households": {str(n): interval_summary(samples.strata[:, n - 1])
                       for n in range(1, samples.m + 1)},
    }


def implied_sar(samples: PosteriorSamples, model: InfectiousPeriodModel, m: int | None = None) -> dict:
    """Expected SAR per contact count and overall for every posterior draw.

    The overall SAR of a draw weights each contact count by the contacts in
    that draw's imputed strata. Returns summaries keyed ``"1".."m"`` and
    ``"overall"``, plus the raw per-draw arrays under ``"draws"``.
    """
    if len(samples) == 0:
        raise DomainError("cannot summarise an empty sample")
    m = samples.m if m is None else m
    cache: dict[tuple[float, float], np.ndarray] = {}
    per_size = np.empty((len(samples), m))
    for i, (b, e) in enumerate(zip(samples.beta, samples.eta)):
        key = (float(b), float(e))
        if key not in cache:
            theta = Theta(*key)
            cache[key] = np.array([expected_sar(theta, model, n) for n in range(1, m + 1)])
        per_size[i] = cache[key]
    contacts = samples.strata[:, :m] * np.arange(1, m + 1)
    denom = contacts.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        overall = (contacts * per_size).sum(axis=1) / denom
    out = {str(n): interval_summary(per_size[:, n - 1]) for n in range(1, m + 1)}
    out["overall"] = interval_summary(overall[np.isfinite(overall)])
    out["draws"] = {"per_size": per_size, "overall": overall}
    return out


def _observed_sar(counts: np.ndarray, m: int):
    """Per-stratum and overall observed SAR for rows of outcome vectors."""
    from .datasets import stratum_matrices

    A, B = stratum_matrices(m)
    contacts = counts @ A.T
    cases = counts @ B.T
    with np.errstate(invalid="ignore", divide="ignore"):
        per = cases / contacts
        overall = cases.sum(axis=-1) / contacts.sum(axis=-1)
    return per, overall


def bootstrap_sar_ci(dataset: HighInfoDataset, replicates: int,
                     rng: np.random.Generator) -> dict:
    """Observed SAR with household-bootstrap percentile 95% intervals.

    Keys ``"1".."m"`` and ``"overall"`` map to ``{"estimate", "lower",
    "upper"}``, or to ``None`` for strata with no households.
    """
    if replicates < 1000:
        raise DomainError("use at least 1000 bootstrap replicates")
    counts = dataset.counts
    N = int(counts.sum())
    if N == 0:
        raise DomainError("cannot bootstrap an empty dataset")
    point_per, point_overall = _observed_sar(counts, dataset.m)
    resampled = rng.multinomial(N, counts / N, size=replicates)
    boot_per, boot_overall = _observed_sar(resampled, dataset.m)
    out: dict[str, dict | None] = {}
    for n in range(1, dataset.m + 1):
        if not np.isfinite(point_per[n - 1]):
            out[str(n)] = None
            continue
        col = boot_per[:, n - 1]
        lo, hi = np.quantile(col[np.isfinite(col)], [0.025, 0.975])
        out[str(n)] = {"estimate": float(point_per[n - 1]), "lower": float(lo), "upper": float(hi)}
    lo, hi = np.quantile(boot_overall, [0.025, 0.975])
    out["overall"] = {"estimate": float(point_overall), "lower": float(lo), "upper": float(hi)}
    return out
