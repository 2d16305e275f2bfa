import math

import numpy as np
import pytest
from scipy.stats import beta as beta_dist

from hhinfer.datasets import HighInfoDataset, LowInfoDataset, MediumInfoDataset, is_compatible
from hhinfer.errors import DomainError
from hhinfer.final_size import InfectiousPeriodModel, Theta
from hhinfer.inference import DirichletSpec, PointMass, PriorSpec, log_likelihood
from hhinfer.mcmc import (ChainConfig, ChainState, PosteriorSamples, ProposalConfig, Sampler,
                          bootstrap_sar_ci, implied_sar, mh_step, propose_theta, run_chain,
                          summarize)

from conftest import compatible_structures

GAMMA2 = InfectiousPeriodModel(2.0)
EXP = InfectiousPeriodModel(1.0)


def occupation_tv(dataset, states, alpha, theta, steps, seed):
    sampler = Sampler(dataset, alpha, GAMMA2, PriorSpec(), ProposalConfig())
    logs = np.array([log_likelihood(c, theta, alpha, GAMMA2) for c in states])
    target = np.exp(logs - logs.max())
    target /= target.sum()
    index = {tuple(c): i for i, c in enumerate(states)}
    state = sampler.initial_state(theta)
    rng = np.random.default_rng(seed)
    visits = np.zeros(len(states))
    for _ in range(steps):
        state, _ = sampler.structure_step(state, rng)
        visits[index[tuple(int(x) for x in state.structure)]] += 1
    return 0.5 * np.abs(visits / steps - target).sum()


def test_low_structure_stationarity():
    low = LowInfoDataset(3, 5, 2, 3)
    states = compatible_structures(3, 5, 2, 3)
    tv = occupation_tv(low, states, DirichletSpec(np.ones(3)), Theta(0.5, 1), 200_000, 1)
    assert tv < 0.02


def test_medium_structure_stationarity():
    med = MediumInfoDataset(3, [0, 4, 6], [0, 2, 3])
    states = [c for c in compatible_structures(4, 10, 5, 3) if is_compatible(c, med)]
    assert len(states) > 3
    tv = occupation_tv(med, states, DirichletSpec(np.array([1.0, 2.0, 0.5])), Theta(0.9, 0.3),
                       200_000, 2)
    assert tv < 0.02


def test_theta_moves_match_conjugate_posterior():
    # one contact per household, a=1: P(Z=1) = q = beta/(1+beta); a flat prior on
    # beta makes q ~ Beta(k+1, N-k-1)
    N, k = 30, 12
    data = HighInfoDataset.from_outcomes({(1, 1): k, (1, 0): N - k}, 1)
    config = ChainConfig(iterations=260_000, burn_in=10_000, thinning=2, seed=4,
                         proposal=ProposalConfig(sigma_beta=0.35, fit_eta=False),
                         init_eta=0.0)
    res = run_chain(data, DirichletSpec(np.ones(1)), EXP, PriorSpec(eta_prior=PointMass(0.0)),
                    config)
    q = res.samples.beta / (1 + res.samples.beta)
    probs = np.linspace(0.02, 0.98, 49)
    dev = np.abs(np.quantile(q, probs) - beta_dist(k + 1, N - k - 1).ppf(probs))
    assert dev.max() < 0.02


def test_high_info_structure_fixed_and_eta_exact():
    data = HighInfoDataset.from_outcomes({(1, 1): 3, (2, 1): 2, (2, 0): 4}, 2)
    config = ChainConfig(iterations=3000, burn_in=500, thinning=5, seed=1,
                         proposal=ProposalConfig(fit_eta=False), init_eta=0.25)
    res = run_chain(data, DirichletSpec.uniform(2), GAMMA2, PriorSpec(eta_prior=PointMass(0.25)),
                    config)
    assert np.all(res.samples.strata == [3, 6])
    assert np.all(res.samples.eta == 0.25)
    assert res.proposed["structure"] == 0
    assert res.acceptance_rates["theta"] > 0


def test_determinism_and_compatibility():
    low = LowInfoDataset(60, 150, 40, 5)
    config = ChainConfig(iterations=4000, burn_in=1000, thinning=10, seed=123)
    a = run_chain(low, DirichletSpec.uniform(5, 50), GAMMA2, PriorSpec(), config)
    b = run_chain(low, DirichletSpec.uniform(5, 50), GAMMA2, PriorSpec(), config)
    for name in ("iteration", "beta", "eta", "log_target", "strata"):
        np.testing.assert_array_equal(getattr(a.samples, name), getattr(b.samples, name))
    assert is_compatible(a.final_state.structure, low)
    assert len(a.samples) == 300
    assert a.samples.iteration[0] == 1010 and a.samples.iteration[-1] == 4000
    assert all(rate > 0 for rate in a.acceptance_rates.values())


def test_propose_theta():
    rng = np.random.default_rng(0)
    state = ChainState(Theta(0.5, 0.4), np.zeros(2, dtype=int), 0.0)
    fixed = ProposalConfig(fit_eta=False)
    for _ in range(100):
        theta, symmetric = propose_theta(state, fixed, rng)
        assert theta.eta == 0.4 and symmetric
    tiny = ProposalConfig(sigma_beta=1e-300, sigma_eta=1e-300)
    theta, _ = propose_theta(state, tiny, rng)
    assert theta == Theta(0.5, 0.4)
    cfg = ProposalConfig(sigma_beta=0.1, sigma_eta=0.2)
    draws = np.array([[t.beta - 0.5, t.eta - 0.4] for t, _ in
                      (propose_theta(state, cfg, rng) for _ in range(100_000))])
    assert abs(draws[:, 0].mean()) < 3 * 0.1 / math.sqrt(1e5)
    assert abs(draws[:, 1].mean()) < 3 * 0.2 / math.sqrt(1e5)


def test_mh_step_rejects_negative_beta_and_accepts_identity():
    data = HighInfoDataset.from_outcomes({(1, 0): 1}, 1)
    alpha = DirichletSpec(np.ones(1))
    prior = PriorSpec()
    target = log_likelihood(data.counts, Theta(0.001, 0.5), alpha, GAMMA2)
    state = ChainState(Theta(0.001, 0.5), data.counts.copy(), target)
    rng = np.random.default_rng(8)
    for _ in range(200):
        new, record = mh_step(state, data, alpha, GAMMA2, prior, ProposalConfig(sigma_beta=1.0), rng)
        assert new.theta.beta >= 0
    # a two-household swap proposes the current state, which is always accepted
    low = LowInfoDataset(2, 3, 0, 3)
    sampler = Sampler(low, DirichletSpec.uniform(3), GAMMA2, prior, ProposalConfig())
    st = sampler.initial_state(Theta(0.5, 0.5))
    for _ in range(50):
        st2, record = sampler.structure_step(st, rng)
        assert record.accepted and np.array_equal(st2.structure, st.structure)


def test_config_validation():
    low = LowInfoDataset(3, 5, 2, 3)
    with pytest.raises(DomainError):
        run_chain(low, DirichletSpec.uniform(3), GAMMA2, PriorSpec(),
                  ChainConfig(iterations=10, burn_in=10))
    with pytest.raises(DomainError):
        run_chain(low, DirichletSpec.uniform(3), GAMMA2, PriorSpec(),
                  ChainConfig(iterations=100, burn_in=10, proposal=ProposalConfig(s=1.0)))
    with pytest.raises(DomainError):
        run_chain(low, DirichletSpec.uniform(4), GAMMA2, PriorSpec(),
                  ChainConfig(iterations=100, burn_in=10))


def test_adaptation_only_during_burn_in():
    data = HighInfoDataset.from_outcomes({(2, 1): 20, (2, 0): 30}, 2)
    config = ChainConfig(iterations=6000, burn_in=3000, thinning=1, seed=2,
                         proposal=ProposalConfig(sigma_beta=2.0, adapt=True))
    res = run_chain(data, DirichletSpec.uniform(2), GAMMA2, PriorSpec(), config)
    assert res.sigma_beta < 2.0


def samples_of(values, m=1):
    values = np.asarray(values, dtype=float)
    n = len(values)
    return PosteriorSamples(np.arange(n), values, values, np.zeros(n),
                            np.ones((n, m), dtype=np.int64))


def test_summarize():
    s = summarize(samples_of(np.arange(1, 101)))
    assert s["beta"]["mean"] == 50.5
    assert s["beta"]["lower"] == pytest.approx(3.475)
    assert s["beta"]["upper"] == pytest.approx(97.525)
    c = summarize(samples_of([0.3] * 10))
    assert c["beta"]["lower"] == c["beta"]["upper"] == 0.3
    with pytest.raises(DomainError):
        summarize(samples_of([]))


def test_implied_sar():
    zero = implied_sar(samples_of([0.0] * 5, m=3), GAMMA2)
    assert all(zero[k]["mean"] == 0 for k in ("1", "2", "3", "overall"))
    s = PosteriorSamples(np.arange(3), np.ones(3), np.zeros(3), np.zeros(3),
                         np.ones((3, 1), dtype=np.int64))
    assert implied_sar(s, EXP)["overall"]["mean"] == pytest.approx(0.5, abs=1e-12)


def test_bootstrap_sar():
    rng = np.random.default_rng(1)
    full = bootstrap_sar_ci(HighInfoDataset.from_outcomes({(2, 2): 5, (3, 3): 2}, 3), 1000, rng)
    assert full["overall"] == {"estimate": 1.0, "lower": 1.0, "upper": 1.0}
    assert full["1"] is None
    one = bootstrap_sar_ci(HighInfoDataset.from_outcomes({(3, 1): 1}, 3), 1000, rng)
    assert one["overall"]["lower"] == one["overall"]["upper"] == pytest.approx(1 / 3)
    half = bootstrap_sar_ci(HighInfoDataset.from_outcomes({(2, 0): 50, (2, 2): 50}, 2), 20_000, rng)
    assert half["overall"]["estimate"] == 0.5
    assert half["overall"]["lower"] == pytest.approx(0.40, abs=0.015)
    assert half["overall"]["upper"] == pytest.approx(0.60, abs=0.015)
    with pytest.raises(DomainError):
        bootstrap_sar_ci(HighInfoDataset.from_outcomes({(2, 0): 1}, 2), 10, rng)
