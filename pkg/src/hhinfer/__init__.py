"""Household transmission inference from final-size data at low, medium or
high reporting resolution."""

from .enumeration import decode, encode, outcome_space_size
from .final_size import (
    INFINITE,
    InfectiousPeriodModel,
    Theta,
    expected_sar,
    final_size_distribution,
    final_size_table,
    household_rate,
    mgf,
    simulate_household_outbreak,
)
from .datasets import (
    HighInfoDataset,
    LowInfoDataset,
    MediumInfoDataset,
    aggregate_to_low,
    aggregate_to_medium,
    initial_structure,
    is_compatible,
)
from .inference import DirichletSpec, PriorSpec, log_likelihood, log_prior, log_target
from .mcmc import (
    ChainConfig,
    ProposalConfig,
    bootstrap_sar_ci,
    implied_sar,
    run_chain,
    summarize,
)
from .synth import (
    ContactDistribution,
    coverage_experiment,
    dirichlet_from_distribution,
    generate_dataset,
    size_weight,
)

__version__ = "0.1.0"
