"""Iterative load balancing of indivisible tokens in the balancing-circuit model."""

from .balancer import (
    DiscreteProcess,
    WorstCaseSpec,
    discrepancy,
    discrete_continuous_deviation,
    run_continuous,
    run_discrete,
    run_discrete_matchings,
    worst_case_input,
)
from .distributions import DistributionSpec, moments, sample_vector
from .markov import (
    MarkovChain,
    as_markov_chain,
    lazy_cycle_chain,
    pair_column_distance,
    second_eigenvalue,
    tstep_column,
)
from .topology import MatchingSchedule, TopologyKind, TopologySpec, build_schedule, node_distance

__version__ = "0.1.0"
