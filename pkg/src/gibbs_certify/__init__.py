"""Certified bounds on local expectations of Gibbs measures of two-site spin systems.

Two LP hierarchies give intervals [p_min, p_max] that always contain mu(f):
the spin-flip (DLR) hierarchy and the Markov-chain stationarity hierarchy.
Brute-force, transfer-matrix and Glauber-dynamics oracles cross-check them.
"""

from .dlr_hierarchy import CertifiedInterval, solve_dlr
from .errors import (ContractError, GibbsCertifyError, GuardError, ImplicitLatticeError, InputError,
                     IterationLimitError, SolverError)
from .exact_oracle import boundary_gap, expectation, local_gibbs_expectation, partition_function
from .mc_hierarchy import solve_mc
from .observable import Observable, indicator, spin_product
from .spin_model import (Region, SpinConfig, SpinSystem, ball_region, chain, cycle, from_edges, grid2d,
                         infinite_chain, infinite_grid2d, make_region)

__all__ = [
    "CertifiedInterval", "ContractError", "GibbsCertifyError", "GuardError", "ImplicitLatticeError",
    "InputError", "IterationLimitError", "Observable", "Region", "SolverError", "SpinConfig",
    "SpinSystem", "ball_region", "boundary_gap", "chain", "cycle", "expectation", "from_edges",
    "grid2d", "indicator", "infinite_chain", "infinite_grid2d", "local_gibbs_expectation",
    "make_region", "partition_function", "solve_dlr", "solve_mc", "spin_product",
]
