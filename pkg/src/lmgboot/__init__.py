"""Operator bootstrap for the Lipkin-Meshkov-Glick model.

Spectra and collective-spin expectation values are obtained from algebraic
consistency conditions; entanglement measures follow from the moments.
"""
from .bootstrap import (
    BootstrapEngine,
    BootstrapSolution,
    IdentityComponentVanishes,
    SingularGram,
    Tolerances,
    WrongStateCount,
    solve_all,
    solve_sector,
    solve_toy_model,
)
from .measures import (
    MomentSet,
    concurrence,
    entropy_from_tangle,
    measure_report,
    moments_from_solution,
    producibility_bounds,
    qfi,
    residual_tangle,
    tangle,
    two_qubit_rdm,
)
from .oracles import angular_momentum_solve, dense_ed, site_resolved_concurrences
from .su2_rep import enumerate_basis, multiplicity, spin_matrices

__version__ = "0.1.0"
