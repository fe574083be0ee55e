"""Second-order Magnus integration of the interaction-picture Schrodinger equation.

The package discretizes ``i u' = (A + B) u`` with ``A`` the periodic
finite-difference kinetic operator and ``B`` a diagonal potential, steps
the interaction-picture Hamiltonian ``exp(iAt) B exp(-iAt)`` with a
second-order Magnus exponent, and measures errors and commutator norms
against the exact propagator.
"""

from .diagnostics import CommutatorScan, scan_alpha, scan_beta, scan_commutators, superconvergence_constant
from .discretization import (
    DiscreteHamiltonian,
    PotentialSpec,
    SpatialGrid,
    build_hamiltonian,
    build_laplacian,
    build_potential,
    quantize_momentum_symbol,
    quantize_position_symbol,
)
from .linalg import UnitaryMatrix, expm_antihermitian, hermitian_eig, opnorm, spectral_norm
from .magnus import MagnusExponent, MagnusStepConfig, assemble_omega2, evolve, magnus_step, recommended_quadrature_points
from .propagators import (
    InteractionHamiltonianEvaluator,
    exact_propagator,
    free_propagator,
    interaction_hamiltonian,
    interaction_hamiltonian_derivative,
)
from .study import (
    ConvergenceReport,
    MPolicy,
    StudyGrid,
    fit_order,
    run_order_study,
    run_quadrature_study,
    run_study,
    run_theorem1_check,
    run_theorem3_scan,
    run_uniformity_study,
)

__version__ = "0.1.0"
