"""Pulse optimization by gradient ascent where slow, bandwidth-limited
control pixels are mapped through linear transfer functions onto a fine
integration grid that resolves fast Hamiltonian dynamics."""

from .engine import (
    GradientResult,
    PropagationRecord,
    evaluate_on_fine_grid,
    exact_step_derivative,
    fidelity,
    gradient,
    propagate,
)
from .linalg import EigenDecomposition, eig_hermitian, expm_hermitian, frobenius_overlap
from .model import (
    ControlProblem,
    GeneratorSampler,
    TimeGrid,
    sample_hamiltonian,
    validate_problem,
)
from .optimizer import (
    NumericalFailure,
    OptimizationResult,
    OptimizerConfig,
    multistart,
    optimize,
    random_initial_pulse,
)
from .robust import PhaseEnsemble, robust_fidelity, robust_gradient
from .scenarios import (
    SCENARIOS,
    anharmonic_pi_pulse_full,
    anharmonic_pi_pulse_rwa,
    coupled_qubit_sqrt_iswap,
    sqrt_iswap_target,
)
from .transfer import (
    Carrier,
    CubicSpline,
    FourierBasis,
    GaussianFilter,
    GeneralFilter,
    PiecewiseConstant,
    TransferMatrix,
    build_transfer_set,
    omega0_from_bandwidth_ghz,
)

__version__ = "0.1.0"

__all__ = [
    "Carrier",
    "ControlProblem",
    "CubicSpline",
    "EigenDecomposition",
    "FourierBasis",
    "GaussianFilter",
    "GeneralFilter",
    "GeneratorSampler",
    "GradientResult",
    "NumericalFailure",
    "OptimizationResult",
    "OptimizerConfig",
    "PhaseEnsemble",
    "PiecewiseConstant",
    "PropagationRecord",
    "SCENARIOS",
    "TimeGrid",
    "TransferMatrix",
    "anharmonic_pi_pulse_full",
    "anharmonic_pi_pulse_rwa",
    "build_transfer_set",
    "coupled_qubit_sqrt_iswap",
    "eig_hermitian",
    "evaluate_on_fine_grid",
    "exact_step_derivative",
    "expm_hermitian",
    "fidelity",
    "frobenius_overlap",
    "gradient",
    "multistart",
    "omega0_from_bandwidth_ghz",
    "optimize",
    "propagate",
    "random_initial_pulse",
    "robust_fidelity",
    "robust_gradient",
    "sample_hamiltonian",
    "sqrt_iswap_target",
    "validate_problem",
]
