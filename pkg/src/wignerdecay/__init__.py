"""Negative Wigner functions of an oscillator from a decaying qubit coupling."""

from .analysis import (
    CoreStateResult,
    FidelityResult,
    GaussianParams,
    QfiResult,
    TestStateParams,
    apply_gaussian,
    dephase,
    fidelity,
    fock_entropy,
    make_test_state,
    optimize_core,
    optimize_fidelity,
    qfi_phase,
)
from .dynamics import BathSpec, EvolutionResult, IntegrationError, TimeGrid, build_generator, evolve, verify_thermalization
from .hilbert import (
    DensityMatrix,
    Operator,
    PureState,
    SubsystemLayout,
    build_operators,
    displacement,
    hermitian_function,
    partial_trace,
    squeeze,
    tensor_embed,
)
from .model import DecayProfile, ModelParams, build_hamiltonian, decay_factor, thermal_state, tls_negativity_estimate
from .wigner import (
    NegativityRecord,
    NegativitySeries,
    PhaseSpaceGrid,
    WignerMap,
    integrated_negativity,
    min_negativity,
    negativity_series,
    wigner_map,
)

__version__ = "0.1.0"
