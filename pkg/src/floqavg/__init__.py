"""Well-ordered Floquet eigenbases labelled by average energy."""
from .core import (
    CutoffError,
    DrivingSpec,
    FloquetError,
    FloquetFunction,
    FourierHamiltonian,
    HamiltonianError,
    SolverError,
    StateVector,
    ToleranceConfig,
    hamiltonian_at,
    validate,
)
from .extended_space import (
    ExtendedMatrix,
    RawEigenpair,
    build_extended,
    deduplicate_harmonics,
    diagonalize_extended,
    fold_to_zone,
)
from .average_energy import (
    EigenTriplet,
    Eigenspace,
    NotNormalizedError,
    ResonantGroup,
    build_eigenspace,
    effective_average_energy,
    resolve_resonance,
    resonance_groups,
    resonance_matrix,
    spectral_moment,
)
from .dynamics import (
    BoundaryReport,
    SpectrumGrid,
    SpectrumLine,
    boundary_report,
    boundary_t_max,
    boundary_t_min,
    decomposed_average_energy,
    evolve,
    finite_spectrum,
    infinite_spectrum,
    interaction_divergence,
    observed_average_energy,
    propagator_at,
)
from .twolevel import TwoLevelParams

__version__ = "0.1.0"
