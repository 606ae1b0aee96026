"""Fidelity, nonclassicality, separability and non-Gaussianity of continuous-variable states."""

from .errors import (
    ConfigError,
    CutoffError,
    CVFidelityError,
    DomainError,
    NumericalConsistencyError,
    UndefinedQuantityError,
)
from .gaussian_single import (
    EnergyParams1,
    GaussianState1,
    bures_distance,
    dsts1_from_energy,
    dsts1_from_physical,
    energy_to_physical,
    fano_factor,
    fidelity1,
    is_classical,
    is_sub_poissonian,
    mean_photon,
    trace_distance_bounds,
)
from .gaussian_two import (
    EnergyParams2,
    GaussianState2,
    fidelity2,
    is_separable,
    physical_from_energy,
    ppt_symplectic_eigenvalues,
    sts2_from_energy,
)
from .pnes import (
    PnesState,
    Variant,
    fidelity_pnes,
    nongaussianity,
    pssv_coeffs,
    renormalized_nongaussianity,
    twb_coeffs,
    y_from_energy,
)

__version__ = "0.1.0"
