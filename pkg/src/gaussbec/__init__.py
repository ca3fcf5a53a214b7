"""Entanglement dynamics of a two-component condensate in a double well.

Closed-form oscillator (Holstein-Primakoff) propagation of the Gaussian
covariance matrix, with an exact two-spin evolution as reference.
"""

from .gaussian import (
    EntanglementReport,
    StandardForm,
    analyze,
    block_invariants,
    entanglement_parameter,
    eof,
    epr_uncertainty,
    evolve_covariance,
    mean_occupation,
    standard_form,
    symplectic_eigenvalues,
    thermal_covariance,
    vacuum_covariance,
)
from .model import (
    ModelParams,
    NormalModes,
    critical_coupling,
    extended_space_limit,
    normal_modes,
    validate,
)
from .propagator import (
    Propagator,
    SecondMoments,
    UnstableParametersError,
    propagator,
    propagator_at_phases,
    variances_closed_form,
)

__version__ = "0.1.0"
