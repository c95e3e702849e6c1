"""Parametrized probability measures, the quantum models that generate
them, and their information-theoretic and topological diagnostics."""

__version__ = "0.1.0"

from .errors import DomainError, InvariantViolation, NumericalError, PpmkitError
from .measure import (
    BipartiteLayout,
    CheckResult,
    Circle,
    Event,
    FiniteSet,
    Interval,
    OutcomeSpace,
    OutcomeSurjection,
    ParamDomain,
    ParamGrid,
    ParamInjection,
    ParamPoint,
    Ppm,
    ProbabilityMeasure,
    SpherePoint,
    envelops,
    epsilon_separable,
    event_probability,
    l1_distance,
    level_set_equal,
    local_reach_check,
    marginal,
    marginal_invariance_check,
    no_signaling_check,
    ppm_distance,
    refines,
)
from .quantum import (
    DensityOperator,
    DensityOperatorFunction,
    DetectionOperator,
    Ket,
    Povm,
    PovmFunction,
    QuantumModel,
    basis_ket,
    born_probability,
    canonical_model,
    generate_ppm,
    mixed_basis_model,
    model_generates,
    overlap,
    qubit_linear_state,
    split_canonical_model,
    von_neumann_entropy,
)
from .info import (
    ChannelModel,
    ChannelReport,
    canonical_channel,
    conditional_ppm,
    holevo_chi,
    mutual_information,
    row_merged_channel,
    shannon_entropy,
    tightened_bound,
)
from .bb84 import (
    AlphaMeas,
    AlphaPrep,
    BetaMeas,
    BetaPrep,
    FrequencyGrid,
    LaserBank,
    SpectralBasis,
    SpectralProfile,
    alpha_ppm,
    beta_ppm,
    envelopment_witness,
    gaussian_spectrum,
    mismatch_attack,
    spectral_overlap,
)
from .entangle import (
    BellSetting,
    Rotation3,
    SpherePairPoint,
    TorusPoint,
    angle_zeta,
    bell_state,
    contour_export,
    correlation_E,
    elliptical_povm,
    linear_povm,
    orbit_rotation,
    s_bell,
    s_bell_maximize,
    singlet_state,
    sphere_ppm,
    torus_ppm,
)
