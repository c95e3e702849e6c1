"""Two-level BB84 modeling: polarization only, and polarization x spectrum.

The coarse description keeps only the polarization angle: four fixed
preparation angles, an analyzer angle on the circle, and the two-outcome
family ``P(1) = cos^2(theta - theta')``.  The fine description adds a
frequency spectrum to each pulse: preparations carry a normalized spectral
amplitude on a fixed angular-frequency grid, measurements pick an analyzer
angle and one mode of an orthonormal spectral basis, and a no-detection
outcome completes the two projective weights to a probability measure.

Restricting the fine family to the first basis mode reproduces the coarse
family exactly -- and the parameter room left over is exactly where the
four-laser intercept-resend vulnerability lives: lasers detuned by far more
than their pulse bandwidth have essentially orthogonal spectra, so an
eavesdropper can identify the transmitted polarization from the spectrum
alone, however innocent the coarse description looks.

Quadrature is uniform trapezoid on the fixed grid.  Gaussian pulses use the
recorded convention ``sigma_omega = 1 / (2 * duration)``.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import hermite as _hermite

from .errors import DomainError, InvariantViolation
from .measure import (
    Circle,
    FiniteSet,
    OutcomeSpace,
    ParamDomain,
    ParamGrid,
    ParamPoint,
    Ppm,
    ProbabilityMeasure,
    _wrap_angle,
)
from .quantum import (
    DensityOperatorFunction,
    Povm,
    PovmFunction,
    QuantumModel,
    qubit_linear_state,
)

SPEED_OF_LIGHT = 299792458.0  # m/s

NORM_TOL = 1e-9
ORTHO_TOL = 1e-8

#: the four preparation angles of the protocol
PREP_ANGLES = (0.0, math.pi / 4, math.pi / 2, 3 * math.pi / 4)

ALPHA_SPACE = OutcomeSpace(("1", "0"))
BETA_SPACE = OutcomeSpace(("1", "0", "none"))


# ---------------------------------------------------------------------------
# spectra
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FrequencyGrid:
    """Uniform, strictly increasing angular-frequency grid (rad/s)."""

    omegas: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.omegas, dtype=float)
        if w.ndim != 1 or w.size < 2:
            raise InvariantViolation("a frequency grid needs at least two points")
        if np.diff(w).min() <= 0:
            raise InvariantViolation("grid frequencies must be strictly increasing")
        # uniformity to 1e-9 of the spacing, floored at the float64
        # representation error of the absolute frequencies
        step = (float(w[-1]) - float(w[0])) / (w.size - 1)
        ideal = w[0] + step * np.arange(w.size)
        atol = max(1e-9 * step, 8.0 * np.finfo(float).eps * float(np.abs(w).max()))
        if float(np.abs(w - ideal).max()) > atol:
            raise InvariantViolation("grid spacing must be uniform")
        w.setflags(write=False)
        object.__setattr__(self, "omegas", w)

    @property
    def size(self) -> int:
        return self.omegas.size

    @property
    def delta(self) -> float:
        return float(self.omegas[1] - self.omegas[0])

    @property
    def quadrature_weights(self) -> np.ndarray:
        """Trapezoid weights: uniform spacing with halved endpoints."""
        w = np.full(self.size, self.delta)
        w[0] *= 0.5
        w[-1] *= 0.5
        return w

    def matches(self, other: "FrequencyGrid") -> bool:
        return self is other or (
            self.size == other.size and bool(np.array_equal(self.omegas, other.omegas))
        )


@dataclass(frozen=True, eq=False)
class SpectralProfile:
    """Complex spectral amplitude with unit quadrature L2 norm."""

    grid: FrequencyGrid
    amplitudes: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex)
        if a.shape != (self.grid.size,):
            raise InvariantViolation(
                f"expected {self.grid.size} amplitudes, got shape {a.shape}"
            )
        norm_sq = float((self.grid.quadrature_weights * np.abs(a) ** 2).sum())
        if abs(norm_sq - 1.0) > NORM_TOL:
            raise InvariantViolation(
                f"profile must have unit quadrature norm, got |f|^2 = {norm_sq!r}"
            )
        a.setflags(write=False)
        object.__setattr__(self, "amplitudes", a)


def spectral_overlap(f: SpectralProfile, g: SpectralProfile) -> complex:
    """Quadrature inner product ``sum w_i conj(f_i) g_i``."""
    if not f.grid.matches(g.grid):
        raise DomainError("profiles live on different frequency grids")
    value = complex(
        (f.grid.quadrature_weights * f.amplitudes.conj() * g.amplitudes).sum()
    )
    if abs(value) > 1.0 + ORTHO_TOL:
        raise DomainError(f"overlap magnitude {abs(value)} breaks Cauchy-Schwarz")
    return value


@dataclass(frozen=True, eq=False)
class SpectralBasis:
    """Orthonormal family of spectral profiles on one grid."""

    grid: FrequencyGrid
    profiles: tuple[SpectralProfile, ...]

    def __post_init__(self):
        profiles = tuple(self.profiles)
        object.__setattr__(self, "profiles", profiles)
        if not profiles:
            raise InvariantViolation("a spectral basis needs at least one profile")
        for f in profiles:
            if not f.grid.matches(self.grid):
                raise InvariantViolation("basis profiles must share the basis grid")
        for i, f in enumerate(profiles):
            for j, g in enumerate(profiles):
                want = 1.0 if i == j else 0.0
                got = spectral_overlap(f, g)
                if abs(got - want) > ORTHO_TOL:
                    raise InvariantViolation(
                        f"basis not orthonormal: <f{i},f{j}> = {got}"
                    )

    @property
    def size(self) -> int:
        return len(self.profiles)


def gaussian_spectrum(
    center_omega: float, pulse_duration: float, grid: FrequencyGrid
) -> SpectralProfile:
    """Transform-limited Gaussian amplitude, normalized on the grid.

    ``sigma_omega = 1 / (2 * pulse_duration)`` is a recorded convention (the
    pulse shape itself is a modeling choice); the grid must cover at least
    six spectral standard deviations on both sides of the center.
    """
    if pulse_duration <= 0:
        raise DomainError("pulse duration must be positive")
    sigma = 1.0 / (2.0 * pulse_duration)
    lo, hi = float(grid.omegas[0]), float(grid.omegas[-1])
    if center_omega - lo < 6 * sigma or hi - center_omega < 6 * sigma:
        raise DomainError(
            "grid must span at least 6 spectral standard deviations around "
            f"the center (sigma_omega = {sigma})"
        )
    amp = np.exp(-((grid.omegas - center_omega) ** 2) / (4.0 * sigma**2)).astype(
        complex
    )
    norm_sq = float((grid.quadrature_weights * np.abs(amp) ** 2).sum())
    amp /= math.sqrt(norm_sq)
    return SpectralProfile(
        grid,
        amp,
        meta={
            "center_omega": float(center_omega),
            "pulse_duration": float(pulse_duration),
            "sigma_omega": sigma,
            "sigma_convention": "sigma_omega = 1 / (2 * duration)",
        },
    )


def frequency_grid_around(
    centers: float | Sequence[float],
    pulse_duration: float,
    points: int = 2048,
    span_sigmas: float = 8.0,
) -> FrequencyGrid:
    """Uniform grid covering every center with a ``span_sigmas`` margin."""
    if points < 2:
        raise DomainError("need at least two grid points")
    cs = np.atleast_1d(np.asarray(centers, dtype=float))
    sigma = 1.0 / (2.0 * pulse_duration)
    lo = float(cs.min()) - span_sigmas * sigma
    hi = float(cs.max()) + span_sigmas * sigma
    return FrequencyGrid(np.linspace(lo, hi, points))


def orthonormalize(
    profiles: Sequence[SpectralProfile], drop_tol: float = 1e-6
) -> SpectralBasis:
    """Modified Gram-Schmidt under the quadrature inner product.

    Vectors whose residual norm falls below ``drop_tol`` (near-duplicates of
    earlier ones) are dropped.
    """
    if not profiles:
        raise DomainError("nothing to orthonormalize")
    grid = profiles[0].grid
    weights = grid.quadrature_weights
    kept: list[np.ndarray] = []
    for f in profiles:
        if not f.grid.matches(grid):
            raise DomainError("profiles live on different frequency grids")
        v = f.amplitudes.astype(complex)
        for u in kept:
            v = v - (weights * u.conj() * v).sum() * u
        # second pass for numerical orthogonality
        for u in kept:
            v = v - (weights * u.conj() * v).sum() * u
        norm = math.sqrt(float((weights * np.abs(v) ** 2).sum()))
        if norm >= drop_tol:
            kept.append(v / norm)
    if not kept:
        raise DomainError("all profiles collapsed during orthonormalization")
    return SpectralBasis(grid, tuple(SpectralProfile(grid, v) for v in kept))


def hermite_gaussian_basis(
    center_omega: float, pulse_duration: float, grid: FrequencyGrid, size: int
) -> SpectralBasis:
    """Hermite-Gaussian modes around a Gaussian pulse, orthonormalized.

    Mode 0 is the transform-limited Gaussian itself, so a family built here
    can play the fine-grained measurement basis whose first mode matches
    the transmitter.
    """
    if size < 1:
        raise DomainError("basis size must be at least 1")
    sigma = 1.0 / (2.0 * pulse_duration)
    y = (grid.omegas - center_omega) / (sigma * math.sqrt(2.0))
    envelope = np.exp(-0.5 * y**2)
    raw = []
    for n in range(size):
        coeff = np.zeros(n + 1)
        coeff[n] = 1.0
        amp = (_hermite.hermval(y, coeff) * envelope).astype(complex)
        norm_sq = float((grid.quadrature_weights * np.abs(amp) ** 2).sum())
        raw.append(SpectralProfile(grid, amp / math.sqrt(norm_sq)))
    return orthonormalize(raw, drop_tol=1e-12)


# ---------------------------------------------------------------------------
# the coarse (polarization-only) level
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AlphaPrep:
    """Preparation angle, one of the four protocol values."""

    theta: float

    def __post_init__(self):
        t = _wrap_angle(self.theta)
        snapped = next(
            (a for a in PREP_ANGLES if abs(t - a) <= 1e-9), None
        )
        if snapped is None:
            raise InvariantViolation(
                f"preparation angle must be one of {PREP_ANGLES}, got {t}"
            )
        object.__setattr__(self, "theta", snapped)


@dataclass(frozen=True)
class AlphaMeas:
    """Analyzer angle on the circle."""

    theta_prime: float

    def __post_init__(self):
        object.__setattr__(self, "theta_prime", _wrap_angle(self.theta_prime))


def alpha_ppm(theta: float, theta_prime: float) -> ProbabilityMeasure:
    """Two-outcome measure ``(cos^2(theta-theta'), sin^2(theta-theta'))``.

    This equals ``|<theta|theta'>|^2`` for the linear-polarization states,
    the same number the trace rule produces from the projective analyzer.
    """
    delta = float(theta) - float(theta_prime)
    c = math.cos(delta) ** 2
    return ProbabilityMeasure(ALPHA_SPACE, np.array([c, 1.0 - c]))


def alpha_povm(theta_prime: float) -> Povm:
    """Projective analyzer at ``theta_prime``: aligned and perpendicular."""
    hit = qubit_linear_state(theta_prime).projector()
    miss = qubit_linear_state(theta_prime + math.pi / 2).projector()
    return Povm(ALPHA_SPACE, (hit, miss))


ALPHA_DOMAIN = ParamDomain((Circle(), Circle()))


def alpha_model() -> QuantumModel:
    """Qubit model generating the coarse family: pure linear states read
    out by a projective analyzer.  Components: (prep angle, analyzer angle).
    """
    return QuantumModel(
        2,
        DensityOperatorFunction(
            ALPHA_DOMAIN, lambda p: qubit_linear_state(p.values[0]).density()
        ),
        PovmFunction(ALPHA_DOMAIN, ALPHA_SPACE, lambda p: alpha_povm(p.values[1])),
        split=((0,), (1,)),
    )


def alpha_ppm_object() -> Ppm:
    """The coarse family as a closed-form Ppm over (prep, analyzer)."""
    return Ppm.from_function(
        ALPHA_DOMAIN,
        ALPHA_SPACE,
        lambda p: alpha_ppm(p.values[0], p.values[1]),
        name="bb84_alpha",
    )


def alpha_prep_grid() -> ParamGrid:
    return ParamGrid.from_values(
        ParamDomain((Circle(),)), [[a] for a in PREP_ANGLES]
    )


# ---------------------------------------------------------------------------
# the fine (polarization x spectrum) level
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BetaPrep:
    """Preparation: polarization angle plus a normalized spectrum."""

    theta: float
    profile: SpectralProfile

    def __post_init__(self):
        object.__setattr__(self, "theta", _wrap_angle(self.theta))


@dataclass(frozen=True)
class BetaMeas:
    """Measurement: analyzer angle plus a 1-based spectral mode index."""

    theta_prime: float
    mode: int

    def __post_init__(self):
        object.__setattr__(self, "theta_prime", _wrap_angle(self.theta_prime))
        if int(self.mode) < 1:
            raise InvariantViolation("spectral mode index is 1-based")
        object.__setattr__(self, "mode", int(self.mode))


@dataclass(frozen=True, eq=False)
class BetaResult:
    """Weights of the fine measurement, with its completed 3-outcome measure.

    ``w1 + w0 = |<f, f_j>|^2`` can fall short of one; the deficit is the
    probability that neither analyzer output fires for this spectral mode,
    kept explicit as the completing ``none`` outcome.
    """

    w1: float
    w0: float
    no_detection: float
    measure: ProbabilityMeasure


def beta_ppm(prep: BetaPrep, meas: BetaMeas, basis: SpectralBasis) -> BetaResult:
    """Fine-level weights ``cos^2/sin^2(theta-theta') * |<f, f_j>|^2``."""
    if meas.mode > basis.size:
        raise DomainError(
            f"mode {meas.mode} beyond the {basis.size}-mode basis"
        )
    gain = abs(spectral_overlap(prep.profile, basis.profiles[meas.mode - 1])) ** 2
    gain = min(gain, 1.0)
    delta = prep.theta - meas.theta_prime
    w1 = math.cos(delta) ** 2 * gain
    w0 = math.sin(delta) ** 2 * gain
    measure = ProbabilityMeasure(BETA_SPACE, np.array([w1, w0, 1.0 - w1 - w0]))
    return BetaResult(w1, w0, 1.0 - w1 - w0, measure)


def beta_ppm_object(basis: SpectralBasis) -> Ppm:
    """The fine family as a Ppm, spectra indexed into the given basis.

    Components: (prep angle, prep mode label, analyzer angle, meas mode
    label); mode labels are the 1-based basis indices as strings.
    """
    labels = tuple(str(j + 1) for j in range(basis.size))
    domain = ParamDomain((Circle(), FiniteSet(labels), Circle(), FiniteSet(labels)))

    def evaluate(p: ParamPoint) -> ProbabilityMeasure:
        theta, prep_label, theta_prime, meas_label = p.values
        prep = BetaPrep(theta, basis.profiles[int(prep_label) - 1])
        return beta_ppm(prep, BetaMeas(theta_prime, int(meas_label)), basis).measure

    return Ppm.from_function(domain, BETA_SPACE, evaluate, name="bb84_beta")


@dataclass(frozen=True)
class WitnessResult:
    """Verdict plus the worst deviation seen while checking it."""

    passed: bool
    max_deviation: float

    def __bool__(self) -> bool:
        return self.passed


def envelopment_witness(
    basis: SpectralBasis, theta_grid: ParamGrid, tol: float = 1e-10,
    prep_mode: int = 1,
) -> WitnessResult:
    """Does the fine family restricted to mode 1 reproduce the coarse one?

    For every pair of grid angles the fine weights at (theta, f_1) measured
    in mode 1 are compared against the coarse two-outcome measure; the
    injection leaves everything else of the fine parameter space untouched.
    ``prep_mode`` selects which basis mode plays the transmitted spectrum;
    anything but 1 mismatches the measured mode and the witness fails.
    """
    if theta_grid.domain.components != (Circle(),):
        raise DomainError("theta grid must sample a single circle")
    if not 1 <= prep_mode <= basis.size:
        raise DomainError(f"prep mode {prep_mode} beyond the basis")
    prep_profile = basis.profiles[prep_mode - 1]
    worst = 0.0
    for p in theta_grid.points:
        theta = p.values[0]
        prep = BetaPrep(theta, prep_profile)
        for q in theta_grid.points:
            theta_prime = q.values[0]
            fine = beta_ppm(prep, BetaMeas(theta_prime, 1), basis)
            coarse = alpha_ppm(theta, theta_prime)
            worst = max(
                worst,
                abs(fine.w1 - coarse.prob_of("1")),
                abs(fine.w0 - coarse.prob_of("0")),
            )
    return WitnessResult(worst <= tol, worst)


# ---------------------------------------------------------------------------
# the four-laser frequency-mismatch vulnerability
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LaserBank:
    """One laser per protocol polarization, each with its own spectrum."""

    thetas: tuple[float, float, float, float]
    profiles: tuple[SpectralProfile, ...]

    def __post_init__(self):
        thetas = tuple(_wrap_angle(t) for t in self.thetas)
        profiles = tuple(self.profiles)
        if len(thetas) != 4 or len(profiles) != 4:
            raise InvariantViolation("a laser bank holds exactly four lasers")
        for t, want in zip(thetas, PREP_ANGLES):
            if abs(t - want) > 1e-9:
                raise InvariantViolation(
                    f"bank angles must be {PREP_ANGLES} in order, got {thetas}"
                )
        grid = profiles[0].grid
        for f in profiles:
            if not f.grid.matches(grid):
                raise InvariantViolation("bank spectra must share one grid")
        object.__setattr__(self, "thetas", tuple(PREP_ANGLES))
        object.__setattr__(self, "profiles", profiles)

    @property
    def grid(self) -> FrequencyGrid:
        return self.profiles[0].grid


def detuned_bank(
    wavelength_m: float,
    pulse_s: float,
    detune_frac: float,
    points: int = 2048,
    span_sigmas: float = 8.0,
) -> LaserBank:
    """Bank of four Gaussian-pulse lasers with stepped fractional detuning.

    Laser i is centered at ``omega0 * (1 + i * detune_frac)`` where omega0
    is the angular frequency of the nominal wavelength; the shared grid
    covers every center with a ``span_sigmas`` margin.
    """
    if wavelength_m <= 0:
        raise DomainError("wavelength must be positive")
    omega0 = 2.0 * math.pi * SPEED_OF_LIGHT / wavelength_m
    centers = [omega0 * (1.0 + i * detune_frac) for i in range(4)]
    grid = frequency_grid_around(centers, pulse_s, points, span_sigmas)
    profiles = tuple(gaussian_spectrum(c, pulse_s, grid) for c in centers)
    return LaserBank(PREP_ANGLES, profiles)


EVE_RULE = (
    "spectral mode measured in Eve's orthonormal basis; each mode is "
    "assigned to the bank laser with the largest squared spectral overlap; "
    "ties split uniformly; amplitude outside the basis span counts as "
    "failure; polarization is then fixed by the identified laser"
)


@dataclass(frozen=True, eq=False)
class AttackReport:
    """Distinguishability bookkeeping for an intercept-resend eavesdropper."""

    state_gram: np.ndarray
    spectral_gram: np.ndarray
    identification_probability: float
    distinguishable: bool
    threshold: float
    rule: str
    config: dict

    def to_dict(self) -> dict:
        return {
            "state_gram": [[float(x) for x in row] for row in self.state_gram],
            "spectral_gram": [
                [float(x) for x in row] for row in self.spectral_gram
            ],
            "identification_probability": self.identification_probability,
            "distinguishable": self.distinguishable,
            "threshold": self.threshold,
            "rule": self.rule,
            "config": self.config,
        }


def mismatch_attack(
    bank: LaserBank,
    eve_basis: SpectralBasis | None = None,
    threshold: float = 1e-3,
) -> AttackReport:
    """How well the bank's four signals can be told apart by their spectra.

    Reports the squared-overlap Gram matrices of the full states and of the
    bare spectra, the eavesdropper's identification probability under the
    simple classifier recorded in ``rule``, and the ``distinguishable``
    verdict: all off-diagonal spectral overlaps below ``threshold``.
    """
    if eve_basis is None:
        eve_basis = orthonormalize(bank.profiles, drop_tol=1e-6)
    if not eve_basis.grid.matches(bank.grid):
        raise DomainError("eavesdropper basis must share the bank's grid")

    spectral = np.empty((4, 4))
    for i in range(4):
        for k in range(4):
            spectral[i, k] = (
                abs(spectral_overlap(bank.profiles[i], bank.profiles[k])) ** 2
            )
    state = np.empty((4, 4))
    for i in range(4):
        for k in range(4):
            state[i, k] = (
                math.cos(bank.thetas[i] - bank.thetas[k]) ** 2 * spectral[i, k]
            )

    # which lasers each of Eve's modes points at (ties kept)
    mode_overlap = np.array(
        [
            [abs(spectral_overlap(e, f)) ** 2 for f in bank.profiles]
            for e in eve_basis.profiles
        ]
    )
    owners = []
    for row in mode_overlap:
        best = float(row.max())
        owners.append(tuple(int(k) for k in np.flatnonzero(row >= best - 1e-12)))

    success = 0.0
    for i in range(4):
        for j, e in enumerate(eve_basis.profiles):
            p_mode = abs(spectral_overlap(e, bank.profiles[i])) ** 2
            if i in owners[j]:
                success += 0.25 * p_mode / len(owners[j])

    off_diag = spectral[~np.eye(4, dtype=bool)]
    return AttackReport(
        state_gram=state,
        spectral_gram=spectral,
        identification_probability=min(max(float(success), 0.0), 1.0),
        distinguishable=bool(off_diag.max() < threshold),
        threshold=threshold,
        rule=EVE_RULE,
        config={
            "bank_thetas": [float(t) for t in bank.thetas],
            "bank_centers": [
                f.meta.get("center_omega") for f in bank.profiles
            ],
            "pulse_durations": [
                f.meta.get("pulse_duration") for f in bank.profiles
            ],
            "grid_points": bank.grid.size,
            "grid_span": [float(bank.grid.omegas[0]), float(bank.grid.omegas[-1])],
            "eve_modes": eve_basis.size,
        },
    )


def bank_to_dict(bank: LaserBank) -> dict:
    """Schema: four ``{theta, center_omega, duration}`` records."""
    lasers = []
    for theta, profile in zip(bank.thetas, bank.profiles):
        if "center_omega" not in profile.meta or "pulse_duration" not in profile.meta:
            raise DomainError("only Gaussian-pulse banks serialize to records")
        lasers.append(
            {
                "theta": float(theta),
                "center_omega": float(profile.meta["center_omega"]),
                "duration": float(profile.meta["pulse_duration"]),
            }
        )
    return {"lasers": lasers}


def bank_from_dict(d: dict, points: int = 2048, span_sigmas: float = 8.0) -> LaserBank:
    lasers = d["lasers"]
    if len(lasers) != 4:
        raise DomainError("a laser bank holds exactly four lasers")
    centers = [float(l["center_omega"]) for l in lasers]
    durations = [float(l["duration"]) for l in lasers]
    grid = frequency_grid_around(centers, min(durations), points, span_sigmas)
    profiles = tuple(
        gaussian_spectrum(c, dur, grid) for c, dur in zip(centers, durations)
    )
    return LaserBank(tuple(float(l["theta"]) for l in lasers), profiles)
