"""Bell-violation families over a torus and over a pair of spheres.

Two maximally entangled two-photon states are read out by factorized
two-outcome projective measurements.  Restricting both analyzers to linear
polarization gives a four-outcome family over the torus (one analyzer angle
per side) whose weights depend only on the angle difference; allowing full
elliptical polarization puts each analyzer on a sphere and the weights
depend only on the angle between the two sphere points.  Both families
violate the CHSH bound of 2, reaching 2*sqrt(2).

Level-set structure is exposed through diagnostics: two sphere pairs with
the same separation angle are connected by a rotation, unique away from the
degenerate separations 0 and pi where a one-parameter isotropy remains.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InvariantViolation, NumericalError
from .measure import (
    BipartiteLayout,
    Circle,
    OutcomeSpace,
    ParamDomain,
    ParamGrid,
    Ppm,
    ProbabilityMeasure,
    SpherePoint,
    _wrap_angle,
    circle_values,
)
from .quantum import (
    DensityOperatorFunction,
    DetectionOperator,
    Ket,
    Povm,
    PovmFunction,
    QuantumModel,
    tensor,
)

#: threshold below which a separation angle counts as degenerate (0 or pi)
DEGENERACY_TOL = 1e-7

SIDE_SPACE = OutcomeSpace(("1", "2"))
SPACE_A = OutcomeSpace(("1A", "2A"))
SPACE_B = OutcomeSpace(("1B", "2B"))
JOINT_SPACE = OutcomeSpace(("1A1B", "1A2B", "2A1B", "2A2B"))

TORUS_DOMAIN = ParamDomain((Circle(), Circle()))
SPHERE_DOMAIN = ParamDomain((SpherePoint(), SpherePoint()))


@dataclass(frozen=True)
class TorusPoint:
    """Pair of analyzer angles (theta_a, theta_b), each in [0, 2*pi)."""

    theta_a: float
    theta_b: float

    def __post_init__(self):
        object.__setattr__(self, "theta_a", _wrap_angle(self.theta_a))
        object.__setattr__(self, "theta_b", _wrap_angle(self.theta_b))


@dataclass(frozen=True)
class SpherePairPoint:
    """One sphere point per side: colatitudes in [0, pi], longitudes mod 2*pi."""

    theta_a: float
    phi_a: float
    theta_b: float
    phi_b: float

    def __post_init__(self):
        for name in ("theta_a", "theta_b"):
            t = float(getattr(self, name))
            if t < -1e-9 or t > math.pi + 1e-9:
                raise InvariantViolation(f"{name} = {t} outside [0, pi]")
            object.__setattr__(self, name, min(max(t, 0.0), math.pi))
        object.__setattr__(self, "phi_a", _wrap_angle(self.phi_a))
        object.__setattr__(self, "phi_b", _wrap_angle(self.phi_b))


@dataclass(frozen=True)
class BellSetting:
    """Two analyzer angles per side for the four-correlation combination."""

    theta_a: float
    theta_a_prime: float
    theta_b: float
    theta_b_prime: float


@dataclass(frozen=True, eq=False)
class Rotation3:
    """Proper rotation of 3-space: orthogonal with determinant +1."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (3, 3):
            raise InvariantViolation(f"rotation must be 3x3, got {m.shape}")
        residual = float(np.abs(m.T @ m - np.eye(3)).max())
        if residual > 1e-10:
            raise InvariantViolation(f"not orthogonal: residual {residual}")
        det = float(np.linalg.det(m))
        if abs(det - 1.0) > 1e-10:
            raise InvariantViolation(f"determinant must be +1, got {det}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def apply(self, vector: np.ndarray) -> np.ndarray:
        return self.matrix @ np.asarray(vector, dtype=float)


# ---------------------------------------------------------------------------
# states and analyzers
# ---------------------------------------------------------------------------


def bell_state() -> Ket:
    """(|xx> + |yy>)/sqrt(2) in the basis order (xx, xy, yx, yy)."""
    r = 1.0 / math.sqrt(2.0)
    return Ket(np.array([r, 0.0, 0.0, r], dtype=complex))


def singlet_state() -> Ket:
    """(|xy> - |yx>)/sqrt(2): invariant (up to phase) under U (x) U."""
    r = 1.0 / math.sqrt(2.0)
    return Ket(np.array([0.0, r, -r, 0.0], dtype=complex))


def linear_povm(theta: float) -> Povm:
    """Two-outcome analyzer for linear polarization at half-angle theta/2.

    Outcome 1 projects onto cos(theta/2)|x> + sin(theta/2)|y>; outcome 2 is
    the orthogonal projector, so completeness is exact.  The physical
    analyzer angle is theta/2; the parameter is theta.
    """
    half = theta / 2.0
    hit = np.array([math.cos(half), math.sin(half)], dtype=complex)
    miss = np.array([math.sin(half), -math.cos(half)], dtype=complex)
    return Povm(
        SIDE_SPACE,
        (
            DetectionOperator(np.outer(hit, hit.conj())),
            DetectionOperator(np.outer(miss, miss.conj())),
        ),
    )


def elliptical_povm(theta: float, phi: float) -> Povm:
    """Two-outcome analyzer for elliptical polarization.

    Outcome 1 projects onto cos(theta/2)|x> + e^{i phi} sin(theta/2)|y>;
    phi = 0 reduces to the linear analyzer.  (theta, phi) is a point on the
    polarization sphere: colatitude theta in [0, pi], longitude phi.
    """
    if theta < -1e-9 or theta > math.pi + 1e-9:
        raise DomainError(f"theta = {theta} outside [0, pi]")
    half = theta / 2.0
    phase = complex(math.cos(phi), math.sin(phi))
    hit = np.array([math.cos(half), phase * math.sin(half)], dtype=complex)
    miss = np.array([math.sin(half), -phase * math.cos(half)], dtype=complex)
    return Povm(
        SIDE_SPACE,
        (
            DetectionOperator(np.outer(hit, hit.conj())),
            DetectionOperator(np.outer(miss, miss.conj())),
        ),
    )


def _joint_povm(povm_a: Povm, povm_b: Povm) -> Povm:
    elements = tuple(
        DetectionOperator(tensor(ea.matrix, eb.matrix))
        for ea in povm_a.elements
        for eb in povm_b.elements
    )
    return Povm(JOINT_SPACE, elements)


# ---------------------------------------------------------------------------
# the torus family
# ---------------------------------------------------------------------------


def torus_ppm(p: TorusPoint) -> ProbabilityMeasure:
    """Closed-form weights over (1A1B, 1A2B, 2A1B, 2A2B).

    Aligned outcomes carry (1 + cos(theta_a - theta_b))/4 each, mixed ones
    (1 - cos)/4; only the angle difference matters.
    """
    c = math.cos(p.theta_a - p.theta_b)
    same = 0.25 * (1.0 + c)
    diff = 0.25 * (1.0 - c)
    return ProbabilityMeasure(JOINT_SPACE, np.array([same, diff, diff, same]))


def torus_ppm_family() -> Ppm:
    return Ppm.from_function(
        TORUS_DOMAIN,
        JOINT_SPACE,
        lambda p: torus_ppm(TorusPoint(p.values[0], p.values[1])),
        name="torus",
    )


def torus_model() -> QuantumModel:
    """Four-dimensional entangled model generating the torus family."""
    rho = bell_state().density()
    return QuantumModel(
        4,
        DensityOperatorFunction(TORUS_DOMAIN, lambda _p: rho),
        PovmFunction(
            TORUS_DOMAIN,
            JOINT_SPACE,
            lambda p: _joint_povm(linear_povm(p.values[0]), linear_povm(p.values[1])),
        ),
        split=((), (0, 1)),
    )


def torus_layout() -> BipartiteLayout:
    return BipartiteLayout.build(TORUS_DOMAIN, (0,), (1,), SPACE_A, SPACE_B)


def correlation_E(p: TorusPoint) -> float:
    """Correlation mu(11) + mu(22) - mu(12) - mu(21) = cos(theta_a - theta_b)."""
    w = torus_ppm(p).weights
    return float(w[0] + w[3] - w[1] - w[2])


def s_bell(s: BellSetting) -> float:
    """CHSH combination E(a,b) - E(a,b') + E(a',b) + E(a',b')."""
    return (
        correlation_E(TorusPoint(s.theta_a, s.theta_b))
        - correlation_E(TorusPoint(s.theta_a, s.theta_b_prime))
        + correlation_E(TorusPoint(s.theta_a_prime, s.theta_b))
        + correlation_E(TorusPoint(s.theta_a_prime, s.theta_b_prime))
    )


def s_bell_maximize(resolution: int = 16) -> tuple[BellSetting, float]:
    """Best CHSH value: coarse 4-angle grid, then coordinate descent.

    The step starts at the grid spacing and halves each round; any setting
    within 1e-6 of the attainable maximum 2*sqrt(2) is satisfactory.
    """
    if resolution < 8:
        raise DomainError("resolution must be at least 8")
    angles = np.array(circle_values(resolution))
    corr = np.cos(angles[:, None] - angles[None, :])
    n = resolution
    s_grid = (
        corr.reshape(n, n, 1, 1)
        - corr.reshape(n, 1, 1, n)
        + corr.T.reshape(1, n, n, 1)
        + corr.reshape(1, 1, n, n)
    )
    ia, ib, ia2, ib2 = np.unravel_index(int(s_grid.argmax()), s_grid.shape)
    best = [angles[ia], angles[ia2], angles[ib], angles[ib2]]

    def value(v) -> float:
        return s_bell(BellSetting(*v))

    best_value = value(best)
    step = 2.0 * math.pi / resolution
    for _round in range(40):
        improved = True
        while improved:
            improved = False
            for i in range(4):
                for cand in (best[i] - step, best[i] + step):
                    trial = list(best)
                    trial[i] = cand
                    v = value(trial)
                    if v > best_value:
                        best, best_value = trial, v
                        improved = True
        step *= 0.5
    setting = BellSetting(*(_wrap_angle(t) for t in best))
    return setting, s_bell(setting)


# ---------------------------------------------------------------------------
# the sphere-pair family
# ---------------------------------------------------------------------------


def angle_zeta(p: SpherePairPoint) -> float:
    """Angle between the two sides' unit vectors, in [0, pi]."""
    c = math.cos(p.theta_a) * math.cos(p.theta_b) + math.sin(p.theta_a) * math.sin(
        p.theta_b
    ) * math.cos(p.phi_a - p.phi_b)
    return math.acos(min(max(c, -1.0), 1.0))


def sphere_ppm(p: SpherePairPoint) -> ProbabilityMeasure:
    """Closed-form weights over the same four outcomes, from the singlet.

    Aligned outcomes carry (1 - cos(zeta))/4, mixed ones (1 + cos(zeta))/4,
    where zeta is the angle between the two analyzer points.
    """
    c = math.cos(p.theta_a) * math.cos(p.theta_b) + math.sin(p.theta_a) * math.sin(
        p.theta_b
    ) * math.cos(p.phi_a - p.phi_b)
    same = 0.25 * (1.0 - c)
    diff = 0.25 * (1.0 + c)
    return ProbabilityMeasure(JOINT_SPACE, np.array([same, diff, diff, same]))


def sphere_ppm_family() -> Ppm:
    return Ppm.from_function(
        SPHERE_DOMAIN,
        JOINT_SPACE,
        lambda p: sphere_ppm(
            SpherePairPoint(p.values[0][0], p.values[0][1], p.values[1][0], p.values[1][1])
        ),
        name="sphere",
    )


def sphere_model() -> QuantumModel:
    """Four-dimensional singlet model generating the sphere-pair family."""
    rho = singlet_state().density()
    return QuantumModel(
        4,
        DensityOperatorFunction(SPHERE_DOMAIN, lambda _p: rho),
        PovmFunction(
            SPHERE_DOMAIN,
            JOINT_SPACE,
            lambda p: _joint_povm(
                elliptical_povm(p.values[0][0], p.values[0][1]),
                elliptical_povm(p.values[1][0], p.values[1][1]),
            ),
        ),
        split=((), (0, 1)),
    )


def sphere_layout() -> BipartiteLayout:
    return BipartiteLayout.build(SPHERE_DOMAIN, (0,), (1,), SPACE_A, SPACE_B)


def sphere_correlation(p: SpherePairPoint) -> float:
    """Correlation analogue for the sphere family: -cos(zeta).

    An extension beyond the torus-only correlation, provided for symmetry.
    """
    w = sphere_ppm(p).weights
    return float(w[0] + w[3] - w[1] - w[2])


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------


def circle_grid(n: int, offset: float = 0.0) -> ParamGrid:
    """Uniform n-point grid on one circle component.

    Uniform spacing makes the grid closed under the shifts that the local
    reach compensation needs.
    """
    return ParamGrid.cartesian(ParamDomain((Circle(),)), [circle_values(n, offset)])


def sphere_product_grid(n_theta: int, n_phi: int) -> ParamGrid:
    """Product grid on one sphere: interior colatitudes x uniform longitudes."""
    if n_theta < 1 or n_phi < 1:
        raise DomainError("need at least one point per axis")
    thetas = [math.pi * (i + 0.5) / n_theta for i in range(n_theta)]
    phis = circle_values(n_phi)
    return ParamGrid.from_values(
        ParamDomain((SpherePoint(),)),
        [[(t, f)] for t in thetas for f in phis],
    )


def sphere_orbit_grid(
    half: int = 32, theta0: float = 2.0 * math.pi / 7.0, phi0: float = 0.3
) -> ParamGrid:
    """Rotation-closed sphere grid: the orbit of a generic point under the
    dihedral rotation group of order ``2 * half``.

    Two rings of ``half`` longitudes at colatitudes theta0 and pi - theta0.
    Any grid point maps to any other by a group element, and the group maps
    the grid onto itself, so local-reach compensation points exist exactly
    on the grid.  theta0 should avoid 0, pi/2, and pi to keep all points
    distinct.
    """
    if half < 1:
        raise DomainError("need at least one longitude per ring")
    if not 0.0 < theta0 < math.pi:
        raise DomainError("theta0 must be strictly inside (0, pi)")
    values = []
    for k in range(half):
        values.append([(theta0, _wrap_angle(phi0 + 2.0 * math.pi * k / half))])
    for k in range(half):
        values.append(
            [(math.pi - theta0, _wrap_angle(2.0 * math.pi * k / half - phi0))]
        )
    return ParamGrid.from_values(ParamDomain((SpherePoint(),)), values)


# ---------------------------------------------------------------------------
# level-set / orbit diagnostics
# ---------------------------------------------------------------------------


def _unit_vector(theta: float, phi: float) -> np.ndarray:
    return np.array(
        [
            math.sin(theta) * math.cos(phi),
            math.sin(theta) * math.sin(phi),
            math.cos(theta),
        ]
    )


def _pair_vectors(p: SpherePairPoint) -> tuple[np.ndarray, np.ndarray]:
    return _unit_vector(p.theta_a, p.phi_a), _unit_vector(p.theta_b, p.phi_b)


def _align_rotation(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Rotation carrying unit vector a to unit vector b."""
    c = float(np.dot(a, b))
    if c >= 1.0 - 1e-14:
        return np.eye(3)
    if c <= -1.0 + 1e-14:
        # antipodal: half-turn about any axis perpendicular to a
        helper = np.zeros(3)
        helper[int(np.argmin(np.abs(a)))] = 1.0
        axis = np.cross(a, helper)
        axis /= np.linalg.norm(axis)
        return 2.0 * np.outer(axis, axis) - np.eye(3)
    v = np.cross(a, b)
    vx = np.array(
        [[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]]
    )
    return np.eye(3) + vx + vx @ vx / (1.0 + c)


@dataclass(frozen=True, eq=False)
class OrbitResult:
    """Rotation relating two equal-separation pairs, or the degenerate report.

    Away from separations 0 and pi the rotation is unique and the level set
    is a copy of the rotation group; at the degenerate separations an
    SO(2) isotropy remains, one valid rotation is returned, and the level
    set collapses to a sphere.
    """

    rotation: Rotation3
    zeta: float
    degenerate: bool
    isotropy: str | None
    level_set: str
    residual: float

    def to_dict(self) -> dict:
        return {
            "rotation": [[float(x) for x in row] for row in self.rotation.matrix],
            "zeta": self.zeta,
            "degenerate": self.degenerate,
            "isotropy": self.isotropy,
            "level_set": self.level_set,
            "residual": self.residual,
        }


def orbit_rotation(
    p: SpherePairPoint, q: SpherePairPoint, tol: float = 1e-9
) -> OrbitResult:
    """Rotation mapping pair p onto pair q, defined when their separation
    angles agree within ``tol``.

    For separations strictly inside (0, pi) the rotation is the unique one
    aligning the orthonormal frames built from each pair; at 0 or pi the
    returned rotation aligns the A points and the report names the SO(2)
    isotropy and the sphere-shaped level set.
    """
    zp, zq = angle_zeta(p), angle_zeta(q)
    if abs(zp - zq) > tol:
        raise DomainError(
            f"separation angles differ: {zp} vs {zq} (tol {tol})"
        )
    zeta = 0.5 * (zp + zq)
    pa, pb = _pair_vectors(p)
    qa, qb = _pair_vectors(q)

    degenerate = zeta <= DEGENERACY_TOL or zeta >= math.pi - DEGENERACY_TOL
    if degenerate:
        rot = _align_rotation(pa, qa)
        residual = max(
            float(np.linalg.norm(rot @ pa - qa)),
            float(np.linalg.norm(rot @ pb - qb)),
        )
        return OrbitResult(
            Rotation3(rot),
            zeta,
            True,
            "SO(2)",
            "S2",
            residual,
        )

    def frame(a: np.ndarray, b: np.ndarray) -> np.ndarray:
        w = b - float(np.dot(b, a)) * a
        w /= np.linalg.norm(w)
        return np.column_stack([a, w, np.cross(a, w)])

    rot = frame(qa, qb) @ frame(pa, pb).T
    residual = max(
        float(np.linalg.norm(rot @ pa - qa)),
        float(np.linalg.norm(rot @ pb - qb)),
    )
    if residual > 1e-9:
        raise NumericalError(f"frame alignment residual {residual} > 1e-9")
    return OrbitResult(Rotation3(rot), zeta, False, None, "SO(3)", residual)


# ---------------------------------------------------------------------------
# contour export
# ---------------------------------------------------------------------------

#: analyzer settings reaching the maximal CHSH value, as marked in contour
#: exports: (theta_a, theta_b) pairs over the two settings per side
MAX_VIOLATION_POINTS = (
    (-3.0 * math.pi / 8.0, -math.pi / 8.0),
    (math.pi / 8.0, -math.pi / 8.0),
    (math.pi / 8.0, 3.0 * math.pi / 8.0),
    (-3.0 * math.pi / 8.0, 3.0 * math.pi / 8.0),
)

MAX_VIOLATION_SETTING = BellSetting(
    theta_a=-3.0 * math.pi / 8.0,
    theta_a_prime=math.pi / 8.0,
    theta_b=-math.pi / 8.0,
    theta_b_prime=3.0 * math.pi / 8.0,
)


@dataclass(frozen=True, eq=False)
class ContourTable:
    """Torus sweep of the four weights and the correlation, plus the four
    marked maximal-violation settings."""

    columns: tuple[str, ...]
    rows: tuple[tuple[float, ...], ...]

    def write_csv(self, fh) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([format(x, ".17g") for x in row])

    def text(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


def contour_export(resolution: int) -> ContourTable:
    """Uniform resolution x resolution torus sweep; marked points appended."""
    if resolution < 2:
        raise DomainError("resolution must be at least 2")
    rows = []

    def row_at(ta: float, tb: float) -> tuple[float, ...]:
        point = TorusPoint(ta, tb)
        w = torus_ppm(point).weights
        return (
            point.theta_a,
            point.theta_b,
            float(w[0]),
            float(w[1]),
            float(w[2]),
            float(w[3]),
            correlation_E(point),
        )

    for ta in circle_values(resolution):
        for tb in circle_values(resolution):
            rows.append(row_at(ta, tb))
    for ta, tb in MAX_VIOLATION_POINTS:
        rows.append(row_at(ta, tb))
    return ContourTable(
        ("theta_a", "theta_b", "mu_11", "mu_12", "mu_21", "mu_22", "E"),
        tuple(rows),
    )
