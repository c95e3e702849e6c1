"""Finite-outcome probability measures and parametrized families of them.

A probability measure lives on a fixed, ordered, finite outcome set.  A
parametrized probability measure (``Ppm``) maps each point of a parameter
domain -- a product of circles, intervals, finite label sets, and sphere
points -- to a probability measure, either through a closed form or through
a grid tabulation with exact-point lookup (no interpolation).

Relations between measures and families (refinement under an outcome
surjection, envelopment across a parameter injection), the L1 metric, and
the bipartite diagnostics (no-signaling, local reach, marginal invariance)
are all evaluated on explicit finite grids; every check result records the
grid it was evaluated on together with the worst violation found.
"""

from __future__ import annotations

import csv
import io
import math
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field
from itertools import product as _product

import numpy as np

from .errors import DomainError, InvariantViolation

TWO_PI = 2.0 * math.pi

#: tolerance on the total mass of a probability measure
SUM_TOL = 1e-12
#: tolerance on individual weights straying below 0 / above 1 (clamped)
WEIGHT_TOL = 1e-12
#: modular comparison tolerance for angle-valued parameters
ANGLE_TOL = 1e-9


def _wrap_angle(value: float) -> float:
    """Reduce an angle to the canonical range [0, 2*pi)."""
    v = math.fmod(float(value), TWO_PI)
    if v < 0.0:
        v += TWO_PI
    if v >= TWO_PI:
        v = 0.0
    return v


def _circle_gap(a: float, b: float) -> float:
    d = abs(_wrap_angle(a) - _wrap_angle(b))
    return min(d, TWO_PI - d)


def _require_finite(value, what: str) -> float:
    try:
        v = float(value)
    except (TypeError, ValueError) as exc:
        raise DomainError(f"{what} must be a real number, got {value!r}") from exc
    if not math.isfinite(v):
        raise DomainError(f"{what} must be finite, got {v!r}")
    return v


# ---------------------------------------------------------------------------
# outcome sets, events, measures
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OutcomeSpace:
    """Ordered finite set of distinct outcome labels."""

    outcomes: tuple[str, ...]

    def __post_init__(self):
        labels = tuple(str(x) for x in self.outcomes)
        object.__setattr__(self, "outcomes", labels)
        if len(labels) == 0:
            raise InvariantViolation("an outcome space needs at least one outcome")
        if len(set(labels)) != len(labels):
            raise InvariantViolation(f"outcome labels must be unique, got {labels}")

    @property
    def size(self) -> int:
        return len(self.outcomes)

    def index(self, label: str) -> int:
        try:
            return self.outcomes.index(label)
        except ValueError as exc:
            raise DomainError(f"unknown outcome {label!r}") from exc


@dataclass(frozen=True)
class Event:
    """A subset of outcomes, held as distinct indices into an OutcomeSpace."""

    indices: tuple[int, ...]

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if len(set(idx)) != len(idx):
            raise InvariantViolation(f"event indices must be distinct, got {idx}")
        if any(i < 0 for i in idx):
            raise InvariantViolation(f"event indices must be non-negative, got {idx}")
        object.__setattr__(self, "indices", tuple(sorted(idx)))


@dataclass(frozen=True, eq=False)
class ProbabilityMeasure:
    """Nonnegative weights over an outcome space, of total mass one.

    Weights within ``WEIGHT_TOL`` below 0 or above 1 are clamped; anything
    further out, or a total mass off by more than ``SUM_TOL``, is rejected.
    """

    space: OutcomeSpace
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (self.space.size,):
            raise InvariantViolation(
                f"expected {self.space.size} weights, got shape {w.shape}"
            )
        if not np.all(np.isfinite(w)):
            raise InvariantViolation("weights must be finite")
        if w.min(initial=0.0) < -WEIGHT_TOL or w.max(initial=0.0) > 1.0 + WEIGHT_TOL:
            raise InvariantViolation(
                f"weights outside [0, 1]: min {w.min()}, max {w.max()}"
            )
        total = float(w.sum())
        if abs(total - 1.0) > SUM_TOL:
            raise InvariantViolation(f"weights must sum to 1, got {total!r}")
        w = np.clip(w, 0.0, 1.0)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    def prob(self, index: int) -> float:
        if not 0 <= index < self.space.size:
            raise DomainError(f"outcome index {index} out of range")
        return float(self.weights[index])

    def prob_of(self, label: str) -> float:
        return float(self.weights[self.space.index(label)])


def point_mass(space: OutcomeSpace, index: int) -> ProbabilityMeasure:
    w = np.zeros(space.size)
    w[index] = 1.0
    return ProbabilityMeasure(space, w)


def uniform_measure(space: OutcomeSpace) -> ProbabilityMeasure:
    return ProbabilityMeasure(space, np.full(space.size, 1.0 / space.size))


# ---------------------------------------------------------------------------
# parameter domains
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Circle:
    """Angle coordinate, canonicalized to [0, 2*pi)."""

    def canonical(self, value):
        return _wrap_angle(_require_finite(value, "angle"))

    def gap(self, a, b) -> float:
        return _circle_gap(a, b)

    def flatten(self, value) -> list:
        return [float(value)]

    def column_names(self, prefix: str) -> list[str]:
        return [prefix]

    def to_dict(self) -> dict:
        return {"type": "circle"}

    def encode(self, value):
        return float(value)


@dataclass(frozen=True)
class Interval:
    """Closed real interval [lo, hi]."""

    lo: float
    hi: float

    def __post_init__(self):
        lo = _require_finite(self.lo, "interval lo")
        hi = _require_finite(self.hi, "interval hi")
        if not lo < hi:
            raise InvariantViolation(f"interval needs lo < hi, got [{lo}, {hi}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def canonical(self, value):
        v = _require_finite(value, "interval value")
        if v < self.lo - 1e-12 or v > self.hi + 1e-12:
            raise DomainError(f"{v!r} outside interval [{self.lo}, {self.hi}]")
        return min(max(v, self.lo), self.hi)

    def gap(self, a, b) -> float:
        return abs(float(a) - float(b))

    def flatten(self, value) -> list:
        return [float(value)]

    def column_names(self, prefix: str) -> list[str]:
        return [prefix]

    def to_dict(self) -> dict:
        return {"type": "interval", "lo": self.lo, "hi": self.hi}

    def encode(self, value):
        return float(value)


@dataclass(frozen=True)
class FiniteSet:
    """Discrete parameter taking one of a fixed tuple of labels."""

    labels: tuple[str, ...]

    def __post_init__(self):
        labels = tuple(str(x) for x in self.labels)
        if len(labels) == 0:
            raise InvariantViolation("a finite parameter set needs at least one label")
        if len(set(labels)) != len(labels):
            raise InvariantViolation(f"finite-set labels must be unique: {labels}")
        object.__setattr__(self, "labels", labels)

    def canonical(self, value):
        v = str(value)
        if v not in self.labels:
            raise DomainError(f"{v!r} not among labels {self.labels}")
        return v

    def gap(self, a, b) -> float:
        return 0.0 if a == b else math.inf

    def flatten(self, value) -> list:
        return [str(value)]

    def column_names(self, prefix: str) -> list[str]:
        return [prefix]

    def to_dict(self) -> dict:
        return {"type": "finite", "labels": list(self.labels)}

    def encode(self, value):
        return str(value)


@dataclass(frozen=True)
class SpherePoint:
    """Point on the unit sphere: (colatitude in [0, pi], longitude in [0, 2*pi))."""

    def canonical(self, value):
        try:
            theta, phi = value
        except (TypeError, ValueError) as exc:
            raise DomainError(
                f"sphere value must be a (theta, phi) pair, got {value!r}"
            ) from exc
        theta = _require_finite(theta, "colatitude")
        if theta < -ANGLE_TOL or theta > math.pi + ANGLE_TOL:
            raise DomainError(f"colatitude {theta!r} outside [0, pi]")
        theta = min(max(theta, 0.0), math.pi)
        return (theta, _wrap_angle(_require_finite(phi, "longitude")))

    def gap(self, a, b) -> float:
        return max(abs(a[0] - b[0]), _circle_gap(a[1], b[1]))

    def flatten(self, value) -> list:
        return [float(value[0]), float(value[1])]

    def column_names(self, prefix: str) -> list[str]:
        return [f"{prefix}_theta", f"{prefix}_phi"]

    def to_dict(self) -> dict:
        return {"type": "sphere"}

    def encode(self, value):
        return [float(value[0]), float(value[1])]


Component = Circle | Interval | FiniteSet | SpherePoint


def component_from_dict(d: dict) -> Component:
    kind = d.get("type")
    if kind == "circle":
        return Circle()
    if kind == "interval":
        return Interval(d["lo"], d["hi"])
    if kind == "finite":
        return FiniteSet(tuple(d["labels"]))
    if kind == "sphere":
        return SpherePoint()
    raise DomainError(f"unknown component type {kind!r}")


@dataclass(frozen=True)
class ParamPoint:
    """One parameter list: a value per domain component."""

    values: tuple

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))


@dataclass(frozen=True)
class ParamDomain:
    """Ordered product of parameter components.

    A zero-component domain is allowed; it has exactly one point, the empty
    list, and models a family whose preparation (or measurement) is fixed.
    """

    components: tuple[Component, ...]

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))

    @property
    def size(self) -> int:
        return len(self.components)

    def point(self, values: Sequence) -> ParamPoint:
        values = tuple(values)
        if len(values) != len(self.components):
            raise DomainError(
                f"expected {len(self.components)} values, got {len(values)}"
            )
        return ParamPoint(
            tuple(c.canonical(v) for c, v in zip(self.components, values))
        )

    def canonicalize(self, point) -> ParamPoint:
        values = point.values if isinstance(point, ParamPoint) else point
        return self.point(values)

    def gap(self, p: ParamPoint, q: ParamPoint) -> float:
        if not p.values and not q.values:
            return 0.0
        return max(
            c.gap(a, b) for c, a, b in zip(self.components, p.values, q.values)
        )

    def flatten(self, point: ParamPoint) -> list:
        out: list = []
        for c, v in zip(self.components, point.values):
            out.extend(c.flatten(v))
        return out

    def column_names(self, prefix: str) -> list[str]:
        out: list[str] = []
        for i, c in enumerate(self.components):
            out.extend(c.column_names(f"{prefix}{i}"))
        return out

    def encode_point(self, point: ParamPoint) -> list:
        return [c.encode(v) for c, v in zip(self.components, point.values)]

    def decode_point(self, values: Sequence) -> ParamPoint:
        return self.point(tuple(values))


def concat_domains(a: ParamDomain, b: ParamDomain) -> ParamDomain:
    return ParamDomain(a.components + b.components)


def concat_points(a: ParamPoint, b: ParamPoint) -> ParamPoint:
    return ParamPoint(a.values + b.values)


def _value_key(component: Component, value):
    if isinstance(component, FiniteSet):
        return value
    if isinstance(component, SpherePoint):
        return (round(value[0], 10), round(value[1], 10))
    return round(value, 10)


@dataclass(frozen=True, eq=False)
class ParamGrid:
    """Finite, ordered sample of a parameter domain."""

    domain: ParamDomain
    points: tuple[ParamPoint, ...]
    _lookup: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        pts = tuple(self.domain.canonicalize(p) for p in self.points)
        if not pts:
            raise InvariantViolation("a parameter grid must be nonempty")
        object.__setattr__(self, "points", pts)
        lookup: dict = {}
        for i, p in enumerate(pts):
            key = tuple(
                _value_key(c, v) for c, v in zip(self.domain.components, p.values)
            )
            lookup.setdefault(key, i)
        object.__setattr__(self, "_lookup", lookup)

    @property
    def size(self) -> int:
        return len(self.points)

    def index_of(self, point, tol: float = ANGLE_TOL) -> int:
        p = self.domain.canonicalize(point)
        key = tuple(
            _value_key(c, v) for c, v in zip(self.domain.components, p.values)
        )
        hit = self._lookup.get(key)
        if hit is not None:
            return hit
        for i, q in enumerate(self.points):
            if self.domain.gap(p, q) <= tol:
                return i
        raise DomainError(f"point {p.values!r} is not on the grid")

    def __contains__(self, point) -> bool:
        try:
            self.index_of(point)
            return True
        except DomainError:
            return False

    @classmethod
    def from_values(cls, domain: ParamDomain, rows: Iterable[Sequence]) -> "ParamGrid":
        return cls(domain, tuple(domain.point(row) for row in rows))

    @classmethod
    def cartesian(cls, domain: ParamDomain, axes: Sequence[Sequence]) -> "ParamGrid":
        """Row-major product grid: the first component varies slowest."""
        if len(axes) != domain.size:
            raise DomainError(
                f"expected {domain.size} axes, got {len(axes)}"
            )
        return cls.from_values(domain, _product(*axes))


def circle_values(n: int, offset: float = 0.0) -> list[float]:
    """n equally spaced angles starting at ``offset``."""
    if n < 1:
        raise DomainError("need at least one angle")
    return [_wrap_angle(offset + TWO_PI * k / n) for k in range(n)]


EMPTY_DOMAIN = ParamDomain(())
EMPTY_POINT = ParamPoint(())
EMPTY_GRID = ParamGrid(EMPTY_DOMAIN, (EMPTY_POINT,))


# ---------------------------------------------------------------------------
# parametrized probability measures
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Ppm:
    """A family of probability measures indexed by a parameter domain.

    Built either from a closed-form evaluator (total on the domain) or from
    a tabulation on a grid.  Tabulated families answer only exact grid-point
    queries; there is deliberately no interpolation.
    """

    domain: ParamDomain
    space: OutcomeSpace
    name: str = ""
    _fn: Callable[[ParamPoint], ProbabilityMeasure] | None = field(
        default=None, repr=False
    )
    _grid: ParamGrid | None = field(default=None, repr=False)
    _table: tuple[ProbabilityMeasure, ...] | None = field(default=None, repr=False)

    @classmethod
    def from_function(
        cls,
        domain: ParamDomain,
        space: OutcomeSpace,
        fn: Callable[[ParamPoint], ProbabilityMeasure],
        name: str = "",
    ) -> "Ppm":
        return cls(domain, space, name, _fn=fn)

    @classmethod
    def from_table(
        cls,
        grid: ParamGrid,
        space: OutcomeSpace,
        measures: Sequence[ProbabilityMeasure],
        name: str = "",
    ) -> "Ppm":
        measures = tuple(measures)
        if len(measures) != grid.size:
            raise DomainError(
                f"need one measure per grid point: {grid.size} points, "
                f"{len(measures)} measures"
            )
        for mu in measures:
            if mu.space.outcomes != space.outcomes:
                raise DomainError("tabulated measure on the wrong outcome space")
        return cls(grid.domain, space, name, _grid=grid, _table=measures)

    @property
    def is_tabulated(self) -> bool:
        return self._table is not None

    @property
    def grid(self) -> ParamGrid:
        if self._grid is None:
            raise DomainError("this family is closed-form; it has no grid")
        return self._grid

    @property
    def measures(self) -> tuple[ProbabilityMeasure, ...]:
        if self._table is None:
            raise DomainError("this family is closed-form; it has no table")
        return self._table

    def at(self, point) -> ProbabilityMeasure:
        p = self.domain.canonicalize(point)
        if self._table is not None:
            return self._table[self._grid.index_of(p)]
        mu = self._fn(p)
        if mu.space.outcomes != self.space.outcomes:
            raise InvariantViolation("evaluator returned the wrong outcome space")
        return mu

    def tabulate(self, grid: ParamGrid, name: str | None = None) -> "Ppm":
        if grid.domain.components != self.domain.components:
            raise DomainError("grid domain does not match the family domain")
        return Ppm.from_table(
            grid,
            self.space,
            tuple(self.at(p) for p in grid.points),
            self.name if name is None else name,
        )


# ---------------------------------------------------------------------------
# relations between measures and families
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OutcomeSurjection:
    """Onto map from a finer outcome space to a coarser one.

    ``mapping[i]`` is the target index of source outcome ``i``.
    """

    source: OutcomeSpace
    target: OutcomeSpace
    mapping: tuple[int, ...]

    def __post_init__(self):
        mapping = tuple(int(i) for i in self.mapping)
        object.__setattr__(self, "mapping", mapping)
        if len(mapping) != self.source.size:
            raise InvariantViolation("need one target index per source outcome")
        if any(not 0 <= i < self.target.size for i in mapping):
            raise InvariantViolation("mapping hits an invalid target index")
        if set(mapping) != set(range(self.target.size)):
            raise InvariantViolation("mapping must be onto the target space")

    def preimage(self, target_index: int) -> tuple[int, ...]:
        if not 0 <= target_index < self.target.size:
            raise DomainError(f"target index {target_index} out of range")
        return tuple(i for i, t in enumerate(self.mapping) if t == target_index)

    @classmethod
    def identity(cls, space: OutcomeSpace) -> "OutcomeSurjection":
        return cls(space, space, tuple(range(space.size)))


@dataclass(frozen=True)
class ParamInjection:
    """Injective map from one parameter domain into another."""

    source: ParamDomain
    target: ParamDomain
    fn: Callable[[ParamPoint], ParamPoint]

    def apply(self, point) -> ParamPoint:
        p = self.source.canonicalize(point)
        image = self.fn(p)
        values = image.values if isinstance(image, ParamPoint) else tuple(image)
        return self.target.point(values)

    @classmethod
    def identity(cls, domain: ParamDomain) -> "ParamInjection":
        return cls(domain, domain, lambda p: p)


def event_probability(mu: ProbabilityMeasure, omega: Event) -> float:
    """Total mass the measure assigns to an event (sum over its outcomes)."""
    if any(i >= mu.space.size for i in omega.indices):
        raise DomainError(
            f"event indices {omega.indices} out of range for a "
            f"{mu.space.size}-outcome space"
        )
    return float(sum(mu.weights[i] for i in omega.indices))


def l1_distance(mu: ProbabilityMeasure, nu: ProbabilityMeasure) -> float:
    """L1 distance ``0.5 * sum |mu - nu|``.

    For a finite outcome set this closed form attains the supremum over
    partitions that defines the metric (the finest partition is extremal).
    """
    if mu.space.outcomes != nu.space.outcomes:
        raise DomainError("measures live on different outcome spaces")
    return 0.5 * float(np.abs(mu.weights - nu.weights).sum())


def refinement_deviation(
    mu_prime: ProbabilityMeasure, xi: OutcomeSurjection, mu: ProbabilityMeasure
) -> float:
    """Worst gap between preimage mass and coarse mass over the singletons."""
    if mu_prime.space.outcomes != xi.source.outcomes:
        raise DomainError("finer measure does not live on the surjection source")
    if mu.space.outcomes != xi.target.outcomes:
        raise DomainError("coarser measure does not live on the surjection target")
    worst = 0.0
    for j in range(mu.space.size):
        pulled = sum(mu_prime.weights[i] for i in xi.preimage(j))
        worst = max(worst, abs(pulled - mu.weights[j]))
    return worst


def refines(
    mu_prime: ProbabilityMeasure,
    xi: OutcomeSurjection,
    mu: ProbabilityMeasure,
    tol: float = 1e-9,
) -> bool:
    """Does the finer measure reproduce the coarser one through ``xi``?

    Checks preimage mass against each singleton of the coarse space, which
    suffices by additivity.
    """
    return refinement_deviation(mu_prime, xi, mu) <= tol


def envelops(
    mu_prime: Ppm,
    injection: ParamInjection,
    xi: OutcomeSurjection,
    mu: Ppm,
    grid: ParamGrid,
    tol: float = 1e-9,
) -> bool:
    """Does the finer family reproduce the coarser one over the grid?

    True iff for every grid point k the finer measure at the injected point
    refines the coarser measure at k.
    """
    if grid.domain.components != mu.domain.components:
        raise DomainError("grid does not sample the coarse family's domain")
    if injection.target.components != mu_prime.domain.components:
        raise DomainError("injection does not land in the fine family's domain")
    for k in grid.points:
        image = injection.apply(k)
        if not refines(mu_prime.at(image), xi, mu.at(k), tol):
            return False
    return True


def ppm_distance(mu: Ppm, nu: Ppm, grid: ParamGrid) -> float:
    """Largest L1 distance between the two families over the grid points.

    A grid maximum standing in for the supremum over the whole domain;
    report it together with the grid used.
    """
    if mu.space.outcomes != nu.space.outcomes:
        raise DomainError("families live on different outcome spaces")
    return max(l1_distance(mu.at(k), nu.at(k)) for k in grid.points)


def level_set_equal(mu: Ppm, k, k_prime, tol: float = 1e-9) -> bool:
    """Are two parameter points on the same level set (equal measures)?"""
    return l1_distance(mu.at(k), mu.at(k_prime)) <= tol


# ---------------------------------------------------------------------------
# bipartite structure
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BipartiteLayout:
    """Split of a family's parameters and outcomes into sides A and B.

    Joint outcome labels are the concatenations ``a_label + b_label`` in
    row-major order (A outermost); parameter components are partitioned by
    index between the two sides.
    """

    domain: ParamDomain
    side_a: tuple[int, ...]
    side_b: tuple[int, ...]
    space_a: OutcomeSpace
    space_b: OutcomeSpace
    space: OutcomeSpace

    def __post_init__(self):
        a = tuple(int(i) for i in self.side_a)
        b = tuple(int(i) for i in self.side_b)
        object.__setattr__(self, "side_a", a)
        object.__setattr__(self, "side_b", b)
        if sorted(a + b) != list(range(self.domain.size)):
            raise InvariantViolation(
                "side component indices must partition the domain"
            )
        expected = tuple(
            la + lb for la in self.space_a.outcomes for lb in self.space_b.outcomes
        )
        if self.space.outcomes != expected:
            raise InvariantViolation(
                "joint outcome labels must be the row-major concatenations "
                "of the side labels"
            )

    @classmethod
    def build(
        cls,
        domain: ParamDomain,
        side_a: Sequence[int],
        side_b: Sequence[int],
        space_a: OutcomeSpace,
        space_b: OutcomeSpace,
    ) -> "BipartiteLayout":
        joint = OutcomeSpace(
            tuple(la + lb for la in space_a.outcomes for lb in space_b.outcomes)
        )
        return cls(domain, tuple(side_a), tuple(side_b), space_a, space_b, joint)

    @property
    def domain_a(self) -> ParamDomain:
        return ParamDomain(tuple(self.domain.components[i] for i in self.side_a))

    @property
    def domain_b(self) -> ParamDomain:
        return ParamDomain(tuple(self.domain.components[i] for i in self.side_b))

    def merge(self, point_a, point_b) -> ParamPoint:
        pa = self.domain_a.canonicalize(point_a)
        pb = self.domain_b.canonicalize(point_b)
        values: list = [None] * self.domain.size
        for i, v in zip(self.side_a, pa.values):
            values[i] = v
        for i, v in zip(self.side_b, pb.values):
            values[i] = v
        return ParamPoint(tuple(values))

    def split(self, point) -> tuple[ParamPoint, ParamPoint]:
        p = self.domain.canonicalize(point)
        return (
            ParamPoint(tuple(p.values[i] for i in self.side_a)),
            ParamPoint(tuple(p.values[i] for i in self.side_b)),
        )


def marginal(
    mu: ProbabilityMeasure, layout: BipartiteLayout, side: str
) -> ProbabilityMeasure:
    """Marginal of a joint measure on side ``"A"`` or ``"B"``."""
    if mu.space.outcomes != layout.space.outcomes:
        raise DomainError("measure does not live on the layout's joint space")
    table = mu.weights.reshape(layout.space_a.size, layout.space_b.size)
    if side == "A":
        return ProbabilityMeasure(layout.space_a, table.sum(axis=1))
    if side == "B":
        return ProbabilityMeasure(layout.space_b, table.sum(axis=0))
    raise DomainError(f"side must be 'A' or 'B', got {side!r}")


def epsilon_separable(
    mu: Ppm,
    layout: BipartiteLayout,
    k_a,
    k_a_prime,
    k_b,
    eps: float,
    joint: bool = False,
) -> bool:
    """Can side B tell ``k_a`` from ``k_a_prime`` at resolution ``eps``?

    By default the comparison uses what B actually sees -- the side-B
    marginals; set ``joint=True`` to compare the full joint measures.
    """
    if eps < 0:
        raise DomainError("eps must be nonnegative")
    first = mu.at(layout.merge(k_a, k_b))
    second = mu.at(layout.merge(k_a_prime, k_b))
    if not joint:
        first = marginal(first, layout, "B")
        second = marginal(second, layout, "B")
    return eps <= l1_distance(first, second)


# ---------------------------------------------------------------------------
# grid checks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CheckResult:
    """Outcome of a grid-evaluated check.

    Boolean verdict plus the worst violation, the grids used, an offender
    (on failure) or witness (on success), and per-grid-point violation rows
    ready for CSV export.
    """

    name: str
    passed: bool
    max_violation: float
    tol: float
    grid_a_size: int
    grid_b_size: int
    columns: tuple[str, ...]
    rows: tuple[tuple, ...]
    offender: dict | None = None
    witness: dict | None = None

    def __bool__(self) -> bool:
        return self.passed

    def summary(self) -> dict:
        return {
            "check": self.name,
            "passed": self.passed,
            "max_violation": self.max_violation,
            "tol": self.tol,
            "grid": {"side_a": self.grid_a_size, "side_b": self.grid_b_size},
            "offender": self.offender,
            "witness": self.witness,
        }


def _fmt_cell(x) -> str:
    if isinstance(x, str):
        return x
    return format(float(x), ".17g")


def write_check_csv(result: CheckResult, path_or_file) -> None:
    """One CSV row per grid point with its violation magnitude."""
    if hasattr(path_or_file, "write"):
        _write_rows(path_or_file, result.columns, result.rows)
    else:
        with open(path_or_file, "w", newline="") as fh:
            _write_rows(fh, result.columns, result.rows)


def _write_rows(fh, columns, rows) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt_cell(x) for x in row])


def check_csv_text(result: CheckResult) -> str:
    buf = io.StringIO()
    write_check_csv(result, buf)
    return buf.getvalue()


def _weight_cube(
    mu: Ppm, layout: BipartiteLayout, grid_a: ParamGrid, grid_b: ParamGrid
) -> np.ndarray:
    """Joint weights W[ia, ib, outcome] over the side grids."""
    if grid_a.domain.components != layout.domain_a.components:
        raise DomainError("grid_a does not sample side A's domain")
    if grid_b.domain.components != layout.domain_b.components:
        raise DomainError("grid_b does not sample side B's domain")
    if mu.space.outcomes != layout.space.outcomes:
        raise DomainError("family does not live on the layout's joint space")
    cube = np.empty((grid_a.size, grid_b.size, layout.space.size))
    for ia, ka in enumerate(grid_a.points):
        for ib, kb in enumerate(grid_b.points):
            cube[ia, ib] = mu.at(layout.merge(ka, kb)).weights
    return cube


def _check_columns(layout: BipartiteLayout) -> tuple[str, ...]:
    return tuple(
        layout.domain_a.column_names("kA")
        + layout.domain_b.column_names("kB")
        + ["violation"]
    )


def _point_row(layout, grid_a, grid_b, ia, ib, violation) -> tuple:
    return tuple(
        layout.domain_a.flatten(grid_a.points[ia])
        + layout.domain_b.flatten(grid_b.points[ib])
        + [float(violation)]
    )


def _flat(domain: ParamDomain, point: ParamPoint) -> list:
    return domain.flatten(point)


def no_signaling_check(
    mu: Ppm,
    layout: BipartiteLayout,
    grid_a: ParamGrid,
    grid_b: ParamGrid,
    tol: float = 1e-9,
) -> CheckResult:
    """Are each side's marginals insensitive to the other side's parameter?

    For every fixed k_A the side-A marginals are compared pairwise (L1)
    across all sampled k_B, and symmetrically for side B.  The worst pair
    found is reported.
    """
    cube = _weight_cube(mu, layout, grid_a, grid_b)
    na, nb = grid_a.size, grid_b.size
    marg_a = cube.reshape(na, nb, layout.space_a.size, layout.space_b.size).sum(axis=3)
    marg_b = cube.reshape(na, nb, layout.space_a.size, layout.space_b.size).sum(axis=2)

    worst = 0.0
    offender = None
    row_violation = np.zeros((na, nb))

    for ia in range(na):
        block = marg_a[ia]  # (nb, |A|)
        dists = 0.5 * np.abs(block[:, None, :] - block[None, :, :]).sum(axis=2)
        row_violation[ia] = np.maximum(row_violation[ia], dists.max(axis=1))
        local = float(dists.max())
        if local > worst:
            ib1, ib2 = np.unravel_index(int(dists.argmax()), dists.shape)
            worst = local
            offender = {
                "side": "A",
                "k_a": _flat(layout.domain_a, grid_a.points[ia]),
                "k_b": _flat(layout.domain_b, grid_b.points[int(ib1)]),
                "k_b_alt": _flat(layout.domain_b, grid_b.points[int(ib2)]),
                "violation": worst,
            }
    for ib in range(nb):
        block = marg_b[:, ib]  # (na, |B|)
        dists = 0.5 * np.abs(block[:, None, :] - block[None, :, :]).sum(axis=2)
        row_violation[:, ib] = np.maximum(row_violation[:, ib], dists.max(axis=1))
        local = float(dists.max())
        if local > worst:
            ia1, ia2 = np.unravel_index(int(dists.argmax()), dists.shape)
            worst = local
            offender = {
                "side": "B",
                "k_b": _flat(layout.domain_b, grid_b.points[ib]),
                "k_a": _flat(layout.domain_a, grid_a.points[int(ia1)]),
                "k_a_alt": _flat(layout.domain_a, grid_a.points[int(ia2)]),
                "violation": worst,
            }

    passed = worst <= tol
    rows = tuple(
        _point_row(layout, grid_a, grid_b, ia, ib, row_violation[ia, ib])
        for ia in range(na)
        for ib in range(nb)
    )
    return CheckResult(
        "no_signaling",
        passed,
        worst,
        tol,
        na,
        nb,
        _check_columns(layout),
        rows,
        offender=None if passed else offender,
        witness=offender if passed else None,
    )


def local_reach_check(
    mu: Ppm,
    layout: BipartiteLayout,
    grid_a: ParamGrid,
    grid_b: ParamGrid,
    tol: float = 1e-9,
) -> CheckResult:
    """Can either side always compensate the other's parameter change?

    Direction one: for every sampled (k_A, k_B, k_B') some k_A' on the grid
    reproduces the measure at (k_A, k_B).  Direction two is symmetric.  The
    check needs grids on which the compensating point actually exists
    (e.g. uniform angle grids on a circle, rotation-closed sphere grids).
    """
    cube = _weight_cube(mu, layout, grid_a, grid_b)
    na, nb = grid_a.size, grid_b.size
    m = layout.space.size
    flat = cube.reshape(na * nb, m)

    # direction 1: min over k_A' of L1(target, W[:, ib2]) for every target, ib2
    min_over_a = np.empty((na * nb, nb))
    argmin_a = np.empty((na * nb, nb), dtype=int)
    for ib2 in range(nb):
        d = 0.5 * np.abs(flat[:, None, :] - cube[None, :, ib2, :]).sum(axis=2)
        min_over_a[:, ib2] = d.min(axis=1)
        argmin_a[:, ib2] = d.argmin(axis=1)
    # direction 2: min over k_B' of L1(target, W[ia2, :]) for every target, ia2
    min_over_b = np.empty((na * nb, na))
    argmin_b = np.empty((na * nb, na), dtype=int)
    for ia2 in range(na):
        d = 0.5 * np.abs(flat[:, None, :] - cube[None, ia2, :, :]).sum(axis=2)
        min_over_b[:, ia2] = d.min(axis=1)
        argmin_b[:, ia2] = d.argmin(axis=1)

    worst1 = float(min_over_a.max())
    worst2 = float(min_over_b.max())
    worst = max(worst1, worst2)
    passed = worst <= tol

    def _describe(direction: str) -> dict:
        if direction == "1":
            t, ib2 = np.unravel_index(int(min_over_a.argmax()), min_over_a.shape)
            ia, ib = divmod(int(t), nb)
            desc = {
                "direction": "vary k_B, compensate with k_A'",
                "k_a": _flat(layout.domain_a, grid_a.points[ia]),
                "k_b": _flat(layout.domain_b, grid_b.points[ib]),
                "k_b_prime": _flat(layout.domain_b, grid_b.points[int(ib2)]),
                "best_k_a_prime": _flat(
                    layout.domain_a, grid_a.points[int(argmin_a[t, ib2])]
                ),
                "residual": float(min_over_a[t, ib2]),
            }
        else:
            t, ia2 = np.unravel_index(int(min_over_b.argmax()), min_over_b.shape)
            ia, ib = divmod(int(t), nb)
            desc = {
                "direction": "vary k_A, compensate with k_B'",
                "k_a": _flat(layout.domain_a, grid_a.points[ia]),
                "k_b": _flat(layout.domain_b, grid_b.points[ib]),
                "k_a_prime": _flat(layout.domain_a, grid_a.points[int(ia2)]),
                "best_k_b_prime": _flat(
                    layout.domain_b, grid_b.points[int(argmin_b[t, ia2])]
                ),
                "residual": float(min_over_b[t, ia2]),
            }
        return desc

    detail = _describe("1" if worst1 >= worst2 else "2")
    per_point = np.maximum(min_over_a.max(axis=1), min_over_b.max(axis=1)).reshape(
        na, nb
    )
    rows = tuple(
        _point_row(layout, grid_a, grid_b, ia, ib, per_point[ia, ib])
        for ia in range(na)
        for ib in range(nb)
    )
    return CheckResult(
        "local_reach",
        passed,
        worst,
        tol,
        na,
        nb,
        _check_columns(layout),
        rows,
        offender=None if passed else detail,
        witness=detail if passed else None,
    )


def marginal_invariance_check(
    mu: Ppm,
    layout: BipartiteLayout,
    grid_a: ParamGrid,
    grid_b: ParamGrid,
    tol: float = 1e-9,
) -> CheckResult:
    """Are both side marginals constant over the whole sampled product?

    Deviation is measured as L1 distance to the marginal at the first grid
    point, which is zero exactly when the marginal is constant.
    """
    cube = _weight_cube(mu, layout, grid_a, grid_b)
    na, nb = grid_a.size, grid_b.size
    shaped = cube.reshape(na, nb, layout.space_a.size, layout.space_b.size)
    marg_a = shaped.sum(axis=3).reshape(na * nb, layout.space_a.size)
    marg_b = shaped.sum(axis=2).reshape(na * nb, layout.space_b.size)
    dev_a = 0.5 * np.abs(marg_a - marg_a[0]).sum(axis=1)
    dev_b = 0.5 * np.abs(marg_b - marg_b[0]).sum(axis=1)
    per_point = np.maximum(dev_a, dev_b)
    worst = float(per_point.max())
    passed = worst <= tol
    t = int(per_point.argmax())
    ia, ib = divmod(t, nb)
    detail = {
        "k_a": _flat(layout.domain_a, grid_a.points[ia]),
        "k_b": _flat(layout.domain_b, grid_b.points[ib]),
        "violation": worst,
        "marginal_a": [float(x) for x in marg_a[0]],
        "marginal_b": [float(x) for x in marg_b[0]],
    }
    rows = tuple(
        _point_row(layout, grid_a, grid_b, i, j, per_point[i * nb + j])
        for i in range(na)
        for j in range(nb)
    )
    return CheckResult(
        "marginal_invariance",
        passed,
        worst,
        tol,
        na,
        nb,
        _check_columns(layout),
        rows,
        offender=None if passed else detail,
        witness=detail if passed else None,
    )


# ---------------------------------------------------------------------------
# JSON serialization
# ---------------------------------------------------------------------------


def outcome_space_to_dict(space: OutcomeSpace) -> dict:
    return {"outcomes": list(space.outcomes)}


def outcome_space_from_dict(d: dict) -> OutcomeSpace:
    return OutcomeSpace(tuple(d["outcomes"]))


def measure_to_dict(mu: ProbabilityMeasure) -> dict:
    return {
        "outcomes": list(mu.space.outcomes),
        "weights": [float(w) for w in mu.weights],
    }


def measure_from_dict(d: dict) -> ProbabilityMeasure:
    return ProbabilityMeasure(OutcomeSpace(tuple(d["outcomes"])), d["weights"])


def domain_to_dict(domain: ParamDomain) -> dict:
    return {"components": [c.to_dict() for c in domain.components]}


def domain_from_dict(d: dict) -> ParamDomain:
    return ParamDomain(tuple(component_from_dict(c) for c in d["components"]))


def grid_to_dict(grid: ParamGrid) -> dict:
    return {
        "domain": domain_to_dict(grid.domain),
        "points": [grid.domain.encode_point(p) for p in grid.points],
    }


def grid_from_dict(d: dict, domain: ParamDomain | None = None) -> ParamGrid:
    dom = domain if domain is not None else domain_from_dict(d["domain"])
    return ParamGrid(dom, tuple(dom.decode_point(row) for row in d["points"]))


def ppm_to_dict(ppm: Ppm) -> dict:
    """Serialize a tabulated family (closed forms are not serializable)."""
    if not ppm.is_tabulated:
        raise DomainError("only tabulated families can be serialized")
    return {
        "name": ppm.name,
        "domain": domain_to_dict(ppm.domain),
        "outcomes": list(ppm.space.outcomes),
        "points": [ppm.domain.encode_point(p) for p in ppm.grid.points],
        "weights": [[float(w) for w in mu.weights] for mu in ppm.measures],
    }


def ppm_from_dict(d: dict) -> Ppm:
    domain = domain_from_dict(d["domain"])
    space = OutcomeSpace(tuple(d["outcomes"]))
    grid = ParamGrid(domain, tuple(domain.decode_point(row) for row in d["points"]))
    measures = tuple(ProbabilityMeasure(space, w) for w in d["weights"])
    return Ppm.from_table(grid, space, measures, d.get("name", ""))
