"""Finite-dimensional density operators, POVMs, and quantum models.

A quantum model is a Hilbert dimension together with a density-operator
function and a POVM function over a parameter domain; combined through the
trace rule ``mu(omega) = Tr[rho M(omega)]`` it generates a parametrized
family of probability measures.  The reverse direction is also provided:
any tabulated family is generated by an explicit diagonal model over a
basis indexed by its grid, with or without a preparation/measurement split,
and by a mixed-state variant of the same construction -- these exhibit how
loose the relation between a family and its generating models is.

All matrix functions go through Hermitian eigendecompositions.  Eigenvalues
within ``EIG_TOL`` below zero are treated as zero; anything lower is an
error, not noise.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InvariantViolation, NumericalError
from .measure import (
    OutcomeSpace,
    ParamDomain,
    ParamGrid,
    ParamPoint,
    Ppm,
    ProbabilityMeasure,
    concat_points,
    domain_from_dict,
    domain_to_dict,
    grid_from_dict,
    grid_to_dict,
)

HERM_TOL = 1e-12
EIG_TOL = 1e-10
TRACE_TOL = 1e-12
COMPLETENESS_TOL = 1e-10
NORM_TOL = 1e-12
IMAG_TOL = 1e-10


def _as_matrix(values, what: str) -> np.ndarray:
    m = np.asarray(values, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvariantViolation(f"{what} must be a square matrix, got {m.shape}")
    if not np.all(np.isfinite(m.real)) or not np.all(np.isfinite(m.imag)):
        raise InvariantViolation(f"{what} must have finite entries")
    return m


def hermiticity_residual(matrix: np.ndarray) -> float:
    return float(np.abs(matrix - matrix.conj().T).max())


@dataclass(frozen=True, eq=False)
class Ket:
    """Unit vector in a finite-dimensional complex Hilbert space."""

    amplitudes: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.amplitudes, dtype=complex)
        if v.ndim != 1 or v.size == 0:
            raise InvariantViolation(f"a ket must be a nonempty vector, got {v.shape}")
        norm = float(np.linalg.norm(v))
        if abs(norm - 1.0) > NORM_TOL:
            raise InvariantViolation(f"ket norm must be 1, got {norm!r}")
        v.setflags(write=False)
        object.__setattr__(self, "amplitudes", v)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def density(self) -> "DensityOperator":
        return DensityOperator(np.outer(self.amplitudes, self.amplitudes.conj()))

    def projector(self) -> "DetectionOperator":
        return DetectionOperator(np.outer(self.amplitudes, self.amplitudes.conj()))


def basis_ket(dim: int, index: int) -> Ket:
    if not 0 <= index < dim:
        raise DomainError(f"basis index {index} out of range for dim {dim}")
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return Ket(v)


def qubit_linear_state(theta: float) -> Ket:
    """Linear-polarization qubit (cos theta, sin theta) in the x/y basis."""
    return Ket(np.array([np.cos(theta), np.sin(theta)], dtype=complex))


def tensor(*matrices: np.ndarray) -> np.ndarray:
    out = np.asarray(matrices[0], dtype=complex)
    for m in matrices[1:]:
        out = np.kron(out, np.asarray(m, dtype=complex))
    return out


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """Hermitian, positive semidefinite matrix of unit trace."""

    matrix: np.ndarray

    def __post_init__(self):
        m = _as_matrix(self.matrix, "a density operator")
        res = hermiticity_residual(m)
        if res > HERM_TOL:
            raise InvariantViolation(f"density operator not Hermitian: residual {res}")
        eigs = np.linalg.eigvalsh(m)
        if float(eigs.min()) < -EIG_TOL:
            raise InvariantViolation(
                f"density operator has eigenvalue {float(eigs.min())} < -{EIG_TOL}"
            )
        tr = m.trace()
        if abs(tr - 1.0) > TRACE_TOL:
            raise InvariantViolation(f"density operator trace must be 1, got {tr!r}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True, eq=False)
class DetectionOperator:
    """Hermitian matrix with spectrum in [0, 1] (one POVM effect)."""

    matrix: np.ndarray

    def __post_init__(self):
        m = _as_matrix(self.matrix, "a detection operator")
        res = hermiticity_residual(m)
        if res > HERM_TOL:
            raise InvariantViolation(
                f"detection operator not Hermitian: residual {res}"
            )
        eigs = np.linalg.eigvalsh(m)
        if float(eigs.min()) < -EIG_TOL or float(eigs.max()) > 1.0 + EIG_TOL:
            raise InvariantViolation(
                f"detection operator spectrum [{float(eigs.min())}, "
                f"{float(eigs.max())}] outside [0, 1]"
            )
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True, eq=False)
class Povm:
    """One detection operator per outcome, summing to the identity.

    Events evaluate by summing their singleton elements, which is exact on
    a finite outcome set.
    """

    space: OutcomeSpace
    elements: tuple[DetectionOperator, ...]

    def __post_init__(self):
        elements = tuple(self.elements)
        object.__setattr__(self, "elements", elements)
        if len(elements) != self.space.size:
            raise InvariantViolation(
                f"need one element per outcome: {self.space.size} outcomes, "
                f"{len(elements)} elements"
            )
        dim = elements[0].dim
        if any(e.dim != dim for e in elements):
            raise InvariantViolation("POVM elements must share one dimension")
        total = sum(e.matrix for e in elements)
        res = float(np.abs(total - np.eye(dim)).max())
        if res > COMPLETENESS_TOL:
            raise InvariantViolation(
                f"POVM elements must sum to the identity: residual {res}"
            )

    @property
    def dim(self) -> int:
        return self.elements[0].dim

    def element_for(self, indices: Sequence[int]) -> DetectionOperator:
        """Effect for an event, the sum of its outcomes' elements."""
        idx = sorted(set(int(i) for i in indices))
        if any(not 0 <= i < self.space.size for i in idx):
            raise DomainError(f"event indices {idx} out of range")
        total = sum(self.elements[i].matrix for i in idx)
        if not idx:
            total = np.zeros((self.dim, self.dim), dtype=complex)
        return DetectionOperator(total)


# residual inspectors used by validation tooling; they never raise


def density_residuals(matrix) -> dict[str, float]:
    m = _as_matrix(matrix, "a density operator")
    eigs = np.linalg.eigvalsh((m + m.conj().T) / 2.0)
    return {
        "hermiticity": hermiticity_residual(m),
        "negativity": max(0.0, -float(eigs.min())),
        "trace_error": abs(float(m.trace().real) - 1.0) + abs(float(m.trace().imag)),
    }


def detection_residuals(matrix) -> dict[str, float]:
    m = _as_matrix(matrix, "a detection operator")
    eigs = np.linalg.eigvalsh((m + m.conj().T) / 2.0)
    return {
        "hermiticity": hermiticity_residual(m),
        "negativity": max(0.0, -float(eigs.min())),
        "excess": max(0.0, float(eigs.max()) - 1.0),
    }


def povm_residuals(matrices: Sequence) -> dict[str, float]:
    ms = [_as_matrix(m, "a POVM element") for m in matrices]
    dim = ms[0].shape[0]
    if any(m.shape[0] != dim for m in ms):
        raise DomainError("POVM elements must share one dimension")
    per = [detection_residuals(m) for m in ms]
    total = sum(ms)
    return {
        "hermiticity": max(p["hermiticity"] for p in per),
        "negativity": max(p["negativity"] for p in per),
        "excess": max(p["excess"] for p in per),
        "completeness": float(np.abs(total - np.eye(dim)).max()),
    }


# ---------------------------------------------------------------------------
# the trace rule
# ---------------------------------------------------------------------------


def born_probability(rho: DensityOperator, effect: DetectionOperator) -> float:
    """Probability generated by a preparation and one detection operator."""
    if rho.dim != effect.dim:
        raise DomainError(f"dimension mismatch: {rho.dim} vs {effect.dim}")
    t = complex(np.trace(rho.matrix @ effect.matrix))
    if abs(t.imag) > IMAG_TOL:
        raise NumericalError(f"trace has imaginary part {t.imag}")
    p = t.real
    if p < -EIG_TOL or p > 1.0 + EIG_TOL:
        raise NumericalError(f"trace-rule probability {p} outside [0, 1]")
    return min(max(p, 0.0), 1.0)


@dataclass(frozen=True, eq=False)
class DensityOperatorFunction:
    """Assignment of a density operator to every point of a domain."""

    domain: ParamDomain
    fn: object = field(repr=False)

    def at(self, point) -> DensityOperator:
        rho = self.fn(self.domain.canonicalize(point))
        if not isinstance(rho, DensityOperator):
            raise InvariantViolation("evaluator must return a DensityOperator")
        return rho


@dataclass(frozen=True, eq=False)
class PovmFunction:
    """Assignment of a POVM to every point of a domain."""

    domain: ParamDomain
    space: OutcomeSpace
    fn: object = field(repr=False)

    def at(self, point) -> Povm:
        povm = self.fn(self.domain.canonicalize(point))
        if not isinstance(povm, Povm):
            raise InvariantViolation("evaluator must return a Povm")
        if povm.space.outcomes != self.space.outcomes:
            raise InvariantViolation("POVM returned on the wrong outcome space")
        return povm


@dataclass(frozen=True, eq=False)
class QuantumModel:
    """Hilbert dimension + state function + POVM function on one domain.

    ``split``, when present, names the component indices the state may
    depend on (preparation) and those the POVM may depend on (measurement).
    ``basis``, when present, records the grid whose iteration order indexes
    the model's preferred basis, so rebuilt models are reproducible.
    """

    dim: int
    rho_fn: DensityOperatorFunction
    povm_fn: PovmFunction
    split: tuple[tuple[int, ...], tuple[int, ...]] | None = None
    basis: ParamGrid | None = None

    def __post_init__(self):
        if self.rho_fn.domain.components != self.povm_fn.domain.components:
            raise InvariantViolation(
                "state and POVM functions must share one domain"
            )
        if self.split is not None:
            prep, meas = self.split
            prep = tuple(int(i) for i in prep)
            meas = tuple(int(i) for i in meas)
            if sorted(prep + meas) != list(range(self.domain.size)):
                raise InvariantViolation(
                    "split must partition the domain components"
                )
            object.__setattr__(self, "split", (prep, meas))

    @property
    def domain(self) -> ParamDomain:
        return self.rho_fn.domain

    @property
    def space(self) -> OutcomeSpace:
        return self.povm_fn.space


def generate_ppm(model: QuantumModel, grid: ParamGrid, name: str = "") -> Ppm:
    """Tabulate the family the model generates through the trace rule."""
    if grid.domain.components != model.domain.components:
        raise DomainError("grid does not sample the model's domain")
    measures = []
    for k in grid.points:
        rho = model.rho_fn.at(k)
        povm = model.povm_fn.at(k)
        if rho.dim != model.dim or povm.dim != model.dim:
            raise InvariantViolation("operator dimension strays from the model's")
        weights = [born_probability(rho, e) for e in povm.elements]
        measures.append(ProbabilityMeasure(model.space, weights))
    return Ppm.from_table(grid, model.space, measures, name)


@dataclass(frozen=True)
class GenerationCheck:
    """Verdict of comparing a model's trace-rule output against a family."""

    passed: bool
    max_deviation: float
    worst_point: tuple | None = None
    worst_outcome: str | None = None

    def __bool__(self) -> bool:
        return self.passed


def model_generates(
    model: QuantumModel, mu: Ppm, grid: ParamGrid, tol: float = 1e-12
) -> GenerationCheck:
    """Does the model reproduce the family on the grid, and how closely?"""
    if mu.space.outcomes != model.space.outcomes:
        raise DomainError("family and model use different outcome spaces")
    if grid.domain.components != mu.domain.components:
        raise DomainError("grid does not sample the family's domain")
    worst = 0.0
    worst_point = None
    worst_outcome = None
    for k in grid.points:
        rho = model.rho_fn.at(k)
        povm = model.povm_fn.at(k)
        target = mu.at(k)
        for j, e in enumerate(povm.elements):
            dev = abs(born_probability(rho, e) - float(target.weights[j]))
            if dev > worst:
                worst = dev
                worst_point = k.values
                worst_outcome = model.space.outcomes[j]
    return GenerationCheck(worst <= tol, worst, worst_point, worst_outcome)


# ---------------------------------------------------------------------------
# spectral functions
# ---------------------------------------------------------------------------


def _clamped_eigh(matrix: np.ndarray, what: str) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition with sub-tolerance negatives clamped to zero."""
    eigs, vecs = np.linalg.eigh(matrix)
    low = float(eigs.min())
    if low < -EIG_TOL:
        raise NumericalError(f"{what} has eigenvalue {low} < -{EIG_TOL}")
    return np.clip(eigs, 0.0, None), vecs


def _psd_sqrt(rho: DensityOperator) -> np.ndarray:
    eigs, vecs = _clamped_eigh(rho.matrix, "a density operator")
    return (vecs * np.sqrt(eigs)) @ vecs.conj().T


def overlap(rho: DensityOperator, sigma: DensityOperator) -> float:
    """Trace of the product of the two principal square roots."""
    if rho.dim != sigma.dim:
        raise DomainError(f"dimension mismatch: {rho.dim} vs {sigma.dim}")
    t = complex(np.trace(_psd_sqrt(rho) @ _psd_sqrt(sigma)))
    if abs(t.imag) > IMAG_TOL:
        raise NumericalError(f"overlap has imaginary part {t.imag}")
    return max(t.real, 0.0)


def von_neumann_entropy(rho: DensityOperator) -> float:
    """Entropy in bits, with 0*log(0) taken as 0."""
    eigs, _ = _clamped_eigh(rho.matrix, "a density operator")
    positive = eigs[eigs > 0.0]
    s = float(-(positive * np.log2(positive)).sum())
    return s if s > 0.0 else 0.0


# ---------------------------------------------------------------------------
# models built from a tabulated family
# ---------------------------------------------------------------------------


def _diag_effect(column: np.ndarray) -> DetectionOperator:
    return DetectionOperator(np.diag(column.astype(complex)))


def canonical_model(mu: Ppm) -> QuantumModel:
    """Diagonal model over a basis indexed by the family's grid.

    The state at grid point k is the k-th basis projector; the single,
    point-independent POVM carries the tabulated weights on its diagonal,
    so the trace rule returns the tabulated family exactly.
    """
    if not mu.is_tabulated:
        raise DomainError("the diagonal construction needs a tabulated family")
    grid = mu.grid
    dim = grid.size
    weights = np.array([m.weights for m in mu.measures])  # (|K|, |Omega|)
    povm = Povm(
        mu.space, tuple(_diag_effect(weights[:, j]) for j in range(mu.space.size))
    )
    projectors = {}

    def rho_at(point: ParamPoint) -> DensityOperator:
        i = grid.index_of(point)
        if i not in projectors:
            projectors[i] = basis_ket(dim, i).density()
        return projectors[i]

    return QuantumModel(
        dim,
        DensityOperatorFunction(mu.domain, rho_at),
        PovmFunction(mu.domain, mu.space, lambda _p: povm),
        basis=grid,
    )


def split_canonical_model(
    mu: Ppm, prep_grid: ParamGrid, meas_grid: ParamGrid
) -> QuantumModel:
    """Diagonal model whose state depends only on the preparation sublist.

    The family must be defined on the product of the two grids, preparation
    components first.  The Hilbert dimension is the preparation grid size;
    each measurement point gets the POVM whose diagonals carry the family's
    weights across preparation points.
    """
    expected = prep_grid.domain.components + meas_grid.domain.components
    if mu.domain.components != expected:
        raise DomainError(
            "family domain must be the preparation x measurement product"
        )
    n_prep = prep_grid.size
    n_prep_comp = prep_grid.domain.size
    # evaluate the family on the full product; missing points raise here
    weights = np.empty((n_prep, meas_grid.size, mu.space.size))
    for i, kp in enumerate(prep_grid.points):
        for l, km in enumerate(meas_grid.points):
            weights[i, l] = mu.at(concat_points(kp, km)).weights

    povms = tuple(
        Povm(
            mu.space,
            tuple(_diag_effect(weights[:, l, j]) for j in range(mu.space.size)),
        )
        for l in range(meas_grid.size)
    )
    projectors = {}

    def rho_at(point: ParamPoint) -> DensityOperator:
        i = prep_grid.index_of(ParamPoint(point.values[:n_prep_comp]))
        if i not in projectors:
            projectors[i] = basis_ket(n_prep, i).density()
        return projectors[i]

    def povm_at(point: ParamPoint) -> Povm:
        return povms[meas_grid.index_of(ParamPoint(point.values[n_prep_comp:]))]

    split = (
        tuple(range(n_prep_comp)),
        tuple(range(n_prep_comp, len(expected))),
    )
    return QuantumModel(
        n_prep,
        DensityOperatorFunction(mu.domain, rho_at),
        PovmFunction(mu.domain, mu.space, povm_at),
        split=split,
        basis=prep_grid,
    )


def mixed_basis_model(mu: Ppm, multiplicity: int = 2) -> QuantumModel:
    """Like the diagonal model, but each point gets a mixed block state.

    Grid point k is assigned the uniform mixture over ``multiplicity``
    basis vectors of its own block, and the refined diagonal POVM repeats
    each tabulated weight across the block.  The family generated is
    unchanged while every state has entropy log2(multiplicity) -- one model
    of the family with strictly positive state entropies.
    """
    if not mu.is_tabulated:
        raise DomainError("the mixed-block construction needs a tabulated family")
    if multiplicity < 2:
        raise DomainError("multiplicity must be at least 2")
    grid = mu.grid
    dim = grid.size * multiplicity
    weights = np.array([m.weights for m in mu.measures])
    povm = Povm(
        mu.space,
        tuple(
            _diag_effect(np.repeat(weights[:, j], multiplicity))
            for j in range(mu.space.size)
        ),
    )
    states = {}

    def rho_at(point: ParamPoint) -> DensityOperator:
        i = grid.index_of(point)
        if i not in states:
            diag = np.zeros(dim, dtype=complex)
            diag[i * multiplicity : (i + 1) * multiplicity] = 1.0 / multiplicity
            states[i] = DensityOperator(np.diag(diag))
        return states[i]

    return QuantumModel(
        dim,
        DensityOperatorFunction(mu.domain, rho_at),
        PovmFunction(mu.domain, mu.space, lambda _p: povm),
        basis=grid,
    )


def split_respected(model: QuantumModel, grid: ParamGrid, tol: float = 1e-10) -> bool:
    """Verify on a grid that the state ignores measurement components and
    the POVM ignores preparation components."""
    if model.split is None:
        raise DomainError("model declares no split")
    prep_idx, meas_idx = model.split
    by_prep: dict = {}
    by_meas: dict = {}
    for k in grid.points:
        prep_key = tuple(k.values[i] for i in prep_idx)
        meas_key = tuple(k.values[i] for i in meas_idx)
        rho = model.rho_fn.at(k).matrix
        povm = model.povm_fn.at(k)
        if prep_key in by_prep:
            if float(np.abs(by_prep[prep_key] - rho).max()) > tol:
                return False
        else:
            by_prep[prep_key] = rho
        stack = np.stack([e.matrix for e in povm.elements])
        if meas_key in by_meas:
            if float(np.abs(by_meas[meas_key] - stack).max()) > tol:
                return False
        else:
            by_meas[meas_key] = stack
    return True


# ---------------------------------------------------------------------------
# JSON serialization
# ---------------------------------------------------------------------------


def operator_to_dict(matrix: np.ndarray) -> dict:
    m = np.asarray(matrix, dtype=complex)
    return {
        "dim": m.shape[0],
        "re": [[float(x) for x in row] for row in m.real],
        "im": [[float(x) for x in row] for row in m.imag],
    }


def matrix_from_dict(d: dict) -> np.ndarray:
    re = np.asarray(d["re"], dtype=float)
    im = np.asarray(d["im"], dtype=float)
    if re.shape != im.shape:
        raise DomainError("re and im blocks must have the same shape")
    m = re + 1j * im
    dim = int(d["dim"])
    if m.shape != (dim, dim):
        raise DomainError(f"matrix shape {m.shape} does not match dim {dim}")
    return m


def povm_to_dict(povm: Povm) -> dict:
    return {
        "outcomes": list(povm.space.outcomes),
        "elements": [operator_to_dict(e.matrix) for e in povm.elements],
    }


def povm_from_dict(d: dict) -> Povm:
    space = OutcomeSpace(tuple(d["outcomes"]))
    return Povm(
        space, tuple(DetectionOperator(matrix_from_dict(e)) for e in d["elements"])
    )


def model_to_dict(model: QuantumModel, grid: ParamGrid) -> dict:
    """Serialize a model as tabulated operator families over a grid."""
    if grid.domain.components != model.domain.components:
        raise DomainError("grid does not sample the model's domain")
    rhos = []
    povms = []
    for k in grid.points:
        rhos.append(operator_to_dict(model.rho_fn.at(k).matrix))
        povms.append(
            [operator_to_dict(e.matrix) for e in model.povm_fn.at(k).elements]
        )
    return {
        "dim": model.dim,
        "domain": domain_to_dict(model.domain),
        "outcomes": list(model.space.outcomes),
        "grid": grid_to_dict(grid),
        "rhos": rhos,
        "povms": povms,
        "split": list(model.split) if model.split is not None else None,
    }


def model_from_dict(d: dict) -> tuple[QuantumModel, ParamGrid]:
    """Rebuild a tabulated model; returns the model and its grid."""
    domain = domain_from_dict(d["domain"])
    grid = grid_from_dict(d["grid"], domain)
    space = OutcomeSpace(tuple(d["outcomes"]))
    dim = int(d["dim"])
    rhos = tuple(DensityOperator(matrix_from_dict(r)) for r in d["rhos"])
    povms = tuple(
        Povm(space, tuple(DetectionOperator(matrix_from_dict(e)) for e in elems))
        for elems in d["povms"]
    )
    if len(rhos) != grid.size or len(povms) != grid.size:
        raise DomainError("need one state and one POVM per grid point")
    if any(r.dim != dim for r in rhos) or any(p.dim != dim for p in povms):
        raise DomainError("tabulated operators disagree with the declared dim")
    split = d.get("split")
    model = QuantumModel(
        dim,
        DensityOperatorFunction(domain, lambda p: rhos[grid.index_of(p)]),
        PovmFunction(domain, space, lambda p: povms[grid.index_of(p)]),
        split=(tuple(split[0]), tuple(split[1])) if split is not None else None,
        basis=grid,
    )
    return model, grid
