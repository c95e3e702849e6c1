"""Classical-quantum channel: mutual information, Holevo bound, tightening.

A channel is an ensemble of preparations (priors plus states) read out by a
fixed POVM.  Mutual information depends on the states only through the
conditional probability rows, so every model generating the same rows gives
the same mutual information; the Holevo quantity, in contrast, changes from
model to model.  The tightened bound minimizes the Holevo quantity over an
explicit enumerated family of generating models -- the given one, the
diagonal model built from the conditional rows (pure orthogonal states, so
its Holevo quantity is the prior entropy), its row-merged variant (symbols
with identical rows share one basis state), and any verified user-supplied
models.  The family is finite, so the result is an upper envelope, not a
claimed minimum over all generating models.

All entropies are in bits.
"""

from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InvariantViolation, NumericalError
from .measure import (
    FiniteSet,
    OutcomeSpace,
    ParamDomain,
    ParamGrid,
    Ppm,
    ProbabilityMeasure,
)
from .quantum import (
    DensityOperator,
    DetectionOperator,
    Povm,
    basis_ket,
    born_probability,
    von_neumann_entropy,
)

PRIOR_TOL = 1e-12
CHAIN_TOL = 1e-9


def _entropy_bits(weights: np.ndarray) -> float:
    w = np.asarray(weights, dtype=float)
    positive = w[w > 0.0]
    return float(-(positive * np.log2(positive)).sum())


def shannon_entropy(mu: ProbabilityMeasure) -> float:
    """Entropy of a probability measure in bits, with 0*log(0) = 0."""
    return _entropy_bits(mu.weights)


@dataclass(frozen=True, eq=False)
class ChannelModel:
    """Priors over preparations, a state per preparation, one fixed POVM."""

    priors: np.ndarray
    states: tuple[DensityOperator, ...]
    povm: Povm

    def __post_init__(self):
        p = np.asarray(self.priors, dtype=float)
        states = tuple(self.states)
        object.__setattr__(self, "states", states)
        if p.ndim != 1 or p.size == 0 or p.size != len(states):
            raise InvariantViolation("need one prior per state")
        if p.min(initial=0.0) < -PRIOR_TOL:
            raise InvariantViolation(f"priors must be nonnegative, got min {p.min()}")
        if abs(float(p.sum()) - 1.0) > PRIOR_TOL:
            raise InvariantViolation(f"priors must sum to 1, got {float(p.sum())!r}")
        dim = self.povm.dim
        if any(s.dim != dim for s in states):
            raise InvariantViolation("states and POVM must share one dimension")
        p = np.clip(p, 0.0, None)
        p.setflags(write=False)
        object.__setattr__(self, "priors", p)

    @property
    def n_inputs(self) -> int:
        return len(self.states)

    @property
    def n_outputs(self) -> int:
        return self.povm.space.size


def conditional_matrix(ch: ChannelModel) -> np.ndarray:
    """Conditional probabilities, one row per preparation."""
    return np.array(
        [
            [born_probability(rho, e) for e in ch.povm.elements]
            for rho in ch.states
        ]
    )


def conditional_ppm(ch: ChannelModel) -> Ppm:
    """The channel's conditional rows as a tabulated family over 1..n."""
    labels = tuple(str(i + 1) for i in range(ch.n_inputs))
    domain = ParamDomain((FiniteSet(labels),))
    grid = ParamGrid.from_values(domain, [[lab] for lab in labels])
    rows = conditional_matrix(ch)
    measures = tuple(ProbabilityMeasure(ch.povm.space, row) for row in rows)
    return Ppm.from_table(grid, ch.povm.space, measures, name="conditional")


def mutual_information(ch: ChannelModel) -> float:
    """Entropy of the prior-mixed output minus mean conditional entropy."""
    rows = conditional_matrix(ch)
    mixed = ch.priors @ rows
    value = _entropy_bits(mixed) - float(
        sum(p * _entropy_bits(row) for p, row in zip(ch.priors, rows))
    )
    if value < -1e-12:
        raise NumericalError(f"mutual information came out {value} < 0")
    return max(value, 0.0)


def holevo_chi(priors, states: Iterable[DensityOperator]) -> float:
    """Entropy of the prior mixture minus the mean state entropy."""
    states = tuple(states)
    p = np.asarray(priors, dtype=float)
    if p.size != len(states):
        raise DomainError("need one prior per state")
    mixture = DensityOperator(
        sum(w * s.matrix for w, s in zip(p, states))
    )
    value = von_neumann_entropy(mixture) - float(
        sum(w * von_neumann_entropy(s) for w, s in zip(p, states))
    )
    if value < -1e-12:
        raise NumericalError(f"Holevo quantity came out {value} < 0")
    return max(value, 0.0)


def channel_chi(ch: ChannelModel) -> float:
    return holevo_chi(ch.priors, ch.states)


def _diag_channel(
    priors: np.ndarray, assignment: list[int], rows: np.ndarray, space: OutcomeSpace
) -> ChannelModel:
    """Channel whose state for symbol i is basis projector ``assignment[i]``
    and whose POVM diagonals carry the per-projector rows."""
    dim = rows.shape[0]
    elements = tuple(
        DetectionOperator(np.diag(rows[:, j].astype(complex)))
        for j in range(rows.shape[1])
    )
    states = tuple(basis_ket(dim, a).density() for a in assignment)
    return ChannelModel(priors, states, Povm(space, elements))


def canonical_channel(ch: ChannelModel) -> ChannelModel:
    """Diagonal model of the conditional rows: one basis state per symbol.

    Its states are orthogonal and pure, so its Holevo quantity equals the
    entropy of the priors.
    """
    rows = conditional_matrix(ch)
    return _diag_channel(
        ch.priors, list(range(ch.n_inputs)), rows, ch.povm.space
    )


def row_merged_channel(ch: ChannelModel, tol: float = 1e-12) -> ChannelModel:
    """Diagonal model where symbols with identical rows share a basis state.

    Generates the same conditional rows; its Holevo quantity is the entropy
    of the aggregated class priors, which can undercut both the given model
    and the unmerged diagonal one.
    """
    rows = conditional_matrix(ch)
    reps: list[np.ndarray] = []
    assignment: list[int] = []
    for row in rows:
        for c, rep in enumerate(reps):
            if float(np.abs(row - rep).max()) <= tol:
                assignment.append(c)
                break
        else:
            assignment.append(len(reps))
            reps.append(row)
    return _diag_channel(
        ch.priors, assignment, np.array(reps), ch.povm.space
    )


@dataclass(frozen=True)
class ChannelReport:
    """Mutual information with its bound chain and the per-model table."""

    mutual_information: float
    chi: float
    tightened_chi: float
    per_model_chi: tuple[tuple[str, float], ...]
    mixture_eigenvalues: tuple[float, ...]
    conditional_rows: tuple[tuple[float, ...], ...]
    note: str

    def __post_init__(self):
        if self.mutual_information > self.chi + CHAIN_TOL:
            raise InvariantViolation(
                f"I = {self.mutual_information} exceeds chi = {self.chi}"
            )
        if self.mutual_information > self.tightened_chi + CHAIN_TOL:
            raise InvariantViolation(
                f"I = {self.mutual_information} exceeds the tightened bound "
                f"{self.tightened_chi}"
            )
        if self.tightened_chi > self.chi + CHAIN_TOL:
            raise InvariantViolation(
                f"tightened bound {self.tightened_chi} exceeds chi = {self.chi}"
            )

    def to_dict(self) -> dict:
        return {
            "mutual_information": self.mutual_information,
            "chi": self.chi,
            "tightened_chi": self.tightened_chi,
            "per_model_chi": {name: chi for name, chi in self.per_model_chi},
            "mixture_eigenvalues": list(self.mixture_eigenvalues),
            "conditional_rows": [list(r) for r in self.conditional_rows],
            "note": self.note,
        }


def tightened_bound(
    ch: ChannelModel,
    extra: Iterable[tuple[str, ChannelModel]] = (),
    row_tol: float = 1e-9,
) -> ChannelReport:
    """Minimum Holevo quantity over the enumerated model family.

    The family holds the given model, the diagonal model of its conditional
    rows, the row-merged diagonal model, and any user-supplied channels;
    supplied channels must reproduce the given conditional rows within
    ``row_tol``.  The true minimum ranges over all generating models, an
    infinite class, so the result is an upper envelope of that minimum.
    """
    rows = conditional_matrix(ch)
    table: list[tuple[str, float]] = [("given", channel_chi(ch))]
    table.append(("canonical", channel_chi(canonical_channel(ch))))
    table.append(("row_merged", channel_chi(row_merged_channel(ch))))
    for name, other in extra:
        other_rows = conditional_matrix(other)
        if other_rows.shape != rows.shape:
            raise DomainError(f"model {name!r} has mismatched channel shape")
        dev = float(np.abs(other_rows - rows).max())
        if dev > row_tol:
            raise DomainError(
                f"model {name!r} does not generate the channel rows "
                f"(deviation {dev})"
            )
        table.append((name, channel_chi(other)))

    mixture = sum(w * s.matrix for w, s in zip(ch.priors, ch.states))
    eigs = np.linalg.eigvalsh(mixture)
    return ChannelReport(
        mutual_information=mutual_information(ch),
        chi=table[0][1],
        tightened_chi=min(chi for _name, chi in table),
        per_model_chi=tuple(table),
        mixture_eigenvalues=tuple(float(x) for x in eigs),
        conditional_rows=tuple(tuple(float(x) for x in row) for row in rows),
        note=(
            "minimum over the enumerated model family only; "
            "an upper envelope of the minimum over all generating models"
        ),
    )


def channel_to_dict(ch: ChannelModel) -> dict:
    from .quantum import operator_to_dict, povm_to_dict

    return {
        "priors": [float(p) for p in ch.priors],
        "states": [operator_to_dict(s.matrix) for s in ch.states],
        "povm": povm_to_dict(ch.povm),
    }


def channel_from_dict(d: dict) -> ChannelModel:
    from .quantum import matrix_from_dict, povm_from_dict

    states = tuple(DensityOperator(matrix_from_dict(s)) for s in d["states"])
    return ChannelModel(np.asarray(d["priors"], dtype=float), states,
                        povm_from_dict(d["povm"]))
