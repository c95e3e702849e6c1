"""Independent oracles and random generators shared by the test modules.

Everything here is deliberately brute-force or closed-form and never calls
the code paths it is used to check.
"""

from __future__ import annotations

import math

import numpy as np

from ppmkit.measure import OutcomeSpace, ProbabilityMeasure
from ppmkit.quantum import DensityOperator, DetectionOperator, Povm


def set_partitions(items: list) -> list[list[list]]:
    """All partitions of a list into disjoint nonempty blocks (brute force)."""
    if not items:
        return [[]]
    head, rest = items[0], items[1:]
    out = []
    for partial in set_partitions(rest):
        out.append([[head]] + [list(b) for b in partial])
        for i in range(len(partial)):
            grown = [list(b) for b in partial]
            grown[i] = [head] + grown[i]
            out.append(grown)
    return out


def l1_partition_supremum(mu: ProbabilityMeasure, nu: ProbabilityMeasure) -> float:
    """The partition-supremum form of the L1 distance, enumerated exactly."""
    indices = list(range(mu.space.size))
    best = 0.0
    for partition in set_partitions(indices):
        total = sum(
            abs(
                float(sum(mu.weights[i] for i in block))
                - float(sum(nu.weights[i] for i in block))
            )
            for block in partition
        )
        best = max(best, 0.5 * total)
    return best


def gaussian_overlap_analytic(delta: float, sigma: float) -> float:
    """Inner product of two unit Gaussian amplitudes with equal width sigma
    whose centers sit ``delta`` apart."""
    return math.exp(-(delta**2) / (8.0 * sigma**2))


def binary_entropy(p: float) -> float:
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)


def random_measure(rng: np.random.Generator, space: OutcomeSpace) -> ProbabilityMeasure:
    return ProbabilityMeasure(space, rng.dirichlet(np.ones(space.size)))


def random_density(rng: np.random.Generator, dim: int) -> DensityOperator:
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    m = g @ g.conj().T
    return DensityOperator(m / m.trace())


def random_povm(rng: np.random.Generator, dim: int, n_outcomes: int) -> Povm:
    """Random POVM by sandwiching random PSD pieces with S^(-1/2)."""
    pieces = []
    for _ in range(n_outcomes):
        g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        pieces.append(g @ g.conj().T)
    total = sum(pieces)
    eigs, vecs = np.linalg.eigh(total)
    inv_sqrt = (vecs / np.sqrt(eigs)) @ vecs.conj().T
    elements = []
    for a in pieces:
        m = inv_sqrt @ a @ inv_sqrt
        elements.append(DetectionOperator((m + m.conj().T) / 2.0))
    space = OutcomeSpace(tuple(str(j) for j in range(n_outcomes)))
    return Povm(space, tuple(elements))


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    a = rng.normal(size=(3, 3))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def random_special_unitary_2(rng: np.random.Generator) -> np.ndarray:
    g = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    q, r = np.linalg.qr(g)
    q = q @ np.diag(np.diag(r) / np.abs(np.diag(r)))
    det = np.linalg.det(q)
    return q / np.sqrt(det)


def sphere_coords(vector: np.ndarray) -> tuple[float, float]:
    """(colatitude, longitude) of a unit 3-vector."""
    theta = math.acos(min(max(float(vector[2]), -1.0), 1.0))
    phi = math.atan2(float(vector[1]), float(vector[0])) % (2.0 * math.pi)
    return theta, phi
