import json
import math

import numpy as np
import pytest

from helpers import binary_entropy, random_density, random_povm

from ppmkit.errors import DomainError, InvariantViolation
from ppmkit.measure import OutcomeSpace, ProbabilityMeasure, point_mass, uniform_measure
from ppmkit.quantum import (
    DensityOperator,
    DetectionOperator,
    Povm,
    basis_ket,
    qubit_linear_state,
)
from ppmkit.info import (
    ChannelModel,
    canonical_channel,
    channel_chi,
    channel_from_dict,
    channel_to_dict,
    conditional_matrix,
    conditional_ppm,
    holevo_chi,
    mutual_information,
    row_merged_channel,
    shannon_entropy,
    tightened_bound,
)
from ppmkit.bb84 import PREP_ANGLES, alpha_povm


def bb84_channel() -> ChannelModel:
    states = tuple(qubit_linear_state(t).density() for t in PREP_ANGLES)
    return ChannelModel(np.full(4, 0.25), states, alpha_povm(0.0))


def random_channel(rng) -> ChannelModel:
    dim = int(rng.integers(2, 7))
    n = int(rng.integers(2, 7))
    m = int(rng.integers(2, 7))
    priors = rng.dirichlet(np.ones(n))
    states = tuple(random_density(rng, dim) for _ in range(n))
    return ChannelModel(priors, states, random_povm(rng, dim, m))


# ---------------------------------------------------------------------------
# entropy
# ---------------------------------------------------------------------------


def test_shannon_entropy_examples():
    two = OutcomeSpace(("0", "1"))
    four = OutcomeSpace(("a", "b", "c", "d"))
    assert shannon_entropy(point_mass(four, 2)) == 0.0
    assert shannon_entropy(uniform_measure(four)) == pytest.approx(2.0)
    skew = ProbabilityMeasure(two, np.array([0.75, 0.25]))
    # frozen from the closed binary-entropy form
    assert binary_entropy(0.25) == pytest.approx(0.8112781244591328, abs=1e-15)
    assert shannon_entropy(skew) == pytest.approx(0.8112781244591328, abs=1e-12)


def test_channel_model_invariants():
    rng = np.random.default_rng(1)
    povm = random_povm(rng, 2, 2)
    with pytest.raises(InvariantViolation):
        ChannelModel(np.array([0.5, 0.6]), (QUBIT := random_density(rng, 2),) * 2, povm)
    with pytest.raises(InvariantViolation):
        ChannelModel(np.array([0.5, 0.5]), (random_density(rng, 3),) * 2, povm)


# ---------------------------------------------------------------------------
# conditional rows
# ---------------------------------------------------------------------------


def test_conditional_ppm_projective_identity():
    # basis states measured in their own basis: deterministic rows
    space = OutcomeSpace(("0", "1", "2"))
    povm = Povm(
        space,
        tuple(DetectionOperator(np.diag(np.eye(3)[j]).astype(complex)) for j in range(3)),
    )
    states = tuple(basis_ket(3, i).density() for i in range(3))
    ch = ChannelModel(np.full(3, 1 / 3), states, povm)
    assert np.allclose(conditional_matrix(ch), np.eye(3))


def test_conditional_ppm_bb84_rows():
    ch = bb84_channel()
    rows = conditional_matrix(ch)
    # cos^2 at the four angles against an analyzer at zero
    expected = np.array([[1.0, 0.0], [0.5, 0.5], [0.0, 1.0], [0.5, 0.5]])
    assert np.abs(rows - expected).max() <= 1e-12
    fam = conditional_ppm(ch)
    assert fam.grid.size == 4
    assert np.allclose(fam.at(["2"]).weights, [0.5, 0.5])


def test_conditional_ppm_single_input():
    rng = np.random.default_rng(4)
    ch = ChannelModel(
        np.array([1.0]), (random_density(rng, 2),), random_povm(rng, 2, 3)
    )
    assert conditional_ppm(ch).grid.size == 1


# ---------------------------------------------------------------------------
# mutual information and the Holevo quantity
# ---------------------------------------------------------------------------


def test_mutual_information_examples():
    rng = np.random.default_rng(6)
    povm = random_povm(rng, 2, 2)
    rho = random_density(rng, 2)
    same = ChannelModel(np.array([0.5, 0.5]), (rho, rho), povm)
    assert mutual_information(same) == pytest.approx(0.0, abs=1e-12)

    space = OutcomeSpace(("0", "1"))
    projective = Povm(
        space,
        (basis_ket(2, 0).projector(), basis_ket(2, 1).projector()),
    )
    noiseless = ChannelModel(
        np.array([0.5, 0.5]),
        (basis_ket(2, 0).density(), basis_ket(2, 1).density()),
        projective,
    )
    assert mutual_information(noiseless) == pytest.approx(1.0, abs=1e-12)
    assert mutual_information(bb84_channel()) == pytest.approx(0.5, abs=1e-12)


def test_holevo_chi_examples():
    rng = np.random.default_rng(16)
    rho = random_density(rng, 3)
    assert holevo_chi(np.array([1.0]), (rho,)) == pytest.approx(0.0, abs=1e-12)
    ch = bb84_channel()
    assert holevo_chi(ch.priors, ch.states) == pytest.approx(1.0, abs=1e-12)
    assert holevo_chi(
        np.array([0.5, 0.5]), (basis_ket(2, 0).density(), basis_ket(2, 1).density())
    ) == pytest.approx(1.0, abs=1e-12)


def test_tightened_bound_bb84_values():
    report = tightened_bound(bb84_channel())
    assert report.mutual_information == pytest.approx(0.5, abs=1e-9)
    assert report.chi == pytest.approx(1.0, abs=1e-9)
    chis = dict(report.per_model_chi)
    assert chis["canonical"] == pytest.approx(2.0, abs=1e-9)  # H(1/4 x 4)
    # duplicated middle rows merge: class priors (1/4, 1/2, 1/4)
    assert chis["row_merged"] == pytest.approx(1.5, abs=1e-9)
    assert report.tightened_chi == pytest.approx(1.0, abs=1e-9)
    assert "upper envelope" in report.note


def test_tightened_bound_single_state():
    rng = np.random.default_rng(26)
    ch = ChannelModel(
        np.array([1.0]), (random_density(rng, 2),), random_povm(rng, 2, 2)
    )
    report = tightened_bound(ch)
    assert report.mutual_information == pytest.approx(0.0, abs=1e-12)
    assert report.chi == pytest.approx(0.0, abs=1e-12)
    assert report.tightened_chi == pytest.approx(0.0, abs=1e-12)


def test_tightened_bound_redundant_high_dim_ensemble():
    # eight orthogonal pure signals whose rows collapse to two classes:
    # the given and per-symbol diagonal models waste 3 bits, the row-merged
    # one reaches the 1-bit truth
    space = OutcomeSpace(("even", "odd"))
    even = np.diag(np.tile([1.0, 0.0], 4)).astype(complex)
    odd = np.eye(8, dtype=complex) - even
    povm = Povm(space, (DetectionOperator(even), DetectionOperator(odd)))
    states = tuple(basis_ket(8, i).density() for i in range(8))
    ch = ChannelModel(np.full(8, 0.125), states, povm)

    assert channel_chi(ch) == pytest.approx(3.0, abs=1e-9)
    report = tightened_bound(ch)
    chis = dict(report.per_model_chi)
    assert chis["canonical"] == pytest.approx(3.0, abs=1e-9)
    assert chis["row_merged"] == pytest.approx(1.0, abs=1e-9)
    assert report.tightened_chi == pytest.approx(1.0, abs=1e-9)
    assert report.mutual_information <= 1.0 + 1e-9


def test_information_depends_only_on_rows():
    rng = np.random.default_rng(36)
    for _ in range(10):
        ch = random_channel(rng)
        canonical = canonical_channel(ch)
        merged = row_merged_channel(ch)
        i_given = mutual_information(ch)
        assert mutual_information(canonical) == pytest.approx(i_given, abs=1e-9)
        assert mutual_information(merged) == pytest.approx(i_given, abs=1e-9)
        assert np.abs(
            conditional_matrix(canonical) - conditional_matrix(ch)
        ).max() <= 1e-12


def test_holevo_chain_random_battery():
    rng = np.random.default_rng(46)
    for _ in range(50):
        ch = random_channel(rng)
        report = tightened_bound(ch)
        assert report.mutual_information <= report.chi + 1e-9
        assert report.mutual_information <= report.tightened_chi + 1e-9
        assert report.tightened_chi <= report.chi + 1e-9


def test_mutual_information_relabeling_invariance():
    rng = np.random.default_rng(56)
    ch = random_channel(rng)
    base = mutual_information(ch)

    perm = rng.permutation(ch.n_outputs)
    relabeled_povm = Povm(
        OutcomeSpace(tuple(ch.povm.space.outcomes[j] for j in perm)),
        tuple(ch.povm.elements[j] for j in perm),
    )
    assert mutual_information(
        ChannelModel(ch.priors, ch.states, relabeled_povm)
    ) == pytest.approx(base, abs=1e-12)

    perm_in = rng.permutation(ch.n_inputs)
    assert mutual_information(
        ChannelModel(
            ch.priors[perm_in], tuple(ch.states[i] for i in perm_in), ch.povm
        )
    ) == pytest.approx(base, abs=1e-12)


def test_extra_model_hook_verified():
    ch = bb84_channel()
    merged = row_merged_channel(ch)
    report = tightened_bound(ch, extra=[("user", merged)])
    assert dict(report.per_model_chi)["user"] == pytest.approx(1.5, abs=1e-9)

    rng = np.random.default_rng(66)
    stranger = random_channel(rng)
    with pytest.raises(DomainError):
        tightened_bound(ch, extra=[("bad", stranger)])


def test_channel_json_roundtrip():
    ch = bb84_channel()
    loaded = channel_from_dict(json.loads(json.dumps(channel_to_dict(ch))))
    assert np.array_equal(loaded.priors, ch.priors)
    assert mutual_information(loaded) == pytest.approx(0.5, abs=1e-12)
