import json
import math

import numpy as np
import pytest

from helpers import random_density, random_measure, random_povm

from ppmkit.errors import DomainError, InvariantViolation, NumericalError
from ppmkit.measure import (
    FiniteSet,
    OutcomeSpace,
    ParamDomain,
    ParamGrid,
    Ppm,
    ProbabilityMeasure,
    concat_domains,
    EMPTY_DOMAIN,
    EMPTY_GRID,
)
from ppmkit.quantum import (
    DensityOperator,
    DetectionOperator,
    Ket,
    Povm,
    basis_ket,
    born_probability,
    canonical_model,
    generate_ppm,
    hermiticity_residual,
    matrix_from_dict,
    mixed_basis_model,
    model_from_dict,
    model_generates,
    model_to_dict,
    operator_to_dict,
    overlap,
    povm_from_dict,
    povm_to_dict,
    qubit_linear_state,
    split_canonical_model,
    split_respected,
    von_neumann_entropy,
)
from ppmkit.bb84 import PREP_ANGLES, alpha_ppm_object, alpha_prep_grid
from ppmkit.entangle import circle_grid, torus_model, torus_ppm_family

QUBIT_MIXED = DensityOperator(np.eye(2, dtype=complex) / 2)


def random_tabulated_ppm(rng, n_points, n_outcomes):
    labels = tuple(str(i) for i in range(n_points))
    domain = ParamDomain((FiniteSet(labels),))
    grid = ParamGrid.cartesian(domain, [labels])
    space = OutcomeSpace(tuple(str(j) for j in range(n_outcomes)))
    measures = tuple(random_measure(rng, space) for _ in range(n_points))
    return Ppm.from_table(grid, space, measures)


# ---------------------------------------------------------------------------
# operator types
# ---------------------------------------------------------------------------


def test_ket_validation():
    with pytest.raises(InvariantViolation):
        Ket(np.array([1.0, 1.0]))
    k = qubit_linear_state(math.pi / 4)
    assert np.allclose(k.amplitudes, [math.sqrt(2) / 2, math.sqrt(2) / 2])
    assert qubit_linear_state(0.0).amplitudes[0] == 1.0
    assert qubit_linear_state(math.pi / 2).amplitudes[1] == 1.0


def test_density_operator_invariants():
    with pytest.raises(InvariantViolation):
        DensityOperator(np.array([[0.5, 0.1j], [0.1j, 0.5]]))  # not Hermitian
    with pytest.raises(InvariantViolation):
        DensityOperator(np.array([[1.5, 0.0], [0.0, -0.5]]))  # negative eigenvalue
    with pytest.raises(InvariantViolation):
        DensityOperator(np.eye(2) * 0.7)  # trace 1.4


def test_detection_operator_invariants():
    DetectionOperator(np.eye(3) * 0.5)
    with pytest.raises(InvariantViolation):
        DetectionOperator(np.eye(2) * 1.5)  # spectrum above 1


def test_povm_completeness():
    space = OutcomeSpace(("0", "1"))
    good = Povm(
        space,
        (DetectionOperator(np.diag([0.7, 0.2])), DetectionOperator(np.diag([0.3, 0.8]))),
    )
    assert good.dim == 2
    with pytest.raises(InvariantViolation):
        Povm(
            space,
            (
                DetectionOperator(np.diag([0.7, 0.2])),
                DetectionOperator(np.diag([0.2, 0.8])),
            ),
        )


def test_povm_event_element():
    rng = np.random.default_rng(3)
    povm = random_povm(rng, 3, 4)
    merged = povm.element_for((0, 2))
    assert np.allclose(
        merged.matrix, povm.elements[0].matrix + povm.elements[2].matrix
    )
    with pytest.raises(DomainError):
        povm.element_for((7,))


# ---------------------------------------------------------------------------
# trace rule
# ---------------------------------------------------------------------------


def test_born_probability_examples():
    x = basis_ket(2, 0)
    assert born_probability(x.density(), x.projector()) == pytest.approx(1.0)
    # states at 0 and pi/4 overlap in amplitude by 1/sqrt(2)
    rho = qubit_linear_state(0.0).density()
    eff = qubit_linear_state(math.pi / 4).projector()
    assert born_probability(rho, eff) == pytest.approx(0.5, abs=1e-15)
    assert born_probability(QUBIT_MIXED, eff) == pytest.approx(0.5, abs=1e-15)
    with pytest.raises(DomainError):
        born_probability(QUBIT_MIXED, basis_ket(3, 0).projector())


def test_generate_ppm_matches_closed_form():
    grid = ParamGrid.cartesian(
        torus_ppm_family().domain,
        [[2 * math.pi * k / 16 for k in range(16)]] * 2,
    )
    generated = generate_ppm(torus_model(), grid)
    closed = torus_ppm_family()
    for p in grid.points:
        assert np.abs(generated.at(p).weights - closed.at(p).weights).max() <= 1e-12


def test_generate_constant_model():
    rng = np.random.default_rng(11)
    rho = random_density(rng, 3)
    povm = random_povm(rng, 3, 2)
    domain = ParamDomain((FiniteSet(("a", "b")),))
    from ppmkit.quantum import DensityOperatorFunction, PovmFunction, QuantumModel

    model = QuantumModel(
        3,
        DensityOperatorFunction(domain, lambda _p: rho),
        PovmFunction(domain, povm.space, lambda _p: povm),
    )
    grid = ParamGrid.cartesian(domain, [["a", "b"]])
    ppm = generate_ppm(model, grid)
    assert np.allclose(ppm.measures[0].weights, ppm.measures[1].weights)


def test_generated_measures_normalized_random_models():
    rng = np.random.default_rng(12)
    for _ in range(20):
        dim = int(rng.integers(2, 5))
        rho = random_density(rng, dim)
        povm = random_povm(rng, dim, int(rng.integers(2, 5)))
        total = sum(born_probability(rho, e) for e in povm.elements)
        assert abs(total - 1.0) <= 1e-10


def test_model_generates_verdicts():
    torus = torus_ppm_family()
    grid = ParamGrid.cartesian(torus.domain, [[0.0, 1.0, 2.0]] * 2)
    model = torus_model()
    own = generate_ppm(model, grid)
    chk = model_generates(model, own, grid)
    assert chk.passed and chk.max_deviation == 0.0
    # against a different functional form it must fail
    from ppmkit.entangle import sphere_ppm, SpherePairPoint

    impostor = Ppm.from_function(
        torus.domain,
        torus.space,
        lambda p: sphere_ppm(SpherePairPoint(p.values[0] % math.pi, 0.0,
                                             p.values[1] % math.pi, 0.0)),
    )
    assert not model_generates(model, impostor, grid, 1e-6).passed


# ---------------------------------------------------------------------------
# overlap and entropy
# ---------------------------------------------------------------------------


def test_overlap_examples():
    pure = qubit_linear_state(0.3).density()
    assert overlap(pure, pure) == pytest.approx(1.0)
    a = qubit_linear_state(0.0).density()
    b = qubit_linear_state(math.pi / 4).density()
    # pure-state oracle: sqrt of a projector is itself, so the overlap is
    # |<a|b>|^2 -- recompute it by brute-force eigendecomposition
    eigs_a, vecs_a = np.linalg.eigh(a.matrix)
    eigs_b, vecs_b = np.linalg.eigh(b.matrix)
    sqrt_a = (vecs_a * np.sqrt(np.clip(eigs_a, 0, None))) @ vecs_a.conj().T
    sqrt_b = (vecs_b * np.sqrt(np.clip(eigs_b, 0, None))) @ vecs_b.conj().T
    oracle = float(np.trace(sqrt_a @ sqrt_b).real)
    assert oracle == pytest.approx(0.5, abs=1e-12)
    assert overlap(a, b) == pytest.approx(0.5, abs=1e-12)
    c = qubit_linear_state(math.pi / 2).density()
    assert overlap(a, c) == pytest.approx(0.0, abs=1e-12)


def test_overlap_properties_random():
    rng = np.random.default_rng(21)
    for _ in range(25):
        rho = random_density(rng, int(rng.integers(2, 6)))
        sigma = random_density(rng, rho.dim)
        assert overlap(rho, sigma) == pytest.approx(overlap(sigma, rho), abs=1e-12)
        assert overlap(rho, rho) == pytest.approx(1.0, abs=1e-10)


def test_von_neumann_entropy_examples():
    assert von_neumann_entropy(qubit_linear_state(1.2).density()) == pytest.approx(
        0.0, abs=1e-12
    )
    assert von_neumann_entropy(QUBIT_MIXED) == pytest.approx(1.0)
    # equal mixture of the four protocol states is maximally mixed
    mixture = DensityOperator(
        sum(0.25 * qubit_linear_state(t).density().matrix for t in PREP_ANGLES)
    )
    assert np.allclose(mixture.matrix, np.eye(2) / 2, atol=1e-15)
    assert von_neumann_entropy(mixture) == pytest.approx(1.0, abs=1e-12)


# ---------------------------------------------------------------------------
# diagonal model builders
# ---------------------------------------------------------------------------


def test_canonical_model_two_point_example():
    domain = ParamDomain((FiniteSet(("0", "1")),))
    grid = ParamGrid.cartesian(domain, [["0", "1"]])
    space = OutcomeSpace(("0", "1"))
    p0, p1 = 0.3, 0.8
    mu = Ppm.from_table(
        grid,
        space,
        (
            ProbabilityMeasure(space, np.array([1 - p0, p0])),
            ProbabilityMeasure(space, np.array([1 - p1, p1])),
        ),
    )
    model = canonical_model(mu)
    effect_one = model.povm_fn.at(grid.points[0]).elements[1]
    assert np.allclose(effect_one.matrix, np.diag([p0, p1]))
    for i, k in enumerate(grid.points):
        rho = model.rho_fn.at(k)
        assert np.allclose(rho.matrix, np.outer(*([np.eye(2)[i]] * 2)))
        assert born_probability(rho, effect_one) == pytest.approx([p0, p1][i])


def test_canonical_model_round_trip_battery():
    rng = np.random.default_rng(1234)
    for _ in range(30):
        mu = random_tabulated_ppm(
            rng, int(rng.integers(1, 17)), int(rng.integers(2, 9))
        )
        model = canonical_model(mu)
        chk = model_generates(model, mu, mu.grid, 1e-12)
        assert chk.passed, chk


def test_canonical_model_torus_8x8():
    torus = torus_ppm_family()
    grid = ParamGrid.cartesian(
        torus.domain, [[2 * math.pi * k / 8 for k in range(8)]] * 2
    )
    table = torus.tabulate(grid)
    model = canonical_model(table)
    assert model.dim == 64
    chk = model_generates(model, table, grid, 1e-12)
    assert chk.passed and chk.max_deviation == 0.0


def test_canonical_model_constant_family():
    domain = ParamDomain((FiniteSet(("0", "1", "2")),))
    grid = ParamGrid.cartesian(domain, [["0", "1", "2"]])
    space = OutcomeSpace(("a", "b"))
    mu = Ppm.from_table(
        grid, space, tuple(ProbabilityMeasure(space, [0.4, 0.6]) for _ in range(3))
    )
    model = canonical_model(mu)
    for j, weight in enumerate((0.4, 0.6)):
        element = model.povm_fn.at(grid.points[0]).elements[j]
        assert np.allclose(element.matrix, weight * np.eye(3))
    with pytest.raises(DomainError):
        canonical_model(torus_ppm_family())  # closed form, no grid


def test_split_canonical_alpha_4x8():
    alpha = alpha_ppm_object()
    prep = alpha_prep_grid()
    meas = circle_grid(8)
    model = split_canonical_model(alpha, prep, meas)
    assert model.dim == 4
    full_grid = ParamGrid.cartesian(
        alpha.domain, [list(PREP_ANGLES), [p.values[0] for p in meas.points]]
    )
    chk = model_generates(model, alpha, full_grid, 1e-12)
    assert chk.passed, chk
    assert split_respected(model, full_grid)


def test_split_canonical_single_prep_is_classical():
    # a single preparation point gives a one-dimensional model whose POVM
    # elements are scalars -- it still generates the torus family exactly
    torus = torus_ppm_family()
    meas_grid = ParamGrid.cartesian(torus.domain, [[0.0, 1.0, 2.0, 3.0]] * 2)
    model = split_canonical_model(torus, EMPTY_GRID, meas_grid)
    assert model.dim == 1
    chk = model_generates(model, torus, meas_grid, 1e-12)
    assert chk.passed
    povm = model.povm_fn.at(meas_grid.points[5])
    for element, w in zip(povm.elements, torus.at(meas_grid.points[5]).weights):
        assert element.matrix.shape == (1, 1)
        assert element.matrix[0, 0] == pytest.approx(w)


def test_split_canonical_rejects_non_product():
    torus = torus_ppm_family()
    # component mismatch: prep + meas must rebuild the family's domain
    wrong_prep = ParamGrid.cartesian(
        ParamDomain((FiniteSet(("a",)),)), [["a"]]
    )
    with pytest.raises(DomainError):
        split_canonical_model(torus, wrong_prep, circle_grid(2))
    # tabulated family missing a product point: the lookup fails
    partial_grid = ParamGrid.from_values(
        torus.domain, [[0.0, 0.0], [1.0, 1.0]]  # no (0, 1) point
    )
    partial = torus.tabulate(partial_grid)
    from ppmkit.measure import Circle

    axis = ParamGrid.cartesian(ParamDomain((Circle(),)), [[0.0, 1.0]])
    with pytest.raises(DomainError):
        split_canonical_model(partial, axis, axis)


def test_model_nonuniqueness_and_entropy_disagreement():
    # two models of one family on non-isomorphic Hilbert spaces
    torus = torus_ppm_family()
    grid = ParamGrid.cartesian(
        torus.domain, [[2 * math.pi * k / 6 for k in range(6)]] * 2
    )
    entangled = torus_model()  # dim 4
    classical = split_canonical_model(torus, EMPTY_GRID, grid)  # dim 1
    assert model_generates(entangled, torus, grid, 1e-12).passed
    assert model_generates(classical, torus, grid, 1e-12).passed
    assert entangled.dim != classical.dim

    # and a mixed-state model: same family, strictly positive state entropy
    rng = np.random.default_rng(9)
    table = random_tabulated_ppm(rng, 5, 3)
    pure_model = canonical_model(table)
    mixed_model = mixed_basis_model(table, multiplicity=4)
    assert model_generates(pure_model, table, table.grid, 1e-12).passed
    assert model_generates(mixed_model, table, table.grid, 1e-12).passed
    k = table.grid.points[2]
    s_pure = von_neumann_entropy(pure_model.rho_fn.at(k))
    s_mixed = von_neumann_entropy(mixed_model.rho_fn.at(k))
    assert s_pure == pytest.approx(0.0, abs=1e-12)
    assert s_mixed == pytest.approx(2.0, abs=1e-12)


def test_hermiticity_residual_helper():
    assert hermiticity_residual(np.array([[1.0, 1j], [-1j, 1.0]])) == 0.0
    assert hermiticity_residual(np.array([[1.0, 1j], [1j, 1.0]])) == pytest.approx(2.0)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def test_operator_json_roundtrip():
    rng = np.random.default_rng(8)
    rho = random_density(rng, 3)
    m = matrix_from_dict(json.loads(json.dumps(operator_to_dict(rho.matrix))))
    assert np.array_equal(m, rho.matrix)


def test_povm_json_roundtrip():
    rng = np.random.default_rng(18)
    povm = random_povm(rng, 2, 3)
    loaded = povm_from_dict(json.loads(json.dumps(povm_to_dict(povm))))
    for a, b in zip(loaded.elements, povm.elements):
        assert np.array_equal(a.matrix, b.matrix)


def test_model_json_roundtrip_regenerates():
    rng = np.random.default_rng(28)
    mu = random_tabulated_ppm(rng, 5, 3)
    model = canonical_model(mu)
    payload = json.loads(json.dumps(model_to_dict(model, mu.grid)))
    loaded, grid = model_from_dict(payload)
    assert loaded.dim == model.dim
    chk = model_generates(loaded, mu, grid, 1e-12)
    assert chk.passed
