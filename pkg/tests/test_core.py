import math

import numpy as np
import pytest

from hybridphoton.core import (
    CompositeSpace,
    DensityOperator,
    Ket,
    Projector,
    SubsystemLabel,
    apply_unitary,
    embed_operator,
    partial_trace,
    project,
    project_subsystem,
    schmidt_decompose,
    tensor,
)

POL_S = SubsystemLabel("signal", "polarization", 2)
POL_I = SubsystemLabel("idler", "polarization", 2)
SPAT_S = SubsystemLabel("signal", "spatial", 2)


def bell_ket():
    return Ket(CompositeSpace([POL_S, POL_I]), [1 / math.sqrt(2), 0, 0, 1 / math.sqrt(2)])


def test_label_validation():
    with pytest.raises(ValueError):
        SubsystemLabel("ancilla", "polarization", 2)
    with pytest.raises(ValueError):
        SubsystemLabel("signal", "momentum", 2)
    with pytest.raises(ValueError):
        SubsystemLabel("signal", "polarization", 4)
    with pytest.raises(ValueError):
        SubsystemLabel("signal", "spatial", 1)


def test_composite_space_rejects_duplicates():
    with pytest.raises(ValueError):
        CompositeSpace([POL_S, SubsystemLabel("signal", "polarization", 2)])


def test_ket_normalization_and_canonical_phase():
    ket = Ket(CompositeSpace([POL_S]), [2.0, 0.0])
    assert ket.norm == pytest.approx(2.0)
    assert ket.normalized().norm == pytest.approx(1.0)
    rotated = Ket(CompositeSpace([POL_S]), np.exp(1j * 0.7) * np.array([0.6, 0.8]))
    canon = rotated.canonicalized()
    assert canon.amplitudes[0] == pytest.approx(0.6)
    assert canon.amplitudes[1] == pytest.approx(0.8)


def test_tensor_ordering_is_row_major():
    h = Ket(CompositeSpace([POL_S]), [1, 0])
    v = Ket(CompositeSpace([POL_I]), [0, 1])
    joint = tensor([h, v])
    assert joint.space.labels == (POL_S, POL_I)
    np.testing.assert_allclose(joint.amplitudes, [0, 1, 0, 0])


def test_density_operator_validation():
    space = CompositeSpace([POL_S])
    with pytest.raises(ValueError):
        DensityOperator(space, np.array([[1.0, 1.0], [0.0, 0.0]]))  # not Hermitian
    with pytest.raises(ValueError):
        DensityOperator(space, np.eye(2))  # trace 2
    with pytest.raises(ValueError):
        DensityOperator(space, np.diag([1.5, -0.5]))  # negative eigenvalue


def test_projector_validation_and_principal_vector():
    with pytest.raises(ValueError):
        Projector(np.array([[0.5, 0.5], [0.5, 0.7]]))
    p = Projector.from_vector([1.0, 1.0])
    vec = p.principal_vector()
    assert abs(abs(np.vdot(vec, np.array([1, 1]) / math.sqrt(2))) - 1) < 1e-12
    rank2 = Projector(np.eye(2))
    with pytest.raises(ValueError):
        rank2.principal_vector()


def test_embed_operator_matches_kron_in_order():
    space = CompositeSpace([POL_S, POL_I])
    x = np.array([[0, 1], [1, 0]], dtype=complex)
    np.testing.assert_allclose(embed_operator(space, x, [POL_S]), np.kron(x, np.eye(2)))
    np.testing.assert_allclose(embed_operator(space, x, [POL_I]), np.kron(np.eye(2), x))


def test_embed_operator_permuted_targets():
    space = CompositeSpace([POL_S, POL_I])
    cnot = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
    # control on the second label: swap the tensor factors of the plain CNOT
    swapped = embed_operator(space, cnot, [POL_I, POL_S])
    swap = np.zeros((4, 4))
    for i in range(2):
        for j in range(2):
            swap[2 * j + i, 2 * i + j] = 1
    np.testing.assert_allclose(swapped, swap @ cnot @ swap, atol=1e-14)


def test_apply_unitary_rejects_non_unitary():
    with pytest.raises(ValueError):
        apply_unitary(bell_ket(), np.array([[1, 0], [0, 2]]), [POL_S])


def test_partial_trace_of_bell_is_maximally_mixed():
    red = partial_trace(bell_ket(), [POL_S])
    np.testing.assert_allclose(red.matrix, np.eye(2) / 2, atol=1e-12)
    assert red.space.labels == (POL_S,)


def test_partial_trace_keeps_declared_order():
    rng = np.random.default_rng(0)
    v = rng.normal(size=8) + 1j * rng.normal(size=8)
    ket = Ket(CompositeSpace([POL_S, POL_I, SPAT_S]), v / np.linalg.norm(v))
    red = partial_trace(ket, [POL_S, SPAT_S])
    assert red.space.labels == (POL_S, SPAT_S)
    assert red.matrix.shape == (4, 4)
    assert np.trace(red.matrix).real == pytest.approx(1.0)


def test_project_and_project_subsystem_agree():
    ket = bell_ket()
    p = Projector.from_vector([1.0, 0.0])
    projected, prob = project(ket, p, targets=[POL_S])
    reduced, prob2 = project_subsystem(ket, [1.0, 0.0], POL_S)
    assert prob == pytest.approx(prob2) == pytest.approx(0.5)
    np.testing.assert_allclose(projected.reshaped()[0], reduced.amplitudes, atol=1e-12)


def test_project_subsystem_density_matches_ket():
    ket = bell_ket()
    vec = np.array([1.0, 1.0]) / math.sqrt(2)
    red_ket, p1 = project_subsystem(ket, vec, POL_S)
    red_rho, p2 = project_subsystem(ket.to_density(), vec, POL_S)
    assert p1 == pytest.approx(p2)
    np.testing.assert_allclose(red_ket.to_density().matrix, red_rho.matrix, atol=1e-12)


def test_null_projection_returns_none():
    ket = Ket(CompositeSpace([POL_S, POL_I]), [1, 0, 0, 0])
    out, prob = project_subsystem(ket, [0.0, 1.0], POL_S)
    assert out is None and prob == 0.0


def test_schmidt_decomposition_resynthesis():
    rng = np.random.default_rng(3)
    v = rng.normal(size=8) + 1j * rng.normal(size=8)
    ket = Ket(CompositeSpace([POL_S, POL_I, SPAT_S]), v / np.linalg.norm(v))
    coeffs, pairs = schmidt_decompose(ket, [POL_I])
    assert np.all(np.diff(coeffs) <= 1e-12)
    assert np.sum(coeffs**2) == pytest.approx(1.0)
    rebuilt = np.zeros(8, dtype=complex)
    for lam, (left, right) in zip(coeffs, pairs):
        term = tensor([left, right])  # left label order: POL_I then the rest
        # reorder to the original label order via reshape/transpose
        tens = term.amplitudes.reshape(2, 2, 2).transpose(1, 0, 2)
        rebuilt += lam * tens.reshape(8)
    np.testing.assert_allclose(rebuilt, ket.normalized().amplitudes, atol=1e-8)


def test_schmidt_of_bell_state():
    coeffs, pairs = schmidt_decompose(bell_ket(), [POL_S])
    np.testing.assert_allclose(coeffs, [1 / math.sqrt(2)] * 2, atol=1e-12)
    assert len(pairs) == 2
