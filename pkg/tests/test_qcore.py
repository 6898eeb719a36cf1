import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qrs import qcore
from qrs.errors import InvalidObservableError, InvalidStateError, ParameterError
from qrs.qcore import (
    MAXIMALLY_MIXED, MINUS, PHI_PLUS, PLUS, BlochVector, DensityMatrix, SensingField,
    axis_projector, bell_state, bloch_from_density, born_probability, density_from_bloch,
    evolve_phase, fidelity_maximally_mixed, fidelity_pure, partial_trace, pauli_pair_measure,
    sample_outcome,
)
from qrs.rng import stream

unit = st.floats(-1, 1, allow_nan=False)


@st.composite
def bloch_vectors(draw):
    v = np.array([draw(unit), draw(unit), draw(unit)])
    n = np.linalg.norm(v)
    if n > 1:
        v = v / n
    return BlochVector(*map(float, v))


@st.composite
def two_qubit_states(draw):
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    g = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    a = g @ g.conj().T
    return DensityMatrix(a / np.trace(a).real)


def test_rejects_bad_matrices():
    with pytest.raises(InvalidStateError):
        DensityMatrix(np.eye(3) / 3)
    with pytest.raises(InvalidStateError):
        DensityMatrix(np.array([[0.5, 0.1], [0.2, 0.5]]))
    with pytest.raises(InvalidStateError):
        DensityMatrix(np.eye(2))
    with pytest.raises(InvalidStateError):
        DensityMatrix(np.diag([1.2, -0.2]))
    with pytest.raises(InvalidStateError):
        BlochVector(1, 1, 0)


def test_small_negative_eigenvalue_is_clamped():
    rho = DensityMatrix(np.diag([1 + 1e-12, -1e-12]))
    assert rho.eigenvalues().min() >= 0
    assert np.trace(rho.data).real == pytest.approx(1, abs=1e-15)


def test_density_matrix_is_immutable():
    with pytest.raises(ValueError):
        PLUS.data[0, 0] = 0


def test_bloch_examples():
    assert np.allclose(density_from_bloch(BlochVector(0, 0, 0)).data, np.eye(2) / 2)
    assert np.allclose(density_from_bloch(BlochVector(1, 0, 0)).data, PLUS.data)
    rho = density_from_bloch(BlochVector(0.6, 0, 0.8))
    # eigenvalues of [[0.9, 0.3], [0.3, 0.1]] by the quadratic formula
    a, b, d = 0.9, 0.3, 0.1
    disc = math.sqrt((a - d) ** 2 + 4 * b * b)
    assert sorted([(a + d - disc) / 2, (a + d + disc) / 2]) == pytest.approx([0, 1], abs=1e-12)
    assert np.sort(np.linalg.eigvals(rho.data).real) == pytest.approx([0, 1], abs=1e-12)


@settings(max_examples=1000, deadline=None)
@given(bloch_vectors())
def test_bloch_round_trip(b):
    back = bloch_from_density(density_from_bloch(b))
    assert back.as_array() == pytest.approx(b.as_array(), abs=1e-12)


def _bell_overlap(i, j):
    v = qcore.bell_vector(i, j)
    phi = qcore.bell_vector(0, 0)
    return abs(np.vdot(phi, v)) ** 2


def test_bell_states():
    assert fidelity_pure(PHI_PLUS, PHI_PLUS) == pytest.approx(1)
    assert _bell_overlap(1, 0) == pytest.approx(0, abs=1e-15)
    assert fidelity_pure(bell_state(0, 1), PHI_PLUS) == pytest.approx(0, abs=1e-15)
    for i in (0, 1):
        for j in (0, 1):
            for keep in ("first", "second"):
                assert np.allclose(partial_trace(bell_state(i, j), keep).data, np.eye(2) / 2)


def test_bell_basis_is_orthonormal():
    vs = np.stack([qcore.bell_vector(i, j) for i in (0, 1) for j in (0, 1)])
    assert np.allclose(vs.conj() @ vs.T, np.eye(4))


def test_evolve_examples():
    f0 = SensingField(0.0, 1.0)
    assert np.allclose(evolve_phase(PLUS, f0).data, PLUS.data)
    b = bloch_from_density(evolve_phase(PLUS, SensingField(math.pi / 2, 1.0)))
    assert b.as_array() == pytest.approx([0, 1, 0], abs=1e-12)
    # explicit 2x2 multiplication as the oracle
    phase = 0.3
    U = np.array([[np.exp(-0.5j * phase), 0], [0, np.exp(0.5j * phase)]])
    ev = U @ (np.array([[1, 1], [1, 1]]) / 2) @ U.conj().T
    P = (np.eye(2) + np.array([[0, -1j], [1j, 0]])) / 2
    oracle = np.trace(P @ ev).real
    got = born_probability(evolve_phase(PLUS, SensingField(0.3, 1.0)), axis_projector("Y"))
    assert got == pytest.approx(oracle, abs=1e-14)
    assert got == pytest.approx((1 + math.sin(0.3)) / 2, abs=1e-14)


@settings(max_examples=300, deadline=None)
@given(bloch_vectors(), st.floats(-10, 10), st.floats(0.01, 5))
def test_evolution_invariants(b, omega, t):
    rho = density_from_bloch(b)
    ev = evolve_phase(rho, SensingField(omega, t))
    assert np.trace(ev.data).real == pytest.approx(1, abs=1e-12)
    assert np.allclose(ev.data, ev.data.conj().T, atol=1e-12)
    assert ev.eigenvalues() == pytest.approx(rho.eigenvalues(), abs=1e-12)
    out = bloch_from_density(ev)
    assert out.r_z == pytest.approx(b.r_z, abs=1e-12)
    assert out.r_x**2 + out.r_y**2 == pytest.approx(b.r_x**2 + b.r_y**2, abs=1e-12)


def test_born_examples():
    assert born_probability(PLUS, axis_projector("Y")) == pytest.approx(0.5)
    P = np.array([[0.36, 0.48], [0.48, 0.64]])
    assert born_probability(MAXIMALLY_MIXED, P) == pytest.approx(0.5)
    with pytest.raises(InvalidObservableError):
        born_probability(PLUS, np.eye(2) * 0.5)
    with pytest.raises(InvalidObservableError):
        born_probability(PLUS, np.eye(4))


@settings(max_examples=300, deadline=None)
@given(bloch_vectors(), st.sampled_from("XYZ"))
def test_born_complement_and_pauli_trace(b, axis):
    rho = density_from_bloch(b)
    p = born_probability(rho, axis_projector(axis, +1))
    q = born_probability(rho, axis_projector(axis, -1))
    assert p + q == pytest.approx(1, abs=1e-12)
    r = {"X": b.r_x, "Y": b.r_y, "Z": b.r_z}[axis]
    assert p == pytest.approx((1 + r) / 2, abs=1e-12)


def test_sample_outcome_eigenstate():
    rng = stream(1, "qcore", "eigen")
    assert all(sample_outcome(PLUS, "X", rng)[0] == 1 for _ in range(200))
    assert all(sample_outcome(MINUS, "X", rng)[0] == 0 for _ in range(200))


@pytest.mark.parametrize("r_y, p, tol", [(0.0, 0.5, 0.005), (0.6, 0.8, 0.004)])
def test_sample_outcome_frequency(r_y, p, tol):
    rho = density_from_bloch(BlochVector(0, r_y, 0))
    rng = stream(2, "qcore", "freq", int(r_y * 10))
    n = 100_000
    ones = sum(sample_outcome(rho, "Y", rng)[0] for _ in range(n))
    assert abs(ones / n - p) <= tol
    assert abs(ones / n - p) <= 5 * math.sqrt(p * (1 - p) / n)


def test_sample_outcome_post_state():
    bit, post = sample_outcome(MAXIMALLY_MIXED, "Z", stream(3, "post"))
    expected = axis_projector("Z", +1 if bit else -1)
    assert np.allclose(post.data, expected)


@pytest.mark.parametrize("axis", ["X", "Z"])
def test_pair_measure_phi_plus_always_equal(axis):
    rng = stream(4, "pair", axis)
    for _ in range(500):
        c, s = pauli_pair_measure(PHI_PLUS, axis, rng)
        assert c == s


def test_pair_measure_beta10_signs():
    rng = stream(5, "pair", "b10")
    b10 = bell_state(1, 0)
    for _ in range(500):
        c, s = pauli_pair_measure(b10, "Z", rng)
        assert c == s
        c, s = pauli_pair_measure(b10, "X", rng)
        assert c != s


def test_partial_trace_examples():
    zero = np.array([[1, 0], [0, 0]])
    prod = DensityMatrix(np.kron(zero, PLUS.data))
    assert np.allclose(partial_trace(prod, "second").data, PLUS.data)
    assert np.allclose(partial_trace(prod, "first").data, zero)
    with pytest.raises(ParameterError):
        qcore.partial_trace_batch(prod.data, "both")


@settings(max_examples=100, deadline=None)
@given(two_qubit_states())
def test_partial_trace_matches_index_sum(rho):
    a = rho.data
    keep2 = np.zeros((2, 2), dtype=complex)
    keep1 = np.zeros((2, 2), dtype=complex)
    for i in range(2):
        for j in range(2):
            for m in range(2):
                keep2[i, j] += a[2 * m + i, 2 * m + j]
                keep1[i, j] += a[2 * i + m, 2 * j + m]
    assert np.allclose(partial_trace(rho, "second").data, keep2, atol=1e-12)
    assert np.allclose(partial_trace(rho, "first").data, keep1, atol=1e-12)


def test_fidelity_examples():
    mix = DensityMatrix(0.8 * PHI_PLUS.data + 0.2 * bell_state(1, 0).data)
    assert fidelity_pure(mix, PHI_PLUS) == pytest.approx(0.8, abs=1e-12)
    with pytest.raises(ParameterError):
        fidelity_pure(PHI_PLUS, DensityMatrix(np.eye(4) / 4))


@settings(max_examples=100, deadline=None)
@given(two_qubit_states(), two_qubit_states(), st.floats(0, 1))
def test_fidelity_linear(r1, r2, lam):
    mix = DensityMatrix(lam * r1.data + (1 - lam) * r2.data)
    lhs = fidelity_pure(mix, PHI_PLUS)
    rhs = lam * fidelity_pure(r1, PHI_PLUS) + (1 - lam) * fidelity_pure(r2, PHI_PLUS)
    assert lhs == pytest.approx(rhs, abs=1e-12)


def test_fidelity_maximally_mixed():
    assert fidelity_maximally_mixed(MAXIMALLY_MIXED) == pytest.approx(1)
    assert fidelity_maximally_mixed(PLUS) == pytest.approx(0.5)
    eps = 0.1
    R = 2 * math.sqrt(eps - eps**2)
    assert fidelity_maximally_mixed(density_from_bloch(BlochVector(R, 0, 0))) == pytest.approx(1 - eps, abs=1e-12)


def test_sensing_field_repetitions():
    f = SensingField(0.1, 1.0, t_p=0.5, t_r=0.5, T=10.0)
    assert f.repetitions == 5
    assert f.phase == pytest.approx(0.1)
    with pytest.raises(ParameterError):
        SensingField(0.1, 0.0)
    with pytest.raises(ParameterError):
        SensingField(0.1, 1.0, T=0.5)


@settings(max_examples=200, deadline=None)
@given(two_qubit_states(), st.sampled_from(["X", "Z"]), st.integers(0, 2**31))
def test_measurements_yield_valid_states(rho, axis, seed):
    rng = np.random.default_rng(seed)
    for which in ("first", "second"):
        _, post = qcore.measure_qubit(rho, which, axis, rng)
        assert np.trace(post.data).real == pytest.approx(1, abs=1e-12)
        assert post.eigenvalues().min() >= -1e-12
    c, s = pauli_pair_measure(rho, axis, rng)
    assert c in (0, 1) and s in (0, 1)
