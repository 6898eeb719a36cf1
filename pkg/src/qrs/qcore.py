"""Exact one- and two-qubit state algebra.

States are :class:`DensityMatrix` values (2x2 or 4x4).  In two-qubit states the
first tensor factor is the client-bound (transmitted) qubit and the second is
the qubit the server keeps.

Bit conventions: a single-qubit or pair measurement along ``axis`` reports bit
1 for the +1 eigenvalue of the Pauli operator, i.e. for the projector
``(I + sigma_axis)/2``.

The ``*_batch`` helpers operate on raw complex arrays with arbitrary leading
batch dimensions; the Monte-Carlo engines use them to simulate thousands of
registers per numpy call with the same projectors as the scalar API.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .errors import InvalidObservableError, InvalidStateError, ParameterError

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = 1e-10
BLOCH_TOL = 1e-10
PROJECTOR_TOL = 1e-10

I2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = {"I": I2, "X": SX, "Y": SY, "Z": SZ}

Axis = Literal["X", "Y", "Z"]


def _check_axis(axis: str) -> np.ndarray:
    try:
        return PAULI[axis]
    except KeyError:
        raise ParameterError(f"unknown measurement axis {axis!r}") from None


def axis_projector(axis: Axis, sign: int = +1) -> np.ndarray:
    """``(I + sign*sigma_axis)/2`` as a 2x2 array."""
    return (I2 + sign * _check_axis(axis)) / 2


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Validated density matrix of one (dim 2) or two (dim 4) qubits.

    Eigenvalues in ``[-PSD_TOL, 0)`` are clamped to zero and the matrix is
    renormalized; anything more negative is rejected.
    """

    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        a = np.array(self.data, dtype=complex)
        if a.shape not in ((2, 2), (4, 4)):
            raise InvalidStateError(f"density matrix must be 2x2 or 4x4, got {a.shape}")
        if np.max(np.abs(a - a.conj().T)) > HERMITIAN_TOL:
            raise InvalidStateError("matrix is not Hermitian")
        a = (a + a.conj().T) / 2
        tr = np.trace(a).real
        if abs(tr - 1) > TRACE_TOL:
            raise InvalidStateError(f"trace is {tr!r}, expected 1")
        w, v = np.linalg.eigh(a)
        if w[0] < -PSD_TOL:
            raise InvalidStateError(f"matrix has negative eigenvalue {w[0]!r}")
        if w[0] < 0:
            w = np.clip(w, 0, None)
            a = (v * w) @ v.conj().T
            a /= np.trace(a).real
        a.setflags(write=False)
        object.__setattr__(self, "data", a)

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.data)

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)

    def __repr__(self):
        return f"DensityMatrix(dim={self.dim})"


@dataclass(frozen=True)
class BlochVector:
    r_x: float
    r_y: float
    r_z: float

    def __post_init__(self):
        if self.norm() ** 2 > 1 + BLOCH_TOL:
            raise InvalidStateError(f"Bloch vector norm {self.norm()!r} exceeds 1")

    def norm(self) -> float:
        return math.sqrt(self.r_x**2 + self.r_y**2 + self.r_z**2)

    def as_array(self) -> np.ndarray:
        return np.array([self.r_x, self.r_y, self.r_z])


@dataclass(frozen=True)
class SensingField:
    """Field frequency and Ramsey timing.  ``hbar`` is absorbed into ``omega``."""

    omega: float
    t: float
    t_p: float = 0.0
    t_r: float = 0.0
    T: float | None = None

    def __post_init__(self):
        if not self.t > 0:
            raise ParameterError("interaction time t must be positive")
        if self.t_p < 0 or self.t_r < 0:
            raise ParameterError("preparation/readout times must be non-negative")
        if self.T is not None and self.repetitions < 1:
            raise ParameterError("time budget T allows no complete repetition")

    @property
    def phase(self) -> float:
        return self.omega * self.t

    @property
    def repetitions(self) -> int:
        """Number of Ramsey repetitions that fit into the budget ``T``."""
        if self.T is None:
            raise ParameterError("no time budget T set")
        return math.floor(self.T / (self.t_p + self.t + self.t_r))


def pure_state(vec) -> DensityMatrix:
    v = np.asarray(vec, dtype=complex)
    v = v / np.linalg.norm(v)
    return DensityMatrix(np.outer(v, v.conj()))


PLUS = pure_state([1, 1])
MINUS = pure_state([1, -1])
MAXIMALLY_MIXED = DensityMatrix(I2 / 2)


def density_from_bloch(b: BlochVector) -> DensityMatrix:
    return DensityMatrix((I2 + b.r_x * SX + b.r_y * SY + b.r_z * SZ) / 2)


def bloch_from_density(rho: DensityMatrix) -> BlochVector:
    if rho.dim != 2:
        raise InvalidStateError("Bloch vectors exist only for single qubits")
    a = rho.data
    # clip tiny drift so a valid state never fails the norm check
    r = np.array([np.trace(a @ P).real for P in (SX, SY, SZ)])
    n = np.linalg.norm(r)
    if 1 < n <= 1 + BLOCH_TOL:
        r = r / n
    return BlochVector(*map(float, r))


def bell_vector(i: int, j: int) -> np.ndarray:
    """``(Z^i X^j (x) I)(|00> + |11>)/sqrt(2)`` as a length-4 vector."""
    if i not in (0, 1) or j not in (0, 1):
        raise ParameterError("Bell indices must be 0 or 1")
    phi = np.array([1, 0, 0, 1], dtype=complex) / math.sqrt(2)
    op = np.linalg.matrix_power(SZ, i) @ np.linalg.matrix_power(SX, j)
    return np.kron(op, I2) @ phi


def bell_state(i: int, j: int) -> DensityMatrix:
    v = bell_vector(i, j)
    return DensityMatrix(np.outer(v, v.conj()))


PHI_PLUS = bell_state(0, 0)


def z_rotation(phase: float) -> np.ndarray:
    """``exp(-i phase sigma_z / 2)``."""
    return np.diag([np.exp(-0.5j * phase), np.exp(0.5j * phase)])


def evolve_phase(rho: DensityMatrix, field: SensingField) -> DensityMatrix:
    """Exact evolution under ``H = omega sigma_z / 2`` for time ``field.t``."""
    return rotate_z(rho, field.phase)


def rotate_z(rho: DensityMatrix, phase: float) -> DensityMatrix:
    if rho.dim != 2:
        raise InvalidStateError("phase evolution acts on a single qubit")
    U = z_rotation(phase)
    return DensityMatrix(U @ rho.data @ U.conj().T)


def _check_projector(P: np.ndarray, dim: int) -> np.ndarray:
    P = np.asarray(P, dtype=complex)
    if P.shape != (dim, dim):
        raise InvalidObservableError(f"projector shape {P.shape} does not match state dim {dim}")
    if np.max(np.abs(P - P.conj().T)) > PROJECTOR_TOL or np.max(np.abs(P @ P - P)) > PROJECTOR_TOL:
        raise InvalidObservableError("operator is not a Hermitian idempotent")
    return P


def born_probability(rho: DensityMatrix, projector) -> float:
    """``Tr[P rho]`` for a projector ``P``."""
    P = _check_projector(projector, rho.dim)
    p = np.trace(P @ rho.data)
    if abs(p.imag) > 1e-12:
        raise InvalidObservableError("Born probability has an imaginary part")
    return float(min(max(p.real, 0.0), 1.0))


def _luders(rho: np.ndarray, P: np.ndarray) -> DensityMatrix:
    post = P @ rho @ P
    return DensityMatrix(post / np.trace(post).real)


def sample_outcome(rho: DensityMatrix, axis: Axis, rng: np.random.Generator):
    """Projective single-qubit measurement; returns ``(bit, post_state)``."""
    if rho.dim != 2:
        raise InvalidStateError("sample_outcome measures a single qubit")
    P1 = axis_projector(axis, +1)
    p1 = born_probability(rho, P1)
    bit = int(rng.random() < p1)
    P = P1 if bit else axis_projector(axis, -1)
    return bit, _luders(rho.data, P)


def pair_projectors(axis: Axis) -> np.ndarray:
    """Stack of the four product projectors, indexed ``2*client_bit + server_bit``."""
    try:
        return _PAIR_PROJECTORS[axis]
    except KeyError:
        raise ParameterError("pair tests use the X or Z axis") from None


def _build_pair_projectors(axis: Axis) -> np.ndarray:
    p = {1: axis_projector(axis, +1), 0: axis_projector(axis, -1)}
    out = np.stack([np.kron(p[c], p[s]) for c in (0, 1) for s in (0, 1)])
    out.setflags(write=False)
    return out


_PAIR_PROJECTORS = {ax: _build_pair_projectors(ax) for ax in ("X", "Z")}


def pauli_pair_measure(rho: DensityMatrix, axis: Axis, rng: np.random.Generator) -> tuple[int, int]:
    """Measure both qubits along ``axis``; returns ``(client_bit, server_bit)``."""
    if rho.dim != 4:
        raise InvalidStateError("pair measurement needs a two-qubit state")
    c, s = sample_pair_batch(rho.data[None], axis, rng)
    return int(c[0]), int(s[0])


def measure_qubit(rho: DensityMatrix, which: Literal["first", "second"], axis: Axis,
                  rng: np.random.Generator):
    """Local measurement of one qubit of a pair; returns ``(bit, post_pair_state)``."""
    if rho.dim != 4:
        raise InvalidStateError("measure_qubit needs a two-qubit state")
    P1 = axis_projector(axis, +1)
    lift = (lambda P: np.kron(P, I2)) if which == "first" else (lambda P: np.kron(I2, P))
    if which not in ("first", "second"):
        raise ParameterError("which must be 'first' or 'second'")
    p1 = born_probability(rho, lift(P1))
    bit = int(rng.random() < p1)
    P = lift(P1 if bit else axis_projector(axis, -1))
    return bit, _luders(rho.data, P)


def partial_trace(rho: DensityMatrix, keep: Literal["first", "second"]) -> DensityMatrix:
    if rho.dim != 4:
        raise InvalidStateError("partial trace needs a two-qubit state")
    return DensityMatrix(partial_trace_batch(rho.data, keep))


def fidelity_pure(rho: DensityMatrix, psi: DensityMatrix) -> float:
    """``<psi|rho|psi>`` for a rank-1 reference state ``psi``."""
    if rho.dim != psi.dim:
        raise InvalidStateError("states have different dimensions")
    w, v = np.linalg.eigh(psi.data)
    if abs(w[-1] - 1) > 1e-10:
        raise ParameterError("reference state is not pure")
    vec = v[:, -1]
    return float(min(max((vec.conj() @ rho.data @ vec).real, 0.0), 1.0))


def fidelity_maximally_mixed(rho: DensityMatrix) -> float:
    """Fidelity (squared convention) between ``I/2`` and a qubit state."""
    R = bloch_from_density(rho).norm()
    return 0.5 + 0.5 * math.sqrt(max(0.0, 1 - R * R))


# -- batch kernels ---------------------------------------------------------

def partial_trace_batch(a: np.ndarray, keep: str) -> np.ndarray:
    t = a.reshape(a.shape[:-2] + (2, 2, 2, 2))
    if keep == "first":
        return np.einsum("...ijkj->...ik", t)
    if keep == "second":
        return np.einsum("...ijil->...jl", t)
    raise ParameterError("keep must be 'first' or 'second'")


def born_batch(a: np.ndarray, P: np.ndarray) -> np.ndarray:
    """``Re Tr[P a]`` over leading batch dims."""
    return np.einsum("ij,...ji->...", P, a).real


def sample_bits(p1: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    return (rng.random(np.shape(p1)) < p1).astype(np.int8)


def sample_pair_batch(a: np.ndarray, axis: Axis, rng: np.random.Generator):
    """Joint ``axis (x) axis`` outcomes for a batch of two-qubit states."""
    probs = np.einsum("pij,...ji->...p", pair_projectors(axis), a).real
    probs = np.clip(probs, 0.0, None)
    cdf = np.cumsum(probs, axis=-1)
    u = rng.random(probs.shape[:-1])[..., None] * cdf[..., -1:]
    idx = np.minimum((u >= cdf).sum(axis=-1), 3)
    return (idx >> 1).astype(np.int8), (idx & 1).astype(np.int8)


def conjugate_batch(a: np.ndarray, U: np.ndarray) -> np.ndarray:
    """``U a U^dagger`` with broadcasting over leading dims of both."""
    return U @ a @ np.conj(np.swapaxes(U, -1, -2))
