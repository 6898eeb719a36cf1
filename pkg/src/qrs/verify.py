"""Random-sampling certification of Bell-pair fidelity.

Of ``4k`` two-qubit registers, ``k`` get an XX test, ``k`` a ZZ test, one
becomes the target and the remaining ``2k - 1`` are discarded.  A test passes
when both qubits give equal outcomes.  The target is kept when the number of
failed tests is at most ``2 k Delta``; the certified fidelity of the target is
then ``1 - epsilon + 3 Delta - 3 n_fail / (2k)`` with probability ``1 - delta``.

The engine is array-based: :func:`_run_tests` scores any number of independent
trials at once, and both :func:`run_sampling_test` and the protocol driver call
into it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import noise
from .errors import ConfigurationError, ParameterError
from .qcore import PHI_PLUS, DensityMatrix, fidelity_pure, sample_pair_batch

def required_k(epsilon: float, delta: float, Delta: float) -> int:
    """Sample size ``ceil(75 ln(2/delta) / (8 (epsilon - 3 Delta)^2))``."""
    _check_params(epsilon, delta, Delta)
    return math.ceil(75 * math.log(2 / delta) / (8 * (epsilon - 3 * Delta) ** 2))


def _check_params(epsilon, delta, Delta):
    if not 0 < epsilon <= 1:
        raise ParameterError(f"epsilon={epsilon!r} outside (0, 1]")
    if not 0 < delta <= 1:
        raise ParameterError(f"delta={delta!r} outside (0, 1]")
    if not 0 <= Delta < epsilon / 3:
        raise ParameterError(f"Delta={Delta!r} must satisfy 0 <= Delta < epsilon/3")


@dataclass(frozen=True)
class TestParams:
    """Test configuration.  ``k`` defaults to :func:`required_k`.

    Passing ``k`` explicitly is meant for desk-scale runs where epsilon is
    recovered from a chosen ``k`` (see :meth:`from_k`).
    """

    __test__ = False  # not a pytest class

    epsilon: float
    delta: float
    Delta: float = 0.0
    k: int | None = None

    def __post_init__(self):
        need = required_k(self.epsilon, self.delta, self.Delta)
        if self.k is None:
            object.__setattr__(self, "k", need)
        elif int(self.k) != self.k or self.k < 1:
            raise ParameterError("k must be a positive integer")

    @classmethod
    def from_k(cls, k: int, delta: float, Delta: float = 0.0) -> "TestParams":
        """Parameters whose epsilon is the smallest one certified by ``k``."""
        eps = 3 * Delta + math.sqrt(75 * math.log(2 / delta) / (8 * k))
        if eps > 1:
            raise ParameterError(f"k={k} is too small to certify any epsilon <= 1")
        return cls(eps, delta, Delta, k)

    @property
    def threshold(self) -> float:
        return 2 * self.k * self.Delta

    @property
    def n_registers(self) -> int:
        return 4 * self.k

    def to_json(self) -> dict:
        return {"epsilon": self.epsilon, "delta": self.delta, "Delta": self.Delta, "k": self.k}


@dataclass(frozen=True)
class RegisterPartition:
    x_set: np.ndarray
    z_set: np.ndarray
    target: int
    discarded: np.ndarray

    @property
    def k(self) -> int:
        return len(self.x_set)

    def role_of(self) -> np.ndarray:
        """Role per register index: 0 X test, 1 Z test, 2 target, 3 discard."""
        roles = np.full(4 * self.k, 3, dtype=np.int8)
        roles[self.x_set] = 0
        roles[self.z_set] = 1
        roles[self.target] = 2
        return roles


def partition_registers(k: int, rng: np.random.Generator) -> RegisterPartition:
    """Uniform random partition of ``0..4k-1`` (shuffle, then slice)."""
    if k < 1:
        raise ParameterError("k must be positive")
    perm = rng.permutation(4 * k)
    return RegisterPartition(perm[:k], perm[k:2 * k], int(perm[2 * k]), perm[2 * k + 1:])


def partition_batch(k: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` independent partitions as rows of permutations of ``0..4k-1``.

    Columns ``[:k]`` are the X set, ``[k:2k]`` the Z set, ``2k`` the target.
    """
    return rng.permuted(np.broadcast_to(np.arange(4 * k), (n, 4 * k)), axis=1)


def soundness_floor(epsilon: float, Delta: float, k: int, n_fail: int) -> float:
    """Certified target fidelity ``1 - epsilon + 3 Delta - 3 n_fail/(2k)`` (unclamped)."""
    if not 0 <= n_fail <= 2 * k:
        raise ParameterError("n_fail must lie in [0, 2k]")
    return 1 - epsilon + 3 * Delta - 3 * n_fail / (2 * k)


@dataclass(frozen=True)
class TestVerdict:
    __test__ = False

    n_fail: int
    accepted: bool
    fidelity_floor: float
    _target: DensityMatrix | None = field(default=None, repr=False, compare=False)

    def omniscient_target_state(self) -> DensityMatrix:
        """Simulator-only view of the unmeasured target register."""
        if self._target is None:
            raise ConfigurationError("target state was not retained")
        return self._target

    def to_json(self) -> dict:
        return {"n_fail": self.n_fail, "accepted": self.accepted, "fidelity_floor": self.fidelity_floor}


def verdict_for(params: TestParams, n_fail: int, target: DensityMatrix | None = None) -> TestVerdict:
    return TestVerdict(
        int(n_fail),
        bool(n_fail <= params.threshold),
        soundness_floor(params.epsilon, params.Delta, params.k, int(n_fail)),
        target,
    )


def _run_tests(x_states: np.ndarray, z_states: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Failure counts for batches of X-tested and Z-tested registers.

    ``x_states``/``z_states`` have shape ``(..., k, 4, 4)``; returns ``(...)``.
    """
    cx, sx = sample_pair_batch(x_states, "X", rng)
    cz, sz = sample_pair_batch(z_states, "Z", rng)
    return (cx != sx).sum(axis=-1) + (cz != sz).sum(axis=-1)


class NoisyBellSource:
    """Ideal Bell registers passed through a noise schedule.

    Usable as a plain ``index -> DensityMatrix`` callable, and through
    :meth:`states` for whole index arrays.
    """

    def __init__(self, sched: noise.NoiseSchedule, rng: np.random.Generator, n_registers: int | None = None):
        self.sched = sched
        self.rng = rng
        self.n_registers = n_registers

    def states(self, indices: np.ndarray) -> np.ndarray:
        indices = np.asarray(indices)
        if self.n_registers is not None and indices.size and indices.max() >= self.n_registers:
            raise ConfigurationError("register source exhausted")
        return noise.noisy_bell_batch(self.sched.draw(indices, self.rng))

    def __call__(self, index: int) -> DensityMatrix:
        return DensityMatrix(self.states(np.array([index]))[0])


RegisterSource = Callable[[int], DensityMatrix]


def _gather(source, indices: np.ndarray) -> np.ndarray:
    if hasattr(source, "states"):
        return source.states(indices)
    out = []
    for i in indices:
        rho = source(int(i))
        if rho is None:
            raise ConfigurationError(f"register source underflow at index {int(i)}")
        out.append(np.asarray(rho.data))
    return np.stack(out)


def run_sampling_test(params: TestParams, source, rng: np.random.Generator,
                      partition: RegisterPartition | None = None) -> TestVerdict:
    """One random-sampling test over ``4k`` registers drawn from ``source``.

    Only the tested registers and the target are materialized; discarded
    registers are never touched.  Raises :class:`ConfigurationError` if the
    source cannot supply an index.
    """
    k = params.k
    part = partition if partition is not None else partition_registers(k, rng)
    try:
        xs = _gather(source, part.x_set)
        zs = _gather(source, part.z_set)
        tgt = _gather(source, np.array([part.target]))[0]
    except (IndexError, StopIteration) as exc:
        raise ConfigurationError(f"register source underflow: {exc}") from None
    n_fail = int(_run_tests(xs, zs, rng))
    return verdict_for(params, n_fail, DensityMatrix(tgt))


@dataclass
class TrialBatch:
    """Outcomes of many independent sampling tests.

    ``target_fidelity`` is the fidelity of the realized target register.
    ``untested_fidelity`` is the fidelity of the target state averaged over the
    uniform choice of target among the ``2k`` untested registers, i.e. the
    fraction of clean registers among them; this is the quantity the
    certified floor bounds.
    """

    n_fail: np.ndarray
    accepted: np.ndarray
    floor: np.ndarray
    target_fidelity: np.ndarray
    untested_fidelity: np.ndarray


def run_sampling_trials(params: TestParams, sched: noise.NoiseSchedule, trials: int,
                        rng: np.random.Generator, chunk: int | None = None) -> TrialBatch:
    """Vectorized Monte-Carlo of ``trials`` tests on noisy ideal Bell registers.

    Each trial draws fresh noise for all ``4k`` registers and a fresh
    partition.  Pauli noise keeps every register in the Bell basis, so a
    register is clean (fidelity 1) exactly when its code is the identity.
    """
    k = params.k
    if chunk is None:
        chunk = max(1, min(trials, 200_000 // (4 * k)))
    fails, tfid, ufid = [], [], []
    done = 0
    while done < trials:
        n = min(chunk, trials - done)
        perm = partition_batch(k, n, rng)
        codes = sched.draw(perm, rng)
        states = noise.noisy_bell_batch(codes[:, : 2 * k])
        fails.append(_run_tests(states[:, :k], states[:, k:], rng))
        clean = codes[:, 2 * k:] == 0
        tfid.append(clean[:, 0].astype(float))
        ufid.append(clean.mean(axis=1))
        done += n
    n_fail = np.concatenate(fails)
    floor = 1 - params.epsilon + 3 * params.Delta - 3 * n_fail / (2 * k)
    return TrialBatch(n_fail, n_fail <= params.threshold, floor, np.concatenate(tfid), np.concatenate(ufid))


def serfling_tail(nu: float, N: int, K: int) -> float:
    """Tail ``exp(-2 nu^2 N K^2 / ((N + K)(K + 1)))`` for sampling ``K`` of ``N + K``."""
    if not 0 <= nu < 1:
        raise ParameterError("nu must lie in [0, 1)")
    if N < 1 or K < 1:
        raise ParameterError("N and K must be positive")
    return math.exp(-2 * nu * nu * N * K * K / ((N + K) * (K + 1)))


def serfling_nu(epsilon: float, Delta: float) -> float:
    return 2 * (epsilon - 3 * Delta) / 5


def joint_confidence(epsilon: float, Delta: float, k: int) -> float:
    """``q_X q_Z``: probability that both Serfling estimates hold."""
    nu = serfling_nu(epsilon, Delta)
    q_x = 1 - serfling_tail(nu, 3 * k, k)
    q_z = 1 - serfling_tail(nu, 2 * k, k)
    return q_x * q_z


def joint_confidence_relaxed(epsilon: float, Delta: float, k: int) -> float:
    """The weaker ``1 - 2 exp(-2 nu^2 k / 3)`` used to size ``k``."""
    nu = serfling_nu(epsilon, Delta)
    return 1 - 2 * math.exp(-2 * nu * nu * k / 3)


def target_fidelity(verdict: TestVerdict) -> float:
    """True ``<Phi+|rho_tgt|Phi+>`` of a verdict's target (simulation only)."""
    return fidelity_pure(verdict.omniscient_target_state(), PHI_PLUS)
