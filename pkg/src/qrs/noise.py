"""Pauli channels on the transmitted half of each Bell register.

A schedule maps a register index (0-based, restarting every round) to one of
four Pauli codes acting on the client-bound qubit::

    0 = I, 1 = X (bit flip), 2 = Z (phase flip), 3 = XZ (both; sigma_y up to phase)

Schedules are immutable; the register index is the caller's cursor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Union

import numpy as np

from .errors import ConfigurationError, ParameterError
from .qcore import I2, SX, SZ, DensityMatrix, bell_vector, conjugate_batch

LABELS = ("I", "X", "Z", "XZ")
_CODE = {"I": 0, "X": 1, "Z": 2, "XZ": 3, "Y": 3, "ZX": 3}

# (P (x) I) for each code
PAIR_OPS = np.stack([np.kron(P, I2) for P in (I2, SX, SZ, SX @ SZ)])

# (P (x) I)|Phi+> is the Bell state with Z-power i and X-power j
_BELL_IJ = {0: (0, 0), 1: (0, 1), 2: (1, 0), 3: (1, 1)}
NOISY_BELL = np.stack([np.outer(v, v.conj()) for v in (bell_vector(*_BELL_IJ[c]) for c in range(4))])

# probability that a register carrying this error fails its test, with X/Z
# tests equally likely: X errors flip only ZZ, Z errors only XX, XZ both
FAIL_RATE = np.array([0.0, 0.5, 0.5, 1.0])


def pauli_code(label: str) -> int:
    try:
        return _CODE[label.upper()]
    except KeyError:
        raise ParameterError(f"unknown Pauli label {label!r}") from None


@dataclass(frozen=True)
class Identity:
    def draw(self, indices, rng=None) -> np.ndarray:
        return np.zeros(np.shape(indices), dtype=np.int8)

    def to_json(self) -> dict:
        return {"kind": "identity"}


@dataclass(frozen=True)
class IidPauli:
    p_x: float = 0.0
    p_y: float = 0.0
    p_z: float = 0.0

    def __post_init__(self):
        ps = (self.p_x, self.p_y, self.p_z)
        if any(not 0 <= p <= 1 for p in ps) or sum(ps) > 1 + 1e-12:
            raise ParameterError(f"invalid Pauli probabilities {ps}")

    @property
    def probabilities(self) -> np.ndarray:
        """Probabilities of codes I, X, Z, XZ."""
        p = np.array([0.0, self.p_x, self.p_z, self.p_y])
        p[0] = max(0.0, 1 - p[1:].sum())
        return p

    @cached_property
    def _cdf(self) -> np.ndarray:
        return np.cumsum(self.probabilities)

    def draw(self, indices, rng) -> np.ndarray:
        u = rng.random(np.shape(indices))
        return np.minimum(np.searchsorted(self._cdf, u, side="right"), 3).astype(np.int8)

    def to_json(self) -> dict:
        return {"kind": "iid_pauli", "p_x": self.p_x, "p_y": self.p_y, "p_z": self.p_z}


@dataclass(frozen=True)
class PeriodicPauli:
    """Exactly one ``op`` error every ``period`` registers, first at ``offset``."""

    period: int
    op: str = "X"
    offset: int | None = None

    def __post_init__(self):
        if int(self.period) != self.period or self.period < 1:
            raise ParameterError("period must be a positive integer")
        if pauli_code(self.op) == 0:
            raise ParameterError("periodic op must be X, Z or XZ")
        if self.offset is None:
            object.__setattr__(self, "offset", self.period - 1)
        if not 0 <= self.offset < self.period:
            raise ParameterError("offset must lie in [0, period)")

    def draw(self, indices, rng=None) -> np.ndarray:
        idx = np.asarray(indices)
        hit = (idx % self.period) == self.offset
        return np.where(hit, pauli_code(self.op), 0).astype(np.int8)

    def to_json(self) -> dict:
        return {"kind": "periodic_pauli", "period": self.period, "op": self.op, "offset": self.offset}


@dataclass(frozen=True)
class Scripted:
    labels: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        codes = np.array([pauli_code(lab) for lab in self.labels], dtype=np.int8)
        object.__setattr__(self, "_codes", codes)

    def draw(self, indices, rng=None) -> np.ndarray:
        idx = np.asarray(indices)
        if idx.size and idx.max() >= len(self.labels):
            raise ConfigurationError(
                f"scripted schedule has {len(self.labels)} entries, register {int(idx.max())} requested"
            )
        return self._codes[idx]

    def to_json(self) -> dict:
        return {"kind": "scripted", "labels": list(self.labels)}


NoiseSchedule = Union[Identity, IidPauli, PeriodicPauli, Scripted]


def schedule_from_json(obj: dict) -> NoiseSchedule:
    """Build a schedule from its tagged JSON form (``{"kind": ..., ...}``)."""
    obj = dict(obj)
    kind = obj.pop("kind", None)
    try:
        if kind == "identity":
            return Identity()
        if kind == "iid_pauli":
            return IidPauli(**obj)
        if kind == "periodic_pauli":
            return PeriodicPauli(**obj)
        if kind == "scripted":
            return Scripted(tuple(obj["labels"]))
    except TypeError as exc:
        raise ConfigurationError(f"bad fields for noise kind {kind!r}: {exc}") from None
    raise ConfigurationError(f"unknown noise kind {kind!r}")


def apply_noise(rho_pair: DensityMatrix, register_index: int, sched: NoiseSchedule,
                rng: np.random.Generator | None = None) -> DensityMatrix:
    """Apply the scheduled Pauli to the client-bound qubit of one register."""
    if register_index < 0:
        raise ParameterError("register index must be non-negative")
    if rho_pair.dim != 4:
        raise ParameterError("noise acts on two-qubit registers")
    code = int(sched.draw(np.array([register_index]), rng)[0])
    if code == 0:
        return rho_pair
    return DensityMatrix(conjugate_batch(rho_pair.data, PAIR_OPS[code]))


def apply_codes_batch(states: np.ndarray, codes: np.ndarray) -> np.ndarray:
    return conjugate_batch(states, PAIR_OPS[codes])


def noisy_bell_batch(codes: np.ndarray) -> np.ndarray:
    """States of ideal Bell registers after the Paulis ``codes`` (exact lookup)."""
    return NOISY_BELL[codes]


def expected_fail_rate(sched: NoiseSchedule) -> float:
    """Per-register probability of failing its test, given the register is tested."""
    if isinstance(sched, Identity):
        return 0.0
    if isinstance(sched, IidPauli):
        return float(sched.probabilities @ FAIL_RATE)
    if isinstance(sched, PeriodicPauli):
        return float(FAIL_RATE[pauli_code(sched.op)]) / sched.period
    if isinstance(sched, Scripted):
        if not sched.labels:
            return 0.0
        return float(FAIL_RATE[sched._codes].mean())
    raise ConfigurationError(f"unsupported schedule {sched!r}")


def tolerated_period(k: int, Delta: float) -> int:
    """Smallest period whose errors can never push N_fail above ``2 k Delta``.

    With the default offset a periodic schedule puts ``floor(4k/period)`` errors
    into the ``4k`` registers; each fails at most one test, so requiring that
    count to be ``<= 2 k Delta`` makes acceptance certain.
    """
    if Delta <= 0:
        raise ParameterError("a periodic error needs Delta > 0 to be tolerated")
    budget = math.floor(2 * k * Delta)
    return math.floor(4 * k / (budget + 1)) + 1
