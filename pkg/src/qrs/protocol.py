"""Delegated Ramsey sensing between a client and an honest server.

One round:

1. client announces ``(epsilon, delta, Delta)``; server prepares ``4k`` Bell
   registers;
2. client picks the X set, Z set and target and announces them;
3. server sends the client-bound half of every register through the noisy
   channel, one at a time; tested registers are measured by both parties and
   the server reports its bit; the client measures its half of the target
   along X, obtaining the private bit ``s``;
4. client counts failures and either aborts or tells the server to proceed;
5. server lets its half of the target evolve for ``t`` and reads out along Y,
   reporting ``o``; the client keeps ``s XOR o``.

Bit conventions: ``o = 1`` for the ``(I + sigma_y)/2`` outcome; ``s = 0`` when
the client's qubit is found in ``|+>`` and ``s = 1`` for ``|->``, so that the
server qubit is left in ``Z^s |+>`` for an ideal pair and ``s XOR o`` is
distributed as the plain Ramsey readout.

Two drivers share these semantics.  :func:`run_round` executes the message
level state machines and keeps a transcript; ``run_protocol(engine="batch")``
simulates many rounds at once with array kernels for large-M statistics.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from . import noise, qcore
from .errors import ConfigurationError, EstimationError, ParameterError
from .qcore import BlochVector, DensityMatrix, SensingField
from .verify import TestParams, TestVerdict, _run_tests, partition_batch, partition_registers, verdict_for

CLIENT, SERVER = "client", "server"
ROLE_X, ROLE_Z, ROLE_TARGET, ROLE_DISCARD = 0, 1, 2, 3

_P_PLUS_X_CLIENT = np.kron(qcore.axis_projector("X", +1), qcore.I2)
_P_MINUS_X_CLIENT = np.kron(qcore.axis_projector("X", -1), qcore.I2)
_P_PLUS_Y = qcore.axis_projector("Y", +1)


class UnestimableError(EstimationError):
    """The assumed server state carries no phase information (``R_x = 0``)."""


# -- messages ---------------------------------------------------------------

@dataclass(frozen=True)
class AnnounceParams:
    epsilon: float
    delta: float
    Delta: float


@dataclass(frozen=True)
class SetSelection:
    x_set: tuple[int, ...]
    z_set: tuple[int, ...]
    target: int


@dataclass(frozen=True)
class QubitSent:
    register_index: int


@dataclass(frozen=True)
class TestOutcome:
    __test__ = False

    register_index: int
    bit: int
    party: str


@dataclass(frozen=True)
class Proceed:
    pass


@dataclass(frozen=True)
class ReadoutOutcome:
    o: int


@dataclass(frozen=True)
class Abort:
    n_fail: int


Message = AnnounceParams | SetSelection | QubitSent | TestOutcome | Proceed | ReadoutOutcome | Abort


class ProtocolError(ConfigurationError):
    """A party received a message that is illegal in its current state."""


# -- quantum plane ----------------------------------------------------------

class QuantumLink:
    """Joint two-qubit states of the registers shared by the parties.

    Each party may only act on its own qubit; the link keeps the joint state so
    local measurements update it correctly.
    """

    def __init__(self, sched: noise.NoiseSchedule, rng: np.random.Generator):
        self.sched = sched
        self.rng = rng
        # raw 4x4 arrays; states are validated when they leave the link
        self.registers: dict[int, np.ndarray] = {}
        self._pending: dict[int, int] = {}

    def prepare(self, n: int) -> None:
        self.registers = {i: qcore.PHI_PLUS.data for i in range(n)}

    def transmit(self, index: int) -> None:
        code = int(self.sched.draw(np.array([index]), self.rng)[0])
        if code:
            self.registers[index] = noise.apply_codes_batch(self.registers[index], np.int8(code))

    def measure_test(self, index: int, axis: str, party: str) -> int:
        """Local measurement of ``party``'s qubit of a tested register.

        Both parties use the same basis, so the pair outcome is sampled once on
        the first call and the partner's bit is handed out on the second.
        """
        if index in self._pending:
            return self._pending.pop(index)
        c, s = qcore.sample_pair_batch(self.registers.pop(index)[None], axis, self.rng)
        mine, other = (int(c[0]), int(s[0])) if party == CLIENT else (int(s[0]), int(c[0]))
        self._pending[index] = other
        return mine

    def measure_client_target(self, index: int) -> int:
        """Client's X measurement on the target; returns the eigenvalue bit (1 for ``|+>``)."""
        bit, post = qcore.measure_qubit(DensityMatrix(self.registers[index]), "first", "X", self.rng)
        self.registers[index] = post.data
        return bit

    def server_qubit(self, index: int) -> DensityMatrix:
        return DensityMatrix(qcore.partial_trace_batch(self.registers[index], "second"))

    def discard(self, index: int) -> None:
        self.registers.pop(index, None)


class Client:
    """Client state machine: init -> selected -> testing -> decided -> done."""

    def __init__(self, params: TestParams, rng: np.random.Generator):
        self.params = params
        self.rng = rng
        self.state = "init"
        self.partition = None
        self.roles = None
        self.my_bits: dict[int, int] = {}
        self.server_bits: dict[int, int] = {}
        self.received = 0
        self.s: int | None = None
        self.o: int | None = None
        self.n_fail: int | None = None

    def announce(self) -> AnnounceParams:
        self._expect("init")
        self.state = "announced"
        p = self.params
        return AnnounceParams(p.epsilon, p.delta, p.Delta)

    def select(self) -> SetSelection:
        self._expect("announced")
        self.partition = partition_registers(self.params.k, self.rng)
        self.roles = self.partition.role_of()
        self.state = "testing"
        part = self.partition
        return SetSelection(tuple(map(int, part.x_set)), tuple(map(int, part.z_set)), part.target)

    def on_qubit(self, msg: QubitSent, link: QuantumLink) -> TestOutcome | None:
        self._expect("testing")
        i = msg.register_index
        role = self.roles[i]
        self.received += 1
        if role in (ROLE_X, ROLE_Z):
            bit = link.measure_test(i, "X" if role == ROLE_X else "Z", CLIENT)
            self.my_bits[i] = bit
            return TestOutcome(i, bit, CLIENT)
        if role == ROLE_TARGET:
            self.s = 1 - link.measure_client_target(i)
        else:
            link.discard(i)
        return None

    def on_test_outcome(self, msg: TestOutcome) -> None:
        self._expect("testing")
        if msg.party != SERVER:
            raise ProtocolError("client expects server test outcomes")
        self.server_bits[msg.register_index] = msg.bit

    def decide(self) -> Proceed | Abort:
        self._expect("testing")
        if self.received != self.params.n_registers or len(self.server_bits) != 2 * self.params.k:
            raise ProtocolError("decision requested before all registers were tested")
        self.n_fail = sum(self.my_bits[i] != self.server_bits[i] for i in self.my_bits)
        if self.n_fail <= self.params.threshold:
            self.state = "decided"
            return Proceed()
        self.state = "aborted"
        return Abort(self.n_fail)

    def on_readout(self, msg: ReadoutOutcome) -> int:
        self._expect("decided")
        self.o = msg.o
        self.state = "done"
        return self.s ^ self.o

    def _expect(self, state):
        if self.state != state:
            raise ProtocolError(f"client in state {self.state!r}, expected {state!r}")


class Server:
    """Honest server state machine; it has no hooks to deviate."""

    def __init__(self, field: SensingField, link: QuantumLink, rng: np.random.Generator):
        self.field = field
        self.link = link
        self.rng = rng
        self.state = "init"
        self.k = None
        self.selection: SetSelection | None = None
        self.rho_qrs: DensityMatrix | None = None
        self.rho_marginal: DensityMatrix | None = None

    def on_announce(self, msg: AnnounceParams, k: int) -> None:
        self._expect("init")
        self.k = k
        self.link.prepare(4 * k)
        self.state = "prepared"

    def on_selection(self, msg: SetSelection) -> None:
        self._expect("prepared")
        if len(msg.x_set) != self.k or len(msg.z_set) != self.k:
            raise ProtocolError("selection sizes do not match k")
        self.selection = msg
        self._axis = {i: "X" for i in msg.x_set} | {i: "Z" for i in msg.z_set}
        self.state = "sending"

    def send(self, index: int) -> QubitSent:
        self._expect("sending")
        self.link.transmit(index)
        if index == self.selection.target:
            # reduced state before the client measures (simulation bookkeeping)
            self.rho_marginal = self.link.server_qubit(index)
        return QubitSent(index)

    def measure(self, index: int) -> TestOutcome | None:
        self._expect("sending")
        axis = self._axis.get(index)
        if axis is None:
            return None
        return TestOutcome(index, self.link.measure_test(index, axis, SERVER), SERVER)

    def on_proceed(self, msg: Proceed) -> ReadoutOutcome:
        self._expect("sending")
        self.rho_qrs = self.link.server_qubit(self.selection.target)
        evolved = qcore.evolve_phase(self.rho_qrs, self.field)
        o, _ = qcore.sample_outcome(evolved, "Y", self.rng)
        self.state = "done"
        return ReadoutOutcome(o)

    def on_abort(self, msg: Abort) -> None:
        self._expect("sending")
        self.state = "aborted"

    def _expect(self, state):
        if self.state != state:
            raise ProtocolError(f"server in state {self.state!r}, expected {state!r}")


# -- records ----------------------------------------------------------------

@dataclass(frozen=True)
class RoundRecord:
    verdict: TestVerdict
    s: int | None
    o: int | None
    aborted: bool
    transcript: tuple = field(default=(), repr=False, compare=False)
    _rho_qrs: DensityMatrix | None = field(default=None, repr=False, compare=False)
    _rho_marginal: DensityMatrix | None = field(default=None, repr=False, compare=False)

    @property
    def sensing_bit(self) -> int | None:
        return None if self.aborted else self.s ^ self.o

    def omniscient_server_qubit(self) -> DensityMatrix:
        """Server qubit just before evolution, conditioned on the client's outcome (simulation-only)."""
        if self._rho_qrs is None:
            raise ConfigurationError("server qubit was not retained")
        return self._rho_qrs

    def to_json(self, server_view: bool = False, index: int | None = None) -> dict:
        rec = {} if index is None else {"round": index}
        rec.update(self.verdict.to_json())
        rec["aborted"] = self.aborted
        rec["o"] = self.o
        if not server_view:
            rec["s"] = self.s
            rec["sensing_bit"] = self.sensing_bit
        rec["server_view"] = server_view
        return rec


def run_round(params: TestParams, sched: noise.NoiseSchedule, field: SensingField,
              rng: np.random.Generator) -> RoundRecord:
    """Execute one round of the message-level protocol."""
    client_rng, server_rng, link_rng = rng.spawn(3)
    link = QuantumLink(sched, link_rng)
    client = Client(params, client_rng)
    server = Server(field, link, server_rng)
    log: list[tuple[str, Message]] = []

    def post(sender, msg):
        log.append((sender, msg))
        return msg

    server.on_announce(post(CLIENT, client.announce()), params.k)
    server.on_selection(post(CLIENT, client.select()))
    for i in range(params.n_registers):
        sent = post(SERVER, server.send(i))
        mine = client.on_qubit(sent, link)
        if mine is not None:
            post(CLIENT, mine)
            client.on_test_outcome(post(SERVER, server.measure(i)))
    decision = post(CLIENT, client.decide())
    verdict = verdict_for(params, client.n_fail)
    if isinstance(decision, Abort):
        server.on_abort(decision)
        return RoundRecord(verdict, client.s, None, True, tuple(log))
    readout = post(SERVER, server.on_proceed(decision))
    client.on_readout(readout)
    return RoundRecord(verdict, client.s, readout.o, False, tuple(log), server.rho_qrs, server.rho_marginal)


# -- vectorized rounds ------------------------------------------------------

@dataclass
class RoundBatch:
    n_fail: np.ndarray
    accepted: np.ndarray
    s: np.ndarray
    o: np.ndarray
    server_bloch: np.ndarray  # (n, 3) server marginal before the client measures (omniscient)


def simulate_rounds(n: int, params: TestParams, sched: noise.NoiseSchedule, field: SensingField,
                    rng: np.random.Generator, chunk: int | None = None) -> RoundBatch:
    """``n`` independent rounds as arrays.  ``s``/``o`` are drawn for every round;
    callers mask aborted ones."""
    k = params.k
    if chunk is None:
        chunk = max(1, 100_000 // (2 * k + 1))
    U = qcore.z_rotation(field.phase)
    parts = []
    done = 0
    while done < n:
        m = min(chunk, n - done)
        used = partition_batch(k, m, rng)[:, : 2 * k + 1]
        states = noise.noisy_bell_batch(sched.draw(used, rng))
        n_fail = _run_tests(states[:, :k], states[:, k:2 * k], rng)
        tgt = states[:, 2 * k]
        p_plus = qcore.born_batch(tgt, _P_PLUS_X_CLIENT)
        plus = qcore.sample_bits(p_plus, rng).astype(bool)
        P = np.where(plus[:, None, None], _P_PLUS_X_CLIENT, _P_MINUS_X_CLIENT)
        post = P @ tgt @ P
        post /= np.trace(post, axis1=1, axis2=2).real[:, None, None]
        qrs = qcore.partial_trace_batch(post, "second")
        ev = qcore.conjugate_batch(qrs, U)
        o = qcore.sample_bits(qcore.born_batch(ev, _P_PLUS_Y), rng)
        acc = n_fail <= params.threshold
        marg = qcore.partial_trace_batch(tgt, "second")
        bloch = np.stack([2 * marg[:, 0, 1].real, -2 * marg[:, 0, 1].imag, (marg[:, 0, 0] - marg[:, 1, 1]).real], axis=1)
        parts.append((n_fail, acc, (~plus).astype(np.int8), o, bloch))
        done += m
    cols = [np.concatenate(c) for c in zip(*parts)]
    return RoundBatch(*cols)


# -- runs -------------------------------------------------------------------

@dataclass(frozen=True)
class ServerView:
    """What the server retains: its test bits, the abort flags and the ``o`` bits."""

    o: np.ndarray
    aborted: np.ndarray
    n_fail: np.ndarray
    t: float


@dataclass
class RunRecord:
    params: TestParams
    omega_true: float
    t: float
    n_fail: np.ndarray
    aborted: np.ndarray
    s: np.ndarray
    o: np.ndarray
    rounds_detail: list[RoundRecord] | None = field(default=None, repr=False)
    _qrs_mean: np.ndarray | None = field(default=None, repr=False)

    @property
    def M(self) -> int:
        return len(self.aborted)

    @property
    def accepted_count(self) -> int:
        return int((~self.aborted).sum())

    @property
    def abort_count(self) -> int:
        return int(self.aborted.sum())

    @property
    def sensing_bits(self) -> np.ndarray:
        ok = ~self.aborted
        return self.s[ok] ^ self.o[ok]

    @property
    def S_M(self) -> float:
        if self.accepted_count == 0:
            raise EstimationError("every round aborted")
        return float(self.sensing_bits.mean())

    @property
    def rounds(self) -> list[RoundRecord]:
        if self.rounds_detail is not None:
            return self.rounds_detail
        out = []
        for nf, ab, s, o in zip(self.n_fail, self.aborted, self.s, self.o):
            out.append(RoundRecord(verdict_for(self.params, int(nf)), int(s), None if ab else int(o), bool(ab)))
        return out

    def server_view(self) -> ServerView:
        ok = ~self.aborted
        return ServerView(self.o[ok].copy(), self.aborted.copy(), self.n_fail.copy(), self.t)

    def omniscient_server_state(self) -> DensityMatrix:
        """Server's reduced state averaged over accepted rounds, before the client measures (simulation-only)."""
        if self._qrs_mean is None:
            raise ConfigurationError("server states were not retained")
        return DensityMatrix(self._qrs_mean)

    def to_jsonl(self, server_view: bool = False) -> str:
        lines = [json.dumps(r.to_json(server_view, i), sort_keys=True) for i, r in enumerate(self.rounds)]
        return "\n".join(lines) + ("\n" if lines else "")


AbortPolicy = Literal["skip", "retry", "halt"]


def run_protocol(M: int, params: TestParams, sched: noise.NoiseSchedule, field: SensingField,
                 rng: np.random.Generator, *, engine: Literal["rounds", "batch"] = "rounds",
                 abort_policy: AbortPolicy = "skip", max_attempts: int | None = None) -> RunRecord:
    """Repeat the round ``M`` times with fresh registers and schedule cursor.

    ``abort_policy``: ``"skip"`` records aborted rounds and moves on,
    ``"retry"`` keeps drawing rounds until ``M`` are accepted (aborted
    attempts are still recorded), ``"halt"`` stops at the first abort.
    """
    if M < 1:
        raise ParameterError("M must be positive")
    if abort_policy not in ("skip", "retry", "halt"):
        raise ParameterError(f"unknown abort policy {abort_policy!r}")
    if max_attempts is None:
        max_attempts = 100 * M
    if engine == "rounds":
        run = _run_rounds(M, params, sched, field, rng, abort_policy, max_attempts)
    elif engine == "batch":
        run = _run_batch(M, params, sched, field, rng, abort_policy, max_attempts)
    else:
        raise ParameterError(f"unknown engine {engine!r}")
    if run.accepted_count == 0:
        raise EstimationError(f"all {run.M} rounds aborted")
    return run


def _run_rounds(M, params, sched, field, rng, policy, max_attempts):
    records = []
    accepted = 0
    while True:
        if policy == "retry":
            if accepted == M or len(records) >= max_attempts:
                break
        elif len(records) == M:
            break
        (sub,) = rng.spawn(1)
        rec = run_round(params, sched, field, sub)
        records.append(rec)
        accepted += not rec.aborted
        if rec.aborted and policy == "halt":
            break
    ok = [r for r in records if not r.aborted]
    qrs = sum(r._rho_marginal.data for r in ok) / len(ok) if ok else None
    return RunRecord(
        params, field.omega, field.t,
        np.array([r.verdict.n_fail for r in records]),
        np.array([r.aborted for r in records]),
        np.array([r.s for r in records], dtype=np.int8),
        np.array([-1 if r.o is None else r.o for r in records], dtype=np.int8),
        records, qrs,
    )


def _run_batch(M, params, sched, field, rng, policy, max_attempts):
    batches = [simulate_rounds(M, params, sched, field, rng)]
    if policy == "retry":
        while sum(int(b.accepted.sum()) for b in batches) < M and sum(len(b.s) for b in batches) < max_attempts:
            batches.append(simulate_rounds(M, params, sched, field, rng))
    cols = ("n_fail", "accepted", "s", "o", "server_bloch")
    n_fail, acc, s, o, bloch = (np.concatenate([getattr(b, f) for b in batches]) for f in cols)
    stop = len(acc)
    if policy == "retry":
        # keep attempts up to the M-th acceptance
        idx = np.flatnonzero(acc)
        if len(idx) >= M:
            stop = idx[M - 1] + 1
    elif policy == "halt":
        bad = np.flatnonzero(~acc)
        if len(bad):
            stop = bad[0] + 1
    n_fail, acc, s, o, bloch = n_fail[:stop], acc[:stop], s[:stop], o[:stop], bloch[:stop]
    o = np.where(acc, o, -1).astype(np.int8)
    qrs = None
    if acc.any():
        rx, ry, rz = bloch[acc].mean(axis=0)
        qrs = 0.5 * np.array([[1 + rz, rx - 1j * ry], [rx + 1j * ry, 1 - rz]])
    return RunRecord(params, field.omega, field.t, n_fail, ~acc, s, o, None, qrs)


# -- estimators -------------------------------------------------------------

def client_estimate(run: RunRecord) -> float:
    """``(2 S_M - 1)/t`` from the client's ``s XOR o`` bits."""
    return (2 * run.S_M - 1) / run.t


def server_estimate(view: ServerView | RunRecord, assumed_state: BlochVector) -> float:
    """Server's estimate from ``o`` bits alone, inverting ``P = (1 + R_y + R_x omega t)/2``."""
    if isinstance(view, RunRecord):
        view = view.server_view()
    if abs(assumed_state.r_x) < 1e-12:
        raise UnestimableError("assumed server state has R_x = 0; o bits carry no phase information")
    if len(view.o) == 0:
        raise EstimationError("no readout bits available")
    S = float(np.mean(view.o))
    return (2 * S - 1 - assumed_state.r_y) / (assumed_state.r_x * view.t)


def ramsey_means(initial: DensityMatrix, field: SensingField, M: int, runs: int,
                 rng: np.random.Generator) -> np.ndarray:
    """Mean Y-readout bit of ``M`` Ramsey repetitions from ``initial``, for ``runs`` runs.

    The count of ones over ``M`` independent identical measurements is
    binomial with the exact Born probability, so it is sampled directly.
    """
    p = qcore.born_probability(qcore.evolve_phase(initial, field), _P_PLUS_Y)
    return rng.binomial(M, p, size=runs) / M


def worst_case_client_state(epsilon: float) -> BlochVector:
    """Admissible ``rho_0`` that maximizes the client's bias: ``r_x = 1 - 2 eps``, ``r_y = 2 sqrt(eps - eps^2)``."""
    return BlochVector(1 - 2 * epsilon, 2 * math.sqrt(epsilon - epsilon**2), 0.0)


def leaked_server_state(epsilon: float) -> BlochVector:
    """Most informative server qubit allowed by ``F(I/2, rho) >= 1 - eps``: ``R_x = 2 sqrt(eps - eps^2)``."""
    return BlochVector(2 * math.sqrt(epsilon - epsilon**2), 0.0, 0.0)
