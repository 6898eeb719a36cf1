"""Monte-Carlo verification suites.

Each suite returns a :class:`SuiteResult` with its pass/fail flag and the
numbers behind it.  All randomness comes from ``rng.stream(seed, name, ...)``
so a suite's result depends only on its arguments and seed.
"""

from __future__ import annotations

import inspect
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .. import bounds, noise, qcore
from ..protocol import leaked_server_state, ramsey_means, run_protocol, simulate_rounds, worst_case_client_state
from ..qcore import SensingField
from ..errors import ConfigurationError
from ..rng import stream
from ..verify import TestParams, run_sampling_trials

# smallest admissible test: epsilon = delta = 1 gives k = 7
MINIMAL_PARAMS = TestParams(1.0, 1.0, 0.0)


@dataclass
class SuiteResult:
    name: str
    passed: bool
    checks: list[dict] = field(default_factory=list)

    def to_json(self) -> dict:
        return {"name": self.name, "passed": self.passed, "checks": self.checks}


def worker_count() -> int:
    env = os.environ.get("QRS_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def ordered_map(fn, items):
    """``map`` over a worker pool; results keep input order."""
    items = list(items)
    n = min(worker_count(), len(items)) or 1
    if n == 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def binomial_sigma(p: float, n: int) -> float:
    return math.sqrt(max(p * (1 - p), 0.0) / n)


def rms_with_sigma(errors: np.ndarray) -> tuple[float, float]:
    """RMS of ``errors`` and its delta-method standard error."""
    sq = np.asarray(errors, dtype=float) ** 2
    rms = math.sqrt(sq.mean())
    if rms == 0:
        return 0.0, 0.0
    return rms, float(sq.std(ddof=1) / (2 * rms * math.sqrt(len(sq))))


# -- completeness ------------------------------------------------------------

def completeness_suite(ks=(10, 50, 200), trials: int = 1000, delta: float = 0.05,
                       Delta: float = 0.0, seed: int = 0) -> SuiteResult:
    """Ideal Bell registers must be accepted in every trial.

    Acceptance depends only on ``2 k Delta``, so small ``k`` that certify no
    epsilon at this ``delta`` are run with ``epsilon = 1`` and explicit ``k``.
    """
    def one(k):
        params = TestParams(1.0, delta, Delta, k=k)
        tb = run_sampling_trials(params, noise.Identity(), trials, stream(seed, "theorem1", k))
        rate = float(tb.accepted.mean())
        return {"k": k, "trials": trials, "accept_rate": rate, "max_n_fail": int(tb.n_fail.max()),
                "passed": rate == 1.0}

    checks = ordered_map(one, ks)
    return SuiteResult("theorem1_completeness", all(c["passed"] for c in checks), checks)


# -- soundness ---------------------------------------------------------------

def soundness_battery(k: int, Delta: float) -> list[tuple[str, float, noise.NoiseSchedule]]:
    """Named ``(label, Delta, schedule)`` cases; each mixes noise with a tolerance."""
    n = 4 * k
    # both scripts put about 2 k Delta expected failures in the tested sets,
    # so roughly half the trials sit on either side of the threshold
    burst = ["XZ" if i < int(4 * k * Delta) else "I" for i in range(n)]
    gap = max(2, round(1 / Delta)) if Delta > 0 else n
    alternating = ["X" if i % gap == 0 else ("Z" if i % gap == gap // 2 else "I") for i in range(n)]
    return [
        ("identity", 0.0, noise.Identity()),
        ("iid_bitflip_1/2k", 0.0, noise.IidPauli(p_x=1 / (2 * k))),
        ("iid_y_1/(2k+1)", 0.0, noise.IidPauli(p_y=1 / (2 * k + 1))),
        ("iid_mixed", Delta, noise.IidPauli(0.01, 0.01, 0.01)),
        ("iid_x_at_tolerance", Delta, noise.IidPauli(p_x=2 * Delta)),
        ("periodic_xz_tolerated", Delta, noise.PeriodicPauli(noise.tolerated_period(k, Delta), "XZ")),
        ("periodic_x_1/Delta", Delta, noise.PeriodicPauli(math.ceil(1 / Delta), "X")),
        ("scripted_burst", Delta, noise.Scripted(tuple(burst))),
        ("scripted_alternating", Delta, noise.Scripted(tuple(alternating))),
    ]


def soundness_suite(ks=(200, 1000), trials: int = 10_000, delta: float = 0.05, Delta: float = 0.02,
                    seed: int = 0) -> SuiteResult:
    """Frequency of {accepted and target fidelity below the certified floor} <= delta + 3 sigma.

    The target fidelity is that of the target state averaged over the
    uniform target choice among the untested registers.
    """
    cases = [(k, *case) for k in ks for case in soundness_battery(k, Delta)]

    def one(case):
        k, label, D, sched = case
        params = TestParams.from_k(k, delta, D)
        tb = run_sampling_trials(params, sched, trials, stream(seed, "theorem2", k, label))
        bad = tb.accepted & (tb.untested_fidelity < tb.floor - 1e-12)
        freq = float(bad.mean())
        limit = delta + 3 * binomial_sigma(delta, trials)
        realized = float((tb.accepted & (tb.target_fidelity < tb.floor - 1e-12)).mean())
        return {"k": k, "schedule": label, "epsilon": params.epsilon, "Delta": D, "trials": trials,
                "accept_rate": float(tb.accepted.mean()), "violation_freq": freq, "limit": limit,
                "realized_target_violation_freq": realized,
                "passed": freq <= limit}

    checks = ordered_map(one, cases)
    return SuiteResult("theorem2_soundness", all(c["passed"] for c in checks), checks)


# -- client and server bounds --------------------------------------------

def client_dominance_suite(epsilons=(0.01, 0.05, 0.1), Ms=(100, 10_000), runs: int = 2000,
                           omega: float = 0.0, t: float = 1.0, seed: int = 0) -> SuiteResult:
    """Client's worst admissible state: RMS error <= client_upper (3 sigma)."""
    checks = []
    f = SensingField(omega, t)
    for eps in epsilons:
        rho0 = qcore.density_from_bloch(worst_case_client_state(eps))
        for M in Ms:
            S = ramsey_means(rho0, f, M, runs, stream(seed, "theorem3", int(eps * 1e6), M))
            rms, sig = rms_with_sigma((2 * S - 1) / t - omega)
            bound = bounds.client_upper(bounds.BoundInputs(eps, M, t))
            checks.append({"epsilon": eps, "M": M, "runs": runs, "rms": rms, "sigma": sig, "bound": bound,
                           "floor": bounds.client_floor(eps, t), "passed": rms <= bound + 3 * sig})
    return SuiteResult("theorem3_client_upper", all(c["passed"] for c in checks), checks)


def server_dominance_suite(epsilons=(0.01, 0.05, 0.1), Ms=(100, 10_000), runs: int = 2000,
                           omega: float = 0.0, t: float = 1.0, seed: int = 0) -> SuiteResult:
    """Omniscient server with the optimal leaked state: RMS error >= server_lower (3 sigma)."""
    checks = []
    f = SensingField(omega, t)
    for eps in epsilons:
        b = leaked_server_state(eps)
        rho = qcore.density_from_bloch(b)
        for M in Ms:
            S = ramsey_means(rho, f, M, runs, stream(seed, "theorem4", int(eps * 1e6), M))
            est = (2 * S - 1 - b.r_y) / (b.r_x * t)
            rms, sig = rms_with_sigma(est - omega)
            bound = bounds.server_lower(bounds.BoundInputs(eps, M, t))
            checks.append({"epsilon": eps, "M": M, "runs": runs, "rms": rms, "sigma": sig, "bound": bound,
                           "passed": rms >= bound - 3 * sig})
    return SuiteResult("theorem4_server_lower", all(c["passed"] for c in checks), checks)


def two_proportion_z(x1: int, n1: int, x2: int, n2: int) -> float:
    p = (x1 + x2) / (n1 + n2)
    se = math.sqrt(p * (1 - p) * (1 / n1 + 1 / n2))
    if se == 0:
        return 0.0
    return (x1 / n1 - x2 / n2) / se


def marginal_server_suite(omegas=(0.0, 0.2), rounds: int = 100_000, t: float = 1.0,
                          params: TestParams = MINIMAL_PARAMS, seed: int = 0, z_max: float = 5.0) -> SuiteResult:
    """Server-visible data (abort flags and o bits) must not depend on omega."""
    views = []
    for i, w in enumerate(omegas):
        rb = simulate_rounds(rounds, params, noise.Identity(), SensingField(w, t), stream(seed, "marginal", i))
        acc = rb.accepted
        views.append({"omega": w, "accepted": int(acc.sum()), "ones": int(rb.o[acc].sum()),
                      "o_freq": float(rb.o[acc].mean())})
    a, b = views[0], views[-1]
    z_o = two_proportion_z(a["ones"], a["accepted"], b["ones"], b["accepted"])
    z_acc = two_proportion_z(a["accepted"], rounds, b["accepted"], rounds)
    check = {"views": views, "z_o": z_o, "z_accept": z_acc, "z_max": z_max,
             "passed": abs(z_o) < z_max and abs(z_acc) < z_max}
    return SuiteResult("theorem4_marginal_server", check["passed"], [check])


# -- plain Ramsey baseline and Hoeffding coverage ---------------------------

def protocol_estimates(runs: int, M: int, field: SensingField, rng: np.random.Generator,
                       params: TestParams = MINIMAL_PARAMS, sched=None) -> np.ndarray:
    """Client estimates from ``runs`` independent ``M``-round protocol runs (skip policy)."""
    sched = sched if sched is not None else noise.Identity()
    rb = simulate_rounds(runs * M, params, sched, field, rng)
    bits = (rb.s ^ rb.o).reshape(runs, M).astype(float)
    acc = rb.accepted.reshape(runs, M)
    S = (bits * acc).sum(axis=1) / acc.sum(axis=1)
    return (2 * S - 1) / field.t


def ramsey_baseline_suite(omega: float = 0.05, t: float = 1.0, M: int = 10_000, runs: int = 500,
                          rel_tol: float = 0.2, seed: int = 0) -> SuiteResult:
    """Ideal protocol: RMS of the client estimate within ``rel_tol`` of ``1/(t sqrt M)``."""
    f = SensingField(omega, t)
    chunks = ordered_map(lambda i: protocol_estimates(max(1, runs // 10), M, f, stream(seed, "ramsey", i)),
                         range(10)) if runs >= 10 else [protocol_estimates(runs, M, f, stream(seed, "ramsey", 0))]
    est = np.concatenate(chunks)[:runs]
    rms, sig = rms_with_sigma(est - omega)
    ref = bounds.standard_uncertainty(M, t)
    check = {"omega": omega, "M": M, "runs": len(est), "rms": rms, "sigma": sig, "reference": ref,
             "passed": abs(rms - ref) <= rel_tol * ref}
    return SuiteResult("ramsey_baseline", check["passed"], [check])


def hoeffding_coverage_suite(s_tildes=(1.0, 2.0), runs: int = 10_000, M: int = 100, omega: float = 0.05,
                             t: float = 1.0, seed: int = 0) -> SuiteResult:
    """Frequency of ``|estimate - omega| > 2 s/(t sqrt M)`` stays below ``2 exp(-2 s^2)`` (3 sigma)."""
    f = SensingField(omega, t)
    est = protocol_estimates(runs, M, f, stream(seed, "hoeffding"))
    checks = []
    for s in s_tildes:
        half = bounds.hoeffding_standard(M, t, s)
        freq = float((np.abs(est - omega) > half).mean())
        level = 2 * math.exp(-2 * s * s)
        limit = level + 3 * binomial_sigma(level, runs)
        checks.append({"s_tilde": s, "M": M, "runs": runs, "half_width": half, "violation_freq": freq,
                       "limit": limit, "passed": freq <= limit})
    return SuiteResult("hoeffding_coverage", all(c["passed"] for c in checks), checks)


# -- circuit equivalence ------------------------------------------------------

_H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
_CZ = np.diag([1, 1, 1, -1]).astype(complex)


def circuit_probability(p_x: float, p_y: float, p_z: float, phase: float) -> float:
    """P(output = 1) of the equivalent circuit: H on the client qubit, CZ, discard, evolve, Y readout.

    The target register is the Pauli-channel image of ``|Phi+>`` on the
    client qubit.  Built from explicit matrices, independent of the protocol.
    """
    phi = np.array([1, 0, 0, 1], dtype=complex) / math.sqrt(2)
    rho_phi = np.outer(phi, phi)
    X, Y, Z, I = qcore.SX, qcore.SY, qcore.SZ, qcore.I2
    rho = sum(w * np.kron(P, I) @ rho_phi @ np.kron(P, I).conj().T
              for w, P in ((1 - p_x - p_y - p_z, I), (p_x, X), (p_y, Y), (p_z, Z)))
    HI = np.kron(_H, I)
    rho = _CZ @ HI @ rho @ HI.conj().T @ _CZ.conj().T
    server = rho.reshape(2, 2, 2, 2).trace(axis1=0, axis2=2)
    U = np.diag([np.exp(-0.5j * phase), np.exp(0.5j * phase)])
    ev = U @ server @ U.conj().T
    return float(np.trace((I + Y) / 2 @ ev).real)


# k = 1 keeps the message-level driver fast; with iid noise the target is
# independent of the tested registers, so k does not change s XOR o
EQUIVALENCE_PARAMS = TestParams(1.0, 1.0, 0.0, k=1)


def circuit_equivalence_suite(settings: int = 20, samples: int = 10_000, params: TestParams | None = None,
                              seed: int = 0, n_sigma: float = 4.0) -> SuiteResult:
    """``s XOR o`` from accepted message-level rounds vs the equivalent circuit."""
    params = params or EQUIVALENCE_PARAMS
    pick = stream(seed, "fig4", "settings")
    cases = []
    for i in range(settings):
        p = pick.dirichlet([1, 1, 1, 1]) * pick.uniform(0, 0.2)
        cases.append((i, float(p[0]), float(p[1]), float(p[2]), float(pick.uniform(-1.5, 1.5))))

    def one(case):
        i, px, py, pz, omega = case
        run = run_protocol(samples, params, noise.IidPauli(px, py, pz), SensingField(omega, 1.0),
                           stream(seed, "fig4", i), engine="rounds", abort_policy="retry")
        freq = float(run.sensing_bits.mean())
        p1 = circuit_probability(px, py, pz, omega)
        band = n_sigma * binomial_sigma(p1, samples)
        return {"setting": i, "p_x": px, "p_y": py, "p_z": pz, "omega": omega, "samples": run.accepted_count,
                "empirical": freq, "analytic": p1, "band": band, "passed": abs(freq - p1) <= band}

    checks = ordered_map(one, cases)
    return SuiteResult("fig4_equivalence", all(c["passed"] for c in checks), checks)


THEOREM_SUITES = {
    "theorem1": completeness_suite,
    "theorem2": soundness_suite,
    "theorem3": client_dominance_suite,
    "theorem4": server_dominance_suite,
    "theorem4_marginal": marginal_server_suite,
}

EXTRA_SUITES = {
    "ramsey": ramsey_baseline_suite,
    "hoeffding": hoeffding_coverage_suite,
    "fig4": circuit_equivalence_suite,
}


# -- qrs verify ---------------------------------------------------------------

DEFAULT_VERIFY_SUITES = ("theorem1", "theorem2", "theorem3", "theorem4", "theorem4_marginal")
ALL_SUITES = {**THEOREM_SUITES, **EXTRA_SUITES}

# seconds per simulated register, measured on one core and rounded up
COST_BATCH = 1.5e-6
COST_ROUNDS = 4e-4


class InfeasibleError(ConfigurationError):
    """The requested verification would exceed the time budget."""

    def __init__(self, estimate: float, budget: float):
        super().__init__(f"estimated runtime {estimate:.0f} s exceeds the budget of {budget:.0f} s; "
                         "reduce k, trials or rounds, or raise time_budget")
        self.estimate = estimate
        self.budget = budget


def _defaults(fn) -> dict:
    sig = inspect.signature(fn)
    return {k: p.default for k, p in sig.parameters.items() if p.default is not inspect.Parameter.empty}


def estimate_runtime(name: str, kwargs: dict | None = None) -> float:
    """Rough wall-clock seconds for one suite on a single core."""
    kw = {**_defaults(ALL_SUITES[name]), **(kwargs or {})}
    if name == "theorem1":
        return COST_BATCH * kw["trials"] * sum(2 * k + 1 for k in kw["ks"])
    if name == "theorem2":
        return len(soundness_battery(1, 0.5)) * COST_BATCH * kw["trials"] * sum(4 * k for k in kw["ks"])
    if name in ("theorem3", "theorem4"):
        return 1e-6 * len(kw["epsilons"]) * len(kw["Ms"]) * kw["runs"]
    if name == "theorem4_marginal":
        return COST_BATCH * len(kw["omegas"]) * kw["rounds"] * (2 * kw["params"].k + 1)
    if name == "ramsey":
        return COST_BATCH * kw["runs"] * kw["M"] * (2 * MINIMAL_PARAMS.k + 1)
    if name == "hoeffding":
        return COST_BATCH * kw["runs"] * kw["M"] * (2 * MINIMAL_PARAMS.k + 1)
    if name == "fig4":
        p = kw["params"] or EQUIVALENCE_PARAMS
        # retry policy: about 1.5 attempts per accepted sample at the noise levels drawn
        return COST_ROUNDS * 1.5 * kw["settings"] * kw["samples"] * p.n_registers
    raise ConfigurationError(f"unknown suite {name!r}")


def _suite_kwargs(cfg, name: str) -> dict:
    kw = dict(cfg.options.get(name, {}))
    if "params" in kw and isinstance(kw["params"], dict):
        kw["params"] = TestParams(**kw["params"])
    for key in ("ks", "epsilons", "Ms", "omegas", "s_tildes"):
        if key in kw:
            kw[key] = tuple(kw[key])
    if name in ("theorem1", "theorem2") and cfg.trials > 1:
        kw.setdefault("trials", cfg.trials)
    if name in ("theorem1", "theorem2") and kw.get("trials", 1000) < 1000:
        raise ConfigurationError(f"{name} needs at least 10^3 trials")
    kw["seed"] = cfg.seed
    return kw


def verify_theorems(cfg) -> dict:
    """Run the selected suites; refuses up front when the runtime estimate exceeds the budget."""
    names = tuple(cfg.options.get("suites", DEFAULT_VERIFY_SUITES))
    unknown = [n for n in names if n not in ALL_SUITES]
    if unknown:
        raise ConfigurationError(f"unknown suites {unknown}; choose from {sorted(ALL_SUITES)}")
    kwargs = {n: _suite_kwargs(cfg, n) for n in names}
    estimates = {n: estimate_runtime(n, kwargs[n]) for n in names}
    total = sum(estimates.values())
    if total > cfg.time_budget:
        raise InfeasibleError(total, cfg.time_budget)
    results = [ALL_SUITES[n](**kwargs[n]) for n in names]
    return {
        "seed": cfg.seed,
        "passed": all(r.passed for r in results),
        "estimated_runtime_s": {n: round(estimates[n], 3) for n in names},
        "suites": [r.to_json() for r in results],
    }
