"""Acceptance criteria, one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v -s`` or ``python3 tests/test_acceptance.py``.
"""

import contextlib
import json
import shutil
import subprocess
import sys

import mpmath
import pytest

from qrs import bounds
from qrs.bench import curves, suites
from qrs.bounds import BoundInputs
from qrs.verify import required_k

pytestmark = pytest.mark.slow


def report(capsys, n, ok, detail=""):
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
    with capsys.disabled():
        print("\n" + line, flush=True)
    assert ok, line


def _series(fig):
    out = {}
    for p in curves.emit_figure(fig):
        out.setdefault(p.series, []).append((p.x, p.y))
    return {s: sorted(v) for s, v in out.items()}


def _strictly(pts, increasing):
    ys = [y for _, y in pts if y != curves.INAPPLICABLE]
    pairs = list(zip(ys, ys[1:]))
    return len(ys) > 1 and all((b > a) if increasing else (b < a) for a, b in pairs)


def _k_oracle(eps, delta, Delta):
    mpmath.mp.dps = 50
    e, d, D = mpmath.mpf(eps), mpmath.mpf(delta), mpmath.mpf(Delta)
    return int(mpmath.ceil(75 * mpmath.log(2 / d) / (8 * (e - 3 * D) ** 2)))


def test_criterion_01_sample_size(capsys):
    vals = {(0.1, 7126), (0.3, 792)}
    exact = all(required_k(e, 1e-3, 0) == want == _k_oracle(e, 1e-3, 0) for e, want in vals)
    s = {k: dict(v) for k, v in _series(3).items()}
    bottom, middle, top = s["delta=0.001;Delta=0"], s["delta=1e-05;Delta=0"], s["delta=0.001;Delta=eps/10"]
    ordered = all(bottom[e] < middle[e] and bottom[e] < top[e] for e in bottom)
    report(capsys, 1, exact and ordered, f"k(0.1)={required_k(0.1, 1e-3, 0)} k(0.3)={required_k(0.3, 1e-3, 0)} "
           f"fig3 ordering={'ok' if ordered else 'broken'}")


def test_criterion_02_completeness(capsys):
    r = suites.completeness_suite(ks=(10, 50, 200), trials=1000)
    rates = ", ".join(f"k={c['k']}:{c['accept_rate']:.3f}" for c in r.checks)
    report(capsys, 2, r.passed, f"acceptance {rates}")


def test_criterion_03_soundness(capsys):
    r = suites.soundness_suite(ks=(200, 1000), trials=10_000, delta=0.05)
    n_sched = len({c["schedule"] for c in r.checks})
    worst = max(r.checks, key=lambda c: c["violation_freq"])
    ok = r.passed and n_sched >= 5
    report(capsys, 3, ok, f"{n_sched} schedules x 2 k, worst violation {worst['violation_freq']:.4f} "
           f"({worst['schedule']}, k={worst['k']}) vs limit {worst['limit']:.4f}")


def test_criterion_04_ramsey(capsys):
    r = suites.ramsey_baseline_suite(omega=0.05, t=1.0, M=10_000, runs=500, rel_tol=0.2)
    c = r.checks[0]
    report(capsys, 4, r.passed, f"rms={c['rms']:.5f} vs 0.01 (+-20%)")


def test_criterion_05_client_upper(capsys):
    r = suites.client_dominance_suite(epsilons=(0.01, 0.05, 0.1), Ms=(100, 10_000))
    far = next(c for c in r.checks if c["epsilon"] == 0.1 and c["M"] == 10_000)
    floor_ok = abs(far["rms"] - far["floor"]) <= 0.1 * far["floor"]
    worst = max(r.checks, key=lambda c: c["rms"] / c["bound"])
    report(capsys, 5, r.passed and floor_ok,
           f"max rms/bound={worst['rms'] / worst['bound']:.3f}; eps=0.1 M=1e4 rms={far['rms']:.4f} "
           f"floor={far['floor']:.4f}")


def test_criterion_06_server_lower(capsys):
    r = suites.server_dominance_suite(epsilons=(0.01, 0.05, 0.1), Ms=(100, 10_000))
    m = suites.marginal_server_suite(omegas=(0.0, 0.2), rounds=100_000, z_max=5)
    worst = min(r.checks, key=lambda c: c["rms"] / c["bound"])
    mc = m.checks[0]
    report(capsys, 6, r.passed and m.passed,
           f"min rms/bound={worst['rms'] / worst['bound']:.3f}; marginal z_o={mc['z_o']:.2f} "
           f"z_accept={mc['z_accept']:.2f}")


def test_criterion_07_headline_ratio(capsys):
    eps = bounds.epsilon_from_resources(10**8, 0.0, 1e-6)
    ratio = bounds.asymmetry_ratio(BoundInputs(eps, 1000, 1.0, delta=1e-6))
    mono = all(_strictly(v, True) for v in _series(6).values()) and all(
        _strictly(v, False) for v in _series(7).values())
    report(capsys, 7, ratio >= 5 and mono, f"ratio={ratio:.3f} at N=8e8 M=1000; fig6/7 monotone={mono}")


def test_criterion_08_hoeffding(capsys):
    exact = all(
        bounds.hoeffding_client_upper(BoundInputs(0.0, M, t, s)) == bounds.hoeffding_standard(M, t, s)
        for M in (1, 100, 400, 12345) for t in (0.5, 1.0, 3.0) for s in (0.6, 1.0, 2.0)
    )
    r = suites.hoeffding_coverage_suite(s_tildes=(1.0, 2.0), runs=10_000, M=100)
    mono = all(_strictly(v, True) for v in _series(8).values()) and all(
        _strictly(v, False) for v in _series(9).values())
    freqs = ", ".join(f"s={c['s_tilde']:g}:{c['violation_freq']:.4f}<={c['limit']:.4f}" for c in r.checks)
    report(capsys, 8, exact and r.passed and mono, f"reduction exact={exact}; coverage {freqs}; fig8/9 monotone={mono}")


def test_criterion_09_circuit_equivalence(capsys):
    r = suites.circuit_equivalence_suite(settings=20, samples=10_000, n_sigma=4)
    worst = max(r.checks, key=lambda c: abs(c["empirical"] - c["analytic"]) / c["band"])
    report(capsys, 9, r.passed, f"20 settings, worst |diff|/band="
           f"{abs(worst['empirical'] - worst['analytic']) / worst['band']:.2f}")


def _qrs(*args):
    exe = shutil.which("qrs")
    cmd = [exe] if exe else [sys.executable, "-m", "qrs.bench.cli"]
    proc = subprocess.run([*cmd, *args], capture_output=True)
    assert proc.returncode == 0, f"qrs {' '.join(args)} exited {proc.returncode}: {proc.stderr.decode()[-2000:]}"
    return proc


def test_criterion_10_determinism(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"M": 50, "trials": 3,
                               "noise": {"kind": "iid_pauli", "p_x": 0.02, "p_y": 0.01, "p_z": 0.02}}))
    vcfg = tmp_path / "verify.json"
    vcfg.write_text(json.dumps({"options": {"suites": ["theorem1", "theorem4_marginal"], "theorem1": {"ks": [10]},
                                            "theorem4_marginal": {"rounds": 2000}}}))
    out = tmp_path / "out"
    runs = []
    for _ in range(2):
        files = {}
        for fig in (3, 5, 6, 7, 8, 9):
            _qrs("curves", "--fig", str(fig), "--config", str(cfg), "--seed", "9", "--out", str(out / f"fig{fig}.csv"))
        _qrs("simulate", "--config", str(cfg), "--seed", "9", "--out", str(out / "sim"))
        v = _qrs("verify", "--config", str(vcfg), "--seed", "9", "--out", str(out / "verify.json"))
        files["verify.stdout"] = v.stdout
        for p in sorted(out.rglob("*")):
            if p.is_file():
                files[str(p.relative_to(out))] = p.read_bytes()
        shutil.rmtree(out)
        runs.append(files)
    a, b = runs
    same = a.keys() == b.keys() and all(a[k] == b[k] for k in a)
    report(capsys, 10, same, f"{len(a)} outputs byte-identical across two runs")


class _Direct:
    """Stand-in for pytest's capsys when run as a script."""

    @contextlib.contextmanager
    def disabled(self):
        yield


if __name__ == "__main__":
    import tempfile
    from pathlib import Path

    failed = 0
    tests = [v for k, v in sorted(globals().items()) if k.startswith("test_criterion_")]
    for fn in tests:
        try:
            if "tmp_path" in fn.__code__.co_varnames[: fn.__code__.co_argcount]:
                with tempfile.TemporaryDirectory() as tmp:
                    fn(Path(tmp), _Direct())
            else:
                fn(_Direct())
        except AssertionError:
            failed += 1
    sys.exit(1 if failed else 0)
