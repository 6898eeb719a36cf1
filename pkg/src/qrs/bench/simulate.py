"""``qrs simulate``: full protocol runs written as JSON-lines plus a summary CSV.

Outputs in the target directory:

``transcripts.jsonl``
    one line per round with the client's view (``s``, ``sensing_bit``).
``server_view.jsonl``
    the same rounds restricted to what the server sees.
``summary.csv``
    one row per run: estimates of the client, the omniscient server (knows its
    exact average state) and the marginal server (assumes ``I/2``).
"""

from __future__ import annotations

import io
import json
import math
import warnings
from pathlib import Path

from ..errors import ConfigurationError
from ..protocol import UnestimableError, client_estimate, run_protocol, server_estimate
from ..qcore import BlochVector, bloch_from_density
from ..rng import stream
from ..verify import TestParams
from .config import ExperimentConfig
from .curves import fmt
from .suites import ordered_map

UNESTIMABLE = "unestimable"
SUMMARY_COLUMNS = ("point", "run", "M", "k", "epsilon", "accepted", "aborts", "omega_true",
                   "client_estimate", "omniscient_server_estimate", "marginal_server_estimate")
MAXIMALLY_MIXED_BLOCH = BlochVector(0.0, 0.0, 0.0)


def sweep_points(cfg: ExperimentConfig) -> list[tuple[TestParams, int]]:
    """``(params, M)`` per sweep value; a single point when no sweep is set."""
    base = cfg.test_params()
    if cfg.sweep is None:
        return [(base, cfg.M)]
    var, vals = cfg.sweep.variable, cfg.sweep.values
    if var == "M":
        return [(base, int(m)) for m in vals]
    if var == "epsilon":
        return [(TestParams(float(e), base.delta, base.Delta), cfg.M) for e in vals]
    if var == "N":
        return [(TestParams.from_k(int(n) // 8, base.delta, base.Delta), cfg.M) for n in vals]
    raise ConfigurationError(f"simulate cannot sweep {var!r}")


def _estimate(fn, *args):
    try:
        return fn(*args)
    except UnestimableError:
        return UNESTIMABLE


def simulate(cfg: ExperimentConfig, out_dir=None) -> dict[str, Path]:
    """Run ``cfg.trials`` protocol runs per sweep point and write the three artifacts."""
    out = Path(out_dir or cfg.output_path or "simulate_out")
    f = cfg.sensing_field()
    if abs(f.phase) > 0.1:
        warnings.warn(f"|omega t| = {abs(f.phase):.3g} > 0.1: small-phase estimators are biased",
                      RuntimeWarning, stacklevel=2)
    sched = cfg.schedule()
    points = sweep_points(cfg)
    jobs = [(j, r) for j in range(len(points)) for r in range(cfg.trials)]

    def one(job):
        j, r = job
        params, M = points[j]
        return run_protocol(M, params, sched, f, stream(cfg.seed, "simulate", j, r),
                            engine=cfg.engine, abort_policy=cfg.abort_policy)

    runs = ordered_map(one, jobs)

    full, server, summary = io.StringIO(), io.StringIO(), io.StringIO()
    summary.write(",".join(SUMMARY_COLUMNS) + "\n")
    for (j, r), run in zip(jobs, runs):
        for i, rec in enumerate(run.rounds):
            for buf, sv in ((full, False), (server, True)):
                line = {"point": j, "run": r, **rec.to_json(sv, i)}
                buf.write(json.dumps(line, sort_keys=True) + "\n")
        omni = bloch_from_density(run.omniscient_server_state())
        row = (j, r, run.M, run.params.k, run.params.epsilon, run.accepted_count, run.abort_count,
               run.omega_true, client_estimate(run), _estimate(server_estimate, run, omni),
               _estimate(server_estimate, run, MAXIMALLY_MIXED_BLOCH))
        summary.write(",".join(fmt(v) for v in row) + "\n")

    out.mkdir(parents=True, exist_ok=True)
    paths = {}
    for name, buf in (("transcripts.jsonl", full), ("server_view.jsonl", server), ("summary.csv", summary)):
        p = out / name
        with open(p, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(buf.getvalue())
        paths[name] = p
    with open(out / "config.json", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(cfg.to_json(), sort_keys=True, indent=2) + "\n")
    paths["config.json"] = out / "config.json"
    return paths


def read_summary(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split(",")
        return [dict(zip(header, line.rstrip("\n").split(","))) for line in fh]


def rms_client_error(rows: list[dict]) -> float:
    errs = [float(r["client_estimate"]) - float(r["omega_true"]) for r in rows
            if r["client_estimate"] != UNESTIMABLE]
    return math.sqrt(sum(e * e for e in errs) / len(errs))

