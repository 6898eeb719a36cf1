"""Client versus server: what each side learns about omega from the same rounds.

Runs the protocol with Pauli noise, then compares the client's RMS error with
an omniscient server that holds the best state a test at this epsilon lets
leak.  The bounds for both sides are printed next to the empirical numbers.
"""

import argparse
import math

import numpy as np

from qrs import bounds, noise, qcore
from qrs.bench.suites import rms_with_sigma
from qrs.protocol import client_estimate, leaked_server_state, ramsey_means, run_protocol
from qrs.rng import stream
from qrs.verify import TestParams


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--epsilon", type=float, default=0.1)
    ap.add_argument("--delta", type=float, default=0.5)
    ap.add_argument("--Delta", type=float, default=0.0)
    ap.add_argument("--omega", type=float, default=0.05)
    ap.add_argument("--M", type=int, default=200)
    ap.add_argument("--runs", type=int, default=50)
    ap.add_argument("--p-noise", type=float, default=1e-4, help="iid X/Z flip probability")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    params = TestParams(args.epsilon, args.delta, args.Delta)
    sched = noise.IidPauli(p_x=args.p_noise, p_z=args.p_noise)
    field = qcore.SensingField(args.omega, 1.0)
    est, aborts = [], 0
    for r in range(args.runs):
        run = run_protocol(args.M, params, sched, field, stream(args.seed, "demo", r), engine="batch")
        est.append(client_estimate(run))
        aborts += run.abort_count
    client_rms, client_sig = rms_with_sigma(np.array(est) - args.omega)

    b = leaked_server_state(args.epsilon)
    S = ramsey_means(qcore.density_from_bloch(b), field, args.M, args.runs, stream(args.seed, "demo", "server"))
    server_rms, server_sig = rms_with_sigma((2 * S - 1 - b.r_y) / b.r_x - args.omega)

    inp = bounds.BoundInputs(args.epsilon, args.M)
    print(f"k = {params.k} per round, abort rate {aborts / (args.runs * args.M):.4f}")
    print(f"client  rms {client_rms:.5f} +- {client_sig:.5f}   upper bound {bounds.client_upper(inp):.5f}")
    print(f"server  rms {server_rms:.5f} +- {server_sig:.5f}   lower bound {bounds.server_lower(inp):.5f}")
    print(f"plain Ramsey reference {1 / math.sqrt(args.M):.5f}")


if __name__ == "__main__":
    main()
