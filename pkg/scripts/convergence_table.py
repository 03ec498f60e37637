"""Distance of z_n to the known limit along a schedule, for the two reference instances.

    python scripts/convergence_table.py [--length 30] [--out table.csv]
"""

import argparse
import csv
import sys

import numpy as np

from qviscosity.maps import Affine, ContractionToward, constant
from qviscosity.space import RegionSpec, Seminorm, SeminormFamily
from qviscosity.viscosity import Schedule, StoppingRule, run_implicit_scheme


def instances():
    rot = np.eye(3)
    rot[:2, :2] = [[0, -1], [1, 0]]
    yield (
        "neg_identity",
        Affine(-np.eye(2), modulus=1.0),
        constant([3.0, 0.0]),
        0.0,
        SeminormFamily((Seminorm.euclidean(2),)),
        RegionSpec.ball([0, 0], 10),
        np.zeros(2),
    )
    yield (
        "block_rotation",
        Affine(rot, modulus=1.0),
        ContractionToward([1.0, 2.0, 3.0], 0.5),
        0.5,
        SeminormFamily((Seminorm.euclidean(3),)),
        RegionSpec.ball(np.zeros(3), 10),
        np.array([0.0, 0.0, 3.0]),
    )


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--length", type=int, default=30, help="number of geometric indices n = 2^k")
    p.add_argument("--out", default=None)
    args = p.parse_args(argv)

    rows = []
    # keep going past the residual tolerance so the whole table is filled
    stop = StoppingRule(residual_tol=-1.0, stall_steps=10**9)
    sched = Schedule("harmonic", args.length, sampling="geometric")
    for name, T, f, beta, Q, C, limit in instances():
        traj = run_implicit_scheme(T, f, beta, sched, Q, C, stop=stop)
        for s in traj.steps:
            err = Q.max_value(s.z - limit)
            rows.append((name, s.n, s.eps, err, err / s.eps, s.inner_iterations))

    header = ["instance", "n", "eps", "error", "error_over_eps", "inner_iterations"]
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([r[0], r[1], f"{r[2]:.6g}", f"{r[3]:.6g}", f"{r[4]:.6g}", r[5]])
    if args.out:
        out.close()


if __name__ == "__main__":
    main()
