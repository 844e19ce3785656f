"""Solve the generalized kinetic equation for a small one-particle state with
both solvers and write the trajectories to CSV.

    python3 scripts/kinetic_trajectory.py --t 1.0 --dt 0.05 --out results/kinetic
"""
import argparse
import csv
import os
import warnings

import numpy as np

from artifact import hilbert
from artifact.dynamics import reference_fixture
from artifact.kinetic import solve_gqke


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--dt", type=float, default=0.05)
    p.add_argument("--norm", type=float, default=0.02)
    p.add_argument("--n-max", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="results/kinetic")
    args = p.parse_args()

    spec = reference_fixture()
    F = hilbert.random_density(2, np.random.default_rng(args.seed))
    F = args.norm * F / hilbert.trace_norm(F)
    os.makedirs(args.out, exist_ok=True)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rk = solve_gqke(spec, F, args.t, "timestep", args.n_max, dt=args.dt)
        ser = solve_gqke(spec, F, args.t, "series", args.n_max, times=rk.times)
    path = os.path.join(args.out, "gqke_trajectory.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "series_re01", "series_im01", "rk4_re01", "rk4_im01", "difference", "series_tail"])
        for t, a, b, tail in zip(rk.times, ser.F1, rk.F1, ser.tails):
            w.writerow([t, a[0, 1].real, a[0, 1].imag, b[0, 1].real, b[0, 1].imag,
                        hilbert.trace_norm(a - b), tail])
    print(f"wrote {path}; final difference {hilbert.trace_norm(ser.F1[-1] - rk.F1[-1]):.2e}, "
          f"RK4 Richardson estimate {rk.tails[-1]:.2e}")


if __name__ == "__main__":
    main()
