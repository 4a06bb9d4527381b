"""Quadrature error estimate versus true error as rel_tol shrinks.

Covers the three closed-form reference integrals and the static-limit
solenoid overlap (oracle q v.A). Output: CSV on stdout (or --out).
"""
import argparse
import csv
import math
import sys

import numpy as np

from overlap_action.experiments import quadrature_oracles
from overlap_action.lagrangian import l_int_overlap, standard_lagrangian
from overlap_action.quad3d import QuadratureConfig
from overlap_action.sources import IdealSolenoid, ParticleModel, ParticleState


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rel-tols", type=float, nargs="+", default=[1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8])
    ap.add_argument("--out")
    args = ap.parse_args(argv)

    sol = IdealSolenoid(np.zeros(3), np.array([0.0, 0.0, 1.0]), 1.0, 2 * math.pi)
    p = ParticleModel(1.0, 0.1)
    st = ParticleState(np.array([3.0, 0.0, 0.0]), np.array([0.0, 1e-5, 0.0]))
    std, _ = standard_lagrangian(p, st, [sol])

    rows = []
    for tol in args.rel_tols:
        cfg = QuadratureConfig(rel_tol=tol)
        results = list(quadrature_oracles(cfg))
        results.append(("solenoid_overlap_static_limit", l_int_overlap(p, st, sol, 0.0, cfg), std))
        for name, res, exact in results:
            err = abs(res.value - exact)
            rows.append({"integral": name, "rel_tol": format(tol, "g"), "value": format(res.value, ".17g"),
                         "error_estimate": format(res.error_estimate, ".6g"), "true_error": format(err, ".6g"),
                         "evaluations": res.evaluations, "bounded": err <= 2 * res.error_estimate})

    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    if args.out:
        fh.close()


if __name__ == "__main__":
    main()
