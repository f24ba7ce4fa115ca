#!/usr/bin/env python3
"""A small benchmark sweep: both convex drivers over a seeded instance cell.

Mirrors what the ``conicqp bench`` command does, as a library call: five
seeds per cell, mean time / simplex iterations / QP counts per method.  The
same sweep at larger n shows the point of the approach: iteration counts
barely move as the tolerance tightens or the dimension grows, because warm
starts absorb the extra work.
"""

import time

from conicqp import solve_bisection, solve_cd
from conicqp.generate import GenSpec, gen_cardinality

print(" n    method    time_s   #pivots   #QP   objective")
for n in (100, 200, 400):
    rows = {"cd": [], "bisect": []}
    for seed in range(5):
        inst = gen_cardinality(GenSpec(family="cardinality", n=n, r=20,
                                       alpha=0.1, omega=2.0, seed=seed))
        for method, solver in (("cd", solve_cd), ("bisect", solve_bisection)):
            t0 = time.perf_counter()
            res = solver(inst)
            rows[method].append((time.perf_counter() - t0, res.pivot_count,
                                 res.qp_count, res.objective))
    for method, data in rows.items():
        k = len(data)
        t = sum(d[0] for d in data) / k
        piv = sum(d[1] for d in data) / k
        qp = sum(d[2] for d in data) / k
        obj = sum(d[3] for d in data) / k
        print(f"{n:4d}  {method:7s}  {t:7.3f}  {piv:8.0f}  {qp:4.0f}   {obj:.4f}")
