#!/usr/bin/env python3
"""Coordinate descent: alternate a QP in x with the closed-form t update.

Each outer iteration solves min_x c'x + (omega/2t) x'Qx + (omega/2) t at the
current t, then sets t = sqrt(x'Qx).  The t sequence is monotone (it
approaches the optimal scale from whichever side it started on), and every
QP after the first is warm-started from the previous optimal basis, so late
iterations cost no simplex pivots at all.
"""

import numpy as np

from conicqp import CdOptions, solve_cd
from conicqp.generate import GenSpec, gen_cardinality

inst = gen_cardinality(GenSpec(family="cardinality", n=100, r=10, alpha=0.2,
                               omega=2.0, seed=12))

res = solve_cd(inst)
print(f"status     : {res.status.value} ({res.stop_reason})")
print(f"objective  : {res.objective:.10f}")
print(f"t*         : {res.t:.10f}")
print(f"kkt resid  : {res.kkt.residual_inf:.2e}")
print(f"QPs solved : {res.qp_count}, total pivots: {res.pivot_count}")

print("\n iter        t_i          g(t_i)    pivots")
for k, ((t_i, g), piv) in enumerate(zip(res.trace, res.qp_pivots[1:]), 1):
    print(f"  {k:3d}  {t_i:12.8f}  {g:14.9f}  {piv:6d}")
print("(the first LP solve took", res.qp_pivots[0], "pivots; the tail is nearly free)")

# monotonicity: start far below and far above the optimal scale
lo = solve_cd(inst, CdOptions(t0=0.01 * res.t))
hi = solve_cd(inst, CdOptions(t0=100.0 * res.t))
print("\nfrom t0 = 0.01 t*: t sequence", " -> ".join(f"{t:.4f}" for t, _ in lo.trace[:5]), "...")
print("from t0 = 100  t*: t sequence", " -> ".join(f"{t:.4f}" for t, _ in hi.trace[:5]), "...")
print("both land on t* =", f"{lo.t:.8f}", "/", f"{hi.t:.8f}")
