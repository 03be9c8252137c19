"""Decentralized consensus as a linearly constrained problem.

Twenty agents on a path graph each hold a private quadratic; the edge
incidence operator forces their copies to agree. APAPC runs in the
linear-constraint regime, first without and then with a small quadratic
regularizer, and the disagreement ||Kx - b|| is reported along the way.

    python3 demos/consensus_path.py
"""

import numpy as np

from apapc.harness import resolve_schedule, resolve_stepsizes
from apapc.problems import gen_consensus
from apapc.solvers import SolveConfig, run

for mu_g in (0.0, 0.01):
    p = gen_consensus(20, dim=2, mu_g=mu_g, seed=0, graph="path", f_cond=100.0)
    c = p.constants
    steps = resolve_stepsizes("apapc", p, {"rule": "corollary_C"})
    sched = resolve_schedule("apapc", p, "auto", steps)
    tr = run("apapc", p, SolveConfig(steps["gamma"], steps["tau"], sched, max_iters=4000))
    feas = np.sqrt(tr.column("feas_sq"))
    print(f"mu_g = {mu_g}: lambda+_min = {c['lam_min_plus']:.4f}, ||K||^2 = {c['op_norm_sq']:.3f}, "
          f"schedule = {sched.regime}, a_sharp = {sched.a_sharp:.3g}")
    for t in (0, 100, 1000, 4000):
        print(f"   t = {t:>5}: gap = {tr.records[t].lag_gap:.3e}, ||Kx - b|| = {feas[t]:.3e}")
    x = tr.final.x.reshape(20, 2)
    print(f"   spread of agent copies: {np.ptp(x, axis=0).max():.2e}; "
          f"consensus value {x.mean(axis=0).round(6)} vs reference {p.reference.x_star[:2].round(6)}")
