"""Acceptance suite: one check per convergence claim, with explicit bounds.

Each ``criterion_*`` function builds its instances, runs the engines with
diagnostics on, and returns a :class:`CriterionResult` holding the
measured quantities, the bounds they were compared against and the wall
time. ``run_suite`` executes all of them and prints one line per
criterion; it backs ``apapc verify`` and the acceptance tests.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import diagnostics as dg
from .harness import resolve_schedule, resolve_stepsizes, run_bench
from .problems import (
    gen_consensus,
    gen_flat_least_squares,
    gen_injective,
    gen_lasso_like,
    gen_linconstrained,
    gen_quadratic_regS,
    gen_strongly_convex,
)
from .schedules import MomentumSchedule
from .solvers import SolveConfig, initial_state, run, step_apapc, step_apgd, step_fista, step_papc, step_pgd

__all__ = ["CriterionResult", "CRITERIA", "run_suite"]

LYAP_RTOL = 1e-9
THM1_RTOL = 1e-8
THM2_RTOL = 1e-7
FIT_WINDOW = (100, 10_000)


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    measured: dict
    bounds: dict
    runtime: float = 0.0
    time_limit: float | None = None
    note: str = ""
    ineq: list = field(default_factory=list, repr=False)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        meas = ", ".join(f"{k}={_fmt(v)}" for k, v in self.measured.items())
        bnd = ", ".join(f"{k}={_fmt(v)}" for k, v in self.bounds.items())
        limit = f" (limit {self.time_limit:g}s)" if self.time_limit else ""
        return f"[{status}] C{self.number:<2} {self.name}: {meas} | bounds: {bnd} | {self.runtime:.2f}s{limit}"


def _fmt(v):
    if isinstance(v, bool) or v is None:
        return str(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.4g}"
    return str(v)


def _timed(fn):
    def wrapper(*args, **kwargs):
        start = time.perf_counter()
        res = fn(*args, **kwargs)
        res.runtime = time.perf_counter() - start
        if res.time_limit is not None and res.runtime >= res.time_limit:
            res.passed = False
            res.note += f" runtime {res.runtime:.1f}s over {res.time_limit:g}s"
        return res

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


# -- shared helpers --------------------------------------------------------------------------


@dataclass
class _RunInfo:
    trace: object
    schedule: MomentumSchedule | None
    gamma: float
    tau: float | None


def _apapc(problem, rule, nu=1.0, iters=10_000, schedule="auto", check="full_inequality"):
    steps = resolve_stepsizes("apapc", problem, {"rule": rule}, nu)
    sch = resolve_schedule("apapc", problem, schedule, steps, nu)
    cfg = SolveConfig(steps["gamma"], steps["tau"], sch, max_iters=iters, check_level=check,
                      ineq_rtol=THM2_RTOL, lyap_rtol=LYAP_RTOL)
    return _RunInfo(run("apapc", problem, cfg), sch, steps["gamma"], steps["tau"])


def _min_ratio(trace):
    return trace.min_slack_ratio


def _ineq_violations(trace):
    return sum(v.check == "step_inequality" for v in trace.violations)


def _lyap_violations(trace):
    return sum(v.check == "lyapunov" for v in trace.violations)


def _gap_bound_ratio(trace):
    """``max_t G(x^t,u^t) a_t^2 / E^0`` over ``t >= 1``."""
    G = trace.column("lag_gap")[1:]
    a = trace.column("a_t")[1:]
    return float(np.max(G * a * a) / trace.e0)


def _post_cap_window(trace, schedule, length=500, floor=1e-12):
    """Lyapunov values over ``[T0, T0 + length]`` above ``floor * E^0``.

    ``T0`` is the later of the first capped iteration and ``2 a_sharp``
    (the momentum warm-up).
    """
    T = schedule.cap_index(limit=len(trace.records))
    if T is None:
        return None, []
    start = max(T, int(math.ceil(2 * schedule.a_sharp)))
    lyap = trace.column("lyap")
    e0 = trace.e0
    vals = [lyap[t] for t in range(start, min(start + length, len(lyap) - 1) + 1) if lyap[t] > floor * e0]
    return start, vals


# -- criteria ---------------------------------------------------------------------------------

C1_SEEDS = range(10)


def _c1_runs():
    out = []
    for seed in C1_SEEDS:
        p = gen_lasso_like(50, 100, 0.1, seed=seed)
        sch = MomentumSchedule("apgd_sublinear", form="linear")
        cfg = SolveConfig(1.0 / p.f.L, schedule=sch, max_iters=10_000, check_level="full_inequality",
                          ineq_rtol=THM1_RTOL, lyap_rtol=LYAP_RTOL)
        out.append((p, run("apgd", p, cfg)))
    return out


@_timed
def criterion_1(cache=None) -> CriterionResult:
    """APGD primal bound ``Psi(x^t) - Psi* <= 2 L ||x0 - x*||^2 / (t+1)^2``."""
    runs = _c1_runs()
    worst = math.inf
    for p, tr in runs:
        t = tr.column("t")
        gap = tr.column("primal_gap")
        bound = 2.0 * p.f.L * float(p.reference.x_star @ p.reference.x_star) / (t + 1.0) ** 2
        worst = min(worst, float(np.min((bound - gap) / bound)))
    if cache is not None:
        cache["c1"] = runs
    return CriterionResult(1, "APGD O(1/t^2) primal bound", worst >= -1e-9,
                           {"min_rel_slack": worst, "instances": len(runs)}, {"min_rel_slack": -1e-9},
                           time_limit=10.0)


def _c2_run():
    p = gen_strongly_convex(50, 1e4, seed=0)
    sch = MomentumSchedule("apgd_capped", {"L_f": p.f.L, "mu_g": p.g.mu})
    cfg = SolveConfig(1.0 / p.f.L, schedule=sch, max_iters=8000, check_level="full_inequality",
                      ineq_rtol=THM1_RTOL, lyap_rtol=LYAP_RTOL)
    return p, sch, run("apgd", p, cfg)


@_timed
def criterion_2(cache=None) -> CriterionResult:
    """Capped APGD: contraction after the cap and iterations to ``1e-9 E^0``."""
    p, sch, tr = _c2_run()
    if cache is not None:
        cache["c2"] = (p, tr)
    bound = 1.0 / (1.0 + math.sqrt(p.g.mu / p.f.L)) + 0.01
    start, vals = _post_cap_window(tr, sch)
    factor, _ = dg.fit_linear_factor(vals)
    lyap = tr.column("lyap")
    hit = np.flatnonzero(lyap <= 1e-9 * tr.e0)
    hit = int(hit[0]) if hit.size else None
    predicted = sch.a_sharp * math.log(1e9)
    ratio = None if hit is None else hit / predicted
    ok = factor <= bound and ratio is not None and 1.0 / 3.0 <= ratio <= 3.0
    return CriterionResult(2, "APGD accelerated linear rate", ok,
                           {"contraction": factor, "window_start": start, "iters_to_eps": hit,
                            "ratio_to_a_sharp_log": ratio},
                           {"contraction": bound, "ratio": "[1/3, 3]"}, time_limit=10.0)


@_timed
def criterion_3(cache=None) -> CriterionResult:
    """Per-step APGD inequality on the runs of criteria 1 and 2."""
    cache = cache if cache is not None else {}
    runs = cache.get("c1") or _c1_runs()
    traces = [tr for _, tr in runs] + [(cache.get("c2") or _c2_run()[::2])[1]]
    worst = min(_min_ratio(tr) for tr in traces)
    bad = sum(_ineq_violations(tr) for tr in traces)
    steps = sum(len(tr.records) - 1 for tr in traces)
    return CriterionResult(3, "APGD single-step inequality", bad == 0 and worst >= -THM1_RTOL,
                           {"min_slack_over_scale": worst, "violations": bad, "steps_checked": steps},
                           {"min_slack_over_scale": -THM1_RTOL})


@_timed
def criterion_5(cache=None) -> CriterionResult:
    """Regime S, mu_g = 0: monotone Lyapunov, gap bound, O(1/t^2) gap."""
    p = gen_quadratic_regS(30, 20, 0.0, 100.0, seed=0)
    info = _apapc(p, "corollary_S")
    tr = info.trace
    _keep(cache, 5, tr)
    ratio = _gap_bound_ratio(tr)
    expo, _ = dg.fit_power_law(tr.column("t")[100:], tr.column("lag_gap")[100:], scale=tr.records[0].lag_gap)
    ok = _lyap_violations(tr) == 0 and ratio <= 1.0 + 1e-9 and expo <= -1.9
    return CriterionResult(5, "regime S sublinear", ok,
                           {"lyap_increases": _lyap_violations(tr), "max_gap_a2_over_E0": ratio, "gap_exponent": expo},
                           {"lyap_increases": 0, "max_gap_a2_over_E0": 1.0, "gap_exponent": -1.9}, time_limit=30.0)


@_timed
def criterion_6(cache=None) -> CriterionResult:
    """Regime S with mu_g = L_f/100: accelerated contraction after the cap."""
    p0 = gen_quadratic_regS(30, 20, 0.0, 100.0, seed=0)
    p = gen_quadratic_regS(30, 20, p0.f.L / 100.0, 100.0, seed=0)
    info = _apapc(p, "corollary_S", iters=4000)
    tr = info.trace
    _keep(cache, 6, tr)
    L, mu, nk = p.f.L, p.mu_g, p.constants["op_norm_sq"]
    bound = max(1 / (1 + math.sqrt(mu / L)), 1 / (1 + math.sqrt(mu * p.h.mu_conj) / math.sqrt(nk))) + 0.01
    start, vals = _post_cap_window(tr, info.schedule)
    factor, n = dg.fit_linear_factor(vals)
    ok = factor <= bound and _lyap_violations(tr) == 0
    return CriterionResult(6, "regime S linear rate", ok,
                           {"contraction": factor, "window_start": start, "ratios": n,
                            "lyap_increases": _lyap_violations(tr)},
                           {"contraction": bound}, time_limit=30.0)


def regime_b_instance():
    return gen_injective(30, mu_g=0.0, seed=0, weight=0.5, cond_f=1e3)


@_timed
def criterion_7(cache=None) -> CriterionResult:
    """Regime B: O(1/t^2) gap; dual distance O(1/t^2) (nu < 1) or O(1/t) (nu = 1)."""
    p = regime_b_instance()
    measured, ok = {}, True
    for nu, power in ((0.5, 2), (1.0, 1)):
        info = _apapc(p, "corollary_B", nu=nu)
        tr = info.trace
        _keep(cache, 7, tr)
        t = tr.column("t")
        q = tr.column("dist_v_sq") * t ** power
        w = (t >= FIT_WINDOW[0]) & (t <= FIT_WINDOW[1])
        growth = float(q[w].max() / q[FIT_WINDOW[0]])
        tag = f"nu={nu:g}"
        measured[f"{tag} v_growth"] = growth
        ok &= growth <= 10.0 and _lyap_violations(tr) == 0 and _gap_bound_ratio(tr) <= 1.0 + 1e-9
        if nu < 1:
            expo, _ = dg.fit_power_law(t[w], tr.column("lag_gap")[w], scale=tr.records[0].lag_gap)
            measured[f"{tag} gap_exponent"] = expo
            ok &= expo <= -1.9
        measured[f"{tag} lyap_increases"] = _lyap_violations(tr)
    return CriterionResult(7, "regime B sublinear", ok, measured,
                           {"gap_exponent": -1.9, "v_growth": 10.0}, time_limit=60.0)


def regime_c_instance():
    return gen_linconstrained(30, 15, 0.0, seed=0, n_dup=3)


@_timed
def criterion_8(cache=None) -> CriterionResult:
    """Regime C: monotone Lyapunov, gap and feasibility bounds, O(1/t) feasibility."""
    p = regime_c_instance()
    info = _apapc(p, "corollary_C")
    tr = info.trace
    _keep(cache, 8, tr)
    a = tr.column("a_t")[1:]
    feas = tr.column("feas_sq")
    feas_ratio = float(np.max(feas[1:] * a * info.tau / (2.0 * tr.e0)))
    t = tr.column("t")
    w = (t >= FIT_WINDOW[0]) & (t <= FIT_WINDOW[1])
    expo, _ = dg.fit_power_law(t[w], feas[w], scale=feas[1])
    ratio = _gap_bound_ratio(tr)
    ok = _lyap_violations(tr) == 0 and ratio <= 1 + 1e-9 and feas_ratio <= 1 + 1e-9 and expo <= -0.9
    return CriterionResult(8, "regime C sublinear", ok,
                           {"lyap_increases": _lyap_violations(tr), "max_gap_a2_over_E0": ratio,
                            "max_feas_a_tau_over_2E0": feas_ratio, "feas_exponent": expo,
                            "lam_min": p.constants["lam_min"], "lam_min_plus": p.constants["lam_min_plus"]},
                           {"max_gap_a2_over_E0": 1.0, "max_feas_a_tau_over_2E0": 1.0, "feas_exponent": -0.9},
                           time_limit=30.0)


def consensus_instance():
    # a path graph keeps lambda+/||K||^2 small, so the run is still far from
    # the roundoff floor once the momentum cap is reached
    return gen_consensus(20, 2, mu_g=0.01, seed=0, graph="path", f_cond=1e4)


@_timed
def criterion_9(cache=None) -> CriterionResult:
    """Regime C with mu_g > 0 on a consensus graph: contraction after the cap."""
    p = consensus_instance()
    info = _apapc(p, "corollary_C", iters=4000)
    tr = info.trace
    _keep(cache, 9, tr)
    L, mu, nk, lam = p.f.L, p.mu_g, p.constants["op_norm_sq"], p.constants["lam_min_plus"]
    bound = max(1 / (1 + math.sqrt(mu * lam / (8 * L * nk))), 1 / (1 + lam / (4 * nk))) + 0.01
    start, vals = _post_cap_window(tr, info.schedule)
    factor, n = dg.fit_linear_factor(vals)
    ok = factor <= bound and _lyap_violations(tr) == 0
    return CriterionResult(9, "regime C linear rate (consensus)", ok,
                           {"contraction": factor, "window_start": start, "ratios": n,
                            "lyap_increases": _lyap_violations(tr)},
                           {"contraction": bound}, time_limit=30.0)


def _keep(cache, number, trace):
    if cache is not None:
        cache.setdefault("apapc", []).append((number, trace))


@_timed
def criterion_4(cache=None) -> CriterionResult:
    """Per-step APAPC inequality on every APAPC run of criteria 5-9."""
    runs = (cache or {}).get("apapc")
    if not runs:
        sub = {}
        for fn in (criterion_5, criterion_6, criterion_7, criterion_8, criterion_9):
            fn(sub)
        runs = sub["apapc"]
    worst = min(_min_ratio(tr) for _, tr in runs)
    bad = sum(_ineq_violations(tr) for _, tr in runs)
    steps = sum(len(tr.records) - 1 for _, tr in runs)
    return CriterionResult(4, "APAPC single-step inequality", bad == 0 and worst >= -THM2_RTOL,
                           {"min_slack_over_scale": worst, "violations": bad, "runs": len(runs),
                            "steps_checked": steps},
                           {"min_slack_over_scale": -THM2_RTOL})


def _max_diff(traj_a, traj_b):
    return max(float(np.max(np.abs(a - b))) for a, b in zip(traj_a, traj_b))


@_timed
def criterion_10(cache=None) -> CriterionResult:
    """Reductions of APAPC/APGD/FISTA to simpler engines."""
    iters = 200
    measured = {}

    # (a) constant momentum: APAPC == PAPC
    p = gen_quadratic_regS(20, 15, 0.0, 100.0, seed=3)
    gamma = 1.0 / p.f.L
    tau = 1.0 / (gamma * p.constants["op_norm_sq"])
    s1 = s2 = initial_state(np.zeros(p.n), np.zeros(p.K.rows))
    da = 0.0
    for _ in range(iters):
        s1 = step_apapc(s1, p.f, 0.0, p.h, p.K, gamma, tau, 1.0)
        s2 = step_papc(s2, p.f, p.h, p.K, gamma, tau)
        da = max(da, float(np.max(np.abs(s1.x - s2.x))), float(np.max(np.abs(s1.u - s2.u))))
    measured["a_apapc_vs_papc"] = da

    # (b) K = I, tau = 1/gamma: APAPC == APGD with h in the role of g
    q = gen_lasso_like(30, 60, 0.1, seed=4)
    from .functions import L1Norm
    from .linops import LinearMap

    h = L1Norm(0.1)
    Id = LinearMap.identity(q.n)
    gamma = 1.0 / q.f.L
    a = MomentumSchedule("apgd_sublinear").materialize(iters + 1)[1:]
    s1 = initial_state(np.zeros(q.n), np.zeros(q.n))
    s2 = initial_state(np.zeros(q.n))
    db = 0.0
    for k in range(iters):
        s1 = step_apapc(s1, q.f, 0.0, h, Id, gamma, 1.0 / gamma, a[k])
        s2 = step_apgd(s2, q.f, h, gamma, a[k])
        db = max(db, float(np.max(np.abs(s1.x - s2.x))), float(np.max(np.abs(s1.z - s2.z))))
    measured["b_apapc_vs_apgd"] = db

    # (c) a = 1: APGD == PGD
    s1 = s2 = initial_state(np.zeros(q.n))
    dc = 0.0
    for _ in range(iters):
        s1 = step_apgd(s1, q.f, q.g, gamma, 1.0)
        s2 = step_pgd(s2, q.f, q.g, gamma)
        dc = max(dc, float(np.max(np.abs(s1.x - s2.x))))
    measured["c_apgd_vs_pgd"] = dc

    # (d) g = 0: FISTA == APGD
    from .functions import Zero

    r = gen_strongly_convex(30, 100, seed=5, f_cond=100)
    zero = Zero()
    gamma = 1.0 / r.f.L
    s1 = s2 = initial_state(np.zeros(r.n))
    dd = 0.0
    for k in range(iters):
        s1 = step_fista(s1, r.f, zero, gamma, s1.a_t, a[k])
        s2 = step_apgd(s2, r.f, zero, gamma, a[k])
        dd = max(dd, float(np.max(np.abs(s1.x - s2.x))))
    measured["d_fista_vs_apgd"] = dd

    bounds = {"a": 1e-12, "b": 1e-10, "c": 1e-12, "d": 1e-12}
    ok = da <= 1e-12 and db <= 1e-10 and dc <= 1e-12 and dd <= 1e-12
    return CriterionResult(10, "reduction identities", ok, measured, bounds, time_limit=5.0)


@_timed
def criterion_11(cache=None, iters: int = 100_000) -> CriterionResult:
    """Point convergence on instances with a continuum of minimizers."""
    measured, ok = {}, True
    cases = []
    p = gen_flat_least_squares(40, 25, seed=0)
    sch = MomentumSchedule("apgd_sublinear")
    cases.append(("apgd", p, SolveConfig(1.0 / p.f.L, schedule=sch, max_iters=iters, check_level="off",
                                         keep_states="last")))
    q = gen_linconstrained(30, 10, 0.0, seed=1, n_dup=2, flat=5)
    steps = resolve_stepsizes("apapc", q, {"rule": "corollary_C"})
    sq = resolve_schedule("apapc", q, "auto", steps)
    cases.append(("apapc", q, SolveConfig(steps["gamma"], steps["tau"], sq, max_iters=iters, check_level="off",
                                          keep_states="last")))
    for alg, prob, cfg in cases:
        yx = []
        checkpoints = {}
        marks = {iters // 8, iters // 4, iters // 2, iters}

        def cb(prev, new, yx=yx, checkpoints=checkpoints, marks=marks):
            yx.append(float(np.linalg.norm(new.y - prev.x)) * new.a_t)
            if new.t in marks:
                checkpoints[new.t] = new.x.copy()

        cfg.callback = cb
        tr = run(alg, prob, cfg)
        dist = prob.dist_to_solution_set(tr.final.x)
        yx = np.array(yx)
        head = yx[: iters // 10].max()
        tail = yx[iters // 10:].max()
        cauchy = [float(np.linalg.norm(checkpoints[2 * k] - checkpoints[k])) for k in (iters // 8, iters // 4, iters // 2)]
        measured[f"{alg} dist"] = dist
        measured[f"{alg} yx_tail/head"] = tail / head
        measured[f"{alg} cauchy_last"] = cauchy[-1]
        ok &= dist <= 1e-5 and tail <= 10.0 * head
    return CriterionResult(11, "point convergence (nonunique minimizers)", ok, measured,
                           {"dist": 1e-5, "yx_tail/head": 10.0}, time_limit=120.0)


@_timed
def criterion_12(cache=None) -> CriterionResult:
    """Bench orderings: APGD beats PGD; APAPC beats PAPC when L_f/mu_g >= 100."""
    rows = []
    for seed in range(5):
        prob = {"name": "strongly_convex", "n": 40, "cond": 1e3, "seed": seed}
        for alg in ("apgd", "pgd"):
            rows.append({"name": f"sc{seed}-{alg}", "problem": prob, "algorithm": alg, "max_iters": 40_000,
                         "check_level": "off"})
        prob = {"name": "quadratic_regS", "n": 30, "m": 20, "mu_g": 0.01, "cond_f": 1e4, "seed": seed}
        for alg in ("apapc", "papc"):
            rows.append({"name": f"S{seed}-{alg}", "problem": prob, "algorithm": alg, "max_iters": 40_000,
                         "check_level": "off"})
    res = {r["name"]: r for r in run_bench({"epsilon": 1e-9, "rows": rows})}
    wins_a = wins_b = 0
    detail = {}
    for seed in range(5):
        fast, slow = res[f"sc{seed}-apgd"]["iterations_to_eps"], res[f"sc{seed}-pgd"]["iterations_to_eps"]
        wins_a += fast is not None and (slow is None or fast < slow)
        fast2, slow2 = res[f"S{seed}-apapc"]["iterations_to_eps"], res[f"S{seed}-papc"]["iterations_to_eps"]
        wins_b += fast2 is not None and (slow2 is None or fast2 < slow2)
        if seed == 0:
            detail = {"apgd": fast, "pgd": slow, "apapc": fast2, "papc": slow2}
    measured = {"apgd_wins": wins_a, "apapc_wins": wins_b, **{f"seed0 {k}": v for k, v in detail.items()}}
    return CriterionResult(12, "bench orderings", wins_a == 5 and wins_b == 5, measured,
                           {"apgd_wins": 5, "apapc_wins": 5})


CRITERIA = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
    9: criterion_9,
    10: criterion_10,
    11: criterion_11,
    12: criterion_12,
}

FAST = (1, 2, 3, 5, 6, 7, 8, 9, 4, 10, 12)
FULL = FAST + (11,)


def run_suite(level: str = "fast", printer=None) -> list[CriterionResult]:
    """Run the suite (``fast`` omits the 1e5-iteration point-convergence check)."""
    order = FULL if level == "full" else FAST
    cache: dict = {}
    results = []
    for k in order:
        res = CRITERIA[k](cache)
        results.append(res)
        if printer is not None:
            printer(res.line())
    results.sort(key=lambda r: r.number)
    return results
