"""Iteration engines.

Each ``step_*`` function is pure: it takes a :class:`SolverState` and
returns a new one. :func:`run` drives an engine over a
:class:`~apapc.problems.ProblemInstance`, evaluates the diagnostics
requested by ``check_level`` after every step and collects a
:class:`Trace`.

The APAPC step keeps the operation order of the PAPC and APGD steps so
that the reductions ``a = 1`` (PAPC) and ``K = I, tau = 1/gamma``
(APGD) hold to rounding error.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import diagnostics as dg
from .errors import ConfigurationError, IterationError, VerificationError
from .functions import AffineIndicator, ProxTerm, SmoothTerm, recover_conj_subgradient
from .linops import LinearMap
from .schedules import MomentumSchedule

__all__ = [
    "SolverState",
    "SolveConfig",
    "Trace",
    "Violation",
    "ALGORITHMS",
    "initial_state",
    "step_pgd",
    "step_apgd",
    "step_fista",
    "step_papc",
    "step_cv",
    "step_apapc",
    "check_preconditions",
    "run",
]

ALGORITHMS = ("pgd", "apgd", "fista", "papc", "cv", "apapc")
CHECK_LEVELS = ("off", "lyapunov", "full_inequality")

# relative slack on stepsize preconditions, so that values computed as
# exactly 1/L_f or 1/(gamma ||K||^2) are not rejected over one ulp
_PRE_RTOL = 1e-12
_EPS = float(np.finfo(float).eps)


@dataclass(frozen=True, eq=False)
class SolverState:
    """Iterate of any engine.

    Purely primal engines leave ``u``/``v`` as None. ``y``, ``z_hat`` and
    ``conj_subgrad`` are the auxiliary points of the step that produced
    this state (None at ``t = 0``).
    """

    t: int
    x: np.ndarray
    z: np.ndarray
    a_t: float
    u: np.ndarray | None = None
    v: np.ndarray | None = None
    y: np.ndarray | None = None
    z_hat: np.ndarray | None = None
    conj_subgrad: np.ndarray | None = None


def initial_state(x0, u0=None, a0: float = 1.0) -> SolverState:
    x0 = np.array(x0, dtype=float)
    u0 = None if u0 is None else np.array(u0, dtype=float)
    return SolverState(0, x0, x0.copy(), float(a0), u0, None if u0 is None else u0.copy())


def _check_a(a_next):
    if not a_next >= 1.0:
        raise IterationError(f"momentum value a_(t+1) = {a_next} < 1")


# -- primal engines --------------------------------------------------------------------------


def step_pgd(state: SolverState, f: SmoothTerm, g: ProxTerm, gamma: float) -> SolverState:
    """``x+ = prox_{gamma g}(x - gamma grad f(x))``."""
    x = state.x
    xn = g.prox(gamma, x - gamma * f.grad(x))
    return SolverState(state.t + 1, xn, xn, 1.0, y=x)


def step_apgd(state: SolverState, f: SmoothTerm, g: ProxTerm, gamma: float, a_next: float) -> SolverState:
    """One accelerated proximal gradient step with momentum ``a_next``."""
    _check_a(a_next)
    x, z = state.x, state.z
    w = 1.0 / a_next
    y = (1.0 - w) * x + w * z
    zn = g.prox(a_next * gamma, z - a_next * gamma * f.grad(y))
    xn = (1.0 - w) * x + w * zn
    return SolverState(state.t + 1, xn, zn, a_next, y=y)


def step_fista(state: SolverState, f: SmoothTerm, g: ProxTerm, gamma: float, a_t: float | None = None,
               a_next: float = 1.0) -> SolverState:
    """One FISTA step: prox-gradient at ``y``, then ``z+ = z + a_next (x+ - y)``.

    ``a_t`` is accepted for signature symmetry; the update depends on it
    only through the stored ``(x, z)``.
    """
    _check_a(a_next)
    x, z = state.x, state.z
    w = 1.0 / a_next
    y = (1.0 - w) * x + w * z
    xn = g.prox(gamma, y - gamma * f.grad(y))
    zn = z + a_next * (xn - y)
    return SolverState(state.t + 1, xn, zn, a_next, y=y)


# -- primal-dual engines ------------------------------------------------------------------


def step_papc(state: SolverState, f: SmoothTerm, h: ProxTerm, K: LinearMap, gamma: float, tau: float) -> SolverState:
    """One PAPC step."""
    Km = K.matrix
    x, u = state.x, state.u
    w = x - gamma * f.grad(x)
    x_hat = w - gamma * (Km.T @ u)
    K_xhat = Km @ x_hat
    un = h.conj_prox(tau, u + tau * K_xhat)
    xn = w - gamma * (Km.T @ un)
    cs = _conj_subgrad(h, un, u, K_xhat, tau)
    return SolverState(state.t + 1, xn, xn, 1.0, un, un, y=x, z_hat=x_hat, conj_subgrad=cs)


def step_cv(state: SolverState, f: SmoothTerm, g: ProxTerm, h: ProxTerm, K: LinearMap, gamma: float,
            tau: float) -> SolverState:
    """One Condat-Vu step."""
    Km = K.matrix
    x, u = state.x, state.u
    xn = g.prox(gamma, x - gamma * f.grad(x) - gamma * (Km.T @ u))
    un = h.conj_prox(tau, u + tau * (Km @ (2.0 * xn - x)))
    return SolverState(state.t + 1, xn, xn, 1.0, un, un, y=x)


def _conj_subgrad(h, v_next, v, K_zhat, s):
    if isinstance(h, AffineIndicator):
        # dh* is the constant b, no need to recover it through cancellation
        return h.b
    return recover_conj_subgradient(v_next, v, K_zhat, s)


def step_apapc(state: SolverState, f: SmoothTerm, mu_g: float, h: ProxTerm, K: LinearMap, gamma: float,
               tau: float, a_next: float, simplified_affine: bool = False) -> SolverState:
    """One APAPC step for ``g = (mu_g/2)||x||^2``.

    With ``simplified_affine`` (``h`` an affine indicator) the dual prox is
    written out as ``v + (tau/a)(K z_hat - b)``.
    """
    _check_a(a_next)
    Km = K.matrix
    x, z, u, v = state.x, state.z, state.u, state.v
    a = a_next
    w = 1.0 / a
    y = (1.0 - w) * x + w * z
    ag = a * gamma
    shrink = 1.0 + ag * mu_g
    p = z - ag * f.grad(y)
    z_hat = (p - ag * (Km.T @ v)) / shrink
    s = tau / a
    K_zhat = Km @ z_hat
    if simplified_affine:
        if not isinstance(h, AffineIndicator):
            raise ConfigurationError("simplified_affine needs an affine indicator h", "simplified_affine")
        vn = v + s * (K_zhat - h.b)
    else:
        vn = h.conj_prox(s, v + s * K_zhat)
    zn = (p - ag * (Km.T @ vn)) / shrink
    xn = (1.0 - w) * x + w * zn
    un = (1.0 - w) * u + w * vn
    cs = _conj_subgrad(h, vn, v, K_zhat, s)
    return SolverState(state.t + 1, xn, zn, a, un, vn, y=y, z_hat=z_hat, conj_subgrad=cs)


# -- configuration ---------------------------------------------------------------------------


@dataclass
class SolveConfig:
    """Run parameters.

    Parameters
    ----------
    gamma, tau : float
        Primal and dual stepsizes (``tau`` ignored by primal engines).
    schedule : MomentumSchedule, optional
        Momentum sequence for ``apgd``, ``fista`` and ``apapc``.
    max_iters : int
    stop_gap : float, optional
        Stop as soon as the tracked gap falls below this value.
    check_level : {"off", "lyapunov", "full_inequality"}
    strict : bool
        Raise :class:`VerificationError` on the first violated check.
    lyap_rtol, ineq_rtol : float
        Tolerances for Lyapunov monotonicity and per-step inequalities.
    keep_states : {"all", "last"}
    callback : callable, optional
        ``callback(prev, state)`` after every step.
    perturb : callable, optional
        ``perturb(state) -> state`` applied after every step; test hook.
    final_pgd_polish : bool
        Append one PGD step after an APGD/FISTA run.
    """

    gamma: float
    tau: float | None = None
    schedule: MomentumSchedule | None = None
    max_iters: int = 1000
    stop_gap: float | None = None
    check_level: str = "lyapunov"
    strict: bool = False
    lyap_rtol: float = 1e-9
    ineq_rtol: float | None = None
    x0: np.ndarray | None = None
    u0: np.ndarray | None = None
    keep_states: str = "all"
    callback: Callable | None = None
    perturb: Callable | None = None
    final_pgd_polish: bool = False
    simplified_affine: bool = False

    def __post_init__(self):
        if self.check_level not in CHECK_LEVELS:
            raise ConfigurationError(f"check_level must be one of {CHECK_LEVELS}", "check_level")
        if self.keep_states not in ("all", "last"):
            raise ConfigurationError("keep_states must be 'all' or 'last'", "keep_states")
        if not self.gamma > 0:
            raise ConfigurationError(f"gamma must be positive, got {self.gamma}", "gamma")
        if self.tau is not None and not self.tau > 0:
            raise ConfigurationError(f"tau must be positive, got {self.tau}", "tau")
        if int(self.max_iters) < 0:
            raise ConfigurationError("max_iters must be >= 0", "max_iters")


@dataclass(frozen=True)
class Violation:
    t: int
    check: str
    slack: float
    scale: float


@dataclass
class Trace:
    algorithm: str
    states: list = field(default_factory=list)
    records: list = field(default_factory=list)
    violations: list = field(default_factory=list)
    e0: float = math.nan
    wall_time: float = 0.0
    stopped_early: bool = False

    @property
    def final(self) -> SolverState:
        return self.states[-1]

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    @property
    def lyapunov_monotone(self) -> bool:
        return not any(v.check == "lyapunov" for v in self.violations)

    @property
    def min_slack_ratio(self) -> float:
        """Smallest ``ineq_slack / scale`` seen (``inf`` when unchecked)."""
        return getattr(self, "_min_ratio", math.inf)


def _op_norm_sq(problem) -> float:
    return problem.constants["op_norm_sq"]


def check_preconditions(algorithm: str, problem, cfg: SolveConfig, a0: float) -> None:
    """Reject stepsizes that void the convergence guarantee of ``algorithm``."""
    L = problem.f.L
    gamma, tau = cfg.gamma, cfg.tau
    tol = 1.0 + _PRE_RTOL
    if algorithm == "pgd" and not gamma < 2.0 / L:
        raise ConfigurationError(f"PGD needs gamma < 2/L_f: gamma = {gamma:.6g}, 2/L_f = {2 / L:.6g}", "gamma")
    if algorithm in ("apgd", "fista") and gamma > tol / L:
        raise ConfigurationError(f"{algorithm} needs gamma <= 1/L_f: gamma = {gamma:.6g} > {1 / L:.6g}", "gamma")
    if algorithm in ("papc", "cv", "apapc"):
        if problem.K is None:
            raise ConfigurationError(f"{algorithm} needs a problem with an operator K", "problem")
        if tau is None:
            raise ConfigurationError(f"{algorithm} needs tau", "tau")
        nk = _op_norm_sq(problem)
        prod = gamma * tau * nk
        if algorithm == "papc":
            Lp = L + problem.mu_g
            if not gamma < 2.0 / Lp:
                raise ConfigurationError(f"PAPC needs gamma < 2/L: gamma = {gamma:.6g}", "gamma")
            if prod > tol:
                raise ConfigurationError(f"PAPC needs gamma*tau*||K||^2 <= 1, got {prod:.6g}", "tau")
        elif algorithm == "cv":
            lhs = gamma * (L / 2.0 + tau * nk)
            if lhs > tol:
                raise ConfigurationError(f"CV needs gamma (L_f/2 + tau ||K||^2) <= 1, got {lhs:.6g}", "tau")
        else:
            bound = 1.0 + a0 * gamma * problem.mu_g
            if prod > bound * tol:
                raise ConfigurationError(
                    f"gamma*tau*||K||^2 = {prod:.6g} > 1 + a0*gamma*mu_g = {bound:.6g}", "tau"
                )
            if gamma > tol / L:
                raise ConfigurationError(f"APAPC needs gamma <= 1/L_f: gamma = {gamma:.6g}", "gamma")
    elif algorithm not in ALGORITHMS:
        raise ConfigurationError(f"unknown algorithm {algorithm!r}", "algorithm")
    if algorithm in ("apgd", "fista", "apapc") and cfg.schedule is None:
        raise ConfigurationError(f"{algorithm} needs a momentum schedule", "schedule")
    if algorithm in ("pgd", "apgd", "fista") and problem.K is not None:
        raise ConfigurationError(f"{algorithm} runs on primal-only problems", "problem")


# -- diagnostics plumbing ----------------------------------------------------------------------


class _Monitor:
    """Per-iteration diagnostics for one run."""

    def __init__(self, algorithm, problem, cfg):
        self.alg = algorithm
        self.p = problem
        self.cfg = cfg
        self.ref = problem.reference
        self.enabled = cfg.check_level != "off" or cfg.stop_gap is not None
        self.full = cfg.check_level == "full_inequality"
        base = cfg.schedule.regime.replace("_capped", "") if cfg.schedule is not None else None
        if algorithm in ("pgd", "apgd"):
            self.lyap_kind = "apgd"
        elif algorithm == "apapc" and base in ("regS", "regB", "regC"):
            self.lyap_kind = base
        else:
            self.lyap_kind = None
        self.ineq = "apgd" if algorithm in ("pgd", "apgd") else ("apapc" if algorithm == "apapc" else None)
        if cfg.ineq_rtol is not None:
            self.ineq_rtol = cfg.ineq_rtol
        else:
            self.ineq_rtol = 1e-8 if self.ineq == "apgd" else 1e-7
        self.regC = problem.regime_tag == "regC"
        self.e0 = math.nan
        self.min_ratio = math.inf

    # gaps are tracked per state and reused by the step inequality
    def gap(self, s):
        p, ref = self.p, self.ref
        if p.K is None:
            return dg.primal_gap(ref, s.x, p.f, p.g)
        return dg.lagrangian_gap(ref, s.x, s.u, p.f, p.mu_g, p.h, p.K)

    def record(self, s, gap) -> dg.TraceRecord:
        p, ref = self.p, self.ref
        rec = dg.TraceRecord(s.t, s.a_t, lag_gap=gap)
        dz = s.z - ref.x_star
        rec.dist_z_sq = float(dz @ dz)
        if p.K is None:
            rec.primal_gap = gap
        else:
            rec.primal_gap = p.primal_gap(s.x)
            dv = s.v - ref.u_star
            rec.dist_v_sq = float(dv @ dv)
            if self.regC:
                r = p.K.matrix @ s.x - p.h.b
                rec.feas_sq = float(r @ r)
        rec.lyap = self.lyapunov(s, gap, rec.feas_sq)
        return rec

    def lyapunov(self, s, gap, feas_sq):
        p, cfg, ref = self.p, self.cfg, self.ref
        k = self.lyap_kind
        if k is None:
            return math.nan
        if k == "apgd":
            return dg.lyapunov_apgd(ref, s.z, gap, cfg.gamma, p.g.mu, s.a_t)
        if k == "regS":
            return dg.lyapunov_regS(ref, s.z, s.v, gap, cfg.gamma, cfg.tau, p.mu_g, p.h.mu_conj, p.K, s.a_t)
        lam = cfg.schedule.params["lam"]
        return dg.lyapunov_regBC(ref, s.z, s.v, gap, cfg.gamma, cfg.tau, p.mu_g, lam, p.f.L, p.K, s.a_t,
                                 feas_sq if k == "regC" else None)

    def step_check(self, prev, nxt, gap_prev, gap_next):
        p, cfg, ref = self.p, self.cfg, self.ref
        if self.ineq == "apgd":
            return dg.check_step_inequality_apgd(prev, nxt, ref, gap_prev, gap_next, cfg.gamma, p.f.mu,
                                                 p.g.mu, p.f.L, nxt.a_t)
        return dg.check_step_inequality_apapc(prev, nxt, ref, gap_prev, gap_next, cfg.gamma, cfg.tau, p.mu_g,
                                              p.h.mu_conj, p.f, p.K, nxt.a_t)


def _stepper(algorithm, problem, cfg):
    f, K, h = problem.f, problem.K, problem.h
    gamma, tau = cfg.gamma, cfg.tau
    if algorithm == "pgd":
        g = problem.g
        return lambda s, a: step_pgd(s, f, g, gamma)
    if algorithm == "apgd":
        g = problem.g
        return lambda s, a: step_apgd(s, f, g, gamma, a)
    if algorithm == "fista":
        g = problem.g
        return lambda s, a: step_fista(s, f, g, gamma, s.a_t, a)
    if algorithm == "papc":
        fp = problem.f_with_mu()
        return lambda s, a: step_papc(s, fp, h, K, gamma, tau)
    if algorithm == "cv":
        g = problem.g
        return lambda s, a: step_cv(s, f, g, h, K, gamma, tau)
    mu_g, simp = problem.mu_g, cfg.simplified_affine
    return lambda s, a: step_apapc(s, f, mu_g, h, K, gamma, tau, a, simp)


def run(algorithm: str, problem, config: SolveConfig) -> Trace:
    """Run ``algorithm`` on ``problem``.

    Deterministic given the problem and configuration. Diagnostics are
    evaluated after each step according to ``config.check_level``:
    ``lyapunov`` records gaps, distances and the Lyapunov value and flags
    increases of the latter beyond ``lyap_rtol``; ``full_inequality``
    additionally evaluates the single-step inequality and stores its
    slack. Violations are collected in the trace; with ``strict`` the
    first one raises :class:`VerificationError`.
    """
    if algorithm not in ALGORITHMS:
        raise ConfigurationError(f"unknown algorithm {algorithm!r}", "algorithm")
    cfg = config
    schedule = cfg.schedule.fresh() if cfg.schedule is not None else None
    a0 = schedule.next() if schedule is not None else 1.0
    check_preconditions(algorithm, problem, cfg, a0)
    n = problem.n
    x0 = np.zeros(n) if cfg.x0 is None else np.asarray(cfg.x0, dtype=float)
    if algorithm in ("papc", "cv", "apapc"):
        u0 = np.zeros(problem.K.rows) if cfg.u0 is None else np.asarray(cfg.u0, dtype=float)
    else:
        u0 = None
    if algorithm in ("pgd", "papc", "cv"):
        a0 = 1.0
    state = initial_state(x0, u0, a0)
    step = _stepper(algorithm, problem, cfg)
    mon = _Monitor(algorithm, problem, cfg)
    trace = Trace(algorithm)
    trace.states.append(state)

    start = time.perf_counter()
    gap = math.nan
    if mon.enabled:
        gap = mon.gap(state)
        rec = mon.record(state, gap)
        trace.records.append(rec)
        trace.e0 = rec.lyap
        mon.e0 = rec.lyap

    def flag(t, check, slack, scale):
        trace.violations.append(Violation(t, check, slack, scale))
        if cfg.strict:
            raise VerificationError(
                f"{check} check failed at iteration {t}: slack {slack:.3e} (scale {scale:.3e})", iteration=t
            )

    for _ in range(int(cfg.max_iters)):
        if cfg.stop_gap is not None and gap <= cfg.stop_gap:
            trace.stopped_early = True
            break
        a_next = schedule.next() if schedule is not None else 1.0
        new = step(state, a_next)
        if cfg.perturb is not None:
            new = cfg.perturb(new)
        if cfg.callback is not None:
            cfg.callback(state, new)
        if mon.enabled:
            new_gap = mon.gap(new)
            rec = mon.record(new, new_gap)
            prev_rec = trace.records[-1]
            if mon.lyap_kind is not None and cfg.check_level != "off":
                tol = cfg.lyap_rtol * abs(prev_rec.lyap) + 1e2 * _EPS * abs(mon.e0)
                if rec.lyap - prev_rec.lyap > tol:
                    flag(new.t, "lyapunov", prev_rec.lyap - rec.lyap, abs(prev_rec.lyap))
            if mon.full and mon.ineq is not None:
                chk = mon.step_check(state, new, gap, new_gap)
                rec.ineq_slack = chk.slack
                mon.min_ratio = min(mon.min_ratio, chk.slack / chk.scale)
                if not chk.ok(mon.ineq_rtol):
                    flag(new.t, "step_inequality", chk.slack, chk.scale)
            trace.records.append(rec)
            gap = new_gap
        if cfg.keep_states == "all":
            trace.states.append(new)
        else:
            trace.states[-1] = new
        state = new

    if cfg.final_pgd_polish and algorithm in ("apgd", "fista"):
        state = replace(step_pgd(state, problem.f, problem.g, cfg.gamma), a_t=state.a_t)
        if cfg.keep_states == "all":
            trace.states.append(state)
        else:
            trace.states[-1] = state
    trace.wall_time = time.perf_counter() - start
    trace._min_ratio = mon.min_ratio
    return trace
