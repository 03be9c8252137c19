"""Convergence certificates evaluated along a trajectory.

All quantities are measured against a reference saddle point
``(x*, u*)``. The Lagrangian gap is computed in Bregman form

    G(x, u) = D_f(x) + (mu_g/2)||x - x*||^2 + D_{h*}(u),

which is nonnegative term by term and does not cancel large objective
values against each other. Inequality checks return an explicit slack
(``rhs - lhs``) together with a magnitude scale so that callers can apply
the tolerance ``slack >= -rtol * (1 + |lhs| + |rhs|)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import astuple, dataclass, fields
from pathlib import Path

import numpy as np

from .errors import InputError, InsufficientDataError

__all__ = [
    "ReferencePair",
    "TraceRecord",
    "StepCheck",
    "RateFit",
    "CSV_COLUMNS",
    "lagrangian_gap",
    "lagrangian_gap_direct",
    "primal_gap",
    "lyapunov_apgd",
    "lyapunov_regS",
    "lyapunov_regBC",
    "check_step_inequality_apgd",
    "check_step_inequality_apapc",
    "fit_rate",
    "fit_power_law",
    "fit_linear_factor",
    "write_trace_csv",
    "read_trace_csv",
]

CSV_COLUMNS = ("t", "a_t", "lyap", "lag_gap", "primal_gap", "dist_z_sq", "dist_v_sq", "feas_sq", "ineq_slack")


@dataclass(frozen=True, eq=False)
class ReferencePair:
    """Saddle point ``(x*, u*)`` with the subgradients that certify it.

    ``g_subgrad`` is the element of ``dg(x*)`` equal to
    ``-grad f(x*) - K^T u*``; ``conj_subgrad`` is ``K x*``, an element of
    ``dh*(u*)``. ``u_star`` is None for purely primal problems.
    """

    x_star: np.ndarray
    grad_f: np.ndarray
    g_subgrad: np.ndarray
    psi_star: float
    u_star: np.ndarray | None = None
    conj_subgrad: np.ndarray | None = None

    def residuals(self, g, h=None, K=None) -> dict:
        """Optimality residuals of the pair.

        ``stationarity`` is ``||grad f(x*) + s_g + K^T u*||`` and
        ``g_inclusion`` checks ``s_g`` in ``dg(x*)`` through
        ``prox_g(x* + s_g) = x*``. For composite problems
        ``dual_inclusion`` checks ``K x*`` in ``dh*(u*)`` through
        ``prox_{h*}(u* + K x*) = u*``.
        """
        xs = self.x_star
        kt_u = np.zeros_like(xs) if self.u_star is None else K.matrix.T @ self.u_star
        out = {
            "stationarity": float(np.linalg.norm(self.grad_f + self.g_subgrad + kt_u)),
            "g_inclusion": float(np.linalg.norm(g.prox(1.0, xs + self.g_subgrad) - xs)),
        }
        if self.u_star is not None:
            kx = K.matrix @ xs
            out["dual_inclusion"] = float(np.linalg.norm(h.conj_prox(1.0, self.u_star + kx) - self.u_star))
            out["conj_subgrad"] = float(np.linalg.norm(self.conj_subgrad - kx))
        return out

    def to_dict(self) -> dict:
        d = {
            "x_star": self.x_star.tolist(),
            "grad_f": self.grad_f.tolist(),
            "g_subgrad": self.g_subgrad.tolist(),
            "psi_star": self.psi_star,
        }
        if self.u_star is not None:
            d["u_star"] = self.u_star.tolist()
            d["conj_subgrad"] = self.conj_subgrad.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ReferencePair":
        arr = lambda k: None if d.get(k) is None else np.array(d[k], dtype=float)  # noqa: E731
        return cls(arr("x_star"), arr("grad_f"), arr("g_subgrad"), float(d["psi_star"]),
                   arr("u_star"), arr("conj_subgrad"))


@dataclass
class TraceRecord:
    t: int
    a_t: float
    lyap: float = math.nan
    lag_gap: float = math.nan
    primal_gap: float = math.nan
    dist_z_sq: float = math.nan
    dist_v_sq: float = math.nan
    feas_sq: float = math.nan
    ineq_slack: float = math.nan

    def row(self):
        return astuple(self)


@dataclass(frozen=True)
class StepCheck:
    """Outcome of a single-iteration inequality ``lhs <= rhs``."""

    lhs: float
    rhs: float
    terms: dict

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def scale(self) -> float:
        return 1.0 + abs(self.lhs) + abs(self.rhs)

    def ok(self, rtol: float) -> bool:
        return self.slack >= -max(rtol * self.scale, 1e-12)

    def __float__(self):
        return self.slack


@dataclass(frozen=True)
class RateFit:
    sublinear_exponent: float
    linear_factor: float
    n_points: int


def _sq(v) -> float:
    return float(v @ v)


def _times(coef: float, value: float) -> float:
    # 0 * inf arises when a_{t+1} = 1 multiplies the gap at an infeasible u^0
    if coef == 0.0:
        return 0.0
    return coef * value


# -- gaps ----------------------------------------------------------------------------------


def lagrangian_gap(ref: ReferencePair, x, u, f, mu_g, h, K) -> float:
    """``L(x, u*) - L(x*, u)`` in Bregman form; ``inf`` if ``h*(u) = inf``."""
    xs = ref.x_star
    d = x - xs
    primal = f.bregman(x, xs, ref.grad_f) + 0.5 * mu_g * _sq(d)
    if ref.u_star is None:
        return primal
    dual = h.conj_bregman(u, ref.u_star, ref.conj_subgrad)
    if math.isinf(dual):
        return math.inf
    return primal + dual


def lagrangian_gap_direct(ref: ReferencePair, x, u, f, mu_g, h, K) -> float:
    """Same quantity from raw Lagrangian values ``(f+g)(x) + <Kx,u> - h*(u)``."""
    xs, us = ref.x_star, ref.u_star

    def lag(xx, uu):
        conj = h.conj_value(uu)
        return f(xx) + 0.5 * mu_g * _sq(xx) + float((K.matrix @ xx) @ uu) - conj

    hx = h.conj_value(u)
    if math.isinf(hx):
        return math.inf
    return lag(x, us) - lag(xs, u)


def primal_gap(ref: ReferencePair, x, f, g) -> float:
    """``Psi(x) - Psi*`` for ``Psi = f + g``, as ``D_f(x) + D_g(x)``."""
    dg = g.bregman(x, ref.x_star, ref.g_subgrad)
    if math.isinf(dg):
        return math.inf
    return f.bregman(x, ref.x_star, ref.grad_f) + dg


# -- Lyapunov functions ----------------------------------------------------------------


def lyapunov_apgd(ref: ReferencePair, z, psi_gap, gamma, mu_g, a_t) -> float:
    """``(1 + a gamma mu_g)/(2 gamma) ||z - x*||^2 + a^2 (Psi(x) - Psi*)``."""
    dz = _sq(z - ref.x_star)
    return (1.0 + a_t * gamma * mu_g) / (2.0 * gamma) * dz + _times(a_t * a_t, psi_gap)


def _dual_quadratic(v, u_star, K, a_t, gamma, mu_g):
    dv = v - u_star
    ktdv = K.matrix.T @ dv
    return _sq(dv), _sq(ktdv), a_t * a_t * gamma / (2.0 + 2.0 * a_t * gamma * mu_g)


def lyapunov_regS(ref, z, v, gap, gamma, tau, mu_g, mu_hconj, K, a_t, terms=False):
    """Lyapunov function for ``h`` smooth (``mu_h* > 0``).

    Returns the value, or ``(value, terms)`` when ``terms`` is true.
    """
    dz = _sq(z - ref.x_star)
    dv, dkv, ck = _dual_quadratic(v, ref.u_star, K, a_t, gamma, mu_g)
    parts = {
        "z": (1.0 + a_t * gamma * mu_g) / (2.0 * gamma) * dz,
        "v": (a_t * a_t + a_t * tau * mu_hconj) / (2.0 * tau) * dv if dv else 0.0,
        "Kv": -ck * dkv,
        "gap": _times(a_t * a_t, gap),
    }
    value = sum(parts.values())
    return (value, parts) if terms else value


def lyapunov_regBC(ref, z, v, gap, gamma, tau, mu_g, lam, L_f, K, a_t, feas_sq=None, terms=False):
    """Lyapunov function for ``K^*`` bounded below (B) or linear constraints (C).

    ``lam`` is ``lambda_min(KK*)`` for regime B, ``lambda+_min(KK*)`` for C.
    Pass ``feas_sq = ||K x - b||^2`` in regime C.
    """
    dz = _sq(z - ref.x_star)
    dv, dkv, ck = _dual_quadratic(v, ref.u_star, K, a_t, gamma, mu_g)
    delta = min(0.5, 1.0 / (2.0 * a_t * gamma * L_f))
    parts = {
        "z": (2.0 + a_t * gamma * mu_g) / (4.0 * gamma) * dz,
        "v": (2.0 * a_t * a_t + delta * gamma * tau * a_t * a_t * lam) / (4.0 * tau) * dv,
        "Kv": -ck * dkv,
        "gap": _times(a_t * a_t, gap),
    }
    if feas_sq is not None:
        parts["feas"] = 0.5 * a_t * tau * feas_sq
    value = sum(parts.values())
    return (value, parts) if terms else value


# -- single-iteration inequalities --------------------------------------------------------


def check_step_inequality_apgd(prev, nxt, ref, gap_prev, gap_next, gamma, mu_f, mu_g, L_f, a_next) -> StepCheck:
    """Single-iteration progress inequality of APGD.

    ``prev``/``nxt`` are consecutive states (only ``z`` is read); the gaps
    are ``Psi(x^t) - Psi*`` and ``Psi(x^{t+1}) - Psi*``.
    """
    xs = ref.x_star
    a = a_next
    dz_next = _sq(nxt.z - xs)
    dz_prev = _sq(prev.z - xs)
    step = _sq(nxt.z - prev.z)
    lhs_terms = {
        "z_next": (1.0 + a * gamma * mu_g) / (2.0 * gamma) * dz_next,
        "gap_next": a * a * gap_next,
    }
    rhs_terms = {
        "z_prev": (1.0 - gamma * mu_f) / (2.0 * gamma) * dz_prev,
        "gap_prev": _times(a * a - a, gap_prev),
        "step": -(1.0 / (2.0 * gamma) - L_f / 2.0) * step,
    }
    return StepCheck(sum(lhs_terms.values()), sum(rhs_terms.values()), {**lhs_terms, **rhs_terms})


def check_step_inequality_apapc(prev, nxt, ref, gap_prev, gap_next, gamma, tau, mu_g, mu_hconj, f, K, a_next) -> StepCheck:
    """Single-iteration progress inequality of APAPC (eleven terms).

    ``nxt`` must carry the auxiliary points of the step that produced it:
    ``y`` (momentum point), and ``conj_subgrad`` (the element of
    ``dh*(v^{t+1})`` recovered from the dual prox).
    """
    xs, us = ref.x_star, ref.u_star
    a = a_next
    L_f = f.L
    ck = a * a * gamma / (2.0 + 2.0 * a * gamma * mu_g)
    KT = K.matrix.T
    dv_next = nxt.v - us
    dv_prev = prev.v - us
    sq_dv_next = _sq(dv_next)
    grad_y = f.grad(nxt.y)
    lhs_terms = {
        "z_next": (1.0 + a * gamma * mu_g) / (2.0 * gamma) * _sq(nxt.z - xs),
        "v_next": (a * a + a * tau * mu_hconj) / (2.0 * tau) * sq_dv_next if sq_dv_next else 0.0,
        "Kv_next": -ck * _sq(KT @ dv_next),
        "gap_next": a * a * gap_next,
    }
    rhs_terms = {
        "z_prev": _sq(prev.z - xs) / (2.0 * gamma),
        "v_prev": a * a / (2.0 * tau) * _sq(dv_prev),
        "Kv_prev": -ck * _sq(KT @ dv_prev),
        "step": -(1.0 / (2.0 * gamma) - L_f / 2.0) * _sq(nxt.z - prev.z),
        "dual_residual": -0.5 * tau * _sq(K.matrix @ nxt.z - nxt.conj_subgrad),
        "gap_prev": _times(a * a - a, gap_prev),
        "grad_star": -a / (2.0 * L_f) * _sq(grad_y - ref.grad_f),
        "grad_xy": -_times((a * a - a) / (2.0 * L_f), _sq(f.grad(prev.x) - grad_y)),
    }
    return StepCheck(sum(lhs_terms.values()), sum(rhs_terms.values()), {**lhs_terms, **rhs_terms})


# -- rate fitting ---------------------------------------------------------------------------


def _usable(values: np.ndarray, scale=None) -> np.ndarray:
    finite = np.isfinite(values)
    if not finite.any():
        return finite
    if scale is None:
        scale = np.abs(values[finite]).max()
    return finite & (values > 1e2 * np.finfo(float).eps * scale)


def fit_power_law(t, values, scale=None) -> tuple[float, int]:
    """Least-squares slope of ``log(values)`` against ``log(t)``.

    Values at or below ``1e2 * eps * scale`` are dropped; ``scale``
    defaults to the largest value supplied.
    """
    t = np.asarray(t, dtype=float)
    values = np.asarray(values, dtype=float)
    mask = _usable(values, scale) & (t > 0)
    if mask.sum() < 2:
        raise InsufficientDataError("fewer than two usable points for a power-law fit")
    slope, _ = np.polyfit(np.log(t[mask]), np.log(values[mask]), 1)
    return float(slope), int(mask.sum())


def fit_linear_factor(values, scale=None) -> tuple[float, int]:
    """Geometric mean of successive ratios ``values[k+1]/values[k]``."""
    values = np.asarray(values, dtype=float)
    mask = _usable(values, scale)
    pairs = mask[:-1] & mask[1:]
    if not pairs.any():
        raise InsufficientDataError("no consecutive usable pair for a contraction fit")
    ratios = values[1:][pairs] / values[:-1][pairs]
    return float(np.exp(np.log(ratios).mean())), int(pairs.sum())


def _column(records, name):
    if hasattr(records, "column"):
        return records.column(name)
    return np.array([getattr(r, name) for r in records], dtype=float)


def fit_rate(records, window, gap_field: str = "lag_gap", lyap_field: str = "lyap", scale=None) -> RateFit:
    """Empirical rates over a window of trace rows.

    ``window`` is either an int ``N`` (the last ``N`` rows) or a pair
    ``(t_lo, t_hi)`` of iteration indices (inclusive). The exponent is the
    log-log slope of ``gap_field``; the factor is the geometric-mean
    contraction of ``lyap_field``. Values that are nonpositive or below
    ``1e2 * eps * scale`` are dropped (``scale`` defaults to the
    window maximum of each field, pass e.g. the initial value to cut
    off a roundoff plateau); a field with no
    usable data yields NaN, and if both fields are unusable
    InsufficientDataError is raised.
    """
    t = _column(records, "t")
    if isinstance(window, (int, np.integer)):
        if window < 10 or window > len(t):
            raise InputError(f"window must satisfy 10 <= window <= {len(t)}, got {window}")
        sel = slice(len(t) - int(window), len(t))
        mask = np.zeros(len(t), bool)
        mask[sel] = True
    else:
        lo, hi = window
        mask = (t >= lo) & (t <= hi)
        if mask.sum() < 10:
            raise InputError(f"window {window} holds fewer than 10 rows")
    tw = t[mask]
    n = 0
    try:
        expo, n1 = fit_power_law(tw, _column(records, gap_field)[mask], scale)
        n = max(n, n1)
    except InsufficientDataError:
        expo = math.nan
    try:
        factor, n2 = fit_linear_factor(_column(records, lyap_field)[mask], scale)
        n = max(n, n2)
    except InsufficientDataError:
        factor = math.nan
    if math.isnan(expo) and math.isnan(factor):
        raise InsufficientDataError(f"no usable data in window {window}")
    return RateFit(expo, factor, n)


# -- CSV I/O --------------------------------------------------------------------------------


def write_trace_csv(records, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r in records:
            w.writerow([r.t] + [repr(float(v)) for v in r.row()[1:]])


def read_trace_csv(path) -> list[TraceRecord]:
    with open(Path(path), newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != CSV_COLUMNS:
            raise InputError(f"{path}: unexpected CSV header {','.join(header)}")
        out = []
        for row in reader:
            out.append(TraceRecord(int(row[0]), *(float(v) for v in row[1:])))
    names = [f.name for f in fields(TraceRecord)]
    assert tuple(names) == CSV_COLUMNS
    return out
