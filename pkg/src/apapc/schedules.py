"""Momentum parameter sequences ``a_0, a_1, a_2, ...``.

Every regime applies ``a_{t+1} <= (1 + sqrt(1 + 4 a_t^2)) / 2`` (equivalently
``a_{t+1}^2 - a_{t+1} <= a_t^2``) and an optional cap ``a_sharp`` that turns
sublinear into linear convergence when the primal problem is strongly
convex.

=================  ======================================================
regime             rule for ``t >= 1``
=================  ======================================================
constant_one       ``a_t = 1`` (APAPC reduces to PAPC, APGD to PGD)
apgd_sublinear     ``a_0 = 0``; recursive or ``(t+1)/2``
apgd_capped        same, capped at ``max(sqrt(L_f/mu_g), 1)``
regS[_capped]      ``min(sqrt(a^2 + a tau mu_h*), nesterov(a)[, a_sharp])``
regB/regC[_capped] ``min(a sqrt(1 + nu lam/(4 ||K||^2)),
                   sqrt(a^2 + a nu lam/(4 gamma L_f ||K||^2)), nesterov(a)[, a_sharp])``
=================  ======================================================
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, InputError

__all__ = ["MomentumSchedule", "REGIMES", "nesterov_next", "regS_a0"]

REGIMES = (
    "constant_one",
    "apgd_sublinear",
    "apgd_capped",
    "regS",
    "regS_capped",
    "regB",
    "regB_capped",
    "regC",
    "regC_capped",
)

_REQUIRED = {
    "constant_one": (),
    "apgd_sublinear": (),
    "apgd_capped": ("L_f", "mu_g"),
    "regS": ("tau", "mu_hconj"),
    "regS_capped": ("tau", "mu_hconj", "L_f", "mu_g"),
    "regB": ("gamma", "L_f", "lam", "K_norm_sq"),
    "regB_capped": ("gamma", "L_f", "lam", "K_norm_sq", "mu_g"),
    "regC": ("gamma", "L_f", "lam", "K_norm_sq"),
    "regC_capped": ("gamma", "L_f", "lam", "K_norm_sq", "mu_g"),
}

# slack on gamma <= 1/(2 L_f) so that gamma computed as exactly 1/(2 L_f) passes
_RTOL = 1e-12


def nesterov_next(a: float) -> float:
    return 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * a * a))


def regS_a0(tau_mu: float) -> float:
    """Smallest ``a_0`` with ``a_0^2 + a_0 tau mu_h* >= 1``."""
    return 0.5 * (math.sqrt(tau_mu * tau_mu + 4.0) - tau_mu)


@dataclass
class MomentumSchedule:
    """Stateful iterator over a momentum sequence.

    The first call to :meth:`next` returns ``a_0``, the second ``a_1``,
    and so on. Parameter preconditions are checked at construction.

    Parameters
    ----------
    regime : str
        One of :data:`REGIMES`.
    params : dict
        Any of ``gamma, tau, mu_g, mu_hconj, L_f, lam, K_norm_sq, nu``
        (``nu`` defaults to 1), plus ``a_sharp`` to override the cap.
    form : {"recursive", "linear"}
        Only for the APGD regimes: the recursion
        ``a_{t+1} = (1 + sqrt(1 + 4 a_t^2))/2`` or ``a_t = (t+1)/2``.
    """

    regime: str
    params: dict = field(default_factory=dict)
    form: str = "recursive"

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ConfigurationError(f"unknown schedule regime {self.regime!r}", "schedule.regime")
        if self.form not in ("recursive", "linear"):
            raise ConfigurationError(f"unknown schedule form {self.form!r}", "schedule.form")
        self.params = {k: float(v) for k, v in self.params.items()}
        required = _REQUIRED[self.regime]
        if "a_sharp" in self.params:
            # an explicit cap replaces the constants it would be derived from
            required = _REQUIRED.get(self.regime.replace("_capped", ""), ())
        missing = [k for k in required if k not in self.params]
        if missing:
            raise ConfigurationError(
                f"schedule {self.regime} needs parameters {missing}", "schedule.params"
            )
        self._validate()
        self.a_sharp = self._cap()
        self._values: list[float] = []

    # -- construction-time checks -------------------------------------------------

    def _validate(self):
        p = self.params
        for k, v in p.items():
            if math.isnan(v) or v < 0:
                raise ConfigurationError(f"schedule parameter {k}={v} must be >= 0", f"schedule.{k}")
        base = self.regime.replace("_capped", "")
        if base == "regS" and not p["tau"] * p["mu_hconj"] > 0:
            raise ConfigurationError("regS needs tau * mu_h* > 0", "schedule.mu_hconj")
        if base in ("regB", "regC"):
            gamma, L = p["gamma"], p["L_f"]
            if not gamma > 0 or not L > 0:
                raise ConfigurationError("gamma and L_f must be positive", "schedule.gamma")
            if gamma > (1.0 + _RTOL) / (2.0 * L):
                raise ConfigurationError(
                    f"{base} needs gamma <= 1/(2 L_f): gamma = {gamma:.6g} > {1 / (2 * L):.6g}",
                    "schedule.gamma",
                )
            if not p["lam"] > 0:
                which = "lambda_min(KK*)" if base == "regB" else "lambda+_min(KK*)"
                raise ConfigurationError(f"{base} needs {which} > 0", "schedule.lam")
            if not p["K_norm_sq"] >= p["lam"]:
                raise ConfigurationError("need ||K||^2 >= lambda", "schedule.K_norm_sq")
            nu = p.get("nu", 1.0)
            if not 0 < nu <= 1:
                raise ConfigurationError(f"nu must lie in (0, 1], got {nu}", "schedule.nu")
        if self.regime.endswith("capped") and "a_sharp" not in p and not p.get("mu_g", 0) > 0:
            raise ConfigurationError("capped schedules need mu_g > 0", "schedule.mu_g")

    def _cap(self) -> float:
        if not self.regime.endswith("capped"):
            return math.inf
        p = self.params
        if "a_sharp" in p:
            return max(p["a_sharp"], 1.0)
        if self.regime in ("apgd_capped", "regS_capped"):
            raw = math.sqrt(p["L_f"] / p["mu_g"])
        else:
            raw = math.sqrt(p["lam"] / (2.0 * p["mu_g"] * p["L_f"] * p["K_norm_sq"])) / p["gamma"]
        return max(raw, 1.0)

    # -- iteration ---------------------------------------------------------------------

    @property
    def t(self) -> int:
        """Index of the value the next call will return."""
        return len(self._values)

    @property
    def current(self) -> float:
        """Most recently returned value."""
        if not self._values:
            raise InputError("schedule has not produced any value yet")
        return self._values[-1]

    def initial(self) -> float:
        if self.regime == "constant_one":
            return 1.0
        if self.regime.startswith("apgd"):
            return 0.0
        if self.regime.startswith("regS"):
            return regS_a0(self.params["tau"] * self.params["mu_hconj"])
        return 1.0

    def _step(self, t_next: int, a: float) -> float:
        """``a_{t_next}`` given ``a = a_{t_next - 1}``, for ``t_next >= 2``."""
        p = self.params
        base = self.regime.replace("_capped", "")
        if base == "constant_one":
            return 1.0
        if base.startswith("apgd"):
            if self.form == "linear":
                nxt = 0.5 * (t_next + 1)
            else:
                nxt = nesterov_next(a)
        elif base == "regS":
            nxt = min(math.sqrt(a * a + a * p["tau"] * p["mu_hconj"]), nesterov_next(a))
        else:
            nu = p.get("nu", 1.0)
            ratio = nu * p["lam"] / (4.0 * p["K_norm_sq"])
            nxt = min(
                a * math.sqrt(1.0 + ratio),
                math.sqrt(a * a + a * ratio / (p["gamma"] * p["L_f"])),
                nesterov_next(a),
            )
        return min(nxt, self.a_sharp)

    def next(self) -> float:
        t = len(self._values)
        if t == 0:
            val = self.initial()
        elif t == 1:
            val = 1.0
        else:
            val = self._step(t, self._values[-1])
        self._values.append(val)
        return val

    __next__ = next

    def __iter__(self):
        return self

    def materialize(self, n: int) -> np.ndarray:
        """First ``n`` values ``a_0 .. a_{n-1}`` from a fresh copy of this schedule."""
        fresh = self.fresh()
        return np.array([fresh.next() for _ in range(n)])

    def fresh(self) -> "MomentumSchedule":
        return MomentumSchedule(self.regime, dict(self.params), self.form)

    def cap_index(self, limit: int = 1_000_000):
        """First ``T`` with ``a_T = a_sharp``, or None within ``limit`` steps."""
        if math.isinf(self.a_sharp):
            return None
        fresh = self.fresh()
        for t in range(limit + 1):
            if fresh.next() >= self.a_sharp:
                return t
        return None

    def to_dict(self) -> dict:
        return {"regime": self.regime, "params": dict(self.params), "form": self.form}

    @classmethod
    def from_dict(cls, d: dict) -> "MomentumSchedule":
        return cls(d["regime"], dict(d.get("params", {})), d.get("form", "recursive"))
