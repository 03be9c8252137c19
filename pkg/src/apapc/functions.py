"""Smooth and proximable function objects.

Conventions: ``f`` is the smooth term (value, gradient, ``L``, ``mu``); ``g``
and ``h`` are :class:`ProxTerm` instances exposing ``prox``, the conjugate
value and the conjugate prox. Values outside a domain are ``math.inf``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import expit

from .errors import InputError

__all__ = [
    "SmoothTerm",
    "quadratic",
    "logistic",
    "builtin_smooth",
    "ProxTerm",
    "Zero",
    "QuadScaling",
    "QuadraticAround",
    "Huber",
    "L1Norm",
    "AffineIndicator",
    "BoxIndicator",
    "conj_prox",
    "recover_conj_subgradient",
    "eval_conjugate",
    "prox_term_from_dict",
    "smooth_from_dict",
]

# relative slack when testing membership in the domain of an indicator;
# convex combinations of in-domain iterates drift out by a few ulps
DOMAIN_RTOL = 1e-10


@dataclass(frozen=True, eq=False)
class SmoothTerm:
    """Convex differentiable ``f`` with ``L``-Lipschitz gradient."""

    value: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    L: float
    mu: float = 0.0
    kind: str = "custom"
    params: dict = field(default_factory=dict)
    bregman_fn: Callable | None = None

    def __post_init__(self):
        if not self.L > 0:
            raise InputError(f"L must be positive, got {self.L}")
        if not 0 <= self.mu <= self.L:
            raise InputError(f"need 0 <= mu <= L, got mu={self.mu}, L={self.L}")

    def __call__(self, x):
        return self.value(x)

    def bregman(self, x, x_ref, grad_ref=None) -> float:
        """``f(x) - f(x_ref) - <x - x_ref, grad f(x_ref)>``.

        Quadratics use the exact form ``1/2 d^T A d``, which does not lose
        digits to cancellation when ``x`` is close to ``x_ref``.
        """
        if self.bregman_fn is not None:
            return self.bregman_fn(x, x_ref)
        if grad_ref is None:
            grad_ref = self.grad(x_ref)
        return self.value(x) - self.value(x_ref) - float((x - x_ref) @ grad_ref)

    def to_dict(self):
        if self.kind == "custom":
            raise InputError("custom smooth terms cannot be serialized")
        return {"kind": self.kind, **{k: _jsonable(v) for k, v in self.params.items()}}


def quadratic(A, b=None, L_override: float = 1.0, const: float = 0.0) -> SmoothTerm:
    """``f(x) = 1/2 x^T A x - b^T x + const`` with ``A`` symmetric PSD.

    ``L`` and ``mu`` are the extreme eigenvalues of ``A``. When ``A = 0``
    the gradient is constant and ``L_override`` is used instead.
    """
    A = np.atleast_2d(np.array(A, dtype=float))
    n = A.shape[0]
    if A.shape != (n, n):
        raise InputError(f"A must be square, got {A.shape}")
    b = np.zeros(n) if b is None else np.array(b, dtype=float).reshape(n)
    scale = max(1.0, float(np.abs(A).max()))
    if not np.allclose(A, A.T, rtol=0, atol=1e-12 * scale):
        raise InputError("A must be symmetric")
    A = 0.5 * (A + A.T)
    eig = np.linalg.eigvalsh(A)
    if eig[0] < -1e-12 * scale:
        raise InputError(f"A must be positive semidefinite (min eigenvalue {eig[0]:.3e})")
    A.setflags(write=False)
    b.setflags(write=False)
    L = float(eig[-1])
    mu = max(float(eig[0]), 0.0)
    if L <= 1e-14 * scale:
        L, mu = float(L_override), 0.0

    const = float(const)

    def value(x):
        return 0.5 * float(x @ (A @ x)) - float(b @ x) + const

    def grad(x):
        return A @ x - b

    def bregman(x, x_ref):
        d = x - x_ref
        return 0.5 * float(d @ (A @ d))

    params = {"A": A, "b": b}
    if const:
        params["const"] = const
    return SmoothTerm(value, grad, L, min(mu, L), "quadratic", params, bregman)


def logistic(D, labels) -> SmoothTerm:
    """Logistic loss ``sum_i log(1 + exp(-y_i <d_i, x>))`` with ``y_i`` in {-1, +1}.

    ``L = ||D||_2^2 / 4``, ``mu = 0``.
    """
    D = np.atleast_2d(np.array(D, dtype=float))
    y = np.array(labels, dtype=float).reshape(D.shape[0])
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise InputError("labels must be -1 or +1")
    D.setflags(write=False)
    y.setflags(write=False)
    L = 0.25 * float(np.linalg.norm(D, 2)) ** 2

    def value(x):
        return float(np.logaddexp(0.0, -y * (D @ x)).sum())

    def grad(x):
        return -D.T @ (y * expit(-y * (D @ x)))

    return SmoothTerm(value, grad, L, 0.0, "logistic", {"D": D, "labels": y})


def builtin_smooth(kind: str, params: dict) -> SmoothTerm:
    if kind == "quadratic":
        return quadratic(
            params["A"], params.get("b"), params.get("L_override", 1.0), params.get("const", 0.0)
        )
    if kind == "logistic":
        return logistic(params["D"], params["labels"])
    raise InputError(f"unknown smooth kind {kind!r}")


def smooth_from_dict(d: dict) -> SmoothTerm:
    d = dict(d)
    return builtin_smooth(d.pop("kind"), d)


class ProxTerm:
    """Proper closed convex function with a computable prox.

    Subclasses set ``kind``, ``mu`` (strong convexity of the function),
    ``mu_conj`` (strong convexity of its conjugate) and ``smooth_L``
    (gradient Lipschitz constant, ``inf`` if nonsmooth).
    """

    kind = "abstract"
    mu = 0.0
    mu_conj = 0.0
    smooth_L = math.inf

    def value(self, u) -> float:
        raise NotImplementedError

    def conj_value(self, u) -> float:
        raise NotImplementedError

    def prox(self, alpha: float, u) -> np.ndarray:
        """``argmin_p alpha*h(p) + 1/2 ||p - u||^2``."""
        raise NotImplementedError

    def conj_prox(self, alpha: float, u) -> np.ndarray:
        """``prox_{alpha h*}(u)`` via the Moreau identity."""
        u = np.asarray(u, dtype=float)
        return u - alpha * self.prox(1.0 / alpha, u / alpha)

    def __call__(self, u):
        return self.value(u)

    def bregman(self, x, x_ref, subgrad_ref) -> float:
        """``phi(x) - phi(x_ref) - <x - x_ref, s>`` for ``s`` in ``dphi(x_ref)``."""
        val = self.value(x)
        if math.isinf(val):
            return math.inf
        return val - self.value(x_ref) - float((x - x_ref) @ subgrad_ref)

    def conj_bregman(self, u, u_ref, subgrad_ref) -> float:
        """Bregman distance of ``h*`` at ``u_ref`` with ``subgrad_ref`` in ``dh*(u_ref)``."""
        val = self.conj_value(u)
        if math.isinf(val):
            return math.inf
        return val - self.conj_value(u_ref) - float((u - u_ref) @ subgrad_ref)

    def params(self) -> dict:
        return {}

    def to_dict(self) -> dict:
        return {"kind": self.kind, **{k: _jsonable(v) for k, v in self.params().items()}}

    def __repr__(self):
        inner = ", ".join(f"{k}={v!r}" for k, v in self.params().items())
        return f"{type(self).__name__}({inner})"


class Zero(ProxTerm):
    """``h = 0``; its conjugate is the indicator of the origin."""

    kind = "zero"
    mu_conj = math.inf

    def value(self, u):
        return 0.0

    def conj_value(self, u):
        return 0.0 if not np.any(u) else math.inf

    def prox(self, alpha, u):
        return np.array(u, dtype=float)

    def conj_prox(self, alpha, u):
        return np.zeros_like(np.asarray(u, dtype=float))

    def bregman(self, x, x_ref, subgrad_ref):
        return -float((x - x_ref) @ subgrad_ref)

    def conj_bregman(self, u, u_ref, subgrad_ref):
        return 0.0 if not np.any(u) else math.inf


class QuadScaling(ProxTerm):
    """``g = (mu_g/2) ||x||^2``; its prox is a scaling."""

    kind = "quad_scaling"

    def __init__(self, mu_g: float):
        if mu_g < 0:
            raise InputError("mu_g must be nonnegative")
        self.mu_g = float(mu_g)
        self.mu = self.mu_g
        self.smooth_L = self.mu_g if self.mu_g > 0 else 0.0
        self.mu_conj = 1.0 / self.mu_g if self.mu_g > 0 else math.inf

    def value(self, x):
        return 0.5 * self.mu_g * float(x @ x)

    def conj_value(self, u):
        if self.mu_g == 0:
            return 0.0 if not np.any(u) else math.inf
        return float(u @ u) / (2.0 * self.mu_g)

    def prox(self, alpha, x):
        return np.asarray(x, dtype=float) / (1.0 + alpha * self.mu_g)

    def bregman(self, x, x_ref, subgrad_ref=None):
        d = x - x_ref
        out = 0.5 * self.mu_g * float(d @ d)
        if subgrad_ref is not None:
            out += float(d @ (self.mu_g * x_ref - subgrad_ref))
        return out

    def params(self):
        return {"mu_g": self.mu_g}


class QuadraticAround(ProxTerm):
    """``h(u) = (L/2) ||u - c||^2``; ``h*(p) = ||p||^2/(2L) + <p, c>``."""

    kind = "quadratic_around_c"

    def __init__(self, c, L: float = 1.0):
        if not L > 0:
            raise InputError("L must be positive")
        self.c = np.array(c, dtype=float).reshape(-1)
        self.c.setflags(write=False)
        self.L = float(L)
        self.mu = self.L
        self.smooth_L = self.L
        self.mu_conj = 1.0 / self.L

    def value(self, u):
        d = np.asarray(u) - self.c
        return 0.5 * self.L * float(d @ d)

    def conj_value(self, p):
        p = np.asarray(p, dtype=float)
        return float(p @ p) / (2.0 * self.L) + float(p @ self.c)

    def grad(self, u):
        return self.L * (np.asarray(u) - self.c)

    def conj_grad(self, p):
        return np.asarray(p) / self.L + self.c

    def conj_bregman(self, u, u_ref, subgrad_ref):
        d = u - u_ref
        return float(d @ d) / (2.0 * self.L) + float(d @ (self.conj_grad(u_ref) - subgrad_ref))

    def prox(self, alpha, u):
        return (np.asarray(u, dtype=float) + alpha * self.L * self.c) / (1.0 + alpha * self.L)

    def params(self):
        return {"c": self.c, "L": self.L}


class Huber(ProxTerm):
    """Separable Huber function with threshold ``delta``.

    ``h(u) = sum_i u_i^2/(2 delta)`` for ``|u_i| <= delta``, ``|u_i| - delta/2``
    otherwise. Smooth with ``L_h = 1/delta``; ``h*(p) = (delta/2)||p||^2``
    on the unit box.
    """

    kind = "huber"

    def __init__(self, delta: float = 1.0):
        if not delta > 0:
            raise InputError("delta must be positive")
        self.delta = float(delta)
        self.smooth_L = 1.0 / self.delta
        self.mu_conj = self.delta

    def value(self, u):
        a = np.abs(np.asarray(u, dtype=float))
        d = self.delta
        return float(np.where(a <= d, a * a / (2 * d), a - d / 2).sum())

    def grad(self, u):
        return np.clip(np.asarray(u, dtype=float) / self.delta, -1.0, 1.0)

    def conj_value(self, p):
        p = np.asarray(p, dtype=float)
        if p.size and np.abs(p).max() > 1.0 + DOMAIN_RTOL:
            return math.inf
        return 0.5 * self.delta * float(p @ p)

    def prox(self, alpha, u):
        u = np.asarray(u, dtype=float)
        d = self.delta
        inner = u * (d / (d + alpha))
        outer = u - alpha * np.sign(u)
        return np.where(np.abs(u) <= d + alpha, inner, outer)

    def conj_prox(self, alpha, u):
        # closed form keeps the output exactly inside the unit box
        return np.clip(np.asarray(u, dtype=float) / (1.0 + alpha * self.delta), -1.0, 1.0)

    def conj_bregman(self, u, u_ref, subgrad_ref):
        if math.isinf(self.conj_value(u)):
            return math.inf
        d = u - u_ref
        return 0.5 * self.delta * float(d @ d) + float(d @ (self.delta * u_ref - subgrad_ref))

    def params(self):
        return {"delta": self.delta}


class L1Norm(ProxTerm):
    """``h(u) = w ||u||_1``; conjugate is the indicator of the box ``[-w, w]``."""

    kind = "l1_norm"

    def __init__(self, weight: float = 1.0):
        if not weight > 0:
            raise InputError("weight must be positive")
        self.weight = float(weight)

    def value(self, u):
        return self.weight * float(np.abs(u).sum())

    def conj_value(self, p):
        p = np.asarray(p, dtype=float)
        if p.size and np.abs(p).max() > self.weight * (1.0 + DOMAIN_RTOL):
            return math.inf
        return 0.0

    def prox(self, alpha, u):
        u = np.asarray(u, dtype=float)
        # np.maximum(.., 0) puts ties at the kink exactly at 0
        return np.sign(u) * np.maximum(np.abs(u) - alpha * self.weight, 0.0)

    def conj_prox(self, alpha, u):
        return np.clip(np.asarray(u, dtype=float), -self.weight, self.weight)

    def bregman(self, x, x_ref, subgrad_ref):
        # termwise w|x_i| - s_i x_i >= 0; avoids subtracting two large norms
        w = self.weight
        return float((w * np.abs(x) - subgrad_ref * x).sum() - (w * np.abs(x_ref) - subgrad_ref * x_ref).sum())

    def conj_bregman(self, u, u_ref, subgrad_ref):
        if math.isinf(self.conj_value(u)):
            return math.inf
        return -float((u - u_ref) @ subgrad_ref)

    def params(self):
        return {"weight": self.weight}


class AffineIndicator(ProxTerm):
    """Indicator of the point ``{b}``; ``h*(u) = <u, b>``."""

    kind = "affine_indicator_b"

    def __init__(self, b):
        self.b = np.array(b, dtype=float).reshape(-1)
        self.b.setflags(write=False)

    def value(self, u):
        u = np.asarray(u, dtype=float)
        scale = 1.0 + float(np.abs(self.b).max(initial=0.0))
        return 0.0 if np.abs(u - self.b).max(initial=0.0) <= DOMAIN_RTOL * scale else math.inf

    def conj_value(self, u):
        return float(np.asarray(u) @ self.b)

    def prox(self, alpha, u):
        return self.b.copy()

    def conj_prox(self, alpha, u):
        return np.asarray(u, dtype=float) - alpha * self.b

    def conj_bregman(self, u, u_ref, subgrad_ref):
        return float((u - u_ref) @ (self.b - subgrad_ref))

    def params(self):
        return {"b": self.b}


class BoxIndicator(ProxTerm):
    """Indicator of ``{lo <= x <= hi}`` (bounds may be infinite)."""

    kind = "box_indicator"

    def __init__(self, lo=-math.inf, hi=math.inf):
        self.lo = np.array(lo, dtype=float)
        self.hi = np.array(hi, dtype=float)
        if np.any(self.lo > self.hi):
            raise InputError("box with lo > hi is empty")

    def value(self, x):
        x = np.asarray(x, dtype=float)
        tol = DOMAIN_RTOL * (1.0 + np.abs(x))
        ok = np.all(x >= self.lo - tol) and np.all(x <= self.hi + tol)
        return 0.0 if ok else math.inf

    def conj_value(self, p):
        p = np.asarray(p, dtype=float)
        lo = np.broadcast_to(self.lo, p.shape)
        hi = np.broadcast_to(self.hi, p.shape)
        pos, neg = p > 0, p < 0
        if np.any(np.isinf(hi[pos])) or np.any(np.isinf(lo[neg])):
            return math.inf
        return float((hi[pos] * p[pos]).sum() + (lo[neg] * p[neg]).sum())

    def prox(self, alpha, x):
        return np.clip(np.asarray(x, dtype=float), self.lo, self.hi)

    def params(self):
        return {"lo": self.lo, "hi": self.hi}


def conj_prox(h: ProxTerm, alpha: float, u) -> np.ndarray:
    """``prox_{alpha h*}(u)``."""
    if not alpha > 0:
        raise InputError("alpha must be positive")
    return h.conj_prox(alpha, u)


def recover_conj_subgradient(v_next, v, K_zhat, tau_over_a: float) -> np.ndarray:
    """Element of ``dh*(v_next)`` implied by one dual prox step.

    The dual step ``v_next = prox_{s h*}(v + s K zhat)`` means
    ``v_next + s w = v + s K zhat`` for some ``w`` in ``dh*(v_next)``;
    this returns that ``w``.
    """
    if not tau_over_a > 0:
        raise InputError("tau_over_a must be positive")
    return (np.asarray(v) + tau_over_a * np.asarray(K_zhat) - np.asarray(v_next)) / tau_over_a


def eval_conjugate(h: ProxTerm, u) -> float:
    return h.conj_value(np.asarray(u, dtype=float))


_PROX_KINDS = {
    "zero": lambda d: Zero(),
    "quad_scaling": lambda d: QuadScaling(d["mu_g"]),
    "quadratic_around_c": lambda d: QuadraticAround(d["c"], d.get("L", 1.0)),
    "huber": lambda d: Huber(d.get("delta", 1.0)),
    "l1_norm": lambda d: L1Norm(d.get("weight", 1.0)),
    "affine_indicator_b": lambda d: AffineIndicator(d["b"]),
    "box_indicator": lambda d: BoxIndicator(
        _float_or_array(d.get("lo", -math.inf)), _float_or_array(d.get("hi", math.inf))
    ),
}


def prox_term_from_dict(d: dict) -> ProxTerm:
    try:
        make = _PROX_KINDS[d["kind"]]
    except KeyError:
        raise InputError(f"unknown prox kind {d.get('kind')!r}") from None
    return make(d)


def _float_or_array(v):
    return np.array(v, dtype=float)


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, np.generic):
        return v.item()
    return v
