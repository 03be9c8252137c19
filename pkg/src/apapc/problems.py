"""Reproducible problem instances with independently computed solutions.

Every generator returns a :class:`ProblemInstance` whose reference pair
comes from an oracle that shares no code with the iteration engines:
direct linear solves for quadratic problems, and a proximal-gradient
fixed-point iteration followed by an exact active-set solve for l1
problems. References are certified through their optimality residuals
before they are returned.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as sla
from scipy.sparse.csgraph import connected_components

from .diagnostics import ReferencePair
from .errors import ConfigurationError, InputError, OracleError
from .functions import (
    AffineIndicator,
    L1Norm,
    ProxTerm,
    QuadraticAround,
    QuadScaling,
    SmoothTerm,
    Zero,
    prox_term_from_dict,
    quadratic,
    smooth_from_dict,
)
from .linops import LinearMap, exact_spectral_bounds

__all__ = [
    "ProblemInstance",
    "REGIME_TAGS",
    "gen_quadratic_regS",
    "gen_lasso_like",
    "gen_linconstrained",
    "gen_consensus",
    "gen_injective",
    "gen_flat_least_squares",
    "gen_strongly_convex",
    "make_regS",
    "make_linconstrained",
    "lasso_oracle",
    "generate",
    "GENERATORS",
]

REGIME_TAGS = ("primal_only", "regS", "regB", "regC")
FORMAT = "apapc-problem/1"
RESIDUAL_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """``min_x f(x) + g(x) + h(Kx)`` with a certified saddle point.

    For the primal-dual regimes ``g = (mu_g/2)||x||^2`` and ``K`` is set;
    for ``primal_only`` instances ``K`` and ``h`` are None and
    ``g_term`` holds the proximable term.

    ``null_basis`` (optional) is an orthonormal basis of the directions
    along which the solution set extends; the solution set is then
    ``x* + span(null_basis)``.
    """

    f: SmoothTerm
    regime_tag: str
    reference: ReferencePair
    mu_g: float = 0.0
    h: ProxTerm | None = None
    K: LinearMap | None = None
    g_term: ProxTerm | None = None
    seed: int | None = None
    generator: dict = field(default_factory=dict)
    null_basis: np.ndarray | None = None
    constants: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.regime_tag not in REGIME_TAGS:
            raise InputError(f"unknown regime tag {self.regime_tag!r}")
        if self.mu_g < 0:
            raise InputError("mu_g must be nonnegative")
        consts = {"L_f": self.f.L, "mu_f": self.f.mu}
        if self.K is not None:
            sb = exact_spectral_bounds(self.K)
            consts.update(op_norm_sq=sb.op_norm_sq, lam_min=sb.lam_min, lam_min_plus=sb.lam_min_plus)
        object.__setattr__(self, "constants", consts)
        self.validate()

    # -- structure --------------------------------------------------------------------

    @property
    def n(self) -> int:
        return self.reference.x_star.shape[0]

    @property
    def g(self) -> ProxTerm:
        if self.g_term is not None:
            return self.g_term
        return QuadScaling(self.mu_g)

    def f_with_mu(self) -> SmoothTerm:
        """``f + (mu_g/2)||.||^2`` as one smooth term (for engines without a g slot)."""
        if self.mu_g == 0:
            return self.f
        f, mu = self.f, self.mu_g
        return SmoothTerm(
            lambda x: f(x) + 0.5 * mu * float(x @ x),
            lambda x: f.grad(x) + mu * x,
            f.L + mu,
            min(f.mu + mu, f.L + mu),
            "custom",
            bregman_fn=lambda x, xr: f.bregman(x, xr) + 0.5 * mu * float((x - xr) @ (x - xr)),
        )

    def primal_gap(self, x) -> float:
        """``Psi(x) - Psi*`` for the full objective, ``inf`` outside ``dom h o K``."""
        ref = self.reference
        if self.K is None:
            from .diagnostics import primal_gap

            return primal_gap(ref, x, self.f, self.g)
        d = x - ref.x_star
        Kx = self.K.matrix @ x
        dh = self.h.bregman(Kx, ref.conj_subgrad, ref.u_star)
        if math.isinf(dh):
            return math.inf
        return self.f.bregman(x, ref.x_star, ref.grad_f) + 0.5 * self.mu_g * float(d @ d) + dh

    def dist_to_solution_set(self, x) -> float:
        d = np.asarray(x, dtype=float) - self.reference.x_star
        if self.null_basis is not None and self.null_basis.size:
            N = self.null_basis
            d = d - N @ (N.T @ d)
        return float(np.linalg.norm(d))

    # -- validation ----------------------------------------------------------------------

    def validate(self) -> None:
        """Check the regime tag against the data and the reference residuals."""
        tag, c = self.regime_tag, self.constants
        if tag == "primal_only":
            if self.K is not None or self.g_term is None:
                raise InputError("primal_only instances carry g_term and no K")
        else:
            if self.K is None or self.h is None:
                raise InputError(f"{tag} instances need K and h")
            if self.K.cols != self.n or (self.h_dim is not None and self.h_dim != self.K.rows):
                raise InputError("K does not match the dimensions of x* / h")
        if tag == "regS" and not math.isfinite(self.h.smooth_L):
            raise InputError("regS needs a smooth h")
        if tag == "regB" and not c["lam_min"] > 0:
            raise InputError("regB needs lambda_min(KK^T) > 0")
        if tag == "regC":
            if not isinstance(self.h, AffineIndicator):
                raise InputError("regC needs h = indicator of {b}")
            b = self.h.b
            sol, *_ = np.linalg.lstsq(self.K.matrix, b, rcond=None)
            if np.linalg.norm(self.K.matrix @ sol - b) > 1e-10 * (1.0 + np.linalg.norm(b)):
                raise InputError("regC needs b in range(K)")
            if not c["lam_min_plus"] > 0:
                raise InputError("regC needs lambda+_min(KK^T) > 0")
        res = self.reference.residuals(self.g, self.h, self.K)
        worst = max(res.values())
        scale = 1.0 + float(np.abs(self.reference.x_star).max())
        if not worst <= RESIDUAL_TOL * scale:
            raise OracleError(f"reference residuals too large: {res}")

    @property
    def h_dim(self):
        for attr in ("c", "b"):
            if hasattr(self.h, attr):
                return np.asarray(getattr(self.h, attr)).shape[0]
        return None

    # -- serialization -------------------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "format": FORMAT,
            "regime_tag": self.regime_tag,
            "seed": self.seed,
            "generator": self.generator,
            "mu_g": self.mu_g,
            "f": self.f.to_dict(),
            "g": None if self.g_term is None else self.g_term.to_dict(),
            "h": None if self.h is None else self.h.to_dict(),
            "K": None if self.K is None else self.K.matrix.tolist(),
            "reference": self.reference.to_dict(),
            "null_basis": None if self.null_basis is None else self.null_basis.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict, base_dir=None) -> "ProblemInstance":
        """Rebuild an instance; ``K`` may also be a path to a plain-text matrix."""
        if d.get("format", FORMAT) != FORMAT:
            raise InputError(f"unsupported problem format {d.get('format')!r}")
        try:
            K = d.get("K")
            if isinstance(K, str):
                path = Path(K)
                if base_dir is not None and not path.is_absolute():
                    path = Path(base_dir) / path
                K = LinearMap.from_text(path)
            elif K is not None:
                K = LinearMap(np.array(K, dtype=float))
            nb = d.get("null_basis")
            return cls(
                f=smooth_from_dict(d["f"]),
                regime_tag=d["regime_tag"],
                reference=ReferencePair.from_dict(d["reference"]),
                mu_g=float(d.get("mu_g", 0.0)),
                h=None if d.get("h") is None else prox_term_from_dict(d["h"]),
                K=K,
                g_term=None if d.get("g") is None else prox_term_from_dict(d["g"]),
                seed=d.get("seed"),
                generator=d.get("generator", {}),
                null_basis=None if nb is None else np.array(nb, dtype=float).reshape(len(nb), -1),
            )
        except KeyError as exc:
            raise InputError(f"problem document lacks field {exc}") from None

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str, base_dir=None) -> "ProblemInstance":
        return cls.from_dict(json.loads(text), base_dir)

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "ProblemInstance":
        path = Path(path)
        return cls.from_json(path.read_text(), base_dir=path.parent)


# -- building blocks -----------------------------------------------------------------------


def _orthogonal(n, rng):
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def _psd_matrix(n, L, cond, rng, rank=None):
    """``Q diag(lam) Q^T`` with log-uniform ``lam`` in ``[L/cond, L]``, endpoints exact.

    With ``rank < n`` the trailing eigenvalues are zero.
    """
    rank = n if rank is None else rank
    u = np.sort(rng.uniform(0.0, 1.0, rank))[::-1]
    if rank >= 2:
        u[0], u[-1] = 1.0, 0.0
    else:
        u[:] = 0.0
    lam = np.zeros(n)
    lam[:rank] = np.sort(L * float(cond) ** (-u))[::-1]
    Q = _orthogonal(n, rng)
    A = (Q * lam) @ Q.T
    return 0.5 * (A + A.T)


def _null_basis(M, rtol=1e-10):
    if M.size == 0:
        return None
    N = sla.null_space(M, rcond=rtol)
    return N if N.shape[1] else None


def make_regS(A, bf, K, c, mu_g: float = 0.0, seed=None, generator=None) -> ProblemInstance:
    """Regime-S instance ``f = 1/2 x'Ax - bf'x``, ``h = 1/2||. - c||^2``, solved directly.

    The saddle point solves ``(A + mu_g I + K'K) x = bf + K'c``, ``u = Kx - c``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    Km = np.atleast_2d(np.asarray(K, dtype=float))
    bf = np.atleast_1d(np.asarray(bf, dtype=float))
    c = np.atleast_1d(np.asarray(c, dtype=float))
    n = A.shape[0]
    M = A + mu_g * np.eye(n) + Km.T @ Km
    try:
        x = sla.solve(M, bf + Km.T @ c, assume_a="sym")
    except (sla.LinAlgError, ValueError) as exc:
        raise ConfigurationError(f"singular regime-S system: {exc}", "problem") from None
    if np.linalg.cond(M) > 1e12:
        raise ConfigurationError("regime-S system is numerically singular", "problem")
    f = quadratic(A, bf)
    K_op = LinearMap(Km)
    u = Km @ x - c
    gx = f.grad(x)
    Kx = Km @ x
    h = QuadraticAround(c)
    psi = f(x) + 0.5 * mu_g * float(x @ x) + h(Kx)
    ref = ReferencePair(x, gx, mu_g * x, psi, u, Kx)
    return ProblemInstance(f, "regS", ref, mu_g, h, K_op, seed=seed, generator=generator or {})


def _reduced_kkt(H, bf, Km, b, rtol=1e-10):
    """Solve ``H x + K'u = bf, Kx = b`` with ``u`` in ``range(K)``.

    Uses the compact SVD ``K = U_r S_r V_r'``: writing ``u = U_r S_r^{-1} w``
    turns the system into ``[[H, V_r], [V_r', 0]] (x, w) = (bf, S_r^{-1} U_r' b)``,
    which is nonsingular whenever ``H`` is definite on ``ker K``. For
    singular ``H`` the minimum-norm least-squares solution is taken.
    """
    U, s, Vt = np.linalg.svd(Km, full_matrices=False)
    r = int((s > rtol * s[0]).sum())
    U, s, Vt = U[:, :r], s[:r], Vt[:r]
    n = H.shape[0]
    M = np.block([[H, Vt.T], [Vt, np.zeros((r, r))]])
    rhs = np.concatenate([bf, (U.T @ b) / s])
    sol, *_ = np.linalg.lstsq(M, rhs, rcond=None)
    x, w = sol[:n], sol[n:]
    u = U @ (w / s)
    return x, u


def make_linconstrained(A, bf, K, b, mu_g: float = 0.0, seed=None, generator=None, tag="regC") -> ProblemInstance:
    """``min 1/2 x'Ax - bf'x + (mu_g/2)||x||^2  s.t.  Kx = b`` solved through its KKT system."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    Km = np.atleast_2d(np.asarray(K, dtype=float))
    bf = np.atleast_1d(np.asarray(bf, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    n = A.shape[0]
    H = A + mu_g * np.eye(n)
    x, u = _reduced_kkt(H, bf, Km, b)
    f = quadratic(A, bf)
    stat = H @ x - bf + Km.T @ u
    feas = Km @ x - b
    if max(np.linalg.norm(stat), np.linalg.norm(feas)) > 1e-9 * (1.0 + np.linalg.norm(bf) + np.linalg.norm(b)):
        raise ConfigurationError("KKT system has no solution (b outside range(K)?)", "problem")
    h = AffineIndicator(b)
    nb = _null_basis(np.vstack([H, Km]))
    ref = ReferencePair(x, f.grad(x), mu_g * x, f(x) + 0.5 * mu_g * float(x @ x), u, b.copy())
    return ProblemInstance(f, tag, ref, mu_g, h, LinearMap(Km), seed=seed, generator=generator or {},
                           null_basis=nb)


def lasso_oracle(A, bvec, weight: float, tol: float = 1e-12, max_iters: int = 1_000_000):
    """Minimize ``1/2 s'As - bvec's + weight ||s||_1`` independently of the engines.

    Runs plain proximal-gradient sweeps with ``gamma = 1/L`` until the
    support and signs settle, then solves the reduced linear system on the
    support exactly. The result is certified by the fixed-point residual
    ``||s - prox(s - gamma grad)|| <= tol (1 + ||s||)``.

    Returns ``(s, iterations)``.
    """
    A = np.asarray(A, dtype=float)
    bvec = np.asarray(bvec, dtype=float)
    eig = np.linalg.eigvalsh(A)
    L = float(eig[-1])
    if not L > 0:
        raise OracleError("lasso oracle needs a nonzero quadratic")
    gamma = 1.0 / L
    n = A.shape[0]

    def soft(v, thr):
        return np.sign(v) * np.maximum(np.abs(v) - thr, 0.0)

    def residual(s):
        return float(np.linalg.norm(s - soft(s - gamma * (A @ s - bvec), gamma * weight)))

    s = np.zeros(n)
    it = 0
    block = 200
    last_pattern = None
    while it < max_iters:
        for _ in range(block):
            s = soft(s - gamma * (A @ s - bvec), gamma * weight)
        it += block
        pattern = np.sign(s)
        if last_pattern is not None and np.array_equal(pattern, last_pattern):
            cand = _active_set_solve(A, bvec, weight, pattern)
            if cand is not None and residual(cand) <= tol * (1.0 + np.linalg.norm(cand)):
                return cand, it
        last_pattern = pattern
        if residual(s) <= tol * (1.0 + np.linalg.norm(s)):
            return s, it
        block = min(2 * block, 20_000)
    raise OracleError(f"lasso oracle not certified after {it} iterations (residual {residual(s):.2e})")


def _active_set_solve(A, bvec, weight, pattern):
    S = np.flatnonzero(pattern)
    s = np.zeros(A.shape[0])
    if S.size == 0:
        return s
    rhs = bvec[S] - weight * pattern[S]
    try:
        s[S] = np.linalg.solve(A[np.ix_(S, S)], rhs)
    except np.linalg.LinAlgError:
        return None
    if np.any(np.sign(s[S]) != pattern[S]):
        return None
    return s


def _l1_subgrad(grad, s, weight):
    """Element of ``weight * d||.||_1(s)`` closest to ``-grad``."""
    out = np.clip(-grad, -weight, weight)
    on = s != 0
    out[on] = weight * np.sign(s[on])
    return out


# -- generators ------------------------------------------------------------------------------


def gen_quadratic_regS(n: int, m: int, mu_g: float = 0.0, cond_f: float = 100.0, seed: int = 0,
                       L_f: float = 1.0) -> ProblemInstance:
    """Quadratic ``f`` with spectrum in ``[L_f/cond_f, L_f]``, ``h = 1/2||. - c||^2``, dense ``K``."""
    if n < 1 or m < 1 or cond_f < 1:
        raise InputError("need n, m >= 1 and cond_f >= 1")
    rng = np.random.default_rng(seed)
    A = _psd_matrix(n, L_f, cond_f, rng)
    bf = rng.standard_normal(n)
    K = rng.standard_normal((m, n)) / math.sqrt(m)
    c = rng.standard_normal(m)
    gen = {"name": "quadratic_regS", "n": n, "m": m, "mu_g": mu_g, "cond_f": cond_f, "seed": seed, "L_f": L_f}
    return make_regS(A, bf, K, c, mu_g, seed, gen)


def gen_lasso_like(n: int, m: int, lam_l1: float, seed: int = 0) -> ProblemInstance:
    """``1/2||Dx - r||^2 + lam_l1 ||x||_1`` as a primal-only instance."""
    if not lam_l1 > 0:
        raise InputError("lam_l1 must be positive")
    rng = np.random.default_rng(seed)
    D = rng.standard_normal((m, n)) / math.sqrt(m)
    r = rng.standard_normal(m)
    A = D.T @ D
    bf = D.T @ r
    f = quadratic(A, bf, const=0.5 * float(r @ r))
    x, _ = lasso_oracle(f.params["A"], f.params["b"], lam_l1)
    gx = f.grad(x)
    g = L1Norm(lam_l1)
    ref = ReferencePair(x, gx, _l1_subgrad(gx, x, lam_l1), f(x) + g(x))
    gen = {"name": "lasso_like", "n": n, "m": m, "lam_l1": lam_l1, "seed": seed}
    return ProblemInstance(f, "primal_only", ref, g_term=g, seed=seed, generator=gen)


def gen_linconstrained(n: int, m_rank: int, mu_g: float = 0.0, seed: int = 0, n_dup: int = 1,
                       cond_f: float = 10.0, flat: int = 0) -> ProblemInstance:
    """``Kx = b`` with ``rank K = m_rank`` and ``n_dup`` redundant rows.

    ``b = K x0`` for a random ``x0``. ``flat > 0`` makes ``f`` singular on a
    ``flat``-dimensional subspace of ``ker K`` so that, with ``mu_g = 0``,
    the minimizer is not unique.
    """
    if not 1 <= m_rank <= n:
        raise InputError("need 1 <= m_rank <= n")
    if flat > n - m_rank:
        raise InputError("flat directions must fit inside ker K")
    rng = np.random.default_rng(seed)
    Q = _orthogonal(n, rng)
    rows = rng.standard_normal((m_rank, m_rank)) @ Q[:, :m_rank].T / math.sqrt(n)
    mix = rng.standard_normal((n_dup, m_rank)) / math.sqrt(m_rank) if n_dup else np.zeros((0, m_rank))
    K = np.vstack([rows, mix @ rows])
    if flat:
        # f is blind to the last `flat` directions of ker K
        W = Q[:, : n - flat]
        A = W @ _psd_matrix(n - flat, 1.0, cond_f, rng) @ W.T
        A = 0.5 * (A + A.T)
    else:
        A = _psd_matrix(n, 1.0, cond_f, rng)
    bf = rng.standard_normal(n)
    if flat:
        bf = A @ rng.standard_normal(n)
    b = K @ rng.standard_normal(n)
    gen = {"name": "linconstrained", "n": n, "m_rank": m_rank, "mu_g": mu_g, "seed": seed, "n_dup": n_dup,
           "cond_f": cond_f, "flat": flat}
    return make_linconstrained(A, bf, K, b, mu_g, seed, gen)


def _random_connected_graph(n_agents, p_edge, rng, max_tries=100):
    for _ in range(max_tries):
        upper = np.triu(rng.uniform(size=(n_agents, n_agents)) < p_edge, 1)
        ncomp, _ = connected_components(upper, directed=False)
        if ncomp == 1:
            return np.argwhere(upper)
    raise ConfigurationError(f"no connected graph after {max_tries} draws; raise p_edge", "p_edge")


def incidence(edges, n_agents) -> np.ndarray:
    B = np.zeros((len(edges), n_agents))
    for k, (i, j) in enumerate(edges):
        B[k, i], B[k, j] = 1.0, -1.0
    return B


def gen_consensus(n_agents: int, dim: int = 1, mu_g: float = 0.0, seed: int = 0, p_edge: float = 0.5,
                  graph: str = "random", centers=None, curvature: str = "random",
                  f_cond: float = 10.0) -> ProblemInstance:
    """Consensus ``x_1 = ... = x_N`` over a connected graph, per-agent quadratics.

    ``K = B kron I_dim`` with ``B`` the edge-node incidence matrix and
    ``b = 0``. ``f(x) = sum_i 1/2 (x_i - c_i)' A_i (x_i - c_i)``; with
    ``curvature="identity"`` every ``A_i = I``, otherwise each ``A_i`` has a
    log-uniform spectrum in ``[1/f_cond, 1]``.
    """
    if n_agents < 2:
        raise InputError("need at least two agents")
    rng = np.random.default_rng(seed)
    if graph == "path":
        edges = np.array([(i, i + 1) for i in range(n_agents - 1)])
    elif graph == "random":
        edges = _random_connected_graph(n_agents, p_edge, rng)
    else:
        raise InputError(f"unknown graph {graph!r}")
    K = np.kron(incidence(edges, n_agents), np.eye(dim))
    if centers is None:
        centers = rng.standard_normal((n_agents, dim))
    centers = np.asarray(centers, dtype=float).reshape(n_agents, dim)
    blocks = []
    for _ in range(n_agents):
        if curvature == "identity":
            blocks.append(np.eye(dim))
        else:
            blocks.append(_psd_matrix(dim, 1.0, f_cond, rng) if dim > 1 else np.array([[rng.uniform(1.0 / f_cond, 1.0)]]))
    A = sla.block_diag(*blocks)
    bf = A @ centers.reshape(-1)
    gen = {"name": "consensus", "n_agents": n_agents, "dim": dim, "mu_g": mu_g, "seed": seed, "p_edge": p_edge,
           "graph": graph, "curvature": curvature, "f_cond": f_cond}
    return make_linconstrained(A, bf, K, np.zeros(K.shape[0]), mu_g, seed, gen)


def gen_injective(n: int, mu_g: float = 0.0, seed: int = 0, weight: float = 0.5, cond_f: float = 10.0,
                  spread: float = 0.3) -> ProblemInstance:
    """Regime-B instance: square ``K = I + spread G/sqrt(n)``, ``h = weight ||.||_1``.

    Substituting ``s = Kx`` turns the problem into an l1-regularized
    quadratic in ``s``, which :func:`lasso_oracle` solves; then
    ``x* = K^{-1} s*`` and ``u* = -K^{-T}(grad f(x*) + mu_g x*)``.
    """
    rng = np.random.default_rng(seed)
    A = _psd_matrix(n, 1.0, cond_f, rng)
    bf = rng.standard_normal(n)
    K = np.eye(n) + spread * rng.standard_normal((n, n)) / math.sqrt(n)
    Kinv = np.linalg.inv(K)
    H = A + mu_g * np.eye(n)
    As = Kinv.T @ H @ Kinv
    As = 0.5 * (As + As.T)
    s, _ = lasso_oracle(As, Kinv.T @ bf, weight)
    x = sla.solve(K, s)
    f = quadratic(A, bf)
    gx = f.grad(x)
    u = -sla.solve(K.T, gx + mu_g * x)
    # pin u exactly onto the l1 subdifferential at s
    u = _l1_subgrad(-u, s, weight)
    h = L1Norm(weight)
    ref = ReferencePair(x, gx, mu_g * x, f(x) + 0.5 * mu_g * float(x @ x) + h(K @ x), u, K @ x)
    gen = {"name": "injective", "n": n, "mu_g": mu_g, "seed": seed, "weight": weight, "cond_f": cond_f,
           "spread": spread}
    return ProblemInstance(f, "regB", ref, mu_g, h, LinearMap(K), seed=seed, generator=gen)


def gen_flat_least_squares(n: int, rank: int, seed: int = 0, sigma_min: float = 0.3) -> ProblemInstance:
    """``1/2||Dx - r||^2`` with ``rank D < n``: minimizers form an affine subspace.

    Singular values of ``D`` lie in ``[sigma_min, 1]``; the reference is the
    minimum-norm solution and ``null_basis`` spans ``ker D``.
    """
    if not 1 <= rank < n:
        raise InputError("need 1 <= rank < n")
    rng = np.random.default_rng(seed)
    U = _orthogonal(rank, rng)
    V = _orthogonal(n, rng)[:, :rank]
    sv = np.sort(rng.uniform(sigma_min, 1.0, rank))[::-1]
    sv[0], sv[-1] = 1.0, sigma_min
    D = (U * sv) @ V.T
    r = rng.standard_normal(rank)
    A = D.T @ D
    A = 0.5 * (A + A.T)
    f = quadratic(A, D.T @ r, const=0.5 * float(r @ r))
    x = np.linalg.pinv(D) @ r
    gx = f.grad(x)
    g = Zero()
    ref = ReferencePair(x, gx, np.zeros(n), f(x))
    nb = _null_basis(D)
    gen = {"name": "flat_least_squares", "n": n, "rank": rank, "seed": seed, "sigma_min": sigma_min}
    return ProblemInstance(f, "primal_only", ref, g_term=g, seed=seed, generator=gen, null_basis=nb)


def gen_strongly_convex(n: int, cond: float = 1e4, seed: int = 0, f_cond: float | None = None,
                        L_f: float = 1.0) -> ProblemInstance:
    """Primal-only quadratic with ``g = (mu_g/2)||x||^2``, ``mu_g = L_f/cond``.

    ``f`` has spectrum log-uniform in ``[L_f/f_cond, L_f]``; by default one
    eigenvalue is zero, so strong convexity comes from ``g`` alone.
    """
    if cond < 1:
        raise InputError("cond must be >= 1")
    rng = np.random.default_rng(seed)
    if f_cond is None:
        A = _psd_matrix(n, L_f, cond, rng, rank=n - 1)
    else:
        A = _psd_matrix(n, L_f, f_cond, rng)
    bf = rng.standard_normal(n)
    mu_g = L_f / cond
    f = quadratic(A, bf)
    x = sla.solve(A + mu_g * np.eye(n), bf, assume_a="sym")
    g = QuadScaling(mu_g)
    ref = ReferencePair(x, f.grad(x), mu_g * x, f(x) + g(x))
    gen = {"name": "strongly_convex", "n": n, "cond": cond, "seed": seed, "f_cond": f_cond, "L_f": L_f}
    return ProblemInstance(f, "primal_only", ref, g_term=g, seed=seed, generator=gen)


GENERATORS = {
    "strongly_convex": gen_strongly_convex,
    "quadratic_regS": gen_quadratic_regS,
    "lasso_like": gen_lasso_like,
    "linconstrained": gen_linconstrained,
    "consensus": gen_consensus,
    "injective": gen_injective,
    "flat_least_squares": gen_flat_least_squares,
}


def generate(spec: dict) -> ProblemInstance:
    """Build an instance from ``{"name": ..., **kwargs}``."""
    spec = dict(spec)
    name = spec.pop("name", None)
    if name not in GENERATORS:
        raise ConfigurationError(f"unknown generator {name!r}; choose from {sorted(GENERATORS)}", "problem.name")
    try:
        return GENERATORS[name](**spec)
    except TypeError as exc:
        raise ConfigurationError(f"bad arguments for generator {name}: {exc}", "problem") from None
