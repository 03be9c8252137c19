"""Dense linear operators and their spectral constants.

Every stepsize rule needs some of ``||K||^2``, ``lambda_min(K K^T)`` and the
smallest nonzero eigenvalue of ``K K^T``. At desk scale these are computed
from the dense Gram matrix; the operator norm additionally goes through a
power iteration so that the two routes can be compared.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EstimationError, InputError

__all__ = [
    "LinearMap",
    "SpectralBounds",
    "apply",
    "adjoint_apply",
    "estimate_spectral_bounds",
    "power_iteration",
]

RANK_THRESHOLD = 1e-10


@dataclass(frozen=True, eq=False)
class LinearMap:
    """Immutable dense operator ``K: R^cols -> R^rows``.

    Use the classmethod constructors for structured operators; they
    materialize the dense matrix, which keeps every oracle exact.
    """

    matrix: np.ndarray
    kind: str = "dense"

    def __post_init__(self):
        mat = np.array(self.matrix, dtype=float, copy=True)
        if mat.ndim == 1:
            mat = mat[None, :]
        if mat.ndim != 2 or mat.size == 0:
            raise InputError(f"operator must be a nonempty 2-D array, got shape {mat.shape}")
        if not np.all(np.isfinite(mat)):
            raise InputError("operator has non-finite entries")
        if not np.any(mat):
            raise InputError("operator must be nonzero")
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)

    @property
    def rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def cols(self) -> int:
        return self.matrix.shape[1]

    @property
    def shape(self):
        return self.matrix.shape

    @property
    def T(self) -> "LinearMap":
        return LinearMap(self.matrix.T, kind=self.kind)

    def __call__(self, x):
        return apply(self, x)

    def adjoint(self, u):
        return adjoint_apply(self, u)

    def gram(self) -> np.ndarray:
        """``K K^T`` (rows x rows)."""
        return self.matrix @ self.matrix.T

    @classmethod
    def identity(cls, n: int) -> "LinearMap":
        return cls(np.eye(n), kind="identity")

    @classmethod
    def scaled_identity(cls, n: int, scale: float) -> "LinearMap":
        return cls(scale * np.eye(n), kind="scaled_identity")

    @classmethod
    def diagonal(cls, d) -> "LinearMap":
        return cls(np.diag(np.asarray(d, dtype=float)), kind="diagonal")

    @classmethod
    def difference(cls, n: int) -> "LinearMap":
        """Forward differences ``(Kx)_i = x_{i+1} - x_i``, shape (n-1, n)."""
        if n < 2:
            raise InputError("difference operator needs n >= 2")
        mat = np.zeros((n - 1, n))
        idx = np.arange(n - 1)
        mat[idx, idx] = -1.0
        mat[idx, idx + 1] = 1.0
        return cls(mat, kind="difference")

    @classmethod
    def from_text(cls, path) -> "LinearMap":
        """Load one row per line, whitespace-separated decimals."""
        rows = []
        for line in Path(path).read_text().splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            rows.append([float(tok) for tok in line.split()])
        if not rows:
            raise InputError(f"{path}: no matrix rows")
        if len({len(r) for r in rows}) != 1:
            raise InputError(f"{path}: ragged rows")
        return cls(np.array(rows))

    def to_text(self, path) -> None:
        lines = [" ".join(repr(float(v)) for v in row) for row in self.matrix]
        Path(path).write_text("\n".join(lines) + "\n")


def apply(K: LinearMap, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (K.cols,):
        raise InputError(f"apply: expected vector of length {K.cols}, got shape {x.shape}")
    return K.matrix @ x


def adjoint_apply(K: LinearMap, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape != (K.rows,):
        raise InputError(f"adjoint_apply: expected vector of length {K.rows}, got shape {u.shape}")
    return K.matrix.T @ u


@dataclass(frozen=True)
class SpectralBounds:
    """Spectral constants of ``K K^T``.

    ``op_norm_sq`` is an upper estimate of ``||K||^2``; the two lower
    constants come from an exact symmetric eigensolve.
    """

    op_norm_sq: float
    lam_min: float
    lam_min_plus: float
    method: str = "exact_eig"

    def __post_init__(self):
        if not (0.0 <= self.lam_min <= self.lam_min_plus <= self.op_norm_sq):
            raise InputError(
                f"inconsistent bounds: lam_min={self.lam_min}, "
                f"lam_min_plus={self.lam_min_plus}, op_norm_sq={self.op_norm_sq}"
            )


def power_iteration(K: LinearMap, tol: float = 1e-10, max_iters: int = 10_000, seed: int = 0):
    """Largest eigenvalue of ``K^T K`` by power iteration.

    Returns ``(estimate, iterations)``. Raises EstimationError with the best
    Rayleigh quotient if the relative change does not fall below `tol`.
    """
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(K.cols)
    x /= np.linalg.norm(x)
    est = 0.0
    for it in range(1, max_iters + 1):
        y = K.matrix.T @ (K.matrix @ x)
        new = float(x @ y)
        nrm = np.linalg.norm(y)
        if nrm == 0.0:
            # x landed in ker(K); restart from a fresh direction
            x = rng.standard_normal(K.cols)
            x /= np.linalg.norm(x)
            continue
        x = y / nrm
        if it > 1 and abs(new - est) <= tol * abs(new):
            return new, it
        est = new
    raise EstimationError(
        f"power iteration did not reach tol={tol} in {max_iters} iterations", best=est
    )


def estimate_spectral_bounds(K: LinearMap, tol: float = 1e-10, max_iters: int = 10_000) -> SpectralBounds:
    """Spectral constants for stepsize rules.

    ``op_norm_sq`` is the larger of the power-iteration estimate and the top
    Gram eigenvalue, inflated by ``1 + 10*tol`` so that it never
    under-estimates ``||K||^2``. Eigenvalues of ``K K^T`` below
    ``1e-10 * op_norm_sq`` count as zero.
    """
    if tol <= 0:
        raise InputError("tol must be positive")
    power, _ = power_iteration(K, tol=tol, max_iters=max_iters)
    eig = np.linalg.eigvalsh(K.gram())
    top = max(power, float(eig[-1]))
    op_norm_sq = top * (1.0 + 10.0 * tol)
    thresh = RANK_THRESHOLD * op_norm_sq
    positive = eig[eig > thresh]
    lam_min_plus = float(positive[0]) if positive.size else 0.0
    lam_min = float(eig[0]) if eig[0] > thresh else 0.0
    return SpectralBounds(op_norm_sq, lam_min, min(lam_min_plus, op_norm_sq), "exact_eig")


def exact_spectral_bounds(K: LinearMap) -> SpectralBounds:
    """Uninflated constants straight from the Gram eigendecomposition."""
    eig = np.linalg.eigvalsh(K.gram())
    top = float(eig[-1])
    thresh = RANK_THRESHOLD * top
    positive = eig[eig > thresh]
    lam_min = float(eig[0]) if eig[0] > thresh else 0.0
    return SpectralBounds(top, lam_min, float(positive[0]), "exact_eig")
