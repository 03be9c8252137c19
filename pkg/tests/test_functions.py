import math

import numpy as np
import pytest
from scipy.optimize import minimize

from apapc.errors import InputError
from apapc.functions import (
    AffineIndicator,
    BoxIndicator,
    Huber,
    L1Norm,
    QuadraticAround,
    QuadScaling,
    Zero,
    builtin_smooth,
    conj_prox,
    eval_conjugate,
    logistic,
    prox_term_from_dict,
    quadratic,
    recover_conj_subgradient,
    smooth_from_dict,
)

PROX_TERMS = [
    Zero(),
    QuadScaling(0.7),
    QuadraticAround([1.0, -2.0, 0.5], L=2.0),
    Huber(0.5),
    L1Norm(0.3),
    AffineIndicator([1.0, 2.0, 3.0]),
    BoxIndicator(-1.0, 2.0),
]


# -- conj_prox ------------------------------------------------------------------------


def test_conj_prox_zero():
    for alpha in (0.1, 1.0, 7.0):
        np.testing.assert_array_equal(conj_prox(Zero(), alpha, np.array([3.0, -4.0])), 0.0)


def test_conj_prox_affine():
    out = conj_prox(AffineIndicator([1.0, 2.0]), 0.5, np.array([3.0, 3.0]))
    np.testing.assert_allclose(out, [2.5, 2.0], rtol=0, atol=1e-15)


def test_conj_prox_quadratic_grid():
    h = QuadraticAround([1.0, 0.0])
    u = np.array([3.0, 2.0])
    g = np.linspace(-2, 4, 601)
    P1, P2 = np.meshgrid(g, g, indexing="ij")
    obj = 0.5 * (P1**2 + P2**2) + P1 * 1.0 + 0.5 * ((P1 - u[0]) ** 2 + (P2 - u[1]) ** 2)
    i = np.unravel_index(np.argmin(obj), obj.shape)
    grid = np.array([P1[i], P2[i]])
    out = conj_prox(h, 1.0, u)
    np.testing.assert_allclose(out, grid, atol=1e-3)
    np.testing.assert_allclose(out, (u - h.c) / 2, rtol=1e-14)


def test_conj_prox_rejects_nonpositive_alpha():
    with pytest.raises(InputError):
        conj_prox(L1Norm(), 0.0, np.ones(2))


@pytest.mark.parametrize("h", PROX_TERMS, ids=lambda h: h.kind)
def test_moreau_identity(h, rng):
    # prox_{a h}(u) + a prox_{h*/a}(u/a) = u
    for _ in range(10):
        u = 3 * rng.standard_normal(3)
        a = float(rng.uniform(0.1, 5.0))
        lhs = h.prox(a, u) + a * h.conj_prox(1.0 / a, u / a)
        np.testing.assert_allclose(lhs, u, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("h", PROX_TERMS[:5], ids=lambda h: h.kind)
def test_prox_is_minimizer(h, rng):
    u = 2 * rng.standard_normal(3)
    a = 0.8
    p = h.prox(a, u)
    best = a * h.value(p) + 0.5 * float((p - u) @ (p - u))
    for _ in range(200):
        q = p + 0.05 * rng.standard_normal(3)
        assert a * h.value(q) + 0.5 * float((q - u) @ (q - u)) >= best - 1e-12


# -- conjugates -----------------------------------------------------------------------


def test_conjugate_affine():
    b = np.array([1.0, 2.0])
    assert eval_conjugate(AffineIndicator(b), [3.0, -1.0]) == pytest.approx(1.0)


def test_conjugate_quadratic_matches_grid():
    c = np.array([1.0, 0.0])
    h = QuadraticAround(c)
    u = np.array([0.7, -0.4])
    assert eval_conjugate(h, u) == pytest.approx(0.5 * u @ u + u @ c, rel=1e-14)
    g = np.linspace(-3, 3, 1201)
    W1, W2 = np.meshgrid(g, g, indexing="ij")
    vals = u[0] * W1 + u[1] * W2 - 0.5 * ((W1 - c[0]) ** 2 + (W2 - c[1]) ** 2)
    assert eval_conjugate(h, u) == pytest.approx(vals.max(), abs=1e-4)


def test_conjugate_l1():
    assert eval_conjugate(L1Norm(), [0.5, -1.0]) == 0.0
    assert math.isinf(eval_conjugate(L1Norm(), [1.5, 0.0]))


@pytest.mark.parametrize("h", [QuadraticAround([0.3, -1.0], 2.0), Huber(0.7), L1Norm(0.4), BoxIndicator(-1, 2)],
                         ids=lambda h: h.kind)
def test_fenchel_young(h, rng):
    # h(x) + h*(p) >= <x, p>, with equality at p in dh(x) (via the prox)
    for _ in range(20):
        x, p = rng.standard_normal(2), 0.3 * rng.standard_normal(2)
        hx, hp = h.value(x), h.conj_value(p)
        if math.isinf(hx) or math.isinf(hp):
            continue
        assert hx + hp >= float(x @ p) - 1e-12
    u = rng.standard_normal(2)
    x = h.prox(1.0, u)
    p = u - x
    assert h.value(x) + h.conj_value(p) == pytest.approx(float(x @ p), abs=1e-12)


def test_conjugate_numerical_huber():
    h = Huber(0.5)
    p = np.array([0.4, -0.9])
    res = minimize(lambda w: -(p @ w - h.value(w)), np.zeros(2), method="Nelder-Mead",
                   options={"xatol": 1e-10, "fatol": 1e-12})
    assert h.conj_value(p) == pytest.approx(-res.fun, abs=1e-8)


# -- subgradient recovery ----------------------------------------------------------------


def test_recover_fixed_point():
    w = np.array([1.0, -2.0])
    v = np.array([0.3, 0.1])
    np.testing.assert_allclose(recover_conj_subgradient(v, v, w, 0.37), w, rtol=1e-15)


def test_recover_affine_returns_b(rng):
    b = np.array([1.0, 2.0, -1.0])
    h = AffineIndicator(b)
    v, kz = rng.standard_normal(3), rng.standard_normal(3)
    s = 0.25
    vn = h.conj_prox(s, v + s * kz)
    np.testing.assert_allclose(recover_conj_subgradient(vn, v, kz, s), b, rtol=1e-12, atol=1e-12)


def test_recover_quadratic_analytic(rng):
    h = QuadraticAround(rng.standard_normal(4), L=1.7)
    v, kz = rng.standard_normal(4), rng.standard_normal(4)
    s = 0.6
    vn = h.conj_prox(s, v + s * kz)
    np.testing.assert_allclose(recover_conj_subgradient(vn, v, kz, s), h.conj_grad(vn), rtol=1e-10, atol=1e-10)


# -- smooth terms -----------------------------------------------------------------------


def test_quadratic_diag():
    f = builtin_smooth("quadratic", {"A": np.diag([4.0, 1.0])})
    assert (f.L, f.mu) == (4.0, 1.0)
    np.testing.assert_array_equal(f.grad(np.array([1.0, 2.0])), [4.0, 2.0])


def test_quadratic_zero_uses_override():
    f = quadratic(np.zeros((2, 2)), [1.0, 1.0], L_override=3.0)
    assert f.L == 3.0 and f.mu == 0.0
    np.testing.assert_array_equal(f.grad(np.array([5.0, -5.0])), [-1.0, -1.0])


def test_quadratic_validation():
    with pytest.raises(InputError):
        quadratic([[1.0, 2.0], [0.0, 1.0]])
    with pytest.raises(InputError):
        quadratic(np.diag([1.0, -1.0]))


def test_logistic_single_datum():
    f = logistic([[1.0, 0.0]], [1])
    np.testing.assert_allclose(f.grad(np.zeros(2)), [-0.5, 0.0], rtol=1e-15)
    assert f.L == pytest.approx(0.25)


@pytest.mark.parametrize("kind", ["quadratic", "logistic"])
def test_gradient_finite_differences(kind, rng):
    n = 5
    if kind == "quadratic":
        M = rng.standard_normal((n, n))
        f = quadratic(M @ M.T, rng.standard_normal(n))
    else:
        f = logistic(rng.standard_normal((8, n)), rng.choice([-1, 1], 8))
    h = 1e-6
    for _ in range(20):
        x = rng.standard_normal(n)
        fd = np.array([(f(x + h * e) - f(x - h * e)) / (2 * h) for e in np.eye(n)])
        g = f.grad(x)
        assert np.linalg.norm(fd - g) <= 1e-5 * max(1.0, np.linalg.norm(g))


def test_bregman_nonnegative_and_exact(rng):
    M = rng.standard_normal((4, 4))
    f = quadratic(M @ M.T, rng.standard_normal(4))
    x, y = rng.standard_normal(4), rng.standard_normal(4)
    direct = f(x) - f(y) - float((x - y) @ f.grad(y))
    assert f.bregman(x, y) == pytest.approx(direct, rel=1e-10)
    assert f.bregman(x, y) >= 0


# -- serialization ---------------------------------------------------------------------


@pytest.mark.parametrize("h", PROX_TERMS, ids=lambda h: h.kind)
def test_prox_term_roundtrip(h, rng):
    h2 = prox_term_from_dict(h.to_dict())
    assert type(h2) is type(h)
    u = rng.standard_normal(3)
    np.testing.assert_array_equal(h2.prox(0.5, u), h.prox(0.5, u))


def test_smooth_roundtrip():
    f = quadratic(np.diag([2.0, 1.0]), [1.0, 0.0])
    g = smooth_from_dict(f.to_dict())
    x = np.array([0.3, 0.4])
    assert g(x) == f(x)


def test_unknown_kinds():
    with pytest.raises(InputError):
        builtin_smooth("cubic", {})
    with pytest.raises(InputError):
        prox_term_from_dict({"kind": "nope"})
