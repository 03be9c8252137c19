"""Randomized invariants (hypothesis)."""

import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from apapc import diagnostics as dg
from apapc.functions import BoxIndicator, Huber, L1Norm, QuadraticAround
from apapc.linops import LinearMap
from apapc.problems import gen_quadratic_regS
from apapc.schedules import MomentumSchedule

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
positive = st.floats(1e-3, 1e3, allow_nan=False)

settings.register_profile("pkg", max_examples=60, deadline=None)
settings.load_profile("pkg")


@given(arrays(float, (4, 3), elements=finite), arrays(float, 3, elements=finite), arrays(float, 4, elements=finite))
def test_adjoint_identity(M, x, u):
    if not np.any(M):
        M[0, 0] = 1.0
    K = LinearMap(M)
    Kx = K(x)
    assert abs(Kx @ u - x @ K.adjoint(u)) <= 1e-12 * (1 + np.linalg.norm(Kx) * np.linalg.norm(u))


prox_terms = st.sampled_from([L1Norm(0.7), Huber(0.3), BoxIndicator(-1.0, 2.0), QuadraticAround([1.0, -1.0, 0.0], 3.0)])


@given(prox_terms, arrays(float, 3, elements=finite), st.floats(0.01, 100))
def test_moreau_decomposition(h, u, alpha):
    lhs = h.prox(alpha, u) + alpha * h.conj_prox(1.0 / alpha, u / alpha)
    np.testing.assert_allclose(lhs, u, rtol=1e-10, atol=1e-10)


@given(prox_terms, arrays(float, 3, elements=finite), arrays(float, 3, elements=finite), st.floats(0.01, 100))
def test_prox_firmly_nonexpansive(h, u, w, alpha):
    pu, pw = h.prox(alpha, u), h.prox(alpha, w)
    d = pu - pw
    assert d @ d <= d @ (u - w) + 1e-9 * (1 + np.abs(u - w).max() ** 2)


@given(st.floats(1e-3, 1e3), st.integers(2, 400))
def test_regS_schedule_invariants(tau_mu, n):
    a = MomentumSchedule("regS", {"tau": 1.0, "mu_hconj": tau_mu}).materialize(n)
    assert a[0] > 0 and a[1] == 1.0
    assert np.all(np.diff(a) >= 0)
    assert np.all(a[2:] ** 2 - a[2:] <= a[1:-1] ** 2 * (1 + 1e-14))
    assert np.all(a[2:] <= a[1:-1] + 1 + 1e-12)


@given(st.floats(0.01, 1.0), positive, st.floats(1e-3, 1.0), st.floats(1e-6, 1e-2), st.floats(0.05, 1.0))
def test_regB_capped_invariants(gamma_frac, L, lam_frac, mu_frac, nu):
    gamma = gamma_frac / (2 * L)
    K2 = 2.0
    p = {"gamma": gamma, "L_f": L, "lam": lam_frac * K2, "K_norm_sq": K2, "mu_g": mu_frac * L, "nu": nu}
    s = MomentumSchedule("regB_capped", p)
    a = s.materialize(300)
    assert np.all(a >= 1.0) and np.all(np.diff(a) >= 0)
    assert np.all(a <= s.a_sharp)
    r = nu * p["lam"] / (4 * K2)
    assert np.all(a[2:] ** 2 <= a[1:-1] ** 2 * (1 + r) * (1 + 1e-14))


@given(st.integers(0, 50), arrays(float, 6, elements=finite), arrays(float, 3, elements=finite))
def test_lagrangian_gap_nonnegative(seed, x, u):
    p = gen_quadratic_regS(6, 3, 0.1, 10.0, seed=seed)
    gap = dg.lagrangian_gap(p.reference, x, u, p.f, p.mu_g, p.h, p.K)
    direct = dg.lagrangian_gap_direct(p.reference, x, u, p.f, p.mu_g, p.h, p.K)
    assert gap >= 0
    assert math.isclose(gap, direct, rel_tol=1e-9, abs_tol=1e-8 * (1 + abs(direct)))


@given(st.lists(st.floats(1e-6, 1e6), min_size=12, max_size=60))
def test_fit_rate_recovers_geometric(vals):
    q = 0.5 + 0.49 * (vals[0] / 1e6)
    seq = vals[1] * q ** np.arange(len(vals))
    recs = [dg.TraceRecord(t, 1.0, lyap=v, lag_gap=v) for t, v in enumerate(seq)]
    fit = dg.fit_rate(recs, len(recs))
    assert math.isclose(fit.linear_factor, q, rel_tol=1e-9)
