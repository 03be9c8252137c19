import json

import numpy as np
import pytest
from scipy.sparse.csgraph import laplacian

from apapc.errors import ConfigurationError, InputError, OracleError
from apapc.linops import LinearMap
from apapc.problems import (
    GENERATORS,
    ProblemInstance,
    gen_consensus,
    gen_flat_least_squares,
    gen_injective,
    gen_lasso_like,
    gen_linconstrained,
    gen_quadratic_regS,
    gen_strongly_convex,
    generate,
    incidence,
    lasso_oracle,
    make_linconstrained,
    make_regS,
)

SMALL = {
    "strongly_convex": {"n": 10, "cond": 100.0},
    "quadratic_regS": {"n": 10, "m": 6},
    "lasso_like": {"n": 10, "m": 20, "lam_l1": 0.1},
    "linconstrained": {"n": 10, "m_rank": 4, "n_dup": 2},
    "consensus": {"n_agents": 5, "dim": 2},
    "injective": {"n": 8},
    "flat_least_squares": {"n": 10, "rank": 6},
}


def test_covers_all_generators():
    assert set(SMALL) == set(GENERATORS)


@pytest.mark.parametrize("name", sorted(SMALL))
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_references_certified(name, seed):
    p = generate({"name": name, "seed": seed, **SMALL[name]})
    res = p.reference.residuals(p.g, p.h, p.K)
    assert max(res.values()) <= 1e-8 * (1 + np.abs(p.reference.x_star).max())


@pytest.mark.parametrize("name", sorted(SMALL))
def test_generators_deterministic(name):
    p1 = generate({"name": name, "seed": 7, **SMALL[name]})
    p2 = generate({"name": name, "seed": 7, **SMALL[name]})
    np.testing.assert_array_equal(p1.reference.x_star, p2.reference.x_star)


@pytest.mark.parametrize("name", sorted(SMALL))
def test_json_roundtrip(name, tmp_path):
    p = generate({"name": name, "seed": 3, **SMALL[name]})
    path = tmp_path / "p.json"
    p.save(path)
    q = ProblemInstance.load(path)
    assert q.regime_tag == p.regime_tag and q.mu_g == p.mu_g
    np.testing.assert_array_equal(q.reference.x_star, p.reference.x_star)
    x = np.linspace(-1, 1, p.n)
    assert q.f(x) == p.f(x)
    assert q.primal_gap(x) == pytest.approx(p.primal_gap(x), rel=1e-14)


def test_operator_from_text_file(tmp_path):
    p = gen_quadratic_regS(6, 3, seed=0)
    d = p.to_dict()
    p.K.to_text(tmp_path / "K.txt")
    d["K"] = "K.txt"
    (tmp_path / "p.json").write_text(json.dumps(d))
    q = ProblemInstance.load(tmp_path / "p.json")
    np.testing.assert_array_equal(q.K.matrix, p.K.matrix)


def test_rejects_foreign_format():
    d = gen_strongly_convex(3, 10.0).to_dict()
    d["format"] = "other/9"
    with pytest.raises(InputError):
        ProblemInstance.from_dict(d)


# -- regime S ---------------------------------------------------------------------------


def test_regS_trivial():
    p = make_regS([[1.0]], [0.0], [[1.0]], [0.0])
    assert p.reference.x_star[0] == 0.0 and p.reference.u_star[0] == 0.0


def test_regS_one_dimensional():
    p = make_regS([[1.0]], [3.0], [[1.0]], [0.0], mu_g=1.0)
    assert p.reference.x_star[0] == pytest.approx(1.0, rel=1e-15)
    assert p.reference.u_star[0] == pytest.approx(1.0, rel=1e-15)


def test_regS_random_residuals():
    p = gen_quadratic_regS(20, 15, seed=5)
    assert max(p.reference.residuals(p.g, p.h, p.K).values()) <= 1e-10


# -- lasso ------------------------------------------------------------------------------


def test_lasso_zero_data():
    D = np.random.default_rng(0).standard_normal((6, 4))
    s, _ = lasso_oracle(D.T @ D, np.zeros(4), 0.3)
    np.testing.assert_array_equal(s, 0.0)


def test_lasso_one_dimensional():
    s, _ = lasso_oracle([[1.0]], [3.0], 1.0)
    assert s[0] == pytest.approx(2.0, rel=1e-15)


def test_lasso_certified():
    p = gen_lasso_like(30, 60, 0.1, seed=4)
    x = p.reference.x_star
    A, b = p.f.params["A"], p.f.params["b"]
    gamma = 1.0 / p.f.L
    z = x - gamma * (A @ x - b)
    fixed = np.sign(z) * np.maximum(np.abs(z) - gamma * 0.1, 0)
    assert np.linalg.norm(fixed - x) <= 1e-12 * (1 + np.linalg.norm(x))
    assert np.any(x == 0)


def test_lasso_oracle_gives_up():
    with pytest.raises(OracleError):
        lasso_oracle(np.diag([1.0, 1e-9]), [1.0, 1.0], 1e-3, max_iters=200)


# -- linear constraints -----------------------------------------------------------------


def test_linconstrained_hand_example():
    p = make_linconstrained(np.eye(2), np.zeros(2), [[1.0, 1.0]], [2.0])
    np.testing.assert_allclose(p.reference.x_star, [1.0, 1.0], rtol=1e-14)
    np.testing.assert_allclose(p.reference.u_star, [-1.0], rtol=1e-14)


def test_linconstrained_zero_rhs():
    p = make_linconstrained(np.diag([1.0, 2.0, 3.0]), np.zeros(3), [[1.0, 0.0, 1.0]], [0.0])
    np.testing.assert_allclose(p.reference.x_star, 0.0, atol=1e-15)
    np.testing.assert_allclose(p.reference.u_star, 0.0, atol=1e-15)


def test_linconstrained_dual_in_range():
    p = gen_linconstrained(12, 4, 0.0, seed=3, n_dup=3)
    Km = p.K.matrix
    assert np.linalg.matrix_rank(Km) == 4 and Km.shape[0] == 7
    P = Km @ np.linalg.pinv(Km)
    u = p.reference.u_star
    assert np.linalg.norm(u - P @ u) <= 1e-10
    assert p.constants["lam_min"] == 0 and p.constants["lam_min_plus"] > 0


def test_linconstrained_infeasible_rhs():
    with pytest.raises(ConfigurationError):
        make_linconstrained(np.eye(2), np.zeros(2), [[1.0, 1.0], [1.0, 1.0]], [1.0, 2.0])


def test_flat_directions_in_solution_set():
    p = gen_linconstrained(12, 4, 0.0, seed=1, n_dup=1, flat=3)
    N = p.null_basis
    assert N.shape == (12, 3)
    x = p.reference.x_star + N @ np.array([1.0, -2.0, 0.5])
    assert p.dist_to_solution_set(x) <= 1e-12
    assert p.primal_gap(x) == pytest.approx(0.0, abs=1e-10)


# -- consensus --------------------------------------------------------------------------


def test_consensus_two_identical_agents():
    p = gen_consensus(2, 3, 0.0, seed=0, centers=[[1.0, 2.0, 3.0]] * 2, curvature="identity")
    np.testing.assert_allclose(p.reference.x_star, [1, 2, 3, 1, 2, 3], rtol=1e-14)


def test_consensus_path_of_three():
    p = gen_consensus(3, 1, 0.0, graph="path", centers=[0.0, 3.0, 6.0], curvature="identity")
    np.testing.assert_allclose(p.reference.x_star, 3.0, rtol=1e-14)


@pytest.mark.parametrize("seed", range(3))
def test_consensus_algebraic_connectivity(seed):
    p = gen_consensus(8, 1, 0.0, seed=seed, p_edge=0.4)
    B = p.K.matrix
    adj = (np.abs(B.T @ B) > 0).astype(float)
    np.fill_diagonal(adj, 0)
    fiedler = np.linalg.eigvalsh(laplacian(adj))[1]
    assert p.constants["lam_min_plus"] == pytest.approx(fiedler, rel=1e-10)


def test_incidence_rows():
    B = incidence(np.array([(0, 1), (1, 2)]), 3)
    np.testing.assert_array_equal(np.abs(B).sum(axis=1), 2)
    np.testing.assert_array_equal(B.sum(axis=1), 0)


# -- other generators ---------------------------------------------------------------------


def test_injective_regime_b():
    p = gen_injective(10, 0.0, seed=2)
    assert p.regime_tag == "regB" and p.constants["lam_min"] > 0


def test_flat_least_squares_min_norm():
    p = gen_flat_least_squares(12, 7, seed=0)
    assert np.linalg.norm(p.null_basis.T @ p.reference.x_star) <= 1e-12
    assert p.null_basis.shape == (12, 5)


def test_strongly_convex_singular_f():
    p = gen_strongly_convex(10, 1e3, seed=0)
    assert p.f.mu == 0.0 and p.g.mu == pytest.approx(1e-3)


# -- validation -----------------------------------------------------------------------------


def test_validate_rejects_bad_reference():
    p = gen_quadratic_regS(5, 3, seed=0)
    d = p.to_dict()
    d["reference"]["x_star"] = (np.array(d["reference"]["x_star"]) + 1e-3).tolist()
    with pytest.raises(OracleError):
        ProblemInstance.from_dict(d)


def test_validate_regime_mismatch():
    p = gen_quadratic_regS(5, 3, seed=0)
    d = p.to_dict()
    d["regime_tag"] = "regC"
    with pytest.raises(InputError):
        ProblemInstance.from_dict(d)


def test_generate_errors():
    with pytest.raises(ConfigurationError):
        generate({"name": "nope"})
    with pytest.raises(ConfigurationError):
        generate({"name": "consensus", "wrong": 1})
    with pytest.raises(InputError):
        gen_consensus(1)


def test_f_with_mu():
    p = gen_quadratic_regS(5, 3, mu_g=0.5, seed=0)
    fm = p.f_with_mu()
    x = np.ones(5)
    assert fm(x) == pytest.approx(p.f(x) + 0.25 * 5)
    assert fm.L == pytest.approx(p.f.L + 0.5)
