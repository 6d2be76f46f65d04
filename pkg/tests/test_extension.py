import numpy as np
import pytest
import scipy.linalg

from conftest import CATALOG, algebra, random_spd
from solvgeo.curvature import act_metric
from solvgeo.extension import (CartanSplit, HypothesisError, NotANilsolitonError, cohomo1_evolution,
                               einstein_extension, einstein_residual, evolve_closed_form,
                               extension_from_derivation, normality_check, product_einstein_residual,
                               rank_one_invariants, semidirect_metric, symmetric_space_ricci)
from solvgeo.lie import direct_sum, is_nilpotent, load_algebra, nice_basis_report, parse_algebra
from solvgeo.soliton import nilsoliton_from_nice

H3_SOLITON = parse_algebra({"dim": 3, "brackets": [{"i": 1, "j": 2, "k": 3, "c": float(np.sqrt(2 / 3))}]})
SL2_SPLIT = CartanSplit(algebra("sl2"), np.array([[0.0, 1, -1]]), np.array([[1.0, 0, 0], [0, 1, 1]]))


def soliton_bases():
    out = []
    for path in sorted(CATALOG.glob("*.alg")):
        L = load_algebra(path)
        if not is_nilpotent(L):
            continue
        N = nice_basis_report(L)
        try:
            ns = nilsoliton_from_nice(N)
        except ValueError:
            continue
        out.append(pytest.param(ns.algebra, ns.metric, id=path.stem))
    return out


def test_h3_extension_derivation():
    X = einstein_extension(H3_SOLITON, np.eye(3))
    assert np.allclose(X.D, np.diag([2, 2, 4]) / 3 / np.sqrt(8 / 3))
    assert np.isclose(X.alpha, 1 / np.sqrt(8 / 3))
    assert np.isclose(np.trace(X.D), np.linalg.norm(X.beta_plus))
    assert np.allclose(X.algebra.ad(np.eye(4)[3])[:3, :3], X.D)
    assert einstein_residual(X.algebra, X.metric).residual <= 1e-8


@pytest.mark.parametrize("n", [2, 3, 4])
def test_abelian_extension_is_hyperbolic(n):
    X = einstein_extension(algebra(f"abelian{n}"), np.eye(n))
    assert np.allclose(X.D, np.eye(n) / np.sqrt(n))
    rep = einstein_residual(X.algebra, X.metric)
    assert rep.residual <= 1e-8 and np.isclose(rep.lam_star, -1)


def test_extension_precondition():
    with pytest.raises(NotANilsolitonError):
        einstein_extension(algebra("g31iii"), np.eye(7))
    with pytest.raises(NotANilsolitonError):
        einstein_extension(H3_SOLITON, 2 * np.eye(3))  # soliton, but lam != -1


@pytest.mark.parametrize("L,H", soliton_bases())
def test_catalog_extensions(L, H):
    X = einstein_extension(L, H)
    assert einstein_residual(X.algebra, X.metric).residual <= 1e-8
    inv = rank_one_invariants(X)
    assert inv.passed, inv.checks
    assert inv.trace_identity_error <= 1e-10
    assert normality_check(X.algebra, X.metric).normal


def test_einstein_residual_examples():
    rep = einstein_residual(algebra("hyperbolic2"), np.eye(2))
    assert rep.residual <= 1e-14 and np.isclose(rep.lam_star, -1)
    X = einstein_extension(H3_SOLITON, np.eye(3))
    P = direct_sum(X.algebra, algebra("hyperbolic2"))
    assert einstein_residual(P, np.eye(6)).residual <= 1e-12
    assert einstein_residual(algebra("h3"), np.eye(3)).residual > 0.1


def test_invariant_values_h3():
    inv = rank_one_invariants(einstein_extension(H3_SOLITON, np.eye(3)))
    assert np.isclose(inv.mean_curvature_norm2, 8 / 3)
    assert np.isclose(inv.trace_beta_plus, 8 / 3)
    assert np.isclose(inv.sigma_plus, 8 / 3)
    assert np.allclose(inv.shape_operator, -np.diag([2, 2, 4]) / 3)


def test_invariant_values_abelian():
    inv = rank_one_invariants(einstein_extension(algebra("abelian2"), np.eye(2)))
    assert inv.passed and np.isclose(inv.sigma_plus, 2)


def test_perturbed_derivation_fails_fiber_check():
    X = extension_from_derivation(H3_SOLITON, np.eye(3), np.diag([0.5, 0.7, 1.2]))
    inv = rank_one_invariants(X)
    assert not inv.checks["fiber_ricci"]
    assert einstein_residual(X.algebra, X.metric).residual > 1e-3


def test_mean_curvature_trace_identity_nonsoliton(rng):
    # <N, X> = -tr L_X holds for any orbit geometry, soliton or not
    X = extension_from_derivation(algebra("n4"), random_spd(rng, 4), np.diag([1.0, 2, 3, 4]))
    assert rank_one_invariants(X).trace_identity_error <= 1e-10


def test_evolution_examples(rng):
    L = algebra("h3")
    H = random_spd(rng, 3)
    D = np.diag([1.0, 1, 2])
    assert np.allclose(evolve_closed_form(H, D, 0.0), H)
    assert np.allclose(evolve_closed_form(H, np.eye(3), 0.7), np.exp(1.4) * H)
    X = einstein_extension(H3_SOLITON, np.eye(3))
    ev = cohomo1_evolution(H3_SOLITON, np.eye(3), X.D, 1.0)
    assert ev.max_error <= 1e-8
    with pytest.raises(ValueError):
        cohomo1_evolution(L, H, np.eye(3))


def test_evolution_group_law(rng):
    D = np.diag([1.0, 2, 3, 4])
    H = random_spd(rng, 4)
    for t, s in [(0.3, 0.5), (1.0, -0.4)]:
        lhs = evolve_closed_form(H, D, t + s)
        rhs = act_metric(scipy.linalg.expm(-s * D), evolve_closed_form(H, D, t))
        assert np.allclose(lhs, rhs, atol=1e-10, rtol=0)


def _skewed_metric():
    P = np.eye(4)
    P[3, 2] = 1.0  # columns e1, e2, e3 + e4, e4 orthonormal
    Pi = np.linalg.inv(P)
    return Pi.T @ Pi


def test_normality_examples():
    S = algebra("s4")
    assert normality_check(S, np.eye(4)).normal
    rep = normality_check(S, _skewed_metric())
    assert not rep.normal and rep.defect > 1


def test_normality_orthogonal_invariance(rng):
    S = algebra("s4")
    for G in (np.eye(4), _skewed_metric()):
        base = normality_check(S, G)
        Fn = np.linalg.cholesky(np.linalg.inv(G[1:, 1:]))  # columns orthonormal for G on n
        O, _ = np.linalg.qr(rng.normal(size=(3, 3)))
        q = np.eye(4)
        q[1:, 1:] = Fn @ O @ np.linalg.inv(Fn)  # G-orthogonal on n
        from solvgeo.curvature import act_bracket
        from solvgeo.lie import from_structure
        S2 = from_structure(act_bracket(q, S.structure), nilradical=S.nilradical)
        G2 = act_metric(q, G)
        assert np.allclose(G2, G)
        assert np.isclose(normality_check(S2, G2).defect, base.defect, atol=1e-10)


def test_semidirect_metric_sl2_times_hyperbolic():
    hyp = algebra("hyperbolic2")
    gE = semidirect_metric(SL2_SPLIT, hyp, np.eye(2))
    assert np.allclose(gE.matrix, np.diag([4, 4, 1, 1]))
    assert np.allclose(symmetric_space_ricci(SL2_SPLIT), -4 * np.eye(2))
    rep = product_einstein_residual(SL2_SPLIT, hyp, gE)
    assert rep.residual <= 1e-8 and np.isclose(rep.lam_star, -1)


def test_semidirect_metric_mismatch():
    hyp = algebra("hyperbolic2")
    gE = semidirect_metric(SL2_SPLIT, hyp, 0.5 * np.eye(2))  # ric = -2 g on the solvable factor
    assert product_einstein_residual(SL2_SPLIT, hyp, gE).residual > 0.5


def _sl2_on_r3():
    phi = np.zeros((3, 3, 3))
    phi[0, :2, :2] = np.diag([1.0, -1.0])   # H
    phi[1, 0, 1] = 1.0                      # E
    phi[2, 1, 0] = 1.0                      # F
    return phi


def test_semidirect_metric_transpose_hypothesis():
    ab3 = algebra("abelian3")
    gE = semidirect_metric(SL2_SPLIT, ab3, np.eye(3), _sl2_on_r3())
    assert gE.transpose_residual <= 1e-12
    G = np.array([[1.0, 0, 0], [0, 1, 0.5], [0, 0.5, 1]])
    with pytest.raises(HypothesisError, match="transposition"):
        semidirect_metric(SL2_SPLIT, ab3, G, _sl2_on_r3())


def test_semidirect_metric_bad_split():
    bad = CartanSplit(algebra("sl2"), np.array([[1.0, 0, 0]]), np.array([[0, 1.0, 0], [0, 0, 1]]))
    with pytest.raises(HypothesisError):
        semidirect_metric(bad, algebra("hyperbolic2"), np.eye(2))
