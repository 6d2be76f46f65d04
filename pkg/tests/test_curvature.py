import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from conftest import CATALOG, algebra, random_spd
from solvgeo.beta import beta_label
from solvgeo.curvature import (MetricError, MetricTensor, act_bracket, act_metric, beta_volume,
                               bracket_inner_product, check_metric, koszul_connection,
                               moment_map_ricci, ric_variation_check, ricci, ricci_endomorphism,
                               ricci_via_killing, rho_action, scal_variation_check, tau_action,
                               transpose)
from solvgeo.lie import derivation_space, load_algebra, parse_algebra

E1, E2, E3 = np.eye(3)


def test_metric_validation():
    with pytest.raises(MetricError):
        check_metric([[1, 0], [0, -1]])
    with pytest.raises(MetricError):
        check_metric([[1, 1e-3], [0, 1]])
    q = np.array([[2.0, 0], [1, 1]])
    M = MetricTensor.from_factor(q)
    assert np.allclose(np.asarray(M), act_metric(q, np.eye(2)))
    with pytest.raises(MetricError):
        MetricTensor(np.eye(2), q=q)


def test_koszul_abelian_is_flat():
    assert np.allclose(koszul_connection(algebra("abelian3"), random_spd(np.random.default_rng(0), 3)).gamma, 0)


def test_koszul_h3_by_hand():
    c = koszul_connection(algebra("h3"), np.eye(3))
    assert np.allclose(c.nabla(E1, E2), 0.5 * E3)
    assert np.allclose(c.nabla(E1, E3), -0.5 * E2)
    assert np.allclose(c.nabla(E2, E3), 0.5 * E1)


def test_koszul_hyperbolic_plane():
    # [e1, e2] = e2: 2<nabla_{e2} e2, e1> = -<[e2,e1],e2> + <[e1,e2],e2> = 2
    c = koszul_connection(algebra("hyperbolic2"), np.eye(2))
    assert np.allclose(c.nabla([0, 1], [0, 1]), [1, 0])
    assert np.allclose(c.nabla([0, 1], [1, 0]), [0, -1])


@pytest.mark.parametrize("name", ["h3", "n4", "g31iii", "s4", "hyperbolic2", "sl2"])
def test_connection_torsion_free_and_metric(name, rng):
    L = algebra(name)
    H = random_spd(rng, L.dim)
    G = koszul_connection(L, H).gamma
    assert np.allclose(G - G.transpose(1, 0, 2), L.structure, atol=1e-12)
    low = np.einsum("ijk,kl->ijl", G, H)  # <nabla_i e_j, e_l>
    assert np.allclose(low + low.transpose(0, 2, 1), 0, atol=1e-12)


def test_ricci_examples():
    assert np.allclose(ricci(algebra("abelian3"), np.eye(3)), 0)
    assert np.allclose(ricci(algebra("h3"), np.eye(3)), np.diag([-0.5, -0.5, 0.5]))
    assert np.allclose(ricci(algebra("hyperbolic2"), np.eye(2)), -np.eye(2))
    rep = ricci_endomorphism(algebra("hyperbolic2"), np.eye(2))
    assert np.isclose(rep.scal, -2)
    assert np.allclose(rep.mean_curvature, [1, 0])


@pytest.mark.parametrize("path", sorted(CATALOG.glob("*.alg")), ids=lambda p: p.stem)
def test_killing_route_matches_koszul(path, rng):
    L = load_algebra(path)
    for _ in range(20):
        H = random_spd(rng, L.dim)
        rep = ricci_endomorphism(L, H)
        assert np.allclose(transpose(rep.ricci, H), rep.ricci, atol=1e-10)
        assert np.allclose(ricci_via_killing(L, H), rep.ricci_form, atol=1e-9)


def test_rho_examples():
    H = random_spd(np.random.default_rng(3), 3)
    assert np.allclose(rho_action(np.eye(3), H), -2 * H)
    K = np.array([[0, 1, 0], [-1, 0, 2], [0, -2, 0.0]])
    skew = np.linalg.solve(H, K)  # h-skew: H A is antisymmetric
    assert np.allclose(rho_action(skew, H), 0, atol=1e-12)
    assert np.allclose(rho_action(np.diag([1.0, 0, 0]), np.eye(3)), np.diag([-2.0, 0, 0]))


def test_tau_examples():
    L = algebra("h3")
    assert np.allclose(tau_action(np.diag([1.0, 1, 2]), L), 0)
    assert np.allclose(tau_action(np.eye(3), L), -L.structure)
    for D in derivation_space(L).basis:
        assert np.allclose(tau_action(D, L), 0, atol=1e-12)


def test_bracket_inner_product():
    C = algebra("h3").structure
    assert np.isclose(bracket_inner_product(C, C, np.eye(3)), 2.0)
    assert np.isclose(bracket_inner_product(3 * C, 3 * C, np.eye(3)), 18.0)


@settings(max_examples=30, deadline=None)
@given(arrays(float, (3, 3), elements=st.floats(-1, 1)), arrays(float, (3, 3), elements=st.floats(-1, 1)))
def test_bracket_inner_product_equivariance(A, B):
    q = scipy.linalg.expm(A)
    H = scipy.linalg.expm(B + B.T)
    C = algebra("h3").structure
    L2 = np.random.default_rng(0).normal(size=(3, 3, 3))
    L2 = L2 - L2.transpose(1, 0, 2)
    qi = np.linalg.inv(q)
    lhs = bracket_inner_product(C, L2, act_metric(q, H))
    rhs = bracket_inner_product(act_bracket(qi, C), act_bracket(qi, L2), H)
    assert np.isclose(lhs, rhs, rtol=1e-10, atol=1e-12)


def test_moment_map_examples():
    L = algebra("h3")
    assert np.isclose(moment_map_ricci(L, np.eye(3), np.eye(3)), -0.5)
    assert np.isclose(moment_map_ricci(L, np.eye(3), np.diag([1.0, 1, 2])), 0)
    with pytest.raises(ValueError):
        moment_map_ricci(algebra("hyperbolic2"), np.eye(2), np.eye(2))


def test_moment_map_matches_oracle(nilpotent_name, rng):
    L = algebra(nilpotent_name)
    for _ in range(20):
        H = random_spd(rng, L.dim)
        E = rng.normal(size=(L.dim, L.dim))
        assert np.isclose(moment_map_ricci(L, H, E), np.trace(ricci(L, H) @ E), atol=1e-10)


def test_scal_variation_examples(rng):
    a, n = scal_variation_check(algebra("abelian3"), np.eye(3), rng.normal(size=(3, 3)))
    assert a == 0 and abs(n) < 1e-12
    a, n = scal_variation_check(algebra("h3"), np.eye(3), np.eye(3))
    assert np.isclose(a, -1) and abs(a - n) < 1e-6
    L = algebra("n4")
    a, n = scal_variation_check(L, random_spd(rng, 4), rng.normal(size=(4, 4)))
    assert abs(a - n) < 1e-6
    with pytest.raises(ValueError):
        scal_variation_check(algebra("hyperbolic2"), np.eye(2), np.eye(2))


def test_ric_variation_examples(rng):
    L = algebra("h3")
    a, n = ric_variation_check(L, np.eye(3), np.diag([1.0, 1, 2]))
    assert a == 0 and abs(n) < 1e-6
    a, n = ric_variation_check(L, np.eye(3), np.diag([1.0, 0, 0]))
    assert a < 0 and abs(a - n) < 1e-6
    G = algebra("g31iii")
    S = rng.normal(size=(7, 7))
    S = (S + S.T) / np.linalg.norm(S + S.T)  # unit direction
    a, n = ric_variation_check(G, np.eye(7), S)
    assert a < 0 and abs(a - n) < 1e-6
    with pytest.raises(ValueError):
        ric_variation_check(L, np.eye(3), np.triu(np.ones((3, 3))))


def test_beta_volume_examples(rng):
    L = algebra("h3")
    B = beta_label(L)
    assert beta_volume(np.eye(3), B) == pytest.approx(0, abs=1e-14)
    assert beta_volume(random_spd(rng, 3), beta_label(algebra("abelian3"))) == 0
    ts = np.linspace(-1, 1, 5)
    vals = [beta_volume(act_metric(scipy.linalg.expm(t * np.eye(3)), np.eye(3)), B) for t in ts]
    assert np.allclose(np.diff(vals) / np.diff(ts), 1 / 3)


def test_beta_volume_affine_and_aut_invariant(rng):
    L = algebra("h3")
    B = beta_label(L)
    E = B.lower_triangular(np.tril(rng.normal(size=(3, 3))))
    ts = np.linspace(-1, 1, 7)
    vals = np.array([beta_volume(act_metric(scipy.linalg.expm(t * E), np.eye(3)), B) for t in ts])
    assert np.allclose(np.diff(vals, 2), 0, atol=1e-10)
    H = act_metric(B.random_factor(rng), np.eye(3))
    for _ in range(5):
        a, b = np.exp(rng.normal(size=2))
        aut = np.diag([a, b, a * b])  # diagonal automorphisms of h3
        assert np.isclose(beta_volume(act_metric(aut, H), B), beta_volume(H, B), atol=1e-10)
