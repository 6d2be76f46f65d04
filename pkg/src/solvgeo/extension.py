"""Rank-one Einstein extensions of nilsolitons and related checks.

The extension of a nilsoliton ``(n, h)`` with ``Ric(h) = -Id + beta+`` is the
solvable algebra ``s = R xi ⋉ n`` with ``ad xi = beta+/|beta+|``, ``xi``
unit length and orthogonal to ``n``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .curvature import (check_metric, koszul_connection, orthonormal_frame, rho_action,
                        ricci_endomorphism, transpose)
from .lie import (LieAlgebra, from_structure, is_derivation, is_nilpotent, killing_form,
                  semidirect_extend)

EINSTEIN_TOL = 1e-8
INVARIANT_TOL = 1e-7


class NotANilsolitonError(ValueError):
    pass


class HypothesisError(ValueError):
    pass


def _frob(A, H):
    """Frobenius norm of an endomorphism in an h-orthonormal frame."""
    F = orthonormal_frame(H)
    return float(np.linalg.norm(np.linalg.inv(F) @ A @ F))


@dataclass(frozen=True)
class SolvableExtension:
    base: LieAlgebra
    base_metric: np.ndarray
    D: np.ndarray          # ad xi restricted to the base
    alpha: float           # |beta+|^-1
    algebra: LieAlgebra    # xi is the last basis vector
    metric: np.ndarray

    @property
    def beta_plus(self) -> np.ndarray:
        return self.D / self.alpha


def extension_from_derivation(L: LieAlgebra, h, D, alpha=None) -> SolvableExtension:
    """``R xi ⋉ L`` with ``ad xi = D`` and the orthogonal unit extension of h."""
    H = check_metric(h)
    D = np.asarray(D, dtype=float)
    alpha = 1.0 / float(np.trace(D)) if alpha is None else float(alpha)
    S = semidirect_extend(L, D, name=f"{L.name}-ext" if L.name else None)
    g = scipy.linalg.block_diag(H, [[1.0]])
    return SolvableExtension(L, H, D, alpha, S, g)


def einstein_extension(L: LieAlgebra, h, tol=EINSTEIN_TOL) -> SolvableExtension:
    """One-dimensional Einstein extension of a nilsoliton normalised to ``lam = -1``."""
    H = check_metric(h)
    if not is_nilpotent(L):
        raise NotANilsolitonError(f"{L.name or 'algebra'} is not nilpotent")
    bp = ricci_endomorphism(L, H).ricci + np.eye(L.dim)
    ok, res = is_derivation(L, bp, tol=tol)
    if not ok:
        raise NotANilsolitonError(
            f"Ric(h) + Id is not a derivation (residual {res:.3e}); "
            "the base is not a nilsoliton normalised to lam = -1")
    norm = float(np.sqrt(np.trace(bp @ bp)))
    return extension_from_derivation(L, H, bp / norm, alpha=1.0 / norm)


@dataclass(frozen=True)
class EinsteinReport:
    residual: float          # |Ric + Id|
    lam_star: float          # scal / dim
    best_residual: float     # |Ric - lam_star Id|


def einstein_residual(S: LieAlgebra, g) -> EinsteinReport:
    G = check_metric(g)
    rep = ricci_endomorphism(S, G)
    n = S.dim
    lam = rep.scal / n
    return EinsteinReport(_frob(rep.ricci + np.eye(n), G), lam,
                          _frob(rep.ricci - lam * np.eye(n), G))


# --- invariants of the nilradical orbits ---------------------------------------------------

@dataclass(frozen=True)
class RankOneInvariants:
    fiber_ricci_error: float        # |Ric(n, h) - (-Id + beta+)|
    shape_operator_error: float     # |L_N + beta+|
    mean_curvature_norm2: float     # |N|^2
    trace_beta_plus: float
    scal_fiber: float
    sigma_plus: float
    trace_identity_error: float     # |<N, xi> + tr L_xi|
    mean_curvature: np.ndarray
    shape_operator: np.ndarray
    tol: float = INVARIANT_TOL

    @property
    def checks(self) -> dict:
        n = len(self.shape_operator)
        return {
            "fiber_ricci": self.fiber_ricci_error <= self.tol,
            "shape_operator": self.shape_operator_error <= self.tol,
            "mean_curvature_norm": abs(self.mean_curvature_norm2 - self.trace_beta_plus) <= self.tol,
            "sigma_plus_equality": abs(self.scal_fiber + n - self.sigma_plus) <= self.tol,
        }

    @property
    def passed(self) -> bool:
        return all(self.checks.values())


def orbit_geometry(S: LieAlgebra, g, nil) -> tuple[np.ndarray, callable]:
    """Mean curvature vector of the orbit of the ideal spanned by ``nil`` and its shape operators.

    Computed from the Levi-Civita connection of the left-invariant metric: the
    orbits are the cosets of the ideal, ``N = sum_r (nabla_{U_r} U_r)^perp`` for an
    orthonormal basis ``U_r`` of the ideal and ``<L_X U, V> = -<nabla_U V, X>``.
    Returns N and a function X -> matrix of L_X on the ideal.
    """
    G = check_metric(g)
    nil = list(nil)
    m = len(nil)
    gamma = koszul_connection(S, G).gamma
    Gn = G[np.ix_(nil, nil)]
    Fn = orthonormal_frame(Gn)
    inc = np.zeros((S.dim, m))
    inc[nil, np.arange(m)] = 1.0
    U = inc @ Fn  # orthonormal basis of the ideal, ambient coordinates
    second = np.einsum("ar,bs,abk->rsk", U, U, gamma)
    # projection onto the orthogonal complement of the ideal
    proj = np.eye(S.dim) - U @ U.T @ G
    N = proj @ np.einsum("rrk->k", second)

    def shape(X):
        X = np.asarray(X, dtype=float)
        M = -np.einsum("rsk,kl,l->rs", second, G, X)
        M = 0.5 * (M + M.T)
        return Fn @ M @ np.linalg.inv(Fn)  # endomorphism of the ideal in basis coordinates

    return N, shape


def rank_one_invariants(X: SolvableExtension, tol=INVARIANT_TOL) -> RankOneInvariants:
    L, H, S, g = X.base, X.base_metric, X.algebra, X.metric
    n = L.dim
    bp = X.beta_plus
    fiber = ricci_endomorphism(L, H)
    ric_err = _frob(fiber.ricci - (-np.eye(n) + bp), H)

    N, shape = orbit_geometry(S, g, range(n))
    LN = shape(N)
    xi = np.zeros(n + 1)
    xi[n] = 1.0
    trace_err = abs(N @ g @ xi + np.trace(shape(xi)))
    # ad of the Killing field A with A_e = -N equals ad_s(N) in the algebra, the sign
    # flipping once for -N and once for right-invariant brackets
    eig = np.linalg.eigvals(S.ad(N))
    sigma = float(np.sum(eig.real[eig.real > 1e-12]))
    return RankOneInvariants(
        fiber_ricci_error=ric_err,
        shape_operator_error=_frob(LN + bp, H),
        mean_curvature_norm2=float(N @ g @ N),
        trace_beta_plus=float(np.trace(bp)),
        scal_fiber=fiber.scal,
        sigma_plus=sigma,
        trace_identity_error=float(trace_err),
        mean_curvature=N,
        shape_operator=LN,
        tol=tol,
    )


# --- cohomogeneity-one evolution ------------------------------------------------------------

@dataclass(frozen=True)
class Evolution:
    times: np.ndarray
    closed_form: np.ndarray   # h(t) = exp(-tD).h_p at each time
    integrated: np.ndarray    # RK4 solution of dh/dt = -rho(D) h
    max_error: float


def evolve_closed_form(h_p, D, t) -> np.ndarray:
    """``exp(-tD).h_p = h_p(exp(tD) ., exp(tD) .)``."""
    Q = scipy.linalg.expm(t * np.asarray(D, dtype=float))
    return Q.T @ np.asarray(h_p) @ Q


def cohomo1_evolution(L: LieAlgebra, h_p, D, t=1.0, steps=200) -> Evolution:
    H = check_metric(h_p)
    D = np.asarray(D, dtype=float)
    ok, res = is_derivation(L, D)
    if not ok:
        raise ValueError(f"D is not a derivation (residual {res:.3e})")

    def rhs(M):
        return -rho_action(D, M)

    dt = t / steps
    times = np.linspace(0.0, t, steps + 1)
    Y = H.copy()
    out = [Y]
    for _ in range(steps):
        k1 = rhs(Y)
        k2 = rhs(Y + 0.5 * dt * k1)
        k3 = rhs(Y + 0.5 * dt * k2)
        k4 = rhs(Y + dt * k3)
        Y = Y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        out.append(Y)
    integrated = np.array(out)
    closed = np.array([evolve_closed_form(H, D, s) for s in times])
    return Evolution(times, closed, integrated, float(np.abs(closed - integrated).max()))


# --- normality --------------------------------------------------------------------------------

@dataclass(frozen=True)
class NormalityReport:
    normal: bool
    defect: float   # |[A, A^T]| in an orthonormal frame of the nilradical
    operator: np.ndarray


def normality_check(S: LieAlgebra, g, xi=None, nil=None, tol=1e-10) -> NormalityReport:
    """Is ``ad xi`` restricted to the nilradical a normal operator for ``g``?"""
    G = check_metric(g)
    nil = list(S.nilradical if nil is None else nil)
    if not nil:
        raise ValueError("nilradical span not declared")
    if xi is None:
        rest = [a for a in range(S.dim) if a not in nil]
        if len(rest) != 1:
            raise ValueError("need an explicit xi when the nilradical has codimension != 1")
        xi = np.eye(S.dim)[rest[0]]
    ad = S.ad(xi)
    outside = [a for a in range(S.dim) if a not in nil]
    if np.abs(ad[np.ix_(outside, nil)]).max(initial=0.0) > 1e-12:
        raise ValueError("declared nilradical is not preserved by ad xi")
    A = ad[np.ix_(nil, nil)]
    F = orthonormal_frame(G[np.ix_(nil, nil)])
    B = np.linalg.inv(F) @ A @ F
    defect = float(np.linalg.norm(B @ B.T - B.T @ B))
    return NormalityReport(defect <= tol, defect, A)


# --- symmetric block times solvable factor --------------------------------------------------

@dataclass(frozen=True)
class CartanSplit:
    algebra: LieAlgebra
    k_basis: np.ndarray   # rows: vectors of l spanning k
    p_basis: np.ndarray   # rows: vectors of l spanning p


def _in_span(vectors, basis, tol=1e-10) -> bool:
    if len(vectors) == 0:
        return True
    B = np.atleast_2d(basis)
    coef = np.linalg.lstsq(B.T, np.array(vectors).T, rcond=None)[0]
    return float(np.abs(B.T @ coef - np.array(vectors).T).max()) <= tol


def check_cartan_split(split: CartanSplit) -> None:
    l = split.algebra
    K = np.asarray(split.k_basis, dtype=float).reshape(-1, l.dim)
    P = np.asarray(split.p_basis, dtype=float).reshape(-1, l.dim)
    if np.linalg.matrix_rank(np.vstack([K, P])) != l.dim:
        raise HypothesisError("k and p do not span l")
    br = l.bracket
    if not _in_span([br(a, b) for a in K for b in K], K):
        raise HypothesisError("[k, k] is not contained in k")
    if not _in_span([br(a, b) for a in K for b in P], P):
        raise HypothesisError("[k, p] is not contained in p")
    if not _in_span([br(a, b) for a in P for b in P], K):
        raise HypothesisError("[p, p] is not contained in k")
    kappa = killing_form(l)
    if len(K) and np.linalg.eigvalsh(K @ kappa @ K.T).max() >= 0:
        raise HypothesisError("Killing form is not negative-definite on k")
    if np.linalg.eigvalsh(P @ kappa @ P.T).min() <= 0:
        raise HypothesisError("Killing form is not positive-definite on p")


def semidirect_sum(l: LieAlgebra, s: LieAlgebra, phi) -> LieAlgebra:
    """``l ⋉_phi s`` with basis (l, s); phi[a] is the matrix of phi(e_a) on s."""
    phi = np.asarray(phi, dtype=float).reshape(l.dim, s.dim, s.dim)
    a, b = l.dim, s.dim
    C = np.zeros((a + b, a + b, a + b))
    C[:a, :a, :a] = l.structure
    C[a:, a:, a:] = s.structure
    C[:a, a:, a:] = np.einsum("xkj->xjk", phi)
    C[a:, :a, a:] = -np.einsum("xkj->jxk", phi)
    return from_structure(C, name=f"{l.name}x{s.name}")


@dataclass(frozen=True)
class SemidirectMetric:
    matrix: np.ndarray        # on p ⊕ s, p first
    algebra: LieAlgebra       # l ⋉_phi s
    transpose_residual: float


def semidirect_metric(split: CartanSplit, s: LieAlgebra, gS, phi=None, tol=1e-10) -> SemidirectMetric:
    """Metric ``g^E``: ``gS`` on s, ``p ⊥ s`` and ``kappa_f - kappa_l/2`` on p."""
    check_cartan_split(split)
    l = split.algebra
    G = check_metric(gS)
    phi = np.zeros((l.dim, s.dim, s.dim)) if phi is None else np.asarray(phi, dtype=float)
    for a in range(l.dim):
        ok, res = is_derivation(s, phi[a])
        if not ok:
            raise HypothesisError(f"phi(e{a + 1}) is not a derivation of s (residual {res:.3e})")
    for a in range(l.dim):
        for b in range(l.dim):
            lhs = np.einsum("c,cij->ij", l.structure[a, b], phi)
            if np.abs(lhs - (phi[a] @ phi[b] - phi[b] @ phi[a])).max() > tol:
                raise HypothesisError("phi is not a representation")

    # phi(l) must be closed under gS-transposition
    span = phi.reshape(l.dim, -1).T
    tr = np.array([transpose(m, G).ravel() for m in phi]).T
    if np.abs(span).max(initial=0.0) == 0:
        resid = float(np.abs(tr).max(initial=0.0))
    else:
        coef = np.linalg.lstsq(span, tr, rcond=None)[0]
        resid = float(np.abs(span @ coef - tr).max())
    if resid > tol:
        raise HypothesisError(f"phi(l) is not closed under transposition (residual {resid:.3e})")

    f = semidirect_sum(l, s, phi)
    kf = killing_form(f)[: l.dim, : l.dim]
    P = np.atleast_2d(split.p_basis)
    gp = P @ (kf - 0.5 * killing_form(l)) @ P.T
    return SemidirectMetric(scipy.linalg.block_diag(gp, G), f, resid)


def symmetric_space_ricci(split: CartanSplit) -> np.ndarray:
    """Ricci form on p from ``R(X, Y)Z = -[[X, Y], Z]``, in the p-basis."""
    l = split.algebra
    P = np.atleast_2d(split.p_basis)
    m = len(P)
    br = l.bracket
    ric = np.zeros((m, m))
    for b in range(m):
        for c in range(m):
            vals = np.array([-br(br(P[a], P[b]), P[c]) for a in range(m)])
            coords = np.linalg.lstsq(P.T, vals.T, rcond=None)[0]  # column a: coordinates of R(p_a, p_b)p_c
            ric[b, c] = np.trace(coords)
    return 0.5 * (ric + ric.T)


def product_einstein_residual(split: CartanSplit, s: LieAlgebra, gE: SemidirectMetric) -> EinsteinReport:
    """Einstein residual of ``g^E`` when phi = 0, where the space is a Riemannian product."""
    f = gE.algebra
    l = split.algebra
    if np.abs(f.structure[: l.dim, l.dim:, l.dim:]).max(initial=0.0) > 0:
        raise NotImplementedError("only the phi = 0 product configuration is verified")
    m = len(np.atleast_2d(split.p_basis))
    G = gE.matrix
    ric = scipy.linalg.block_diag(symmetric_space_ricci(split),
                                  ricci_endomorphism(s, G[m:, m:]).ricci_form)
    Ric = np.linalg.solve(G, ric)
    dim = len(G)
    lam = float(np.trace(Ric)) / dim
    return EinsteinReport(_frob(Ric + np.eye(dim), G), lam, _frob(Ric - lam * np.eye(dim), G))
