"""Curvature of left-invariant metrics.

Metrics are symmetric positive-definite matrices ``H[i, j] = h(e_i, e_j)``.
Endomorphisms act on column vectors in the basis ``e_i``.  The group
``Gl(n)`` acts on metrics by ``q.h = h(q^-1 ., q^-1 .)`` and on brackets by
``q.mu = q mu(q^-1 ., q^-1 .)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .lie import LieAlgebra, is_nilpotent, tau, unimodularity

SPD_TOL = 1e-14
FD_STEP = 1e-5


class MetricError(ValueError):
    pass


@dataclass(frozen=True)
class MetricTensor:
    """Inner product on an algebra, optionally recorded as ``q.background``."""

    matrix: np.ndarray
    q: np.ndarray | None = None
    background: np.ndarray | None = None

    def __post_init__(self):
        H = check_metric(self.matrix)
        object.__setattr__(self, "matrix", H)
        if self.q is not None:
            bg = np.eye(len(H)) if self.background is None else check_metric(self.background)
            object.__setattr__(self, "background", bg)
            if not np.allclose(pull_back(H, self.q), bg, atol=1e-10):
                raise MetricError("metric is not q applied to the background")

    @classmethod
    def from_factor(cls, q, background=None):
        q = np.asarray(q, dtype=float)
        bg = np.eye(len(q)) if background is None else np.asarray(background, dtype=float)
        return cls(act_metric(q, bg), q=q, background=bg)

    def __array__(self, dtype=None, copy=None):
        return self.matrix if dtype is None else self.matrix.astype(dtype)


def check_metric(H) -> np.ndarray:
    H = np.array(H, dtype=float)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise MetricError(f"metric must be square, got shape {H.shape}")
    if not np.allclose(H, H.T, atol=1e-12, rtol=0):
        raise MetricError("metric is not symmetric")
    H = 0.5 * (H + H.T)
    lo = np.linalg.eigvalsh(H)[0]
    if lo <= SPD_TOL * max(1.0, abs(H).max()):
        raise MetricError(f"metric is not positive-definite (smallest eigenvalue {lo:.3e})")
    return H


def act_metric(q, H) -> np.ndarray:
    """Matrix of ``q.h = h(q^-1 ., q^-1 .)``."""
    qi = np.linalg.inv(q)
    return qi.T @ np.asarray(H) @ qi


def pull_back(H, q) -> np.ndarray:
    """Matrix of ``h(q ., q .)``; inverse of :func:`act_metric`."""
    return np.asarray(q).T @ np.asarray(H) @ np.asarray(q)


def act_bracket(q, C) -> np.ndarray:
    """Structure array of ``q.mu = q mu(q^-1 ., q^-1 .)``."""
    qi = np.linalg.inv(q)
    return np.einsum("ai,bj,ijm,km->abk", qi.T, qi.T, C, q)


def orthonormal_frame(H) -> np.ndarray:
    """Matrix F whose columns are an h-orthonormal basis (``F^T H F = I``)."""
    U = scipy.linalg.cholesky(H)  # H = U^T U
    return scipy.linalg.solve_triangular(U, np.eye(len(H)))


def transpose(A, H) -> np.ndarray:
    """h-adjoint of an endomorphism."""
    return np.linalg.solve(H, A.T @ H)


def _exp_action(E, H, s) -> np.ndarray:
    return act_metric(scipy.linalg.expm(s * np.asarray(E)), H)


# --- Levi-Civita connection ---------------------------------------------------------

@dataclass(frozen=True)
class ConnectionTable:
    """``nabla_{e_i} e_j = sum_k gamma[i, j, k] e_k`` for left-invariant fields."""

    gamma: np.ndarray
    metric: np.ndarray

    def nabla(self, x, y) -> np.ndarray:
        return np.einsum("i,j,ijk->k", x, y, self.gamma)


def koszul_connection(L: LieAlgebra, h) -> ConnectionTable:
    """Koszul formula ``2<nabla_X Y, Z> = <[X,Y],Z> - <[Y,Z],X> + <[Z,X],Y>``."""
    H = check_metric(h)
    B = np.einsum("ijk,kl->ijl", L.structure, H)  # <[e_i, e_j], e_l>
    K = 0.5 * (B - np.einsum("jli->ijl", B) + np.einsum("lij->ijl", B))
    return ConnectionTable(np.einsum("ijl,lk->ijk", K, np.linalg.inv(H)), H)


@dataclass(frozen=True)
class CurvatureReport:
    ricci: np.ndarray       # endomorphism Ric(h)
    ricci_form: np.ndarray  # ric = h(Ric ., .)
    scal: float
    mean_curvature: np.ndarray  # <H, Y> = tr ad Y


def ricci_form_koszul(L: LieAlgebra, h) -> np.ndarray:
    """Ricci form from ``R(X,Y)Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_[X,Y] Z``."""
    conn = koszul_connection(L, h)
    # N[a] is the matrix of nabla_{e_a}: column c holds nabla_{e_a} e_c
    N = np.einsum("ack->akc", conn.gamma)
    NN = np.einsum("aij,bjk->abik", N, N)
    R = NN - np.einsum("baik->abik", NN) - np.einsum("abm,mik->abik", L.structure, N)
    ric = np.einsum("abac->bc", R)
    return 0.5 * (ric + ric.T)


def ricci_endomorphism(L: LieAlgebra, h) -> CurvatureReport:
    H = check_metric(h)
    ric = ricci_form_koszul(L, H)
    Ric = np.linalg.solve(H, ric)
    tr_ad = np.einsum("ijj->i", L.ad_basis)
    return CurvatureReport(Ric, ric, float(np.trace(Ric)), np.linalg.solve(H, tr_ad))


def ricci(L: LieAlgebra, h) -> np.ndarray:
    return ricci_endomorphism(L, h).ricci


def scalar_curvature(L: LieAlgebra, h) -> float:
    return ricci_endomorphism(L, h).scal


def ricci_via_killing(L: LieAlgebra, h) -> np.ndarray:
    """Ricci form at the identity from Killing fields.

    Uses right-invariant Killing fields ``E_i`` orthonormal at ``e`` (their
    brackets are minus the algebra bracket) and
    ``ric(X,X) = 2 sum <nabla_{E_i} X, [X,E_i]> + |nabla X|^2
    - sum <(ad X)^2 E_i, E_i> - sum <nabla_{E_i} E_i, nabla_X X>``
    with ``2<nabla_X Y, Z> = <[X,Y],Z> + <[X,Z],Y> + <X,[Y,Z]>``.
    """
    H = check_metric(h)
    n = L.dim
    F = orthonormal_frame(H)
    Ck = -act_bracket(np.linalg.inv(F), L.structure)  # Killing brackets, orthonormal frame
    # nab[a, b, c] = <nabla_{E_a} E_b, E_c>
    nab = 0.5 * (Ck + np.einsum("acb->abc", Ck) + np.einsum("bca->abc", Ck))

    def quad(x):
        nab_i_x = np.einsum("b,ibc->ic", x, nab)        # nabla_{E_i} X
        br_x_i = np.einsum("a,aic->ic", x, Ck)          # [X, E_i]
        adx = np.einsum("a,aic->ci", x, Ck)
        nab_x_x = np.einsum("a,b,abc->c", x, x, nab)
        div = np.einsum("iic->c", nab)
        return (2 * np.sum(nab_i_x * br_x_i) + np.sum(nab_i_x ** 2)
                - np.trace(adx @ adx) - div @ nab_x_x)

    I = np.eye(n)
    diag = np.array([quad(I[a]) for a in range(n)])
    ric = np.diag(diag)
    for a in range(n):
        for b in range(a + 1, n):
            ric[a, b] = ric[b, a] = 0.5 * (quad(I[a] + I[b]) - diag[a] - diag[b])
    Fi = np.linalg.inv(F)
    return Fi.T @ ric @ Fi


# --- moment map formulation ----------------------------------------------------------

def rho_action(E, h) -> np.ndarray:
    """``(rho(E)h)(x, y) = -h(Ex, y) - h(x, Ey)``."""
    E = np.asarray(E, dtype=float)
    H = np.asarray(h, dtype=float)
    return -(E.T @ H + H @ E)


def tau_action(E, mu) -> np.ndarray:
    C = mu.structure if isinstance(mu, LieAlgebra) else np.asarray(mu)
    return tau(E, C)


def bracket_inner_product(mu, lam, h) -> float:
    """Inner product on brackets summed over ordered pairs of an h-orthonormal basis."""
    H = check_metric(h)
    Hi = np.linalg.inv(H)
    mu = mu.structure if isinstance(mu, LieAlgebra) else np.asarray(mu)
    lam = lam.structure if isinstance(lam, LieAlgebra) else np.asarray(lam)
    return float(np.einsum("ia,jb,kc,ijk,abc->", Hi, Hi, H, mu, lam))


def moment_map_ricci(L: LieAlgebra, h, E) -> float:
    """``tr(Ric(h) E)`` computed as ``1/4 <<tau(E) mu, mu>>_h`` (nilpotent algebras only)."""
    if not is_nilpotent(L):
        raise ValueError(f"{L.name or 'algebra'} is not nilpotent")
    C = L.structure
    return 0.25 * bracket_inner_product(tau(E, C), C, h)


def scal_variation_check(L: LieAlgebra, h, E, step=FD_STEP) -> tuple[float, float]:
    """Return ``(2 tr Ric(h) E, central difference of s -> scal(exp(sE).h))``."""
    H = check_metric(h)
    if not unimodularity(L):
        raise ValueError(f"{L.name or 'algebra'} is not unimodular")
    analytic = 2.0 * float(np.trace(ricci(L, H) @ E))
    fp = scalar_curvature(L, _exp_action(E, H, step))
    fm = scalar_curvature(L, _exp_action(E, H, -step))
    return analytic, (fp - fm) / (2 * step)


def ric_variation_check(L: LieAlgebra, h, E, step=FD_STEP) -> tuple[float, float]:
    """Return ``(-1/2 |tau(E) mu|_h^2, d/ds tr(Ric(exp(sE).h) E))`` for h-self-adjoint E."""
    H = check_metric(h)
    E = np.asarray(E, dtype=float)
    if not is_nilpotent(L):
        raise ValueError(f"{L.name or 'algebra'} is not nilpotent")
    if not np.allclose(transpose(E, H), E, atol=1e-10):
        raise ValueError("E is not self-adjoint with respect to h")
    T = tau(E, L.structure)
    analytic = -0.5 * bracket_inner_product(T, T, H)
    fp = np.trace(ricci(L, _exp_action(E, H, step)) @ E)
    fm = np.trace(ricci(L, _exp_action(E, H, -step)) @ E)
    return analytic, float(fp - fm) / (2 * step)


# --- log beta-volume ----------------------------------------------------------------

def lower_triangular_factor(H, background=None) -> np.ndarray:
    """Lower-triangular q with positive diagonal such that ``q.background = H``.

    The background must be diagonal in the current basis.
    """
    H = check_metric(H)
    n = len(H)
    bg = np.eye(n) if background is None else check_metric(background)
    if not np.allclose(bg, np.diag(np.diag(bg)), atol=1e-12):
        raise MetricError("background must be diagonal in the chosen basis")
    J = np.eye(n)[::-1]
    R = J @ scipy.linalg.cholesky(J @ H @ J) @ J  # H = R^T R, R lower triangular
    qinv = R / np.sqrt(np.diag(bg))[:, None]
    return np.linalg.inv(qinv)


def beta_volume(h, label) -> float:
    """Log beta-volume ``-sum beta_i E_ii / sum beta_i^2`` with ``h = exp(E).hbar``."""
    H = check_metric(h)
    if label is None or label.abelian:
        return 0.0
    P = label.permutation_matrix  # columns: sorted beta-eigenbasis in nice coordinates
    Hs = P.T @ H @ P
    bg = P.T @ label.background @ P
    q = lower_triangular_factor(Hs, bg)
    E = np.real(scipy.linalg.logm(q))
    b = label.eigenvalues
    return float(-np.dot(b, np.diag(E)) / np.dot(b, b))
