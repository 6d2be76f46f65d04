"""Stratum labels beta for nilpotent Lie algebras with a nice basis."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.linalg
import scipy.optimize

from .curvature import act_metric, ricci, transpose
from .lie import (LieAlgebra, NiceStructure, derivation_space, is_derivation, is_nilpotent,
                  nice_basis_report)

QP_TOL = 1e-12
LP_TOL = 1e-9


class NotNiceError(ValueError):
    """Raised when beta is requested for an algebra without a nice basis."""


# --- minimum-norm point ---------------------------------------------------------------

def _affine_minimizer(P):
    """Weights (summing to 1) of the min-norm point of the affine hull of the rows of P."""
    m = len(P)
    K = np.zeros((m + 1, m + 1))
    K[:m, :m] = P @ P.T
    K[:m, m] = K[m, :m] = 1.0
    rhs = np.zeros(m + 1)
    rhs[m] = 1.0
    sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
    return sol[:m]


def kkt_residual(points, x) -> float:
    """Optimality residual of simplex weights x for ``min |sum x_l p_l|^2``."""
    P = np.asarray(points, dtype=float)
    m = x @ P
    g = P @ m - m @ m  # >= 0 everywhere, = 0 on the support
    viol = max(0.0, -g.min())
    slack = np.abs(g[x > QP_TOL]).max(initial=0.0)
    return float(max(viol, slack, abs(x.sum() - 1.0), max(0.0, -x.min())))


def min_norm_point(points, tol=QP_TOL, max_iter=500) -> tuple[np.ndarray, np.ndarray]:
    """Closest point to the origin in the convex hull of ``points``.

    Wolfe's active-set method.  Returns ``(m, x)`` with ``m = sum x_l p_l``,
    ``x >= 0`` and ``sum x = 1``.
    """
    P = np.asarray(points, dtype=float)
    if P.ndim != 2 or len(P) == 0:
        raise ValueError("need a nonempty list of vectors")
    scale = max(1.0, float(np.max(np.sum(P * P, axis=1))))
    S = [int(np.argmin(np.sum(P * P, axis=1)))]
    w = np.array([1.0])
    for _ in range(max_iter):
        x = w @ P[S]
        j = int(np.argmin(P @ x))
        if x @ x - P[j] @ x <= tol * scale or j in S:
            break
        S.append(j)
        w = np.append(w, 0.0)
        while True:
            v = _affine_minimizer(P[S])
            if np.all(v > tol):
                w = v
                break
            neg = v <= tol
            theta = np.min(w[neg] / (w[neg] - v[neg]))
            w = w + theta * (v - w)
            keep = w > tol
            S = [s for s, k in zip(S, keep) if k]
            w = w[keep] / w[keep].sum()
    weights = np.zeros(len(P))
    weights[S] = w
    return weights @ P, weights


# --- beta labels ------------------------------------------------------------------------

def weight_vectors(N: NiceStructure) -> np.ndarray:
    """``alpha_(i,j,k) = e_k - e_i - e_j`` for each nonzero bracket of a nice basis."""
    n = N.algebra.dim
    A = np.zeros((len(N.triples), n))
    for row, (i, j, k) in enumerate(N.triples):
        A[row, k] += 1.0
        A[row, i] -= 1.0
        A[row, j] -= 1.0
    return A


@dataclass(frozen=True)
class BetaLabel:
    beta: np.ndarray          # diagonal in the nice basis
    beta_plus: np.ndarray
    eigenvalues: np.ndarray   # of beta, non-decreasing
    order: np.ndarray         # nice-basis index of each sorted eigenvalue
    weights: np.ndarray       # convex weights on the weight vectors
    background: np.ndarray
    abelian: bool = False

    @property
    def permutation_matrix(self) -> np.ndarray:
        """Columns are the sorted beta-eigenbasis written in nice coordinates."""
        n = len(self.order)
        P = np.zeros((n, n))
        P[self.order, np.arange(n)] = 1.0
        return P

    def lower_triangular(self, T) -> np.ndarray:
        """Map a matrix given in the sorted eigenbasis to nice coordinates."""
        P = self.permutation_matrix
        return P @ np.asarray(T) @ P.T

    def random_factor(self, rng, spread=0.5) -> np.ndarray:
        """Random element of the lower-triangular group, in nice coordinates."""
        n = len(self.order)
        T = np.tril(rng.normal(scale=spread, size=(n, n)), -1)
        T += np.diag(np.exp(rng.normal(scale=spread, size=n)))
        return self.lower_triangular(T)


def beta_label(L: LieAlgebra, background=None) -> BetaLabel:
    n = L.dim
    bg = np.eye(n) if background is None else np.asarray(background, dtype=float)
    if not np.allclose(bg, np.eye(n)):
        raise NotImplementedError("beta is computed for the background making the nice basis orthonormal")
    if L.is_abelian:
        return BetaLabel(np.zeros((n, n)), np.eye(n), np.zeros(n), np.arange(n),
                         np.zeros(0), bg, abelian=True)
    if not is_nilpotent(L):
        raise ValueError(f"{L.name or 'algebra'} is not nilpotent")
    N = nice_basis_report(L)
    if not N.nice:
        raise NotNiceError(f"basis is not nice: {N.reason}")
    m, x = min_norm_point(weight_vectors(N))
    beta = np.diag(m)
    beta_plus = beta / float(m @ m) + np.eye(n)
    order = np.argsort(m, kind="stable")
    return BetaLabel(beta, beta_plus, m[order], order, x, bg)


@dataclass(frozen=True)
class BetaPropertiesReport:
    trace_beta: float
    trace_identity_residual: float      # |tr beta+ - tr (beta+)^2|
    beta_plus_min_eigenvalue: float
    max_trace_d_beta: float             # max |tr(D q beta q^-1)|
    min_commutator_trace: float         # min tr([E, E^T] beta)
    equality_consistent: bool           # small values only where [E, beta] = 0
    samples: int

    @property
    def passed(self) -> bool:
        return (abs(self.trace_beta + 1) <= 1e-12 and self.trace_identity_residual <= 1e-14
                and self.beta_plus_min_eigenvalue > 0 and self.max_trace_d_beta <= 1e-10
                and self.min_commutator_trace >= -1e-12 and self.equality_consistent)


def beta_properties_check(B: BetaLabel, L: LieAlgebra, seed=0, samples=50) -> BetaPropertiesReport:
    rng = np.random.default_rng(seed)
    beta, bp = B.beta, B.beta_plus
    ders = derivation_space(L).basis
    qs = [np.eye(L.dim)] + [B.random_factor(rng) for _ in range(samples)]
    trd = 0.0
    for q in qs:
        qbq = q @ beta @ np.linalg.inv(q)
        trd = max(trd, float(np.abs(np.einsum("dij,ji->d", ders, qbq)).max(initial=0.0)))

    n = L.dim
    min_val = np.inf
    consistent = True
    for _ in range(samples):
        E = B.lower_triangular(np.tril(rng.normal(size=(n, n))))
        val = float(np.trace((E @ E.T - E.T @ E) @ beta))
        min_val = min(min_val, val)
        commutes = np.linalg.norm(E @ beta - beta @ E) <= 1e-10
        if (val <= 1e-12) != commutes:
            consistent = False
    return BetaPropertiesReport(
        trace_beta=float(np.trace(beta)) if not B.abelian else -1.0,
        trace_identity_residual=abs(float(np.trace(bp) - np.trace(bp @ bp))) if not B.abelian else 0.0,
        beta_plus_min_eigenvalue=float(np.linalg.eigvalsh(bp).min()),
        max_trace_d_beta=trd,
        min_commutator_trace=float(min_val),
        equality_consistent=consistent,
        samples=samples,
    )


@dataclass(frozen=True)
class GitEstimate:
    value: float               # tr(Ric(q.hbar) q beta+ q^-1)
    derivation_residual: float
    is_derivation: bool


def git_estimate_check(L: LieAlgebra, q, B: BetaLabel) -> GitEstimate:
    """Evaluate ``tr Ric(h) q beta+ q^-1`` at ``h = q.hbar`` for lower-triangular q."""
    q = np.asarray(q, dtype=float)
    T = B.permutation_matrix.T @ q @ B.permutation_matrix
    if np.abs(np.triu(T, 1)).max(initial=0.0) > 1e-12 or np.any(np.diag(T) <= 0):
        raise ValueError("q is not lower triangular with positive diagonal in the beta-eigenbasis")
    H = act_metric(q, B.background)
    E = q @ B.beta_plus @ np.linalg.inv(q)
    ok, res = is_derivation(L, E, tol=1e-9)
    return GitEstimate(float(np.trace(ricci(L, H) @ E)), res, ok)


# --- Einstein nilradical criterion -------------------------------------------------------

@dataclass(frozen=True)
class NilradicalVerdict:
    gram: np.ndarray
    solution: np.ndarray | None   # maximises the smallest coordinate among solutions of Ux = 1
    min_coordinate: float
    verdict: bool
    degenerate: bool = False      # best smallest coordinate is zero within tolerance
    consistent: bool = True       # Ux = 1 solvable at all


def einstein_nilradical_criterion(N: NiceStructure, tol=LP_TOL) -> NilradicalVerdict:
    """Positive solvability of ``U x = 1`` for the Gram matrix of the weight vectors."""
    A = weight_vectors(N)
    U = A @ A.T
    m = len(U)
    if m == 0:
        return NilradicalVerdict(U, np.zeros(0), np.inf, True)
    ones = np.ones(m)
    x0 = np.linalg.lstsq(U, ones, rcond=None)[0]
    if np.linalg.norm(U @ x0 - ones) > tol:
        return NilradicalVerdict(U, None, -np.inf, False, consistent=False)
    Z = scipy.linalg.null_space(U, rcond=1e-12)
    k = Z.shape[1]
    # maximise t subject to x0 + Z z >= t
    c = np.zeros(k + 1)
    c[-1] = -1.0
    A_ub = np.hstack([-Z, np.ones((m, 1))])
    res = scipy.optimize.linprog(c, A_ub=A_ub, b_ub=x0, bounds=[(None, None)] * k + [(None, None)],
                                 method="highs")
    if res.status != 0:
        raise RuntimeError(f"linear program failed: {res.message}")
    z, t = res.x[:k], float(res.x[-1])
    x = x0 + Z @ z
    t = float(x.min())
    degenerate = abs(t) <= tol
    return NilradicalVerdict(U, x, t, t > tol, degenerate=degenerate)


def to_fraction(value, max_denominator=10**6, tol=1e-9):
    """Rational reconstruction, or None when no fraction with a small denominator is close."""
    f = Fraction(float(value)).limit_denominator(max_denominator)
    return f if abs(float(f) - value) <= tol else None
