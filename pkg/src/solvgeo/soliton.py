"""Nilsoliton detection and construction."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.optimize

from .beta import einstein_nilradical_criterion, weight_vectors
from .curvature import act_metric, check_metric, orthonormal_frame, ricci_endomorphism
from .lie import (LieAlgebra, NiceStructure, derivation_space, from_structure, is_nilpotent,
                  validate_jacobi)

SOLITON_TOL = 1e-8


@dataclass(frozen=True)
class SolitonReport:
    lam: float
    D: np.ndarray
    residual: float             # |Ric - lam Id - D| in an h-orthonormal frame
    normalized_residual: float  # residual after rescaling h so that lam = -1
    is_soliton: bool


def _der_basis(L, der_basis):
    return derivation_space(L).basis if der_basis is None else der_basis


def soliton_residual(L: LieAlgebra, h, der_basis=None, tol=SOLITON_TOL) -> SolitonReport:
    """Least-squares fit ``Ric(h) ~ lam Id + D`` with D a derivation.

    The fit is an orthogonal projection for the trace inner product of an
    h-orthonormal frame, so it does not depend on the basis.
    """
    H = check_metric(h)
    n = L.dim
    Ric = ricci_endomorphism(L, H).ricci
    F = orthonormal_frame(H)
    Fi = np.linalg.inv(F)
    ders = _der_basis(L, der_basis)
    cols = [np.eye(n).ravel()] + [(Fi @ Db @ F).ravel() for Db in ders]
    A = np.array(cols).T
    target = (Fi @ Ric @ F).ravel()
    coef = np.linalg.lstsq(A, target, rcond=None)[0]
    lam = float(coef[0])
    D = np.einsum("b,bij->ij", coef[1:], ders) if len(ders) else np.zeros((n, n))
    residual = float(np.linalg.norm(target - A @ coef))
    normalized = residual / abs(lam) if lam < 0 else residual
    return SolitonReport(lam, D, residual, normalized, normalized <= tol)


def normalize_soliton(L: LieAlgebra, h) -> np.ndarray:
    """Rescale a nilsoliton metric so that ``Ric = -Id + D``."""
    rep = soliton_residual(L, h)
    if rep.lam >= 0:
        raise ValueError("metric has non-negative soliton constant; cannot normalise to -1")
    return -rep.lam * check_metric(h)


# --- nice bases -------------------------------------------------------------------------

@dataclass(frozen=True)
class NiceSoliton:
    algebra: LieAlgebra        # rescaled constants; the identity metric is the nilsoliton
    metric: np.ndarray         # identity
    diagonal_metric: np.ndarray  # the same nilsoliton as a diagonal metric on the input algebra
    weights: np.ndarray        # positive solution x of U x = 1 realised by the constants (c^2 = 2x)


def nilsoliton_from_nice(N: NiceStructure, x=None, max_iter=100) -> NiceSoliton:
    """Diagonal nilsoliton (normalised to ``lam = -1``) on a nice basis.

    Looks for ``y`` with ``1/2 sum_l c_l^2 exp(2<alpha_l, y>) alpha_l = r`` where r is
    the vector of the span of the weights with ``<alpha_m, r> = 1``.  This is the
    gradient equation of a convex function; Newton's method with backtracking.
    """
    L = N.algebra
    n = L.dim
    if not N.nice:
        raise ValueError("nice basis required")
    if not N.triples:
        return NiceSoliton(L, np.eye(n), np.eye(n), np.zeros(0))
    if x is None:
        verdict = einstein_nilradical_criterion(N)
        if not verdict.verdict:
            raise ValueError(f"{L.name or 'algebra'} is not an Einstein nilradical")
        x = verdict.solution
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("need a componentwise-positive solution of U x = 1")
    A = weight_vectors(N)
    r = A.T @ x
    c2 = np.array(N.constants) ** 2

    def phi(y):
        return 0.25 * np.sum(c2 * np.exp(2 * A @ y)) - r @ y

    y = np.zeros(n)
    for _ in range(max_iter):
        w = c2 * np.exp(2 * A @ y)
        grad = 0.5 * A.T @ w - r
        if np.linalg.norm(grad) <= 1e-14:
            break
        hess = A.T @ (w[:, None] * A)
        step = -np.linalg.lstsq(hess, grad, rcond=None)[0]
        t, f0 = 1.0, phi(y)
        while phi(y + t * step) > f0 + 1e-4 * t * grad @ step and t > 1e-12:
            t *= 0.5
        y = y + t * step

    scaled = np.sqrt(c2) * np.sign(N.constants) * np.exp(A @ y)
    C = np.zeros((n, n, n))
    for (i, j, k), c in zip(N.triples, scaled):
        C[i, j, k] = c
        C[j, i, k] = -c
    rescaled = from_structure(C, name=L.name, nilradical=L.nilradical)
    return NiceSoliton(rescaled, np.eye(n), np.diag(np.exp(2 * y)), 0.5 * scaled ** 2)


# --- descent ----------------------------------------------------------------------------

def ricci_pinching(L: LieAlgebra, h) -> float:
    """Scale-invariant functional ``tr(Ric^2) / scal^2``."""
    rep = ricci_endomorphism(L, h)
    return float(np.trace(rep.ricci @ rep.ricci) / rep.scal ** 2)


@dataclass
class FlowResult:
    metric: np.ndarray
    report: SolitonReport
    converged: bool
    iterations: int
    message: str
    history: list = field(default_factory=list)


def _unit_det(H):
    return H / np.linalg.det(H) ** (1.0 / len(H))


def _symmetric(p, n):
    S = np.zeros((n, n))
    S[np.triu_indices(n)] = p
    return S + np.triu(S, 1).T


def polish_soliton(L: LieAlgebra, h, der_basis=None, bound=1.0, max_nfev=200):
    """Levenberg-Marquardt on the normalised soliton residual near h.

    Metrics are parametrised as ``exp(S).h`` with S symmetric in an h-orthonormal
    frame and entries bounded by ``bound``, so the search stays in a compact
    neighbourhood of the starting metric.
    """
    H0 = check_metric(h)
    n = L.dim
    ders = _der_basis(L, der_basis)
    F = orthonormal_frame(H0)
    Fi = np.linalg.inv(F)

    def metric(p):
        H = act_metric(F @ scipy.linalg.expm(_symmetric(p, n)) @ Fi, H0)
        return 0.5 * (H + H.T)

    def residual(p):
        H = metric(p)
        Fh = orthonormal_frame(H)
        Fhi = np.linalg.inv(Fh)
        A = np.array([np.eye(n).ravel()] + [(Fhi @ Db @ Fh).ravel() for Db in ders]).T
        target = (Fhi @ ricci_endomorphism(L, H).ricci @ Fh).ravel()
        coef = np.linalg.lstsq(A, target, rcond=None)[0]
        return (target - A @ coef) / abs(coef[0])

    m = n * (n + 1) // 2
    sol = scipy.optimize.least_squares(residual, np.zeros(m), bounds=(-bound, bound),
                                       xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=max_nfev)
    return _unit_det(metric(sol.x))


def nilsoliton_flow(L: LieAlgebra, h0=None, max_iters=2000, tol=SOLITON_TOL,
                    initial_step=0.1, polish_below=1e-2) -> FlowResult:
    """Descend ``tr(Ric^2)/scal^2`` along ``s -> exp(sE).h`` with E the traceless Ricci.

    Iterates are normalised to determinant one.  Descent converges slowly near
    solitons, so once the normalised residual drops below ``polish_below`` the
    result is refined by :func:`polish_soliton`.  Non-convergence is reported,
    never turned into a claim that no nilsoliton exists.
    """
    if L.is_abelian:
        raise ValueError("flow needs a non-abelian algebra")
    if not is_nilpotent(L) or not validate_jacobi(L).passed:
        raise ValueError(f"{L.name or 'algebra'} is not a nilpotent Lie algebra")
    n = L.dim
    H = _unit_det(check_metric(np.eye(n) if h0 is None else h0))
    ders = derivation_space(L).basis
    f = ricci_pinching(L, H)
    history = [f]
    message = f"no convergence after {max_iters} iterations"
    report = soliton_residual(L, H, ders, tol)
    it = 0
    while not report.is_soliton and it < max_iters:
        it += 1
        Ric = ricci_endomorphism(L, H).ricci
        E = Ric - np.trace(Ric) / n * np.eye(n)
        s = initial_step
        while True:
            trial = _unit_det(act_metric(scipy.linalg.expm(s * E), H))
            trial = 0.5 * (trial + trial.T)
            f_trial = ricci_pinching(L, trial)
            if f_trial < f or s < 1e-14:
                break
            s *= 0.5
        if f_trial >= f:
            message = "line search stalled"
            break
        decrease = (f - f_trial) / f
        H, f = trial, f_trial
        history.append(f)
        if decrease < 1e-14:
            message = "functional decrease below 1e-14"
            break
        if it % 10 == 0:
            report = soliton_residual(L, H, ders, tol)
            if report.normalized_residual <= polish_below:
                break
    report = soliton_residual(L, H, ders, tol)
    if not report.is_soliton and report.normalized_residual <= polish_below:
        H = polish_soliton(L, H, ders)
        report = soliton_residual(L, H, ders, tol)
        if not report.is_soliton:
            message = "refinement did not reach tolerance"
    if report.is_soliton:
        message = "converged"
    return FlowResult(H, report, report.is_soliton, it, message, history)
