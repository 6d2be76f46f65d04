"""Real Lie algebras given by structure constants.

A :class:`LieAlgebra` stores the nonzero constants ``c^k_{ij}`` of
``[e_i, e_j] = sum_k c^k_{ij} e_k`` for ``i < j``.  Indices are 0-based
internally and 1-based in files and reports.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.linalg

ZERO_TOL = 1e-12
DERIVATION_TOL = 1e-10


class AlgebraError(ValueError):
    """Malformed or inconsistent algebra data."""


class NotADerivationError(ValueError):
    def __init__(self, residual):
        super().__init__(f"matrix is not a derivation (residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class LieAlgebra:
    dim: int
    brackets: tuple  # of (i, j, k, c) with i < j, 0-based
    name: str = ""
    nilradical: tuple | None = None  # 0-based basis indices spanning the nilradical
    rational: bool = False

    def __post_init__(self):
        if self.dim < 1:
            raise AlgebraError("dimension must be positive")
        seen = set()
        for i, j, k, _ in self.brackets:
            if not (0 <= i < j < self.dim and 0 <= k < self.dim):
                raise AlgebraError(f"bracket index out of range: ({i + 1},{j + 1},{k + 1})")
            if (i, j, k) in seen:
                raise AlgebraError(f"duplicate bracket entry ({i + 1},{j + 1},{k + 1})")
            seen.add((i, j, k))

    @cached_property
    def structure(self) -> np.ndarray:
        """Full antisymmetric array ``C[i, j, k] = c^k_{ij}``."""
        C = np.zeros((self.dim, self.dim, self.dim))
        for i, j, k, c in self.brackets:
            C[i, j, k] = c
            C[j, i, k] = -c
        C.flags.writeable = False
        return C

    def bracket(self, x, y) -> np.ndarray:
        return np.einsum("i,j,ijk->k", x, y, self.structure)

    def ad(self, x) -> np.ndarray:
        """Matrix of ``ad x`` acting on column vectors."""
        return np.einsum("i,ijk->kj", np.asarray(x, dtype=float), self.structure)

    @cached_property
    def ad_basis(self) -> np.ndarray:
        """Stack of ``ad e_i`` matrices, shape (dim, dim, dim)."""
        return np.einsum("ijk->ikj", self.structure)

    @property
    def is_abelian(self) -> bool:
        return not np.any(np.abs(self.structure) > ZERO_TOL)

    def __repr__(self):
        return f"LieAlgebra({self.name or '?'}, dim={self.dim}, brackets={len(self.brackets)})"


def from_structure(C, name="", nilradical=None, tol=ZERO_TOL) -> LieAlgebra:
    """Build an algebra from a full (dim, dim, dim) array; only the i<j half is read."""
    C = np.asarray(C, dtype=float)
    n = C.shape[0]
    entries = []
    for i, j in itertools.combinations(range(n), 2):
        for k in range(n):
            if abs(C[i, j, k]) > tol:
                entries.append((i, j, k, float(C[i, j, k])))
    return LieAlgebra(n, tuple(entries), name=name, nilradical=nilradical)


def _coerce_constant(value):
    """Return (float value, is_rational)."""
    if isinstance(value, bool):
        raise AlgebraError(f"invalid structure constant {value!r}")
    if isinstance(value, int):
        return float(value), True
    if isinstance(value, float):
        return value, value.is_integer()
    if isinstance(value, str):
        try:
            frac = Fraction(value.strip())
        except ValueError:
            raise AlgebraError(f"invalid structure constant {value!r}") from None
        return float(frac), True
    raise AlgebraError(f"invalid structure constant {value!r}")


def parse_algebra(source) -> LieAlgebra:
    """Parse the catalog JSON schema (a string or an already-decoded dict)."""
    if isinstance(source, (str, bytes)):
        try:
            data = json.loads(source)
        except json.JSONDecodeError as exc:
            raise AlgebraError(f"malformed algebra file: {exc}") from None
    else:
        data = source
    if not isinstance(data, dict) or "dim" not in data:
        raise AlgebraError("algebra file needs an object with 'dim' and 'brackets'")
    dim = data["dim"]
    if not isinstance(dim, int) or isinstance(dim, bool) or dim < 1:
        raise AlgebraError(f"invalid dimension {dim!r}")

    entries = {}
    rational = True
    for raw in data.get("brackets", []):
        try:
            i, j, k = int(raw["i"]), int(raw["j"]), int(raw["k"])
            c, exact = _coerce_constant(raw["c"])
        except (KeyError, TypeError) as exc:
            raise AlgebraError(f"malformed bracket entry {raw!r}") from exc
        rational &= exact
        for idx in (i, j, k):
            if not 1 <= idx <= dim:
                raise AlgebraError(f"index {idx} out of range 1..{dim}")
        if i == j:
            raise AlgebraError(f"bracket [e{i},e{i}] must vanish")
        if i > j:
            i, j, c = j, i, -c
        key = (i - 1, j - 1, k - 1)
        if key in entries:
            raise AlgebraError(f"duplicate bracket entry ({i},{j},{k})")
        if c != 0.0:
            entries[key] = c

    nil = data.get("nilradical")
    if nil is not None:
        if any(not 1 <= int(a) <= dim for a in nil):
            raise AlgebraError("nilradical index out of range")
        nil = tuple(int(a) - 1 for a in nil)

    brackets = tuple((i, j, k, c) for (i, j, k), c in sorted(entries.items()))
    return LieAlgebra(dim, brackets, name=str(data.get("name", "")), nilradical=nil,
                      rational=rational)


def load_algebra(path) -> LieAlgebra:
    return parse_algebra(Path(path).read_text(encoding="utf-8"))


def algebra_to_dict(L: LieAlgebra) -> dict:
    out = {"name": L.name, "dim": L.dim,
           "brackets": [{"i": i + 1, "j": j + 1, "k": k + 1, "c": c} for i, j, k, c in L.brackets]}
    if L.nilradical is not None:
        out["nilradical"] = [a + 1 for a in L.nilradical]
    return out


# --- validation -----------------------------------------------------------------

@dataclass(frozen=True)
class JacobiReport:
    passed: bool
    max_residual: float
    triple: tuple | None = None  # 1-based violating triple


def jacobi_residuals(C) -> np.ndarray:
    """Array J[a, b, c, :] = [[e_a,e_b],e_c] + [[e_b,e_c],e_a] + [[e_c,e_a],e_b]."""
    C = np.asarray(C)
    first = np.einsum("abm,mcl->abcl", C, C)
    return first + np.einsum("bcal->abcl", first) + np.einsum("cabl->abcl", first)


def validate_jacobi(L: LieAlgebra, tol=ZERO_TOL) -> JacobiReport:
    J = np.abs(jacobi_residuals(L.structure)).max(axis=-1) if L.dim >= 3 else np.zeros((0,))
    if J.size == 0 or J.max() <= tol:
        return JacobiReport(True, float(J.max()) if J.size else 0.0)
    for a, b, c in itertools.combinations(range(L.dim), 3):
        if J[a, b, c] > tol:
            return JacobiReport(False, float(J.max()), (a + 1, b + 1, c + 1))
    raise AssertionError("unreachable")  # residual is totally antisymmetric in (a,b,c)


def _span_rank(vectors, tol=1e-10) -> tuple[np.ndarray, int]:
    if len(vectors) == 0:
        return np.zeros((0, 0)), 0
    M = np.array(vectors, dtype=float)
    u, s, vt = np.linalg.svd(M, full_matrices=False)
    r = int(np.sum(s > tol * max(1.0, s[0] if s.size else 1.0)))
    return vt[:r], r


def lower_central_series(L: LieAlgebra) -> tuple[list[int], bool]:
    """Dimensions of g, [g,g], [g,[g,g]], ... until the series stabilises."""
    n = L.dim
    basis = np.eye(n)
    dims = [n]
    C = L.structure
    while True:
        images = [np.einsum("i,j,ijk->k", e, v, C) for e in np.eye(n) for v in basis]
        basis, r = _span_rank(images)
        dims.append(r)
        if r == 0 or r == dims[-2]:
            break
    return dims, dims[-1] == 0


def is_nilpotent(L: LieAlgebra) -> bool:
    return lower_central_series(L)[1]


def unimodularity(L: LieAlgebra) -> bool:
    return bool(np.all(np.abs(np.einsum("ijj->i", L.ad_basis)) <= ZERO_TOL))


def killing_form(L: LieAlgebra) -> np.ndarray:
    ad = L.ad_basis
    return np.einsum("akl,blk->ab", ad, ad)


# --- derivations ------------------------------------------------------------------

def tau(E, C) -> np.ndarray:
    """``(tau(E) mu)(x, y) = E mu(x, y) - mu(Ex, y) - mu(x, Ey)`` on structure arrays."""
    E = np.asarray(E, dtype=float)
    return (np.einsum("ijm,km->ijk", C, E)
            - np.einsum("mi,mjk->ijk", E, C)
            - np.einsum("mj,imk->ijk", E, C))


def derivation_residual(L: LieAlgebra, E) -> float:
    E = np.asarray(E, dtype=float)
    if E.shape != (L.dim, L.dim):
        raise ValueError(f"expected a {L.dim}x{L.dim} matrix, got shape {E.shape}")
    return float(np.linalg.norm(tau(E, L.structure)))


def is_derivation(L: LieAlgebra, E, tol=DERIVATION_TOL) -> tuple[bool, float]:
    r = derivation_residual(L, E)
    return r <= tol, r


@dataclass(frozen=True)
class DerivationSpace:
    algebra: LieAlgebra
    basis: np.ndarray  # shape (dimension, dim, dim), orthonormal in the Frobenius product

    @property
    def dimension(self) -> int:
        return self.basis.shape[0]


def derivation_operator(L: LieAlgebra) -> np.ndarray:
    """Matrix of the linear map ``E -> tau(E) mu`` from vec(E) (row-major) to the i<j entries."""
    n = L.dim
    iu = np.triu_indices(n, 1)
    cols = []
    for a, b in itertools.product(range(n), repeat=2):
        E = np.zeros((n, n))
        E[a, b] = 1.0
        cols.append(tau(E, L.structure)[iu].ravel())
    return np.array(cols).T


def derivation_space(L: LieAlgebra) -> DerivationSpace:
    n = L.dim
    if n == 1:
        return DerivationSpace(L, np.ones((1, 1, 1)))
    ns = scipy.linalg.null_space(derivation_operator(L), rcond=1e-12)
    return DerivationSpace(L, ns.T.reshape(-1, n, n))


# --- constructions ----------------------------------------------------------------

def semidirect_extend(L: LieAlgebra, D, name=None) -> LieAlgebra:
    """``R xi ⋉ L`` with ``[xi, x] = D x``; xi is the last basis vector."""
    D = np.asarray(D, dtype=float)
    ok, res = is_derivation(L, D)
    if not ok:
        raise NotADerivationError(res)
    n = L.dim
    C = np.zeros((n + 1, n + 1, n + 1))
    C[:n, :n, :n] = L.structure
    C[n, :n, :n] = D.T        # [xi, e_j] = sum_k D[k, j] e_k
    C[:n, n, :n] = -D.T
    nil = tuple(range(n)) if is_nilpotent(L) else None
    return from_structure(C, name=name or f"{L.name}+xi", nilradical=nil)


def direct_sum(*algebras: LieAlgebra, name=None) -> LieAlgebra:
    n = sum(L.dim for L in algebras)
    C = np.zeros((n, n, n))
    nil = []
    off = 0
    for L in algebras:
        s = slice(off, off + L.dim)
        C[s, s, s] = L.structure
        if L.nilradical is not None:
            nil.extend(off + a for a in L.nilradical)
        off += L.dim
    return from_structure(C, name=name or "+".join(L.name for L in algebras),
                          nilradical=tuple(nil) if nil else None)


# --- nice bases -------------------------------------------------------------------

@dataclass(frozen=True)
class NiceStructure:
    algebra: LieAlgebra
    nice: bool
    triples: tuple = ()     # 0-based (i, j, k) with c^k_{ij} != 0
    constants: tuple = ()
    witness: tuple | None = None  # 1-based pair or pairs breaking niceness
    reason: str = ""


def nice_basis_report(L: LieAlgebra, tol=ZERO_TOL) -> NiceStructure:
    """Check that each ``[e_i, e_j]`` is a multiple of one basis vector and that
    pairs landing on the same ``e_k`` are disjoint."""
    by_pair = {}
    for i, j, k, c in L.brackets:
        if abs(c) > tol:
            by_pair.setdefault((i, j), []).append((k, c))
    for (i, j), outs in by_pair.items():
        if len(outs) > 1:
            return NiceStructure(L, False, witness=(i + 1, j + 1),
                                 reason=f"[e{i + 1},e{j + 1}] is not a multiple of a basis vector")
    by_k = {}
    for (i, j), [(k, _)] in by_pair.items():
        by_k.setdefault(k, []).append((i, j))
    for k, pairs in by_k.items():
        for p, r in itertools.combinations(pairs, 2):
            if set(p) & set(r):
                return NiceStructure(
                    L, False, witness=((p[0] + 1, p[1] + 1), (r[0] + 1, r[1] + 1)),
                    reason=f"pairs sharing output e{k + 1} are not disjoint")
    items = sorted((i, j, outs[0][0], outs[0][1]) for (i, j), outs in by_pair.items())
    return NiceStructure(L, True, triples=tuple((i, j, k) for i, j, k, _ in items),
                         constants=tuple(c for *_, c in items))
