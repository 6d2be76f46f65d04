"""Discrete modified Helmholtz decomposition on weighted graphs.

For a vector field X on the edges, the operator ``L v = div(grad v + vbar X)``
(``vbar`` the arithmetic edge mean) has a one-dimensional kernel spanned by a
positive function v, and ``X0 = grad v / vbar + X`` satisfies ``div(vbar X0) = 0``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.csgraph
import scipy.sparse.linalg

DENSE_LIMIT = 2000
KERNEL_GAP = 1e-8


class DiscretizationError(RuntimeError):
    pass


@dataclass(frozen=True)
class FluxGraph:
    measures: np.ndarray      # m_u > 0
    edges: np.ndarray         # (E, 2) oriented u -> v; parallel edges allowed
    weights: np.ndarray       # w_e > 0
    grid: dict | None = field(default=None, compare=False)

    def __post_init__(self):
        m = np.asarray(self.measures, dtype=float)
        e = np.asarray(self.edges, dtype=int).reshape(-1, 2)
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "measures", m)
        object.__setattr__(self, "edges", e)
        object.__setattr__(self, "weights", w)
        if len(w) != len(e):
            raise ValueError("one weight per edge required")
        if np.any(m <= 0) or np.any(w <= 0):
            raise ValueError("measures and weights must be positive")
        if len(e) and (e.min() < 0 or e.max() >= len(m)):
            raise ValueError("edge endpoint out of range")
        if np.any(e[:, 0] == e[:, 1]):
            raise ValueError("self-loops are not allowed")
        A = scipy.sparse.coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(len(m), len(m)))
        ncomp, _ = scipy.sparse.csgraph.connected_components(A, directed=False)
        if ncomp != 1:
            raise ValueError(f"graph has {ncomp} connected components")

    @property
    def n_vertices(self) -> int:
        return len(self.measures)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def incidence(self) -> scipy.sparse.csr_matrix:
        """``(B f)_e = f_head - f_tail``."""
        E = self.n_edges
        rows = np.repeat(np.arange(E), 2)
        cols = self.edges[:, ::-1].ravel()
        vals = np.tile([1.0, -1.0], E)
        return scipy.sparse.csr_matrix((vals, (rows, cols)), shape=(E, self.n_vertices))

    def averaging(self) -> scipy.sparse.csr_matrix:
        E = self.n_edges
        rows = np.repeat(np.arange(E), 2)
        return scipy.sparse.csr_matrix((np.full(2 * E, 0.5), (rows, self.edges.ravel())),
                                       shape=(E, self.n_vertices))


@dataclass(frozen=True)
class EdgeField:
    """Values on the oriented edges of a graph; reversing an edge flips the sign."""
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))

    def reversed_value(self, e) -> float:
        return -self.values[e]


def build_torus_grid(n_x: int, n_y: int, spacing=None) -> FluxGraph:
    """Periodic 4-neighbour grid approximating the flat torus.

    Vertex ``(i, j)`` has index ``i * n_y + j`` and sits at ``(i h, j h)``.
    Measures are ``h^2`` and weights ``m / h^2``, so ``div grad`` is the
    five-point Laplacian.
    """
    if n_x < 2 or n_y < 2:
        raise ValueError("torus grid needs at least 2 vertices per side")
    h = 2 * np.pi / n_x if spacing is None else float(spacing)
    if h <= 0:
        raise ValueError("spacing must be positive")
    idx = np.arange(n_x * n_y).reshape(n_x, n_y)
    ex = np.stack([idx.ravel(), np.roll(idx, -1, axis=0).ravel()], axis=1)
    ey = np.stack([idx.ravel(), np.roll(idx, -1, axis=1).ravel()], axis=1)
    edges = np.vstack([ex, ey])
    m = h * h
    return FluxGraph(np.full(n_x * n_y, m), edges, np.full(len(edges), m / h ** 2),
                     grid={"n_x": n_x, "n_y": n_y, "spacing": h})


def grid_coordinates(G: FluxGraph) -> tuple[np.ndarray, np.ndarray]:
    g = G.grid
    i, j = np.divmod(np.arange(G.n_vertices), g["n_y"])
    return i * g["spacing"], j * g["spacing"]


def discrete_grad(G: FluxGraph, f) -> EdgeField:
    return EdgeField(G.incidence() @ np.asarray(f, dtype=float))


def discrete_div(G: FluxGraph, Y) -> np.ndarray:
    """``(div Y)_u = m_u^-1 sum_e w_e Y_e`` over edges leaving u (signs by orientation)."""
    y = Y.values if isinstance(Y, EdgeField) else np.asarray(Y, dtype=float)
    return -(G.incidence().T @ (G.weights * y)) / G.measures


def helmholtz_operator(G: FluxGraph, X) -> scipy.sparse.csr_matrix:
    x = X.values if isinstance(X, EdgeField) else np.asarray(X, dtype=float)
    B = G.incidence()
    flux = B + scipy.sparse.diags(x) @ G.averaging()
    return (-scipy.sparse.diags(1.0 / G.measures) @ B.T @ scipy.sparse.diags(G.weights) @ flux).tocsr()


@dataclass(frozen=True)
class KernelResult:
    v: np.ndarray
    residual: float        # |L v| / |v|
    second_singular: float
    method: str


def modified_helmholtz_kernel(G: FluxGraph, X, tol=1e-10) -> KernelResult:
    """Positive spanning vector of ``ker(v -> div(grad v + vbar X))``, max-normalised."""
    L = helmholtz_operator(G, X)
    n = G.n_vertices
    # the measure is a left null vector: sum_u m_u (div Y)_u = 0
    M = scipy.sparse.diags(G.measures) @ L
    if n < DENSE_LIMIT:
        _, s, Vt = scipy.linalg.svd(M.toarray())
        v = Vt[-1]
        second = float(s[-2])
        method = "dense"
    else:
        # bordered system [[M, m], [1^T, 0]] [v, c] = [0, 1] is nonsingular iff the kernel is simple
        K = scipy.sparse.bmat([[M, G.measures[:, None]], [np.ones((1, n)), None]], format="csc")
        rhs = np.zeros(n + 1)
        rhs[-1] = 1.0
        lu = scipy.sparse.linalg.splu(K)
        v = lu.solve(rhs)[:n]
        # smallest singular value of the bordered matrix stands in for the spectral gap
        est = scipy.sparse.linalg.onenormest(scipy.sparse.linalg.LinearOperator(
            K.shape, matvec=lu.solve, rmatvec=lambda b: lu.solve(b, trans="T"), dtype=float))
        second = float(1.0 / est)
        method = "sparse"
    if second <= KERNEL_GAP:
        raise DiscretizationError(f"kernel dimension > 1 (second singular value {second:.3e})")
    v = v / v[np.argmax(np.abs(v))]
    if np.any(v <= 0):
        raise DiscretizationError("kernel vector changes sign")
    res = float(np.linalg.norm(L @ v) / np.linalg.norm(v))
    if res > tol:
        raise DiscretizationError(f"kernel residual {res:.3e} above {tol:.1e}")
    return KernelResult(v, res, second, method)


@dataclass(frozen=True)
class HelmholtzDecomposition:
    v: np.ndarray
    X0: EdgeField
    kernel_dimension: int
    residual: float          # |L v| / |v|
    divergence: float        # max |div(vbar X0)|
    second_singular: float


def helmholtz_decompose(G: FluxGraph, X, tol=1e-10) -> HelmholtzDecomposition:
    x = X.values if isinstance(X, EdgeField) else np.asarray(X, dtype=float)
    k = modified_helmholtz_kernel(G, x, tol=tol)
    vbar = G.averaging() @ k.v
    X0 = (G.incidence() @ k.v) / vbar + x
    div = float(np.abs(discrete_div(G, vbar * X0)).max())
    return HelmholtzDecomposition(k.v, EdgeField(X0), 1, k.residual, div, k.second_singular)


# --- fields on grids and the convergence study -------------------------------------------

def field_from_potential(G: FluxGraph, u) -> EdgeField:
    """Edge field of exact differences of a vertex function."""
    return discrete_grad(G, u)


def circulation_field(G: FluxGraph, cx=1.0, cy=0.0) -> EdgeField:
    """Constant field ``cx dx + cy dy`` on a torus grid, as edge increments."""
    if G.grid is None:
        raise ValueError("circulation fields need torus-grid metadata")
    h = G.grid["spacing"]
    half = G.n_edges // 2
    vals = np.concatenate([np.full(half, cx * h), np.full(G.n_edges - half, cy * h)])
    return EdgeField(vals)


def gradient_case_error(n: int, potential=None) -> float:
    """Max relative error of v against ``exp(-u)`` on the n x n torus."""
    G = build_torus_grid(n, n)
    x, y = grid_coordinates(G)
    u = np.sin(x) + np.cos(y) if potential is None else potential(x, y)
    v = modified_helmholtz_kernel(G, field_from_potential(G, u)).v
    exact = np.exp(-u)
    # compare up to scale: fit the constant in the least-squares sense
    scale = float(exact @ v / (v @ v))
    return float(np.max(np.abs(scale * v - exact) / exact))


def convergence_study(sizes=(16, 32)) -> list[tuple[int, float]]:
    return [(n, gradient_case_error(n)) for n in sizes]


# --- file formats -------------------------------------------------------------------------

def graph_to_dict(G: FluxGraph) -> dict:
    out = {"measures": G.measures.tolist(), "edges": G.edges.tolist(), "weights": G.weights.tolist()}
    if G.grid is not None:
        out["grid"] = G.grid
    return out


def graph_from_dict(d: dict) -> FluxGraph:
    if "grid" in d and "edges" not in d:
        g = d["grid"]
        return build_torus_grid(int(g["n_x"]), int(g["n_y"]), g.get("spacing"))
    return FluxGraph(d["measures"], d["edges"], d["weights"], grid=d.get("grid"))


def load_graph(path) -> FluxGraph:
    with open(path) as fh:
        return graph_from_dict(json.load(fh))


def load_field(path, G: FluxGraph) -> EdgeField:
    """Field file: ``{"values": [...]}`` in edge order, or ``{"potential": [...]}`` on vertices."""
    with open(path) as fh:
        d = json.load(fh)
    if "values" in d:
        vals = np.asarray(d["values"], dtype=float)
        if len(vals) != G.n_edges:
            raise ValueError(f"field has {len(vals)} values for {G.n_edges} edges")
        return EdgeField(vals)
    if "potential" in d:
        return field_from_potential(G, np.asarray(d["potential"], dtype=float))
    raise ValueError("field file needs 'values' or 'potential'")
