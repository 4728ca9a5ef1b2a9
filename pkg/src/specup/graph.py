"""Similarity graphs, symmetric normalized Laplacians, and the rank-one
view of a single-vertex insertion.

Inserting a point into the graph changes the Laplacian only on the rows and
columns of the vertices it touches, and that difference is close to rank
one.  This module builds the augmented Laplacian (new vertex isolated), the
full Laplacian after insertion, their sparse difference, and the dominant
eigenpair of the difference via the power method.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from .core import SymmetricMatrix
from .errors import (
    DimensionMismatch,
    InputError,
    IsolatedVertexWithoutSelfLoop,
    MaxIterations,
    ZeroDegree,
    ZeroMatrix,
)

RULE_KNN = "knn"
RULE_DELTA = "delta"


@dataclass(frozen=True)
class PointCloud:
    """A set of points in R^d with stable row identifiers."""

    points: np.ndarray
    ids: np.ndarray = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2:
            raise DimensionMismatch("points must be an n x d array")
        if not np.all(np.isfinite(pts)):
            raise InputError("point cloud contains NaN or Inf coordinates")
        object.__setattr__(self, "points", pts)
        ids = self.ids
        if ids is None:
            ids = np.arange(pts.shape[0])
        ids = np.asarray(ids)
        if ids.shape != (pts.shape[0],):
            raise DimensionMismatch("ids must have one entry per point")
        object.__setattr__(self, "ids", ids)

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]


@dataclass(frozen=True)
class GraphConfig:
    """Neighborhood rule and kernel for graph construction.

    rule "knn" connects i and j when either is within the k nearest
    neighbors of the other; rule "delta" connects points closer than
    ``delta``.  Edge weights are exp(-dist^2 / epsilon); self loops carry
    the kernel value at distance zero (1.0).
    """

    rule: str = RULE_KNN
    k: int = None
    delta: float = None
    epsilon: float = 1.0
    self_loops: bool = True

    def __post_init__(self):
        if self.rule == RULE_KNN:
            if self.k is None or self.k < 1:
                raise ValueError("knn rule requires k >= 1")
        elif self.rule == RULE_DELTA:
            if self.delta is None or not self.delta > 0:
                raise ValueError("delta rule requires delta > 0")
        else:
            raise ValueError(f"unknown neighborhood rule {self.rule!r}")
        if not self.epsilon > 0:
            raise ValueError("kernel width epsilon must be positive")


@dataclass(frozen=True)
class LaplacianPair:
    """Laplacians before/after a vertex insertion and their difference.

    ``l0_aug`` is the original Laplacian with the new vertex isolated
    (row/column equal to the unit vector), ``l1`` the Laplacian after
    connecting it, ``delta`` their sparse difference, and ``affected`` the
    vertices adjacent to the new one.  The new vertex is index 0.
    """

    l0_aug: SymmetricMatrix
    l1: SymmetricMatrix
    delta: SymmetricMatrix
    affected: np.ndarray

    def __post_init__(self):
        affected = np.asarray(self.affected, dtype=np.int64)
        object.__setattr__(self, "affected", affected)
        touched = np.zeros(self.delta.n, dtype=bool)
        touched[affected] = True
        touched[0] = True
        upper = self.delta.upper_csr.tocoo()
        if not np.all(touched[upper.row] | touched[upper.col]):
            raise InputError("difference matrix touches entries with no "
                             "endpoint adjacent to the insertion")


def _pairwise_sq_dists(x, y=None):
    y = x if y is None else y
    xx = np.sum(x * x, axis=1)
    yy = np.sum(y * y, axis=1)
    d2 = xx[:, None] + yy[None, :] - 2.0 * (x @ y.T)
    np.maximum(d2, 0.0, out=d2)
    return d2


def _knn_adjacency(d2, k):
    """Union-rule kNN adjacency from a squared-distance matrix."""
    n = d2.shape[0]
    if k >= n:
        k = n - 1
    d = d2.copy()
    np.fill_diagonal(d, np.inf)
    nearest = np.argpartition(d, k - 1, axis=1)[:, :k]
    adj = np.zeros((n, n), dtype=bool)
    rows = np.repeat(np.arange(n), k)
    adj[rows, nearest.ravel()] = True
    return adj | adj.T


def _kth_neighbor_dist(d2, k):
    d = d2.copy()
    np.fill_diagonal(d, np.inf)
    k = min(k, d.shape[0] - 1)
    return np.partition(d, k - 1, axis=1)[:, k - 1]


def build_weights(pc: PointCloud, cfg: GraphConfig) -> SymmetricMatrix:
    """Kernel weight matrix of the similarity graph (sparse storage)."""
    n = pc.n
    if n < 2:
        raise InputError("need at least two points to build a graph")
    d2 = _pairwise_sq_dists(pc.points)
    if cfg.rule == RULE_KNN:
        adj = _knn_adjacency(d2, cfg.k)
    else:
        adj = d2 < cfg.delta * cfg.delta
        np.fill_diagonal(adj, False)
    if not cfg.self_loops and not adj.any(axis=1).all():
        bad = int(np.argmin(adj.any(axis=1)))
        raise IsolatedVertexWithoutSelfLoop(
            f"vertex {bad} has no neighbors and self loops are disabled")
    iu, ju = np.nonzero(np.triu(adj, k=1))
    vals = np.exp(-d2[iu, ju] / cfg.epsilon)
    if cfg.self_loops:
        di = np.arange(n)
        iu = np.concatenate([iu, di])
        ju = np.concatenate([ju, di])
        vals = np.concatenate([vals, np.ones(n)])
    return SymmetricMatrix.from_coo(n, iu, ju, vals)


def _degrees(w: SymmetricMatrix):
    return w.matvec(np.ones(w.n))


def laplacian_sym(w: SymmetricMatrix) -> SymmetricMatrix:
    """Symmetric normalized Laplacian D^{-1/2} W D^{-1/2}.

    Defined so the spectrum lies in [-1, 1] with top eigenvalue 1; requires
    every degree to be positive.
    """
    deg = _degrees(w)
    if np.any(deg <= 0.0):
        bad = int(np.argmin(deg))
        raise ZeroDegree(f"vertex {bad} has non-positive degree {deg[bad]:g}")
    inv_sqrt = 1.0 / np.sqrt(deg)
    if w.is_sparse:
        upper = w.upper_csr.tocoo()
        vals = upper.data * inv_sqrt[upper.row] * inv_sqrt[upper.col]
        return SymmetricMatrix.from_coo(w.n, upper.row, upper.col, vals)
    dense = w.to_dense() * inv_sqrt[:, None] * inv_sqrt[None, :]
    return SymmetricMatrix.from_dense(dense)


def _new_vertex_neighbors(pc: PointCloud, x0, cfg: GraphConfig):
    x0 = np.asarray(x0, dtype=np.float64).reshape(1, -1)
    if x0.shape[1] != pc.dim:
        raise DimensionMismatch(
            f"new point has dimension {x0.shape[1]}, cloud has {pc.dim}")
    d2 = _pairwise_sq_dists(x0, pc.points)[0]
    if cfg.rule == RULE_DELTA:
        mask = d2 < cfg.delta * cfg.delta
    else:
        k = min(cfg.k, pc.n)
        mask = np.zeros(pc.n, dtype=bool)
        mask[np.argpartition(d2, k - 1)[:k]] = True
        # ... or the new point enters an existing vertex's k nearest list.
        thr = _kth_neighbor_dist(_pairwise_sq_dists(pc.points), cfg.k)
        mask |= d2 < thr
    return np.nonzero(mask)[0], d2


def augment_and_delta(pc: PointCloud, x0, cfg: GraphConfig) -> LaplacianPair:
    """Laplacians around the insertion of ``x0`` and their difference.

    The new vertex takes index 0.  Edges among the original points are kept
    as in the original graph; the insertion only adds edges incident to the
    new vertex, so the difference is confined to the rows and columns of
    the touched vertices.
    """
    n = pc.n
    w0 = build_weights(pc, cfg)
    w0_upper = w0.upper_csr.tocoo()
    neighbors, d2 = _new_vertex_neighbors(pc, x0, cfg)
    w_new = np.exp(-d2[neighbors] / cfg.epsilon)

    rows = [w0_upper.row + 1]
    cols = [w0_upper.col + 1]
    vals = [w0_upper.data]
    if neighbors.size:
        rows.append(np.zeros(neighbors.size, dtype=np.int64))
        cols.append(neighbors + 1)
        vals.append(w_new)
    if cfg.self_loops:
        rows.append(np.array([0]))
        cols.append(np.array([0]))
        vals.append(np.array([1.0]))
    elif neighbors.size == 0:
        raise IsolatedVertexWithoutSelfLoop(
            "new point has no neighbors and self loops are disabled")
    w1 = SymmetricMatrix.from_coo(n + 1, np.concatenate(rows),
                                  np.concatenate(cols), np.concatenate(vals))
    l1 = laplacian_sym(w1)

    l0 = laplacian_sym(w0)
    l0u = l0.upper_csr.tocoo()
    l0_aug = SymmetricMatrix.from_coo(
        n + 1,
        np.concatenate([np.array([0]), l0u.row + 1]),
        np.concatenate([np.array([0]), l0u.col + 1]),
        np.concatenate([np.array([1.0]), l0u.data]),
    )
    diff = (l1.upper_csr - l0_aug.upper_csr).tocsr()
    diff.eliminate_zeros()
    delta = SymmetricMatrix.from_upper_csr(diff)
    return LaplacianPair(l0_aug=l0_aug, l1=l1, delta=delta,
                         affected=neighbors + 1)


class PowerResult(NamedTuple):
    rho: float
    v: np.ndarray
    iterations: int


def top_eigenpair_power(m: SymmetricMatrix, tol=1e-10, max_iters=1000,
                        seed_vector=None) -> PowerResult:
    """Dominant (largest-magnitude) eigenpair by power iteration.

    Returns the signed Rayleigh quotient rho and a unit vector v, so
    rho * v v^T is the best rank-one approximation of a symmetric m.
    Converges when ||M v - rho v|| <= tol * ||M||_F.
    """
    fro = m.frobenius_norm()
    if fro == 0.0:
        raise ZeroMatrix("power method on a zero matrix")
    if seed_vector is not None:
        x = np.asarray(seed_vector, dtype=np.float64).copy()
    else:
        diag = np.abs(m.diagonal())
        if diag.max() > 0.0:
            x = np.zeros(m.n)
            x[int(np.argmax(diag))] = 1.0
        else:
            x = np.ones(m.n)
    nx = np.linalg.norm(x)
    if nx == 0.0:
        raise InputError("seed vector must be nonzero")
    x /= nx
    reseeded = False
    for it in range(1, max_iters + 1):
        y = m.matvec(x)
        rho = float(np.dot(x, y))
        if np.linalg.norm(y - rho * x) <= tol * fro:
            return PowerResult(rho, x, it)
        ny = np.linalg.norm(y)
        if ny == 0.0:
            if reseeded:
                raise MaxIterations("power method stuck in the null space")
            # Deterministic restart out of the null space.
            x = np.random.default_rng(0).standard_normal(m.n)
            x /= np.linalg.norm(x)
            reseeded = True
            continue
        x = y / ny
    raise MaxIterations(
        f"power method did not reach tol={tol:g} in {max_iters} iterations "
        "(spectral gap too small)")
