"""Shared numeric types: symmetric matrices, partial eigendecompositions,
and rank-one perturbations.

All floating point data is float64.  Symmetric matrices come in two storage
flavours: dense (full array, symmetry enforced on construction) and sparse
(CSR of the upper triangle, mirrored on access).  Instances are immutable
after construction and safe for concurrent reads.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .errors import (
    AsymmetricInput,
    DimensionMismatch,
    InputError,
    NotDescending,
    NotOrthonormal,
)

SYMMETRY_RTOL = 1e-12
ORTHONORMALITY_RTOL = 1e-10
UNIT_NORM_TOL = 1e-12


def _as_vector(x, n=None, name="vector"):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionMismatch(f"{name} must be 1-d, got shape {x.shape}")
    if n is not None and x.shape[0] != n:
        raise DimensionMismatch(f"{name} has length {x.shape[0]}, expected {n}")
    return x


class SymmetricMatrix:
    """Immutable real symmetric matrix with dense or sparse storage.

    Sparse instances keep only the upper triangle (including the diagonal)
    in CSR form and mirror it on every access, so symmetry holds by
    construction.  Dense input is validated against a relative symmetry
    tolerance and then symmetrized exactly.
    """

    def __init__(self, n, dense=None, upper=None):
        self._n = int(n)
        self._dense = dense
        self._upper = upper

    # --- constructors ---------------------------------------------------

    @classmethod
    def from_dense(cls, a):
        a = np.asarray(a, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
        scale = np.max(np.abs(a)) if a.size else 0.0
        if scale > 0 and np.max(np.abs(a - a.T)) > SYMMETRY_RTOL * scale:
            raise AsymmetricInput(
                "dense input is asymmetric beyond tolerance "
                f"{SYMMETRY_RTOL:g} * max|entry|"
            )
        return cls(a.shape[0], dense=0.5 * (a + a.T))

    @classmethod
    def from_coo(cls, n, rows, cols, vals):
        """Build a sparse symmetric matrix from coordinate data.

        Entries may be given for either triangle; they are folded into the
        upper one.  Duplicate coordinates are summed (after folding), which
        means a pair (i, j), (j, i) with i != j must be given only once.
        """
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=np.float64)
        if not (rows.shape == cols.shape == vals.shape):
            raise DimensionMismatch("rows, cols, vals must have equal length")
        if rows.size and (rows.min() < 0 or cols.min() < 0
                          or rows.max() >= n or cols.max() >= n):
            raise DimensionMismatch("coordinate out of range")
        lower = rows > cols
        r = np.where(lower, cols, rows)
        c = np.where(lower, rows, cols)
        upper = sp.coo_matrix((vals, (r, c)), shape=(n, n)).tocsr()
        upper.eliminate_zeros()
        return cls(n, upper=upper)

    @classmethod
    def from_upper_csr(cls, upper):
        upper = sp.csr_matrix(upper)
        if upper.shape[0] != upper.shape[1]:
            raise DimensionMismatch("upper triangle must be square")
        if sp.tril(upper, k=-1).nnz:
            raise AsymmetricInput("entries below the diagonal in upper storage")
        upper.eliminate_zeros()
        return cls(upper.shape[0], upper=upper)

    @classmethod
    def identity(cls, n):
        return cls.from_dense(np.eye(n))

    # --- basic properties -----------------------------------------------

    @property
    def n(self):
        return self._n

    @property
    def is_sparse(self):
        return self._upper is not None

    @property
    def nnz(self):
        """Count of stored nonzeros (upper triangle for sparse storage)."""
        if self.is_sparse:
            return int(self._upper.nnz)
        return int(np.count_nonzero(self._dense))

    @property
    def upper_csr(self):
        """CSR upper triangle (computed on demand for dense storage)."""
        if self.is_sparse:
            return self._upper
        return sp.triu(sp.csr_matrix(self._dense)).tocsr()

    # --- operations -------------------------------------------------------

    def matvec(self, x):
        x = _as_vector(x, self._n, "x")
        if self.is_sparse:
            u = self._upper
            y = u @ x
            y += u.T @ x
            y -= u.diagonal() * x
            return y
        return self._dense @ x

    def matmat(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape[0] != self._n:
            raise DimensionMismatch(f"operand has {x.shape[0]} rows, expected {self._n}")
        if self.is_sparse:
            u = self._upper
            y = u @ x
            y += u.T @ x
            y -= u.diagonal()[:, None] * x
            return y
        return self._dense @ x

    def trace(self):
        return float(self.diagonal().sum())

    def diagonal(self):
        if self.is_sparse:
            return self._upper.diagonal()
        return np.diag(self._dense).copy()

    def frobenius_norm(self):
        if self.is_sparse:
            d = self._upper.diagonal()
            total = 2.0 * (self._upper.multiply(self._upper)).sum() - np.dot(d, d)
            return float(np.sqrt(max(total, 0.0)))
        return float(np.linalg.norm(self._dense, "fro"))

    def to_dense(self):
        if self.is_sparse:
            u = self._upper.toarray()
            return u + u.T - np.diag(u.diagonal())
        return self._dense.copy()

    def __repr__(self):
        kind = "sparse" if self.is_sparse else "dense"
        return f"SymmetricMatrix(n={self._n}, {kind}, nnz={self.nnz})"


class PartialEigen:
    """The m known leading eigenpairs of an n x n symmetric matrix.

    ``values`` are descending (ties allowed; strictness is restored later by
    deflation) and ``vectors`` is an n x m column-orthonormal block.  The
    optional ``trace_hint`` carries the full trace of the underlying matrix
    for the trace-based surrogate.
    """

    def __init__(self, values, vectors, trace_hint=None):
        values = _as_vector(values, name="values")
        vectors = np.asarray(vectors, dtype=np.float64)
        if vectors.ndim != 2:
            raise DimensionMismatch("vectors must be an n x m array")
        n, m = vectors.shape
        if values.shape[0] != m:
            raise DimensionMismatch(
                f"{values.shape[0]} values but {m} vector columns")
        if m < 1 or m > n:
            raise DimensionMismatch(f"need 1 <= m <= n, got m={m}, n={n}")
        if np.any(np.diff(values) > 0):
            raise NotDescending("eigenvalues must be sorted descending")
        gram_defect = np.linalg.norm(vectors.T @ vectors - np.eye(m), "fro")
        if gram_defect > ORTHONORMALITY_RTOL * m:
            raise NotOrthonormal(
                f"eigenvector block defect {gram_defect:.3e} exceeds "
                f"{ORTHONORMALITY_RTOL:g} * m")
        self.values = values.copy()
        self.vectors = vectors.copy()
        self.trace_hint = None if trace_hint is None else float(trace_hint)
        self.n = n
        self.m = m

    def __repr__(self):
        return f"PartialEigen(n={self.n}, m={self.m})"


class RankOneUpdate:
    """A rank-one perturbation rho * v v^T with ||v|| = 1.

    Non-unit input vectors are normalized and rho is rescaled by ||v||^2 so
    the product rho * v v^T is preserved.
    """

    def __init__(self, rho, v):
        v = _as_vector(v, name="v")
        nv = float(np.linalg.norm(v))
        if nv == 0.0:
            raise InputError("perturbation vector must be nonzero")
        rho = float(rho)
        if abs(nv - 1.0) > UNIT_NORM_TOL:
            rho *= nv * nv
            v = v / nv
        else:
            v = v.copy()
        self.rho = rho
        self.v = v

    def __repr__(self):
        return f"RankOneUpdate(rho={self.rho:.6g}, n={self.v.shape[0]})"


# --- elementary operations -----------------------------------------------


def matvec(a: SymmetricMatrix, x):
    """Product A x; equals the mirrored-dense product up to rounding."""
    return a.matvec(x)


def project_residual(q, v):
    """Residual of v against the column span of an orthonormal block.

    Returns r = v - Q Q^T v with Q^T r = 0 up to rounding.
    """
    q = np.asarray(q, dtype=np.float64)
    v = _as_vector(v, q.shape[0], "v")
    return v - q @ (q.T @ v)


def coefficients_z(q, v):
    """Coupling coefficients z_i = <q_i, v> of a unit vector against Q."""
    q = np.asarray(q, dtype=np.float64)
    v = _as_vector(v, q.shape[0], "v")
    return q.T @ v
