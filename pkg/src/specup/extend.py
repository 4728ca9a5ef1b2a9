"""Out-of-sample extension of the graph Laplacian.

The insertion of one point is modeled as the rank-one proxy
L0 + rho v v^T with (rho, v) the dominant eigenpair of the Laplacian
difference.  The partial-spectrum update produces first estimates of the
new eigenpairs; a perturbation correction against the proxy residual
C = L1 - (L0 + rho v v^T) then removes the leading part of the
rank-one-approximation error (eigenvalues gain one order, from ||C|| to
||C||^2).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .core import PartialEigen, RankOneUpdate, SymmetricMatrix
from .errors import DimensionMismatch, ZeroMatrix
from .graph import LaplacianPair, top_eigenpair_power
from .secular import TruncationConfig
from .update import rank_one_update

DEGENERATE_GAP_RTOL = 1e-10


@dataclass
class ExtensionResult:
    """Estimated eigenpairs of the post-insertion Laplacian.

    ``uncorrected`` holds the plain rank-one-proxy estimates, ``corrected``
    the perturbation-corrected ones (when requested).  Both are
    (values, vectors) pairs with descending values and unit columns.
    """

    rho: float
    v: np.ndarray
    uncorrected: tuple
    corrected: tuple = None
    correction_matrix_norm: float = None
    diagnostics: dict = field(default_factory=dict)


class CorrectionResult(NamedTuple):
    values: np.ndarray
    vectors: np.ndarray
    skipped_terms: int


def lift_eigenpairs(values, vectors, m=None, trace_hint=None) -> PartialEigen:
    """Known eigenpairs of the augmented (isolated-vertex) Laplacian.

    Stored eigenvectors of the n-point Laplacian gain a zero entry at the
    new vertex (index 0) and the exact isolated-vertex eigenpair (1, e_0)
    is prepended, giving m+1 known pairs by default.  Keeping the extra
    pair matters: with the negative perturbation weight of an insertion,
    the smallest returned estimate is only loosely bracketed from below,
    so every estimate that is to be trusted must hug a known eigenvalue.
    Callers that want exactly the stored count should slice the result of
    the update, not the lifted input.  ``trace_hint``, if given, refers to
    the n-point Laplacian; the lifted hint adds 1.
    """
    values = np.asarray(values, dtype=np.float64)
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.ndim != 2 or values.shape != (vectors.shape[1],):
        raise DimensionMismatch("need matching values and vector columns")
    n, m_in = vectors.shape
    if m is None:
        m = m_in + 1
    if m > m_in + 1:
        raise DimensionMismatch(
            f"cannot produce {m} lifted pairs from {m_in} stored ones")
    all_vals = np.concatenate([[1.0], values])
    all_vecs = np.zeros((n + 1, m_in + 1))
    all_vecs[0, 0] = 1.0
    all_vecs[1:, 1:] = vectors
    # Stored values can exceed 1 by rounding; a stable descending sort keeps
    # the isolated-vertex pair first among exact ties.
    order = np.argsort(-all_vals, kind="stable")
    lifted_vals = all_vals[order][:m]
    lifted_vecs = all_vecs[:, order][:, :m]
    hint = None if trace_hint is None else float(trace_hint) + 1.0
    return PartialEigen(lifted_vals, lifted_vecs, trace_hint=hint)


def proxy_residual(pair: LaplacianPair, rho, v) -> SymmetricMatrix:
    """C = L1 - (L0 + rho v v^T) as a sparse symmetric matrix.

    The power-method vector lives on the touched vertices, so the outer
    product stays as sparse as the difference matrix itself.
    """
    idx = np.nonzero(v)[0]
    block = np.outer(v[idx], v[idx])
    rows, cols = np.meshgrid(idx, idx, indexing="ij")
    keep = rows <= cols
    du = pair.delta.upper_csr.tocoo()
    return SymmetricMatrix.from_coo(
        pair.delta.n,
        np.concatenate([du.row, rows[keep]]),
        np.concatenate([du.col, cols[keep]]),
        np.concatenate([du.data, -rho * block[keep]]),
    )


def perturbation_correct(c: SymmetricMatrix, t, p,
                         degenerate_rtol=DEGENERATE_GAP_RTOL) -> CorrectionResult:
    """First-order perturbation correction of eigenpair estimates.

    t_hat_i = t_i + p_i^T C p_i and p_hat_i adds the cross terms
    (p_j^T C p_i) / (t_i - t_j) p_j over the m available vectors.  Cross
    terms with near-degenerate denominators are skipped and counted.
    """
    t = np.asarray(t, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 2 or t.shape != (p.shape[1],):
        raise DimensionMismatch("need an n x m block and m values")
    if np.any(np.diff(t) > 0):
        raise DimensionMismatch("eigenvalue estimates must be descending")
    m = t.shape[0]
    g = p.T @ c.matmat(p)
    t_hat = t + np.diag(g)
    gaps = t[None, :] - t[:, None]            # gaps[j, i] = t_i - t_j
    spread = float(t[0] - t[-1]) if m > 1 else 0.0
    thresh = degenerate_rtol * spread
    off = ~np.eye(m, dtype=bool)
    usable = off & (np.abs(gaps) > thresh)
    skipped = int(np.count_nonzero(off & ~usable))
    coeffs = np.zeros((m, m))
    coeffs[usable] = g[usable] / gaps[usable]
    p_hat = p + p @ coeffs
    norms = np.linalg.norm(p_hat, axis=0)
    if np.any(norms == 0.0):
        raise DimensionMismatch("corrected eigenvector collapsed to zero")
    p_hat = p_hat / norms[None, :]
    return CorrectionResult(t_hat, p_hat, skipped)


def extend(l0_aug: SymmetricMatrix, eig: PartialEigen, pair: LaplacianPair,
           cfg: TruncationConfig, correct=True, orthogonalize=False,
           power_tol=1e-10, power_max_iters=2000) -> ExtensionResult:
    """Estimate the top eigenpairs of the Laplacian after a vertex insertion.

    ``eig`` must hold top pairs of the augmented (isolated-vertex)
    Laplacian; see :func:`lift_eigenpairs`.  With ``correct`` the
    perturbation correction against the proxy residual is applied and the
    corrected values re-sorted descending.
    """
    if eig.n != pair.delta.n or l0_aug.n != pair.delta.n:
        raise DimensionMismatch("eigenpairs, Laplacian and difference sizes disagree")
    try:
        rho, v, power_iters = top_eigenpair_power(
            pair.delta, tol=power_tol, max_iters=power_max_iters)
    except ZeroMatrix:
        pairs = (eig.values.copy(), eig.vectors.copy())
        return ExtensionResult(
            rho=0.0, v=None, uncorrected=pairs,
            corrected=pairs if correct else None,
            correction_matrix_norm=0.0,
            diagnostics={"delta_zero": True, "power_iterations": 0})

    res = rank_one_update(eig, RankOneUpdate(rho, v), cfg, a=l0_aug,
                          orthogonalize=orthogonalize)
    loose = res.diagnostics.get("loose_root_position")
    diagnostics = {
        "power_iterations": power_iters,
        "gram_defect": res.gram_defect,
        "mu_used": res.mu_used,
        "mu_fallbacks": res.diagnostics.get("mu_fallbacks", []),
        "skipped_correction_terms": 0,
        "loose_root_position": loose,
    }
    c = proxy_residual(pair, rho, v)
    result = ExtensionResult(
        rho=float(rho), v=v,
        uncorrected=(res.values, res.vectors),
        correction_matrix_norm=c.frobenius_norm(),
        diagnostics=diagnostics)
    if correct:
        # The loose root of a negative-weight update has no trustworthy
        # eigenvector; keep it out of the correction basis and pass it
        # through unchanged.
        m_all = res.values.shape[0]
        if loose is None or m_all == 1:
            basis = np.arange(m_all)
        else:
            basis = np.array([i for i in range(m_all) if i != loose])
        corr = perturbation_correct(c, res.values[basis], res.vectors[:, basis])
        t_hat = res.values.copy()
        p_hat = res.vectors.copy()
        t_hat[basis] = corr.values
        p_hat[:, basis] = corr.vectors
        order = np.argsort(-t_hat, kind="stable")
        result.corrected = (t_hat[order], p_hat[:, order])
        diagnostics["skipped_correction_terms"] = corr.skipped_terms
    return result
