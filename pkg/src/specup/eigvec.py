"""Truncated eigenvector formulas for the rank-one update.

Three variants of increasing accuracy, all built from the m known
eigenpairs, the updated eigenvalue estimates t, and the tail surrogate mu:

  naive   p_i = Q diag(1/(lambda_j - t_i)) Q^T v
  first   ... + r / (mu - t_i)
  second  ... + (1/(mu - t_i) + mu/(mu - t_i)^2) r - A r / (mu - t_i)^2

with r = v - Q Q^T v.  The vectors r and A r are computed once and shared
by all m columns.
"""

from __future__ import annotations

import numpy as np

from .core import PartialEigen, SymmetricMatrix, coefficients_z, project_residual
from .errors import DimensionMismatch, MissingMatrix, PoleCollision

NAIVE = "naive"
FIRST_ORDER = "first"
SECOND_ORDER = "second"

_VARIANTS = (NAIVE, FIRST_ORDER, SECOND_ORDER)

POLE_COLLISION_RTOL = 1e-14


def eigvec_estimate(eig: PartialEigen, v, t, mu, variant=FIRST_ORDER,
                    a: SymmetricMatrix = None, normalized=True):
    """Estimate the updated eigenvectors for the given eigenvalue estimates.

    Parameters
    ----------
    eig : PartialEigen
        The known leading eigenpairs of the original matrix.
    v : array
        Unit perturbation direction.
    t : array, length m
        Updated eigenvalue estimates, strictly descending.
    mu : float
        Tail surrogate used by the first/second order variants.
    variant : str
        One of "naive", "first", "second".
    a : SymmetricMatrix, optional
        Required by the second-order variant for the single A r product.
    normalized : bool
        When true (default) columns are normalized to unit length and their
        sign is fixed so the largest-magnitude entry is positive.  The raw
        formula values are returned otherwise.

    Returns
    -------
    (n, m) array whose i-th column estimates the i-th updated eigenvector.
    """
    if variant not in _VARIANTS:
        raise ValueError(f"unknown eigenvector variant {variant!r}")
    t = np.asarray(t, dtype=np.float64)
    if t.shape != (eig.m,):
        raise DimensionMismatch(f"expected {eig.m} eigenvalue estimates, got {t.shape}")
    v = np.asarray(v, dtype=np.float64)
    lam = eig.values
    q = eig.vectors
    scale = max(np.max(np.abs(lam)), np.max(np.abs(t)), 1e-300)
    gaps = np.abs(lam[:, None] - t[None, :])
    if np.min(gaps) < POLE_COLLISION_RTOL * scale:
        j, i = np.unravel_index(np.argmin(gaps), gaps.shape)
        raise PoleCollision(
            f"estimate t_{i} = {t[i]:.12g} collides with known eigenvalue "
            f"lambda_{j} = {lam[j]:.12g}")
    z = coefficients_z(q, v)
    cols = q @ (z[:, None] / (lam[:, None] - t[None, :]))
    if variant != NAIVE:
        d = mu - t
        if np.min(np.abs(d)) < POLE_COLLISION_RTOL * scale:
            i = int(np.argmin(np.abs(d)))
            raise PoleCollision(
                f"estimate t_{i} = {t[i]:.12g} collides with the surrogate mu")
        r = project_residual(q, v)
        if variant == FIRST_ORDER:
            cols += r[:, None] / d[None, :]
        else:
            if a is None:
                raise MissingMatrix("second-order eigenvectors require the matrix for A r")
            ar = a.matvec(r)
            d2 = d * d
            cols += r[:, None] * (1.0 / d + mu / d2)[None, :]
            cols -= ar[:, None] / d2[None, :]
    if not normalized:
        return cols
    return normalize_columns(cols)


def normalize_columns(p):
    """Unit-normalize columns and flip signs so the peak entry is positive."""
    p = np.array(p, dtype=np.float64)
    norms = np.linalg.norm(p, axis=0)
    if np.any(norms == 0.0):
        raise PoleCollision("a zero eigenvector estimate cannot be normalized")
    p /= norms[None, :]
    peaks = np.abs(p).argmax(axis=0)
    signs = np.sign(p[peaks, np.arange(p.shape[1])])
    signs[signs == 0] = 1.0
    return p * signs[None, :]
