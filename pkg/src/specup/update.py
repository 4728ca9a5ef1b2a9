"""Driver for the partial-spectrum rank-one update.

Pipeline: deflate the known pairs against the perturbation direction,
choose the tail surrogate, solve the truncated secular equation, evaluate
the truncated eigenvector formula, and re-interleave frozen pairs.  An
optional re-orthogonalization pass cleans up the estimated block and
reports the quality bound that goes with it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import secular
from .core import PartialEigen, RankOneUpdate, SymmetricMatrix, coefficients_z
from .eigvec import FIRST_ORDER, SECOND_ORDER, eigvec_estimate
from .errors import (
    AllDeflated,
    DegenerateResidual,
    DimensionMismatch,
    MissingS,
    MissingTrace,
    RankDeficient,
)
from .secular import (
    MU_MEAN,
    MU_STAR,
    MU_ZERO,
    RESIDUAL_MASS_TOL,
    SecularProblem,
    TruncationConfig,
    choose_mu,
    compute_s,
    solve_roots,
)

TAU_Z = 1e-12
TAU_LAMBDA_RTOL = 1e-10

GRAM_BOUND_LIMIT = 0.25


@dataclass(frozen=True)
class DeflationReport:
    """Bookkeeping of the deflation step.

    ``kept`` are the indices whose coupling enters the secular solve,
    ``frozen`` the indices with |z_i| < tau_z whose eigenpairs pass through
    unchanged, and ``merged`` groups of kept indices whose eigenvalues lie
    within tau_lambda of each other and are solved as a single atom with
    the combined coupling weight.
    """

    kept: tuple
    frozen: tuple
    merged: tuple
    tau_z: float
    tau_lambda: float

    @property
    def merged_count(self):
        return sum(len(g) for g in self.merged)


@dataclass
class UpdateResult:
    """Updated eigenpair estimates plus diagnostics."""

    values: np.ndarray
    vectors: np.ndarray
    deflation: DeflationReport
    mu_used: float
    gram_defect: float
    residual_quality: float = None
    diagnostics: dict = field(default_factory=dict)


class _Deflation:
    """Deflated system: secular atoms plus pass-through pairs."""

    __slots__ = ("report", "atom_values", "atom_vectors", "atom_indices",
                 "passthrough")

    def __init__(self, report, atom_values, atom_vectors, atom_indices,
                 passthrough):
        self.report = report
        self.atom_values = atom_values
        self.atom_vectors = atom_vectors
        self.atom_indices = atom_indices
        self.passthrough = passthrough  # list of (value, orig_index, vector)


def _householder(zg):
    """Orthogonal H with (H z)_0 = +-||z|| and zeros elsewhere."""
    g = zg.shape[0]
    beta = np.linalg.norm(zg)
    alpha = -np.sign(zg[0]) * beta if zg[0] != 0 else beta
    u = zg.copy()
    u[0] -= alpha
    nu = np.dot(u, u)
    h = np.eye(g)
    if nu > 0.0:
        h -= 2.0 * np.outer(u, u) / nu
    return h


def _deflate_rich(eig: PartialEigen, v, tau_z, tau_lambda):
    z = coefficients_z(eig.vectors, v)
    frozen_mask = np.abs(z) < tau_z
    frozen = np.nonzero(frozen_mask)[0]
    kept = np.nonzero(~frozen_mask)[0]
    passthrough = [(float(eig.values[i]), int(i), eig.vectors[:, i].copy())
                   for i in frozen]
    groups = []
    i = 0
    while i < kept.size:
        j = i
        first_val = eig.values[kept[i]]
        while j + 1 < kept.size and first_val - eig.values[kept[j + 1]] <= tau_lambda:
            j += 1
        groups.append(kept[i:j + 1])
        i = j + 1
    merged = tuple(tuple(int(i) for i in g) for g in groups if len(g) > 1)
    atom_values = []
    atom_cols = []
    atom_indices = []
    for g in groups:
        if len(g) == 1:
            idx = int(g[0])
            atom_values.append(float(eig.values[idx]))
            atom_cols.append(eig.vectors[:, idx].copy())
            atom_indices.append(idx)
        else:
            h = _householder(z[g])
            rotated = eig.vectors[:, g] @ h
            atom_values.append(float(eig.values[g[0]]))
            atom_cols.append(rotated[:, 0])
            atom_indices.append(int(g[0]))
            # The rotated complements decouple exactly; they pass through
            # with the remaining values of the group.
            for pos in range(1, len(g)):
                passthrough.append((float(eig.values[g[pos]]), int(g[pos]),
                                    rotated[:, pos]))
    report = DeflationReport(
        kept=tuple(int(i) for i in kept),
        frozen=tuple(int(i) for i in frozen),
        merged=merged,
        tau_z=tau_z,
        tau_lambda=tau_lambda,
    )
    if kept.size == 0:
        mass = 1.0 - float(np.dot(z, z))
        if mass < RESIDUAL_MASS_TOL:
            raise AllDeflated("no coupling and no residual mass: nothing to update")
        return _Deflation(report, np.empty(0), np.empty((eig.n, 0)), [], passthrough)
    return _Deflation(report,
                      np.asarray(atom_values),
                      np.column_stack(atom_cols),
                      atom_indices,
                      passthrough)


def default_tau_lambda(values):
    scale = float(np.max(np.abs(values))) if len(values) else 0.0
    return TAU_LAMBDA_RTOL * scale


def deflate(eig: PartialEigen, v, tau_z=TAU_Z, tau_lambda=None):
    """Classify the known eigenpairs for the secular solve.

    Pairs with |z_i| < tau_z freeze (the perturbation does not touch them);
    eigenvalues within tau_lambda of each other merge into one atom whose
    coupling weight is the combined sum of squares.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (eig.n,):
        raise DimensionMismatch(f"v has shape {v.shape}, expected ({eig.n},)")
    if tau_lambda is None:
        tau_lambda = default_tau_lambda(eig.values)
    return _deflate_rich(eig, v, tau_z, tau_lambda).report


def _resolve_mu(cfg: TruncationConfig, eig, a, v):
    """Apply the surrogate policy with the star -> mean -> zero fallback."""
    fallbacks = []
    policy = cfg.mu_policy
    if not isinstance(policy, str):
        return float(policy), fallbacks
    chain = {MU_STAR: (MU_STAR, MU_MEAN, MU_ZERO),
             MU_MEAN: (MU_MEAN, MU_ZERO),
             MU_ZERO: (MU_ZERO,)}[policy]
    for i, name in enumerate(chain):
        try:
            return choose_mu(name, eig, a, v), fallbacks
        except (DegenerateResidual, MissingTrace):
            if name == MU_ZERO:
                raise
            fallbacks.append(f"{name}->{chain[i + 1]}")
    raise AssertionError("unreachable")


def _passthrough_result(eig, deflation, reason, a=None, rho=0.0, v=None):
    values = eig.values.copy()
    vectors = eig.vectors.copy()
    gram = float(np.linalg.norm(vectors.T @ vectors - np.eye(eig.m), "fro"))
    rq = None
    if a is not None and v is not None:
        rq = _residual_quality_updated(a, rho, v, vectors, values)
    return UpdateResult(values=values, vectors=vectors, deflation=deflation,
                        mu_used=float("nan"), gram_defect=gram,
                        residual_quality=rq, diagnostics={reason: True})


def _residual_quality_updated(a, rho, v, p, t):
    """||B P - P diag(t)||_F for B = A + rho v v^T without forming B."""
    bp = a.matmat(p)
    if rho != 0.0:
        bp += rho * np.outer(v, v @ p)
    return float(np.linalg.norm(bp - p * np.asarray(t)[None, :], "fro"))


def rank_one_update(eig: PartialEigen, upd: RankOneUpdate, cfg: TruncationConfig,
                    a: SymmetricMatrix = None, orthogonalize=False,
                    tau_z=TAU_Z, tau_lambda=None):
    """Estimate the m leading eigenpairs of A + rho v v^T from m known pairs.

    ``a`` is optional but required by the second-order formulas and by the
    "star"/"mean" surrogates (unless a trace hint is stored).  Frozen pairs
    bypass the solve and are re-inserted by a stable descending merge.
    """
    v = upd.v
    if v.shape != (eig.n,):
        raise DimensionMismatch(f"v has length {v.shape[0]}, expected {eig.n}")
    if tau_lambda is None:
        tau_lambda = default_tau_lambda(eig.values)
    if upd.rho == 0.0:
        report = deflate(eig, v, tau_z, tau_lambda)
        return _passthrough_result(eig, report, "rho_zero", a=a, rho=0.0, v=v)
    try:
        defl = _deflate_rich(eig, v, tau_z, tau_lambda)
    except AllDeflated:
        report = DeflationReport(kept=(), frozen=tuple(range(eig.m)), merged=(),
                                 tau_z=tau_z, tau_lambda=tau_lambda)
        return _passthrough_result(eig, report, "all_deflated", a=a,
                                   rho=upd.rho, v=v)
    if defl.atom_values.size == 0:
        return _passthrough_result(eig, defl.report, "all_frozen", a=a,
                                   rho=upd.rho, v=v)

    z_full = coefficients_z(eig.vectors, v)
    mass = float(np.clip(1.0 - float(np.dot(z_full, z_full)), 0.0, 1.0))
    mu, fallbacks = _resolve_mu(cfg, eig, a, v)
    s = None
    if cfg.order == 2:
        if a is None:
            raise MissingS("second-order update requires the matrix for s")
        s = compute_s(a, eig.vectors, v)

    eig_d = PartialEigen(defl.atom_values, defl.atom_vectors)
    z_d = coefficients_z(eig_d.vectors, v)
    problem = SecularProblem(lambdas=defl.atom_values, z=z_d, rho=upd.rho,
                             mu=mu, s=s, residual_mass=mass)
    roots = solve_roots(problem, cfg)
    variant = FIRST_ORDER if cfg.order == 1 else SECOND_ORDER
    p_kept = eigvec_estimate(eig_d, v, roots, mu, variant, a)

    n_roots = roots.shape[0]
    entries = [(float(roots[j]), defl.atom_indices[j], p_kept[:, j], j)
               for j in range(n_roots)]
    entries.extend((val, idx, vec, None) for val, idx, vec in defl.passthrough)
    entries.sort(key=lambda e: (-e[0], e[1]))
    values = np.array([e[0] for e in entries])
    vectors = np.column_stack([e[2] for e in entries])

    diagnostics = {"mu_fallbacks": fallbacks, "mu_policy": str(cfg.mu_policy),
                   "order": cfg.order}
    if upd.rho < 0:
        # The smallest root has no known pole below it (swept bracket); mark
        # its output slot so downstream consumers can treat it as loose.
        for pos, e in enumerate(entries):
            if e[3] == n_roots - 1:
                diagnostics["loose_root_position"] = pos
                break
    if orthogonalize:
        raw_defect = float(np.linalg.norm(vectors.T @ vectors - np.eye(eig.m), "fro"))
        vectors, _, e_bound = reorthogonalize(vectors)
        diagnostics["raw_gram_defect"] = raw_defect
        diagnostics["e_bound"] = e_bound
    gram = float(np.linalg.norm(vectors.T @ vectors - np.eye(eig.m), "fro"))
    rq = None
    if a is not None:
        rq = _residual_quality_updated(a, upd.rho, v, vectors, values)
    return UpdateResult(values=values, vectors=vectors, deflation=defl.report,
                        mu_used=float(mu), gram_defect=gram,
                        residual_quality=rq, diagnostics=diagnostics)


def reorthogonalize(p, method="qr"):
    """Orthonormalize estimated eigenvector columns.

    Returns ``(p_bar, gram_defect, e_bound)`` where ``gram_defect`` is
    ||P^T P - I||_F of the input and ``e_bound`` bounds the Frobenius norm
    of E in P = P_bar (I + E).  The bound 2 * gram_defect holds only when
    the defect is below 1/4; beyond that ``e_bound`` is +inf.
    """
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 2:
        raise DimensionMismatch("expected an n x m block")
    m = p.shape[1]
    gram_defect = float(np.linalg.norm(p.T @ p - np.eye(m), "fro"))
    if method == "qr":
        q, r = np.linalg.qr(p)
        diag = np.diag(r)
        limit = max(p.shape) * np.finfo(np.float64).eps * np.max(np.abs(diag), initial=0.0)
        if np.any(np.abs(diag) <= limit):
            raise RankDeficient("estimated eigenvector block is numerically rank deficient")
        signs = np.sign(diag)
        p_bar = q * signs[None, :]
    elif method == "polar":
        u, sv, vt = np.linalg.svd(p, full_matrices=False)
        limit = max(p.shape) * np.finfo(np.float64).eps * (sv[0] if sv.size else 0.0)
        if np.any(sv <= limit):
            raise RankDeficient("estimated eigenvector block is numerically rank deficient")
        p_bar = u @ vt
    else:
        raise ValueError(f"unknown orthogonalization method {method!r}")
    e_bound = 2.0 * gram_defect if gram_defect < GRAM_BOUND_LIMIT else float("inf")
    return p_bar, gram_defect, e_bound


def residual_quality(b: SymmetricMatrix, p, t):
    """Frobenius norm of B P - P diag(t), the eigenpair quality measure."""
    p = np.asarray(p, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    if p.ndim != 2 or t.shape != (p.shape[1],):
        raise DimensionMismatch("need an n x m block and m values")
    return float(np.linalg.norm(b.matmat(p) - p * t[None, :], "fro"))
