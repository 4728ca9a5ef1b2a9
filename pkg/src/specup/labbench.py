"""Oracle eigensolver, error metrics, and experiment runners.

The oracle is the brute-force ground truth for everything else in the
package: a full dense symmetric eigendecomposition (LAPACK via numpy, with
a self-contained cyclic-Jacobi solver for cross-checks at small sizes).
The runners reproduce the headline experiments at desk scale:

  synthetic   error decay of the truncated update vs. the tail mean
  graph-sigma singular values of the Laplacian difference vs. k
  extension   accuracy of the out-of-sample extension variants
  scaling     wall time of the update along a size ladder

Every runner is deterministic given (seed, spec); trials may execute in
parallel (capped by the THREADS environment variable) and aggregate in
trial order.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import PartialEigen, RankOneUpdate, SymmetricMatrix
from .errors import InputError, NonConvergence
from .extend import extend, lift_eigenpairs
from .graph import GraphConfig, PointCloud, augment_and_delta, laplacian_sym, build_weights
from .secular import TruncationConfig
from .update import rank_one_update

KIND_SYNTHETIC = "synthetic"
KIND_GRAPH_SIGMA = "graph-sigma"
KIND_EXTENSION = "extension"
KIND_SCALING = "scaling"

KINDS = (KIND_SYNTHETIC, KIND_GRAPH_SIGMA, KIND_EXTENSION, KIND_SCALING)


# --------------------------------------------------------------------------
# oracle
# --------------------------------------------------------------------------

def _as_dense(a):
    if isinstance(a, SymmetricMatrix):
        return a.to_dense()
    return np.asarray(a, dtype=np.float64)


def oracle_eigh(a):
    """Full symmetric eigendecomposition, values descending.

    Ground truth for every derived expectation in the test suite; backed by
    LAPACK and therefore independent of the update code under test.
    """
    dense = _as_dense(a)
    try:
        vals, vecs = np.linalg.eigh(dense)
    except np.linalg.LinAlgError as exc:
        raise NonConvergence(f"dense eigensolver failed: {exc}") from exc
    return vals[::-1].copy(), vecs[:, ::-1].copy()


def jacobi_eigh(a, tol=1e-12, max_sweeps=60):
    """Cyclic-Jacobi eigendecomposition for small matrices.

    A slow but self-contained solver used to cross-check the oracle; one
    sweep rotates away every off-diagonal entry once.
    """
    m = _as_dense(a).copy()
    n = m.shape[0]
    q = np.eye(n)
    fro = np.linalg.norm(m, "fro")
    if fro == 0.0:
        return np.zeros(n), q
    for _ in range(max_sweeps):
        off = np.sqrt(max(np.sum(m * m) - np.sum(np.diag(m) ** 2), 0.0))
        if off <= tol * fro:
            break
        for i in range(n - 1):
            for j in range(i + 1, n):
                if m[i, j] == 0.0:
                    continue
                theta = 0.5 * np.arctan2(2.0 * m[i, j], m[j, j] - m[i, i])
                c, s = np.cos(theta), np.sin(theta)
                rot_i = c * m[i, :] - s * m[j, :]
                rot_j = s * m[i, :] + c * m[j, :]
                m[i, :], m[j, :] = rot_i, rot_j
                rot_i = c * m[:, i] - s * m[:, j]
                rot_j = s * m[:, i] + c * m[:, j]
                m[:, i], m[:, j] = rot_i, rot_j
                rot_i = c * q[:, i] - s * q[:, j]
                rot_j = s * q[:, i] + c * q[:, j]
                q[:, i], q[:, j] = rot_i, rot_j
    else:
        raise NonConvergence(f"Jacobi sweep limit {max_sweeps} reached")
    vals = np.diag(m).copy()
    order = np.argsort(-vals, kind="stable")
    return vals[order], q[:, order]


def eigvec_angle(p, q):
    """Angle between two directions in degrees, sign-invariant, in [0, 90].

    Computed as atan2 of the orthogonal and parallel components, which
    stays accurate for tiny angles where arccos of the inner product
    saturates.
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    np_, nq = np.linalg.norm(p), np.linalg.norm(q)
    if np_ == 0.0 or nq == 0.0:
        raise InputError("angle with a zero vector is undefined")
    pu, qu = p / np_, q / nq
    cosine = float(np.dot(pu, qu))
    sine = float(np.linalg.norm(pu - cosine * qu))
    return float(np.degrees(np.arctan2(sine, abs(cosine))))


def max_eigvec_angle(p, q):
    """Largest per-column angle between two n x m blocks, degrees."""
    return max(eigvec_angle(p[:, i], q[:, i]) for i in range(p.shape[1]))


def haar_orthonormal(rng, n, m=None):
    """Haar-distributed orthonormal columns via QR of a Gaussian block."""
    m = n if m is None else m
    g = rng.standard_normal((n, m))
    q, r = np.linalg.qr(g)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs[None, :]


def fit_slope(x, y):
    """Least-squares slope of y against x."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    return float(np.polyfit(x, y, 1)[0])


# --------------------------------------------------------------------------
# experiment plumbing
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentSpec:
    """Sizes, seed and distribution parameters of one experiment run."""

    kind: str
    seed: int = 0
    n: int = 1000
    m: int = 10
    trials: int = 5
    mu_hats: tuple = (1e0, 1e-1, 1e-2, 1e-3, 1e-4)
    sigma_tail: float = 1e-4
    rho: float = 1.0
    k_list: tuple = (5, 10, 20, 40)
    epsilon: float = 100.0
    graph_m: int = 5
    graph_k: int = 40
    n_ladder: tuple = (2000, 4000, 8000, 16000)
    m_ladder: tuple = (50, 100, 200, 400)
    n_fixed: int = 4000
    m_fixed: int = 10
    reps: int = 3

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")


@dataclass
class MetricRow:
    """One measurement: identifiers, error metrics, timing, extras."""

    experiment: str
    variant: str
    params: dict = field(default_factory=dict)
    eigenvalue_abs_err: float = None
    eigenvector_angle_deg: float = None
    wall_time: float = None
    extras: dict = field(default_factory=dict)


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.9g}"
    return str(value)


def _fmt_mapping(d):
    return "|".join(f"{k}={_fmt(v)}" for k, v in sorted(d.items()))


CSV_HEADER = ("experiment,variant,params,eigenvalue_abs_err,"
              "eigenvector_angle_deg,wall_time,extras")


def rows_to_csv(rows, include_timing=False):
    """Serialize metric rows deterministically (9 significant digits).

    Wall times vary between runs, so they are blanked unless explicitly
    requested; timing payloads go to a separate file.
    """
    lines = [CSV_HEADER]
    for r in rows:
        wall = _fmt(r.wall_time) if include_timing else ""
        lines.append(",".join([
            r.experiment,
            r.variant,
            _fmt_mapping(r.params),
            _fmt(r.eigenvalue_abs_err),
            _fmt(r.eigenvector_angle_deg),
            wall,
            _fmt_mapping(r.extras),
        ]))
    return "\n".join(lines) + "\n"


def worker_count(n_tasks):
    env = os.environ.get("THREADS")
    if env:
        try:
            cap = max(1, int(env))
        except ValueError:
            cap = 1
    else:
        cap = os.cpu_count() or 1
    return max(1, min(cap, n_tasks))


def _map_ordered(fn, args_list):
    """Apply fn over args preserving order; parallel when allowed."""
    workers = worker_count(len(args_list))
    if workers == 1 or len(args_list) <= 1:
        return [fn(a) for a in args_list]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, args_list))


def run_experiment(spec: ExperimentSpec):
    runner = {
        KIND_SYNTHETIC: run_synthetic,
        KIND_GRAPH_SIGMA: run_graph_sigma,
        KIND_EXTENSION: run_extension_compare,
        KIND_SCALING: run_scaling,
    }[spec.kind]
    return runner(spec)


# --------------------------------------------------------------------------
# synthetic rank-one update errors
# --------------------------------------------------------------------------

SYNTHETIC_VARIANTS = (
    ("first_mu0", 1, "zero"),
    ("second_mu0", 2, "zero"),
    ("first_star", 1, "star"),
    ("second_star", 2, "star"),
    ("first_mean", 1, "mean"),
    ("second_mean", 2, "mean"),
)


KNOWN_VALUE_RANGE = (1.0, 2.0)


def _synthetic_trial(spec, trial):
    """One trial family: the same matrix frame swept over the tail means.

    The leading eigenvalues, the eigenvector frame and the perturbation
    direction are drawn once per trial and reused across the mu_hat grid
    (common random numbers), so the decay slope is not drowned by the
    trial-to-trial spread of the problem constants.
    """
    rng = np.random.default_rng([spec.seed, 11, trial])
    n, m = spec.n, spec.m
    top = np.sort(rng.uniform(*KNOWN_VALUE_RANGE, m))[::-1]
    tail_shape = rng.standard_normal(n - m)
    q = haar_orthonormal(rng, n)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    upd = RankOneUpdate(spec.rho, v)
    rows = []
    for mu_hat in spec.mu_hats:
        tail = mu_hat + spec.sigma_tail * tail_shape
        lam = np.concatenate([top, tail])
        a = (q * lam[None, :]) @ q.T
        a = 0.5 * (a + a.T)
        b = a + spec.rho * np.outer(v, v)
        t_true, p_true = oracle_eigh(b)
        eig = PartialEigen(top, q[:, :m], trace_hint=float(lam.sum()))
        a_sym = SymmetricMatrix.from_dense(a)
        for name, order, policy in SYNTHETIC_VARIANTS:
            cfg = TruncationConfig(order=order, mu_policy=policy)
            t0 = time.perf_counter()
            res = rank_one_update(eig, upd, cfg, a=a_sym)
            wall = time.perf_counter() - t0
            rows.append(MetricRow(
                experiment=KIND_SYNTHETIC,
                variant=name,
                params={"mu_hat": mu_hat, "trial": trial, "n": n, "m": m},
                eigenvalue_abs_err=float(np.max(np.abs(res.values - t_true[:m]))),
                eigenvector_angle_deg=max_eigvec_angle(res.vectors, p_true[:, :m]),
                wall_time=wall,
                extras={"mu_used": res.mu_used},
            ))
    return rows


def run_synthetic(spec: ExperimentSpec):
    """Error decay of the truncated update as the unknown tail moves.

    The matrix has m leading eigenvalues of magnitude O(1) and an unknown
    tail drawn around mu_hat; each variant of the update runs against the
    oracle decomposition of the perturbed matrix.
    """
    results = _map_ordered(lambda t: _synthetic_trial(spec, t),
                           list(range(spec.trials)))
    return [row for rows in results for row in rows]


def synthetic_slopes(rows, variant, metric="eigenvalue_abs_err",
                     floor=1e-12, saturation=None):
    """Fitted log2-log2 slope of a variant's error against mu_hat."""
    per_mu = {}
    for r in rows:
        if r.variant != variant:
            continue
        err = getattr(r, metric)
        per_mu.setdefault(r.params["mu_hat"], []).append(err)
    xs, ys = [], []
    for mu_hat in sorted(per_mu):
        med = float(np.median(per_mu[mu_hat]))
        if med <= floor:
            continue
        if saturation is not None and med >= saturation:
            continue
        xs.append(np.log2(mu_hat))
        ys.append(np.log2(med))
    if len(xs) < 2:
        raise InputError("not enough usable points for a slope fit")
    return fit_slope(xs, ys)


# --------------------------------------------------------------------------
# graph clouds
# --------------------------------------------------------------------------

CLOUD_DIM = 8
# Anisotropic axis scales break spectral degeneracy of a plain blob.
CLOUD_SCALES = np.array([3.0, 2.4, 1.9, 1.5, 1.2, 0.9, 0.7, 0.5])
CLOUD_CENTER_SPREAD = 2.0
CLOUD_COMPONENTS = 2


def sample_cloud(rng, n):
    """Mixture of anisotropic Gaussians in 8 dimensions."""
    centers = rng.standard_normal((CLOUD_COMPONENTS, CLOUD_DIM)) * CLOUD_CENTER_SPREAD
    labels = rng.integers(0, CLOUD_COMPONENTS, n)
    pts = centers[labels] + rng.standard_normal((n, CLOUD_DIM)) * CLOUD_SCALES[None, :]
    return pts


def delta_singular_values(pair, count=4):
    """Leading singular values of the Laplacian difference via the oracle."""
    vals, _ = oracle_eigh(pair.delta)
    mags = np.sort(np.abs(vals))[::-1]
    return mags[:count]


def _graph_sigma_trial(spec, i_k, k, trial):
    rng = np.random.default_rng([spec.seed, 23, i_k, trial])
    pts = sample_cloud(rng, spec.n + 1)
    x0 = pts[0]
    cloud = PointCloud(pts[1:])
    cfg = GraphConfig(rule="knn", k=k, epsilon=spec.epsilon)
    pair = augment_and_delta(cloud, x0, cfg)
    sig = delta_singular_values(pair)
    delta_dense_11 = float(pair.delta.to_dense()[0, 0])
    return MetricRow(
        experiment=KIND_GRAPH_SIGMA,
        variant="singular_values",
        params={"k": k, "trial": trial, "n": spec.n},
        extras={"sigma1": float(sig[0]), "sigma2": float(sig[1]),
                "sigma3": float(sig[2]), "sigma4": float(sig[3]),
                "delta_11": delta_dense_11},
    )


def run_graph_sigma(spec: ExperimentSpec):
    """Singular values of the Laplacian difference across k.

    Emits one row per (k, trial) plus slope-fit summary rows for
    log2(1 - sigma1) and log2(sigma2) against log2 k.
    """
    tasks = [(i, k, trial)
             for i, k in enumerate(spec.k_list)
             for trial in range(spec.trials)]
    rows = _map_ordered(lambda args: _graph_sigma_trial(spec, *args), tasks)
    slopes = graph_sigma_slopes(rows)
    rows.append(MetricRow(
        experiment=KIND_GRAPH_SIGMA,
        variant="slope",
        params={"k_list": "/".join(str(k) for k in spec.k_list)},
        extras={"slope_one_minus_sigma1": slopes[0], "slope_sigma2": slopes[1]},
    ))
    return rows


def graph_sigma_slopes(rows):
    per_k = {}
    for r in rows:
        if r.variant != "singular_values":
            continue
        per_k.setdefault(r.params["k"], []).append(
            (r.extras["sigma1"], r.extras["sigma2"]))
    ks = sorted(per_k)
    log_k = [np.log2(k) for k in ks]
    mean_one_minus_s1 = [np.log2(np.mean([1.0 - s1 for s1, _ in per_k[k]]))
                         for k in ks]
    mean_s2 = [np.log2(np.mean([s2 for _, s2 in per_k[k]])) for k in ks]
    return fit_slope(log_k, mean_one_minus_s1), fit_slope(log_k, mean_s2)


# --------------------------------------------------------------------------
# extension comparison
# --------------------------------------------------------------------------

EXTENSION_VARIANTS = ("no_update", "first_mu0", "first_mu0_corrected",
                      "second_star", "second_star_corrected")


def _extension_trial(spec, trial):
    rng = np.random.default_rng([spec.seed, 37, trial])
    pts = sample_cloud(rng, spec.n + 1)
    x0 = pts[0]
    cloud = PointCloud(pts[1:])
    gcfg = GraphConfig(rule="knn", k=spec.graph_k, epsilon=spec.epsilon)
    pair = augment_and_delta(cloud, x0, gcfg)
    m = spec.graph_m

    l0 = laplacian_sym(build_weights(cloud, gcfg))
    vals0, vecs0 = oracle_eigh(l0)
    # Lifting keeps m+1 known pairs; comparisons use the top m estimates.
    eig = lift_eigenpairs(vals0[:m], vecs0[:, :m], trace_hint=l0.trace())

    t_true, p_true = oracle_eigh(pair.l1)
    t_true, p_true = t_true[:m], p_true[:, :m]

    rows = []

    def add(variant, values, vectors, extras=None):
        rows.append(MetricRow(
            experiment=KIND_EXTENSION,
            variant=variant,
            params={"trial": trial, "n": spec.n, "m": m, "k": spec.graph_k},
            eigenvalue_abs_err=float(np.max(np.abs(values[:m] - t_true))),
            eigenvector_angle_deg=max_eigvec_angle(vectors[:, :m], p_true),
            extras=extras or {},
        ))

    padded = np.zeros((spec.n + 1, m))
    padded[1:, :] = vecs0[:, :m]
    add("no_update", vals0[:m], padded)

    for name, order, policy in (("first_mu0", 1, "zero"),
                                ("second_star", 2, "star")):
        cfg = TruncationConfig(order=order, mu_policy=policy)
        res = extend(pair.l0_aug, eig, pair, cfg, correct=True)
        extras = {"rho": res.rho,
                  "c_norm": res.correction_matrix_norm,
                  "power_iterations": res.diagnostics["power_iterations"]}
        add(name, *res.uncorrected, extras=extras)
        add(name + "_corrected", *res.corrected, extras=extras)
    return rows


def run_extension_compare(spec: ExperimentSpec):
    """Extension accuracy: no-update vs. raw vs. corrected estimates."""
    results = _map_ordered(lambda t: _extension_trial(spec, t),
                           list(range(spec.trials)))
    return [row for rows in results for row in rows]


def median_metric(rows, variant, metric):
    vals = [getattr(r, metric) for r in rows if r.variant == variant]
    if not vals:
        raise InputError(f"no rows for variant {variant!r}")
    return float(np.median(vals))


# --------------------------------------------------------------------------
# scaling
# --------------------------------------------------------------------------

SCALING_VARIANTS = (("first_mu0", 1, "zero"), ("second_star", 2, "star"))


def _random_sparse_system(rng, n, m, row_nnz=100):
    """Sparse symmetric matrix with ~row_nnz entries per row plus a fake
    known leading block (orthonormal vectors, descending values)."""
    half = (row_nnz // 2) * n
    rows = rng.integers(0, n, half)
    cols = rng.integers(0, n, half)
    vals = rng.normal(0.0, 1e-3, half)
    a = SymmetricMatrix.from_coo(n, rows, cols, vals)
    q = haar_orthonormal(rng, n, m)
    values = np.sort(rng.uniform(1.0, 2.0, m))[::-1]
    eig = PartialEigen(values, q, trace_hint=a.trace())
    v = np.zeros(n)
    support = rng.choice(n, size=min(100, n), replace=False)
    v[support] = rng.standard_normal(support.size)
    v /= np.linalg.norm(v)
    return a, eig, v


def _time_update(a, eig, v, order, policy, reps):
    cfg = TruncationConfig(order=order, mu_policy=policy)
    upd = RankOneUpdate(1.0, v)
    best = np.inf
    for _ in range(reps):
        t0 = time.perf_counter()
        rank_one_update(eig, upd, cfg, a=a)
        best = min(best, time.perf_counter() - t0)
    return best


def run_scaling(spec: ExperimentSpec):
    """Update wall time along an n ladder (fixed m) and an m ladder (fixed n)."""
    rows = []
    for n in spec.n_ladder:
        rng = np.random.default_rng([spec.seed, 53, n])
        a, eig, v = _random_sparse_system(rng, n, spec.m_fixed)
        for name, order, policy in SCALING_VARIANTS:
            wall = _time_update(a, eig, v, order, policy, spec.reps)
            rows.append(MetricRow(
                experiment=KIND_SCALING, variant=name,
                params={"sweep": "n", "n": n, "m": spec.m_fixed},
                wall_time=wall, extras={"nnz": a.nnz}))
    for m in spec.m_ladder:
        rng = np.random.default_rng([spec.seed, 59, m])
        a, eig, v = _random_sparse_system(rng, spec.n_fixed, m)
        for name, order, policy in SCALING_VARIANTS:
            wall = _time_update(a, eig, v, order, policy, spec.reps)
            rows.append(MetricRow(
                experiment=KIND_SCALING, variant=name,
                params={"sweep": "m", "n": spec.n_fixed, "m": m},
                wall_time=wall, extras={"nnz": a.nnz}))
    return rows


def scaling_exponent(rows, sweep, variant="first_mu0"):
    """Fitted log2-log2 exponent of wall time along a ladder."""
    pts = [(r.params[sweep], r.wall_time) for r in rows
           if r.variant == variant and r.params.get("sweep") == sweep]
    if len(pts) < 2:
        raise InputError("not enough points for an exponent fit")
    xs = [np.log2(p[0]) for p in pts]
    ys = [np.log2(max(p[1], 1e-9)) for p in pts]
    return fit_slope(xs, ys)
