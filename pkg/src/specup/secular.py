"""Truncated secular equations: evaluation, surrogate choice, root finding.

The exact secular function of a rank-one update needs the full spectrum of
the original matrix.  With only the m leading eigenpairs available, the
unknown tail is collapsed onto a surrogate value mu, giving a first-order
truncated equation

    w1(t) = 1 + rho * ( sum_i z_i^2 / (lambda_i - t) + (1 - sum z_i^2) / (mu - t) )

and a second-order one that adds a moment correction built from the known
quantity s = v^T A (I - Q Q^T) v:

    w2(t) = w1(t) - rho * (s - mu * (1 - sum z_i^2)) / (mu - t)^2.

The m largest roots of either equation are the updated eigenvalue
estimates.  Roots are isolated in pole-to-pole brackets and polished with a
bisection-safeguarded Newton iteration.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import PartialEigen, SymmetricMatrix, coefficients_z, project_residual
from .errors import (
    DegenerateResidual,
    DimensionMismatch,
    InvalidSurrogate,
    MaxIterations,
    MissingS,
    MissingTrace,
    NoSignChange,
    NotDescending,
    PoleEvaluation,
)

RESIDUAL_MASS_TOL = 1e-12

MU_ZERO = "zero"
MU_MEAN = "mean"
MU_STAR = "star"


@dataclass(frozen=True)
class TruncationConfig:
    """Approximation order, surrogate policy and root-solver knobs.

    ``order`` is 1 or 2.  ``mu_policy`` is one of "zero", "mean", "star",
    or an explicit numeric value.
    """

    order: int = 1
    mu_policy: object = MU_ZERO
    root_tol: float = 1e-12
    max_iters: int = 200
    pole_offset: float = 1e-9

    def __post_init__(self):
        if self.order not in (1, 2):
            raise ValueError(f"order must be 1 or 2, got {self.order!r}")
        if isinstance(self.mu_policy, str):
            if self.mu_policy not in (MU_ZERO, MU_MEAN, MU_STAR):
                raise ValueError(f"unknown mu policy {self.mu_policy!r}")
        else:
            float(self.mu_policy)
        if not self.root_tol > 0:
            raise ValueError("root_tol must be positive")
        if not self.pole_offset > 0:
            raise ValueError("pole_offset must be positive")


@dataclass(frozen=True)
class SecularProblem:
    """A deflated truncated secular problem.

    ``lambdas`` are the strictly descending known eigenvalues (atoms),
    ``z`` their coupling coefficients, ``residual_mass`` the leftover
    1 - sum z_i^2 clamped to [0, 1], and ``s`` the tail moment required by
    the second-order equation.
    """

    lambdas: np.ndarray
    z: np.ndarray
    rho: float
    mu: float
    s: float = None
    residual_mass: float = field(default=None)

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=np.float64)
        z = np.asarray(self.z, dtype=np.float64)
        if lam.ndim != 1 or z.shape != lam.shape:
            raise DimensionMismatch("lambdas and z must be 1-d of equal length")
        if np.any(np.diff(lam) >= 0):
            raise NotDescending("secular problem requires strictly descending eigenvalues")
        object.__setattr__(self, "lambdas", lam)
        object.__setattr__(self, "z", z)
        if self.residual_mass is None:
            mass = 1.0 - float(np.dot(z, z))
            object.__setattr__(self, "residual_mass", float(np.clip(mass, 0.0, 1.0)))
        else:
            object.__setattr__(self, "residual_mass",
                               float(np.clip(self.residual_mass, 0.0, 1.0)))
        if self.residual_mass > RESIDUAL_MASS_TOL and not self.mu < lam[-1]:
            raise InvalidSurrogate(
                f"surrogate mu={self.mu:.6g} must lie below the smallest known "
                f"eigenvalue {lam[-1]:.6g}")

    @property
    def m(self):
        return self.lambdas.shape[0]


def compute_s(a: SymmetricMatrix, q, v):
    """Tail moment s = v^T A (I - Q Q^T) v = sum_{i>m} z_i^2 lambda_i."""
    v = np.asarray(v, dtype=np.float64)
    r = project_residual(q, v)
    return float(np.dot(a.matvec(v), r))


def choose_mu(policy, eig: PartialEigen, a: SymmetricMatrix = None, v=None):
    """Resolve a surrogate policy to a numeric value.

    "zero" assumes a low-rank matrix.  "mean" is the mean of the unknown
    eigenvalues, (tr(A) - sum lambda_i) / (n - m), and needs a trace.
    "star" is the coupling-weighted tail mean s / (1 - sum z_i^2), the
    minimizer of the second-order error bound, and needs A and v.
    A numeric policy passes through unchanged.
    """
    if not isinstance(policy, str):
        return float(policy)
    if policy == MU_ZERO:
        return 0.0
    if policy == MU_MEAN:
        if eig.n == eig.m:
            raise DegenerateResidual("no unknown eigenvalues: mean surrogate undefined")
        trace = eig.trace_hint
        if trace is None and a is not None:
            trace = a.trace()
        if trace is None:
            raise MissingTrace("mean surrogate requires a trace hint or the matrix")
        return (trace - float(eig.values.sum())) / (eig.n - eig.m)
    if policy == MU_STAR:
        if a is None or v is None:
            raise MissingTrace("star surrogate requires the matrix and the vector")
        z = coefficients_z(eig.vectors, v)
        mass = 1.0 - float(np.dot(z, z))
        if mass < RESIDUAL_MASS_TOL:
            raise DegenerateResidual(
                f"residual mass {mass:.3e} too small for the weighted tail mean")
        return compute_s(a, eig.vectors, v) / mass
    raise ValueError(f"unknown mu policy {policy!r}")


def _check_poles(t, p: SecularProblem):
    if np.any(p.lambdas == t):
        raise PoleEvaluation(f"t={t!r} coincides with a known eigenvalue")
    if p.residual_mass > 0.0 and p.mu == t:
        raise PoleEvaluation(f"t={t!r} coincides with the surrogate mu")


def eval_w1(t, p: SecularProblem):
    """First-order truncated secular function at t."""
    _check_poles(t, p)
    acc = float(np.sum(p.z * p.z / (p.lambdas - t)))
    if p.residual_mass > 0.0:
        acc += p.residual_mass / (p.mu - t)
    return 1.0 + p.rho * acc


def eval_w2(t, p: SecularProblem):
    """Second-order truncated secular function at t."""
    if p.s is None:
        raise MissingS("second-order evaluation requires the tail moment s")
    base = eval_w1(t, p)
    if p.residual_mass <= 0.0 and p.s == 0.0:
        return base
    d = p.mu - t
    if d == 0.0:
        raise PoleEvaluation(f"t={t!r} coincides with the surrogate mu")
    return base - p.rho * (p.s - p.mu * p.residual_mass) / (d * d)


def _eval_dw(t, p, order):
    acc = float(np.sum(p.z * p.z / (p.lambdas - t) ** 2))
    if p.residual_mass > 0.0:
        acc += p.residual_mass / (p.mu - t) ** 2
    dw = p.rho * acc
    if order == 2 and p.s is not None and (p.residual_mass > 0.0 or p.s != 0.0):
        dw -= 2.0 * p.rho * (p.s - p.mu * p.residual_mass) / (p.mu - t) ** 3
    return dw


def _spectral_span(p: SecularProblem):
    lam = p.lambdas
    return (lam[0] - lam[-1]) + abs(p.rho) + abs(lam[-1] - p.mu)


def _find_root(f, df, a, b, fa, fb, cfg, span, rho):
    """Bisection-safeguarded Newton on a bracket [a, b] with fa*fb <= 0.

    Returns the best-residual iterate seen, so tightening root_tol can only
    improve the returned |f|.
    """
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    x = 0.5 * (a + b)
    fx = f(x)
    best_x, best_f = x, abs(fx)
    f_tol = cfg.root_tol * abs(rho)
    w_tol = cfg.root_tol * span
    since_bisect = 0
    for _ in range(cfg.max_iters):
        # The residual criterion alone can leave the root loose when the
        # slope is shallow, so also ask the Newton step |f/f'| to be small.
        if (b - a) <= w_tol:
            return best_x
        if abs(fx) <= f_tol:
            d = df(x)
            if not np.isfinite(d) or abs(fx) <= w_tol * abs(d):
                return best_x
        if (fx > 0) == (fa > 0):
            a, fa = x, fx
        else:
            b, fb = x, fx
        # A bisection at least every fourth step keeps the bracket shrinking
        # even when Newton creeps along one end.
        step_ok = False
        if since_bisect < 3:
            d = df(x)
            if np.isfinite(d) and d != 0.0:
                xn = x - fx / d
                if a < xn < b:
                    x = xn
                    step_ok = True
                    since_bisect += 1
        if not step_ok:
            x = 0.5 * (a + b)
            since_bisect = 0
        fx = f(x)
        if abs(fx) < best_f:
            best_x, best_f = x, abs(fx)
    raise MaxIterations(
        f"root search did not converge in {cfg.max_iters} iterations")


def _shrunken_endpoints(lo, hi, cfg, lo_is_pole, hi_is_pole):
    width = hi - lo
    off = cfg.pole_offset * width
    a = lo + off if lo_is_pole else lo
    b = hi - off if hi_is_pole else hi
    # Guard against offsets that underflow into the pole itself.
    if lo_is_pole:
        a = max(a, np.nextafter(lo, hi))
    if hi_is_pole:
        b = min(b, np.nextafter(hi, lo))
    return a, b


def _bracket_root(f, df, lo, hi, cfg, span, rho, index,
                  lo_is_pole=True, hi_is_pole=True, extend_right=False):
    """Find the root inside (lo, hi); optionally grow hi until a sign change."""
    a, b = _shrunken_endpoints(lo, hi, cfg, lo_is_pole, hi_is_pole)
    fa, fb = f(a), f(b)
    shrink = cfg.pole_offset
    while (fa > 0) == (fb > 0) and fa != 0.0 and fb != 0.0 and shrink > 1e-15:
        # The root may hide between a pole and its offset endpoint; pull in.
        shrink *= 1e-3
        width = hi - lo
        if lo_is_pole:
            a = max(lo + shrink * width, np.nextafter(lo, hi))
            fa = f(a)
        if hi_is_pole and (fa > 0) == (fb > 0):
            b = min(hi - shrink * width, np.nextafter(hi, lo))
            fb = f(b)
    if (fa > 0) == (fb > 0) and fa != 0.0 and fb != 0.0:
        if extend_right:
            # Second-order top root can overshoot lambda_1 + rho slightly;
            # the function tends to 1 at +inf, so a sign change exists.
            step = max(cfg.pole_offset * span, 1e-12 * max(abs(hi), 1.0))
            for _ in range(80):
                a, fa = b, fb
                b = b + step
                fb = f(b)
                step *= 2.0
                if (fa > 0) != (fb > 0) or fb == 0.0:
                    break
            else:
                raise NoSignChange(
                    f"no sign change above bracket {index}", bracket_index=index)
        else:
            raise NoSignChange(
                f"bracket {index} endpoints have equal sign", bracket_index=index)
    return _find_root(f, df, a, b, fa, fb, cfg, span, rho)


def solve_roots(p: SecularProblem, cfg: TruncationConfig):
    """The m largest roots of the truncated secular equation, descending.

    For rho > 0 the k-th root lives in (lambda_k, lambda_{k-1}) and the top
    one in (lambda_1, lambda_1 + rho).  For rho < 0 the brackets shift down
    one slot and the last root is located by a downward sweep (it is only
    guaranteed to lie below lambda_m).
    """
    if p.rho == 0.0:
        raise ValueError("rho must be nonzero")
    if cfg.order == 2 and p.s is None:
        raise MissingS("second-order solve requires the tail moment s")
    if cfg.order == 2:
        f = lambda t: eval_w2(t, p)
    else:
        f = lambda t: eval_w1(t, p)
    df = lambda t: _eval_dw(t, p, cfg.order)
    lam = p.lambdas
    m = lam.shape[0]
    span = _spectral_span(p)
    roots = np.empty(m)
    if p.rho > 0:
        roots[0] = _bracket_root(f, df, lam[0], lam[0] + p.rho, cfg, span, p.rho,
                                 index=0, hi_is_pole=False,
                                 extend_right=(cfg.order == 2))
        for k in range(1, m):
            roots[k] = _bracket_root(f, df, lam[k], lam[k - 1], cfg, span, p.rho,
                                     index=k)
    else:
        for k in range(m - 1):
            roots[k] = _bracket_root(f, df, lam[k + 1], lam[k], cfg, span, p.rho,
                                     index=k)
        roots[m - 1] = _sweep_last_root(f, df, p, cfg, span)
    return roots


def _sweep_last_root(f, df, p, cfg, span):
    """Locate the last root for rho < 0 by stepping down from lambda_m.

    The sweep never brackets the surrogate pole: it first closes in on mu
    from above, and only if no sign change appears there does it hop to the
    other side and keep descending.
    """
    lam = p.lambdas
    gaps = np.diff(lam)
    mean_gap = float(-gaps.mean()) if gaps.size else abs(p.rho)
    if mean_gap <= 0.0:
        mean_gap = max(abs(p.rho), 1e-8 * max(abs(lam[-1]), 1.0), 1e-12)
    hi = lam[-1]
    b = max(hi - cfg.pole_offset * mean_gap, np.nextafter(hi, hi - 1.0))
    fb = f(b)
    lower_abort = min(p.mu, lam[-1] - abs(p.rho)) - span
    mu_is_pole = p.residual_mass > 0.0
    barrier = p.mu + cfg.pole_offset * mean_gap if mu_is_pole else None
    while True:
        a = b - mean_gap
        hit_barrier = False
        if barrier is not None and b > barrier and a <= barrier:
            a = barrier
            hit_barrier = True
        if a < lower_abort:
            raise NoSignChange("downward sweep found no sign change",
                               bracket_index=p.m - 1)
        fa = f(a)
        if (fa > 0) != (fb > 0) or fa == 0.0:
            return _find_root(f, df, a, b, fa, fb, cfg, span, p.rho)
        if hit_barrier:
            b = p.mu - cfg.pole_offset * mean_gap
            fb = f(b)
            barrier = None
        else:
            b, fb = a, fa
