import numpy as np
import numpy.testing as npt
import pytest

from specup.core import PartialEigen, SymmetricMatrix
from specup.errors import DegenerateResidual, MaxIterations, MissingTrace, PoleEvaluation
from specup.labbench import haar_orthonormal, oracle_eigh
from specup.secular import (
    SecularProblem,
    TruncationConfig,
    choose_mu,
    compute_s,
    eval_w1,
    eval_w2,
    solve_roots,
)

SQ2 = np.sqrt(2.0)


def random_instance(rng, n, m, rho=1.0, spectrum=None):
    """Matrix with a known full spectrum plus the partial view of it."""
    if spectrum is None:
        spectrum = np.sort(rng.uniform(0.5, 2.5, n))[::-1]
    q = haar_orthonormal(rng, n)
    a = (q * spectrum[None, :]) @ q.T
    a = 0.5 * (a + a.T)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    eig = PartialEigen(spectrum[:m], q[:, :m], trace_hint=float(spectrum.sum()))
    return SymmetricMatrix.from_dense(a), eig, v, spectrum, q


def build_problem(a, eig, v, rho, mu, with_s=True):
    z = eig.vectors.T @ v
    mass = float(np.clip(1.0 - np.dot(z, z), 0.0, 1.0))
    s = compute_s(a, eig.vectors, v) if with_s else None
    return SecularProblem(lambdas=eig.values, z=z, rho=rho, mu=mu, s=s,
                          residual_mass=mass)


class TestComputeS:
    def test_v_in_span_gives_zero(self):
        a = SymmetricMatrix.from_dense(np.diag([2.0, 1.0, 0.5]))
        q = np.eye(3)[:, :2]
        assert compute_s(a, q, np.array([1.0, 0.0, 0.0])) == pytest.approx(0.0, abs=1e-15)

    def test_zero_tail_eigenvalue(self):
        a = SymmetricMatrix.from_dense(np.diag([1.0, 0.0]))
        q = np.array([[1.0], [0.0]])
        v = np.array([1.0, 1.0]) / SQ2
        assert compute_s(a, q, v) == pytest.approx(0.0, abs=1e-15)

    def test_matches_full_spectrum_oracle(self):
        rng = np.random.default_rng(10)
        a, eig, v, spectrum, q = random_instance(rng, 10, 3)
        z_tail = q[:, 3:].T @ v
        expected = float(np.sum(z_tail**2 * spectrum[3:]))
        assert abs(compute_s(a, eig.vectors, v) - expected) <= 1e-10


class TestChooseMu:
    def test_mean_from_trace(self):
        # n=4, m=2, trace 1.0, known values 0.4 and 0.3 -> tail mean 0.15
        q = np.eye(4)[:, :2]
        eig = PartialEigen([0.4, 0.3], q, trace_hint=1.0)
        assert choose_mu("mean", eig) == pytest.approx(0.15)

    def test_star_single_tail_atom(self):
        spectrum = np.array([3.0, 2.0, 0.7, 0.2])
        a = SymmetricMatrix.from_dense(np.diag(spectrum))
        eig = PartialEigen(spectrum[:2], np.eye(4)[:, :2])
        v = np.eye(4)[:, 2]
        assert choose_mu("star", eig, a, v) == pytest.approx(0.7, abs=1e-13)

    def test_star_matches_weighted_tail_mean(self):
        rng = np.random.default_rng(11)
        a, eig, v, spectrum, q = random_instance(rng, 12, 4)
        z_tail = q[:, 4:].T @ v
        expected = float(np.sum(z_tail**2 * spectrum[4:]) / np.sum(z_tail**2))
        assert abs(choose_mu("star", eig, a, v) - expected) <= 1e-10

    def test_star_degenerate_residual(self):
        a = SymmetricMatrix.from_dense(np.diag([2.0, 1.0]))
        eig = PartialEigen([2.0], np.eye(2)[:, :1])
        with pytest.raises(DegenerateResidual):
            choose_mu("star", eig, a, np.array([1.0, 0.0]))

    def test_mean_requires_trace(self):
        eig = PartialEigen([2.0], np.eye(3)[:, :1])
        with pytest.raises(MissingTrace):
            choose_mu("mean", eig)

    def test_explicit_passthrough(self):
        eig = PartialEigen([2.0], np.eye(3)[:, :1])
        assert choose_mu(0.125, eig) == 0.125


class TestEvaluation:
    def one_atom_problem(self, z1, mu, rho=1.0, s=None):
        mass = max(0.0, 1.0 - z1 * z1)
        return SecularProblem(lambdas=np.array([1.0]), z=np.array([z1]),
                              rho=rho, mu=mu, s=s, residual_mass=mass)

    def test_full_mass_root_at_lambda_plus_rho(self):
        p = self.one_atom_problem(1.0, mu=0.0)
        assert eval_w1(2.0, p) == pytest.approx(0.0, abs=1e-15)

    def test_two_by_two_closed_form(self):
        # diag(1, 0) + v v^T with v = (1,1)/sqrt(2): top eigenvalue 1 + 1/sqrt(2)
        p = self.one_atom_problem(1 / SQ2, mu=0.0)
        assert abs(eval_w1(1 + 1 / SQ2, p)) <= 1e-12

    def test_asymptote_is_one(self):
        p = self.one_atom_problem(0.8, mu=0.0)
        assert eval_w1(1e12, p) == pytest.approx(1.0, abs=1e-6)

    def test_pole_evaluation_raises(self):
        p = self.one_atom_problem(0.8, mu=0.0)
        with pytest.raises(PoleEvaluation):
            eval_w1(1.0, p)
        with pytest.raises(PoleEvaluation):
            eval_w1(0.0, p)

    def test_w2_equals_w1_at_star_surrogate(self):
        rng = np.random.default_rng(12)
        worst = 0.0
        for trial in range(20):
            a, eig, v, spectrum, q = random_instance(rng, 12, 4)
            mu = choose_mu("star", eig, a, v)
            p = build_problem(a, eig, v, rho=1.0, mu=mu)
            lam = eig.values
            ts = rng.uniform(lam[-1] + 0.05, lam[0] + 1.0, 100)
            for t in ts:
                if np.min(np.abs(lam - t)) < 1e-3:
                    continue
                worst = max(worst, abs(eval_w2(t, p) - eval_w1(t, p)))
        assert worst <= 1e-12

    def test_w2_equals_w1_without_tail(self):
        p = self.one_atom_problem(1.0, mu=0.0, s=0.0)
        for t in (0.5, 1.7, 2.5):
            assert eval_w2(t, p) == eval_w1(t, p)

    def test_w2_error_term_identity(self):
        # w(t) - w2(t) must equal the known tail expression exactly.
        rng = np.random.default_rng(13)
        a, eig, v, spectrum, q = random_instance(rng, 10, 3)
        rho = 0.8
        mu = 0.3
        p = build_problem(a, eig, v, rho=rho, mu=mu)
        z_full = q.T @ v
        for t in rng.uniform(spectrum[2] + 0.05, spectrum[0] + 0.7, 25):
            if np.min(np.abs(spectrum - t)) < 1e-3:
                continue
            w_exact = 1.0 + rho * np.sum(z_full**2 / (spectrum - t))
            tail = slice(3, None)
            err_expected = rho * np.sum(
                z_full[tail]**2 * (spectrum[tail] - mu)**2
                / ((mu - t)**2 * (spectrum[tail] - t)))
            assert abs((w_exact - eval_w2(t, p)) - err_expected) <= 1e-10


class TestSolveRoots:
    def test_single_full_atom(self):
        p = SecularProblem(lambdas=np.array([1.0]), z=np.array([1.0]),
                           rho=1.0, mu=0.0, residual_mass=0.0)
        roots = solve_roots(p, TruncationConfig(order=1))
        npt.assert_allclose(roots, [2.0], atol=1e-13)

    def test_two_by_two_closed_form(self):
        p = SecularProblem(lambdas=np.array([1.0]), z=np.array([1 / SQ2]),
                           rho=1.0, mu=0.0, residual_mass=0.5)
        roots = solve_roots(p, TruncationConfig(order=1))
        npt.assert_allclose(roots, [1 + 1 / SQ2], atol=1e-12)

    def test_four_eigenvalue_regime(self):
        # Four known eigenvalues 0.1..0.4, two of them visible, tail mean 0.15.
        rng = np.random.default_rng(14)
        spectrum = np.array([0.4, 0.3, 0.2, 0.1])
        rho = 0.5
        a, eig, v, spectrum, q = random_instance(rng, 4, 2, spectrum=spectrum)
        t_true = oracle_eigh(a.to_dense() + rho * np.outer(v, v))[0][:2]
        for order in (1, 2):
            p = build_problem(a, eig, v, rho=rho, mu=0.15)
            roots = solve_roots(p, TruncationConfig(order=order))
            assert 0.4 < roots[0] < 0.4 + rho
            assert 0.3 < roots[1] < 0.4
            power = order
            c2 = (0.3 - 0.15) ** -power / (0.3 - 0.2) * max(
                (0.3 - 0.4) ** 2, (0.4 - 0.1) ** 2)
            c1 = (0.4 - 0.15) ** -power / (0.3 - 0.2) * max(
                0.0, (0.4 + rho - 0.1) ** 2)
            worst_tail = np.max(np.abs(spectrum[2:] - 0.15)) ** power
            assert abs(roots[0] - t_true[0]) <= c1 * worst_tail
            assert abs(roots[1] - t_true[1]) <= c2 * worst_tail

    def test_interlacing_positive_rho(self):
        rng = np.random.default_rng(15)
        for trial in range(10):
            a, eig, v, spectrum, q = random_instance(rng, 14, 5)
            p = build_problem(a, eig, v, rho=0.9, mu=0.1)
            roots = solve_roots(p, TruncationConfig(order=1))
            lam = eig.values
            assert lam[0] < roots[0] <= lam[0] + 0.9
            for k in range(1, 5):
                assert lam[k] < roots[k] < lam[k - 1]

    def test_negative_rho_brackets(self):
        rng = np.random.default_rng(16)
        for trial in range(10):
            a, eig, v, spectrum, q = random_instance(rng, 14, 5)
            p = build_problem(a, eig, v, rho=-0.9, mu=0.1)
            roots = solve_roots(p, TruncationConfig(order=1))
            lam = eig.values
            for k in range(4):
                assert lam[k + 1] < roots[k] < lam[k]
            assert roots[4] < lam[4]

    def test_full_knowledge_negative_rho_matches_oracle(self):
        rng = np.random.default_rng(17)
        n = 8
        a, eig, v, spectrum, q = random_instance(rng, n, n, rho=-0.7)
        t_true = oracle_eigh(a.to_dense() - 0.7 * np.outer(v, v))[0]
        p = build_problem(a, eig, v, rho=-0.7, mu=-1.0)
        roots = solve_roots(p, TruncationConfig(order=1))
        npt.assert_allclose(roots, t_true, atol=1e-9)

    def test_max_iterations(self):
        p = SecularProblem(lambdas=np.array([1.0]), z=np.array([0.6]),
                           rho=1.0, mu=0.0, residual_mass=0.64)
        with pytest.raises(MaxIterations):
            solve_roots(p, TruncationConfig(order=1, max_iters=1))

    def test_monotone_refinement(self):
        rng = np.random.default_rng(18)
        a, eig, v, spectrum, q = random_instance(rng, 12, 4)
        p = build_problem(a, eig, v, rho=1.1, mu=0.2)
        prev = None
        for tol in (1e-6, 5e-7, 2.5e-7, 1e-9, 1e-12):
            roots = solve_roots(p, TruncationConfig(order=1, root_tol=tol))
            worst = max(abs(eval_w1(t, p)) for t in roots)
            if prev is not None:
                assert worst <= prev + 1e-15
            prev = worst

    def test_star_minimizes_weighted_tail_spread(self):
        rng = np.random.default_rng(19)
        for trial in range(5):
            a, eig, v, spectrum, q = random_instance(rng, 12, 4)
            mu_star = choose_mu("star", eig, a, v)
            z_tail = q[:, 4:].T @ v
            span = spectrum[0] - spectrum[-1]

            def objective(mu):
                return float(np.sum(z_tail**2 * (spectrum[4:] - mu) ** 2))

            base = objective(mu_star)
            assert base <= objective(mu_star + 0.1 * span)
            assert base <= objective(mu_star - 0.1 * span)
