import numpy as np
import numpy.testing as npt
import pytest

from specup.core import PartialEigen, RankOneUpdate, SymmetricMatrix
from specup.errors import RankDeficient
from specup.labbench import eigvec_angle, haar_orthonormal, oracle_eigh
from specup.secular import TruncationConfig
from specup.update import (
    deflate,
    rank_one_update,
    reorthogonalize,
    residual_quality,
)

SQ2 = np.sqrt(2.0)


def dense_instance(rng, n, m, spectrum=None):
    if spectrum is None:
        spectrum = np.sort(rng.uniform(0.5, 2.5, n))[::-1]
    q = haar_orthonormal(rng, n)
    a = (q * spectrum[None, :]) @ q.T
    a = 0.5 * (a + a.T)
    eig = PartialEigen(spectrum[:m], q[:, :m], trace_hint=float(spectrum.sum()))
    return SymmetricMatrix.from_dense(a), eig, spectrum, q


class TestDeflate:
    def test_orthogonal_direction_freezes(self):
        eig = PartialEigen([2.0, 1.0], np.eye(4)[:, :2])
        report = deflate(eig, np.eye(4)[:, 3])
        assert report.frozen == (0, 1)
        assert report.kept == ()

    def test_generic_instance_keeps_everything(self):
        rng = np.random.default_rng(30)
        a, eig, spectrum, q = dense_instance(rng, 10, 4)
        v = rng.standard_normal(10)
        v /= np.linalg.norm(v)
        report = deflate(eig, v)
        assert report.kept == (0, 1, 2, 3)
        assert report.frozen == ()
        assert report.merged == ()

    def test_duplicate_eigenvalue_merges_and_matches_oracle(self):
        # Repeated eigenvalue with both couplings active: the pair merges
        # into one atom and one exact copy of the eigenvalue survives.
        rng = np.random.default_rng(31)
        spectrum = np.array([2.0, 1.0, 1.0, 0.2])
        a, eig, spectrum, q = dense_instance(rng, 4, 4, spectrum=spectrum)
        v = rng.standard_normal(4)
        v /= np.linalg.norm(v)
        report = deflate(eig, v)
        assert report.merged == ((1, 2),)
        rho = 0.6
        res = rank_one_update(eig, RankOneUpdate(rho, v),
                              TruncationConfig(order=1, mu_policy=0.0), a=a)
        t_true, _ = oracle_eigh(a.to_dense() + rho * np.outer(v, v))
        npt.assert_allclose(res.values, t_true, atol=1e-9)
        assert np.min(np.abs(res.values - 1.0)) <= 1e-12
        b = a.to_dense() + rho * np.outer(v, v)
        for i in range(4):
            resid = np.linalg.norm(b @ res.vectors[:, i] - res.values[i] * res.vectors[:, i])
            assert resid <= 1e-8


class TestRankOneUpdate:
    def test_fully_frozen_passthrough(self):
        # diag(2, 1, 0) with the perturbation orthogonal to both known pairs.
        a = SymmetricMatrix.from_dense(np.diag([2.0, 1.0, 0.0]))
        eig = PartialEigen([2.0, 1.0], np.eye(3)[:, :2], trace_hint=3.0)
        upd = RankOneUpdate(0.5, np.eye(3)[:, 2])
        res = rank_one_update(eig, upd, TruncationConfig(order=1, mu_policy=0.0), a=a)
        npt.assert_array_equal(res.values, [2.0, 1.0])
        npt.assert_array_equal(res.vectors, np.eye(3)[:, :2])
        assert res.diagnostics.get("all_frozen")

    def test_two_by_two_case(self):
        a = SymmetricMatrix.from_dense(np.diag([1.0, 0.0]))
        eig = PartialEigen([1.0], np.array([[1.0], [0.0]]), trace_hint=1.0)
        res = rank_one_update(eig, RankOneUpdate(1.0, np.array([1.0, 1.0]) / SQ2),
                              TruncationConfig(order=1, mu_policy="zero"), a=a)
        npt.assert_allclose(res.values, [1 + 1 / SQ2], atol=1e-12)
        npt.assert_allclose(np.abs(res.vectors[:, 0]),
                            [0.9238795325112867, 0.3826834323650898], atol=1e-10)

    def test_full_knowledge_both_signs(self):
        rng = np.random.default_rng(32)
        n = 30
        a, eig, spectrum, q = dense_instance(rng, n, n)
        v = rng.standard_normal(n)
        v /= np.linalg.norm(v)
        for rho in (0.8, -0.8):
            t_true, p_true = oracle_eigh(a.to_dense() + rho * np.outer(v, v))
            for order in (1, 2):
                res = rank_one_update(eig, RankOneUpdate(rho, v),
                                      TruncationConfig(order=order, mu_policy="zero"),
                                      a=a)
                assert np.max(np.abs(res.values - t_true)) <= 1e-8
                worst = max(eigvec_angle(res.vectors[:, i], p_true[:, i])
                            for i in range(n))
                assert worst <= 1e-6

    def test_frozen_pair_bit_exact(self):
        rng = np.random.default_rng(33)
        a, eig, spectrum, q = dense_instance(rng, 12, 4)
        w = rng.standard_normal(12)
        w -= q[:, 1] * (q[:, 1] @ w)  # exactly decouple the second pair
        w /= np.linalg.norm(w)
        res = rank_one_update(eig, RankOneUpdate(0.7, w),
                              TruncationConfig(order=1, mu_policy="zero"), a=a)
        assert res.deflation.frozen == (1,)
        pos = int(np.argmin(np.abs(res.values - spectrum[1])))
        assert res.values[pos] == spectrum[1]
        npt.assert_array_equal(res.vectors[:, pos], q[:, 1])

    def test_zero_rho_returns_input(self):
        rng = np.random.default_rng(34)
        a, eig, spectrum, q = dense_instance(rng, 8, 3)
        v = rng.standard_normal(8)
        res = rank_one_update(eig, RankOneUpdate(0.0, v),
                              TruncationConfig(order=1, mu_policy="zero"), a=a)
        npt.assert_array_equal(res.values, eig.values)
        npt.assert_array_equal(res.vectors, eig.vectors)
        assert res.diagnostics.get("rho_zero")

    def test_mu_fallback_chain_recorded(self):
        # v inside the known span: the weighted tail mean degenerates and the
        # driver falls back to the trace mean.
        a = SymmetricMatrix.from_dense(np.diag([2.0, 1.0, 0.5, 0.1]))
        eig = PartialEigen([2.0, 1.0], np.eye(4)[:, :2], trace_hint=3.6)
        res = rank_one_update(eig, RankOneUpdate(0.5, np.eye(4)[:, 0]),
                              TruncationConfig(order=1, mu_policy="star"), a=a)
        assert res.diagnostics["mu_fallbacks"] == ["star->mean"]
        assert res.mu_used == pytest.approx((3.6 - 3.0) / 2)

    def test_orthogonalized_output_defect(self):
        rng = np.random.default_rng(35)
        a, eig, spectrum, q = dense_instance(rng, 40, 6)
        v = rng.standard_normal(40)
        v /= np.linalg.norm(v)
        res = rank_one_update(eig, RankOneUpdate(1.0, v),
                              TruncationConfig(order=1, mu_policy="star"),
                              a=a, orthogonalize=True)
        assert res.gram_defect <= 1e-10 * eig.m
        assert res.diagnostics["raw_gram_defect"] >= res.gram_defect


class TestReorthogonalize:
    def test_orthonormal_input_unchanged(self):
        rng = np.random.default_rng(36)
        p = haar_orthonormal(rng, 10, 4)
        p_bar, defect, e_bound = reorthogonalize(p)
        assert defect <= 1e-14
        npt.assert_allclose(p_bar, p, atol=1e-13)
        assert e_bound <= 2e-14

    def test_perturbed_block_bound(self):
        e1 = np.zeros(6)
        e1[0] = 1.0
        e2 = np.zeros(6)
        e2[1] = 1.0
        p = np.column_stack([e1, e1 + 1e-3 * e2])
        p_bar, defect, e_bound = reorthogonalize(p)
        g = p.T @ p - np.eye(2)
        assert defect == pytest.approx(np.linalg.norm(g, "fro"))
        e = p_bar.T @ p - np.eye(2)
        assert np.linalg.norm(e, "fro") <= 2 * defect
        assert e_bound == pytest.approx(2 * defect)

    def test_unbounded_flag(self):
        p = np.column_stack([np.ones(3), np.ones(3) * 0.9])
        p_bar, defect, e_bound = reorthogonalize(p)
        assert defect >= 0.25
        assert np.isinf(e_bound)
        assert np.linalg.norm(p_bar.T @ p_bar - np.eye(2), "fro") <= 1e-12

    def test_rank_deficient(self):
        p = np.column_stack([np.ones(4), np.ones(4)])
        with pytest.raises(RankDeficient):
            reorthogonalize(p)

    def test_polar_variant(self):
        rng = np.random.default_rng(37)
        p = haar_orthonormal(rng, 8, 3) + 1e-3 * rng.standard_normal((8, 3))
        p_bar, defect, e_bound = reorthogonalize(p, method="polar")
        assert np.linalg.norm(p_bar.T @ p_bar - np.eye(3), "fro") <= 1e-12


class TestResidualQuality:
    def test_exact_pairs_are_zero(self):
        rng = np.random.default_rng(38)
        a, eig, spectrum, q = dense_instance(rng, 10, 10)
        rq = residual_quality(a, q, spectrum)
        assert rq <= 1e-10 * a.frobenius_norm()

    def test_update_beats_stale_pairs(self):
        rng = np.random.default_rng(39)
        a, eig, spectrum, q = dense_instance(rng, 50, 6)
        v = rng.standard_normal(50)
        v /= np.linalg.norm(v)
        rho = 1.0
        b = SymmetricMatrix.from_dense(a.to_dense() + rho * np.outer(v, v))
        res = rank_one_update(eig, RankOneUpdate(rho, v),
                              TruncationConfig(order=2, mu_policy="star"), a=a)
        updated = residual_quality(b, res.vectors, res.values)
        stale = residual_quality(b, eig.vectors, eig.values)
        assert updated < stale

    def test_orthogonalization_quality_inequality(self):
        # || B P_bar - P_bar T ||_F cannot exceed the raw quality plus
        # 2 ||G||_F ||P_bar||_F (||B||_F + ||T||_F) while ||G||_F < 1/4.
        rng = np.random.default_rng(40)
        a, eig, spectrum, q = dense_instance(rng, 30, 5)
        v = rng.standard_normal(30)
        v /= np.linalg.norm(v)
        rho = 0.8
        b = SymmetricMatrix.from_dense(a.to_dense() + rho * np.outer(v, v))
        res = rank_one_update(eig, RankOneUpdate(rho, v),
                              TruncationConfig(order=1, mu_policy="star"), a=a)
        p_bar, defect, e_bound = reorthogonalize(res.vectors)
        assert defect < 0.25
        lhs = residual_quality(b, p_bar, res.values)
        raw = residual_quality(b, res.vectors, res.values)
        slack = 2 * defect * np.linalg.norm(p_bar, "fro") * (
            b.frobenius_norm() + np.linalg.norm(res.values))
        assert lhs <= raw + slack
