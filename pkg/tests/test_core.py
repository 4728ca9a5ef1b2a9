import numpy as np
import numpy.testing as npt
import pytest

from specup.core import (
    PartialEigen,
    RankOneUpdate,
    SymmetricMatrix,
    coefficients_z,
    matvec,
    project_residual,
)
from specup.errors import (
    AsymmetricInput,
    DimensionMismatch,
    InputError,
    NotDescending,
    NotOrthonormal,
)


class TestSymmetricMatrix:
    def test_matvec_identity(self):
        a = SymmetricMatrix.identity(3)
        npt.assert_array_equal(matvec(a, [1.0, 2.0, 3.0]), [1.0, 2.0, 3.0])

    def test_matvec_diagonal(self):
        a = SymmetricMatrix.from_dense(np.diag([1.0, 0.0]))
        npt.assert_array_equal(matvec(a, [1.0, 1.0]), [1.0, 0.0])

    def test_sparse_matches_mirrored_dense(self):
        rng = np.random.default_rng(0)
        dense = np.zeros((8, 8))
        iu, ju = np.triu_indices(8)
        keep = rng.random(iu.size) < 0.4
        vals = rng.standard_normal(iu.size) * keep
        dense[iu, ju] = vals
        dense = dense + dense.T - np.diag(np.diag(dense))
        sparse = SymmetricMatrix.from_coo(8, iu[keep], ju[keep], vals[keep])
        x = rng.standard_normal(8)
        assert np.linalg.norm(sparse.matvec(x) - dense @ x) <= 1e-12

    def test_adjoint_symmetry(self):
        rng = np.random.default_rng(1)
        for trial in range(5):
            a = SymmetricMatrix.from_dense(
                (lambda g: 0.5 * (g + g.T))(rng.standard_normal((12, 12))))
            x = rng.standard_normal(12)
            y = rng.standard_normal(12)
            lhs = np.dot(x, a.matvec(y))
            rhs = np.dot(a.matvec(x), y)
            scale = np.linalg.norm(x) * np.linalg.norm(y) * a.frobenius_norm()
            assert abs(lhs - rhs) <= 1e-12 * scale

    def test_rejects_asymmetric_beyond_tolerance(self):
        a = np.eye(4)
        a[0, 1] = 1e-6
        with pytest.raises(AsymmetricInput):
            SymmetricMatrix.from_dense(a)

    def test_accepts_asymmetry_within_tolerance(self):
        a = np.eye(4)
        a[0, 1] = 5e-13
        m = SymmetricMatrix.from_dense(a)
        dense = m.to_dense()
        npt.assert_allclose(dense, dense.T)

    def test_trace_is_diagonal_sum(self):
        rng = np.random.default_rng(2)
        g = rng.standard_normal((6, 6))
        a = SymmetricMatrix.from_dense(0.5 * (g + g.T))
        assert a.trace() == pytest.approx(np.diag(a.to_dense()).sum(), abs=1e-14)
        s = SymmetricMatrix.from_coo(3, [0, 1, 2, 0], [0, 1, 2, 2], [1.0, 2.0, 3.0, 9.0])
        assert s.trace() == pytest.approx(6.0)

    def test_sparse_frobenius_and_nnz(self):
        s = SymmetricMatrix.from_coo(3, [0, 0], [1, 0], [2.0, 1.0])
        dense = s.to_dense()
        assert s.nnz == 2
        assert s.frobenius_norm() == pytest.approx(np.linalg.norm(dense, "fro"))

    def test_dimension_mismatch(self):
        a = SymmetricMatrix.identity(3)
        with pytest.raises(DimensionMismatch):
            a.matvec([1.0, 2.0])


class TestProjections:
    def test_residual_in_span_is_zero(self):
        q = np.array([[1.0], [0.0]])
        npt.assert_allclose(project_residual(q, [1.0, 0.0]), [0.0, 0.0], atol=1e-15)

    def test_residual_orthogonal_split(self):
        q = np.array([[1.0], [0.0]])
        v = np.array([1.0, 1.0]) / np.sqrt(2)
        npt.assert_allclose(project_residual(q, v), [0.0, 1 / np.sqrt(2)], atol=1e-15)

    def test_residual_reconstruction_and_idempotency(self):
        rng = np.random.default_rng(3)
        for trial in range(5):
            q, _ = np.linalg.qr(rng.standard_normal((10, 4)))
            v = rng.standard_normal(10)
            r = project_residual(q, v)
            assert np.linalg.norm(q.T @ r) <= 1e-12
            npt.assert_allclose(r + q @ (q.T @ v), v, atol=1e-12)
            npt.assert_allclose(project_residual(q, r), r, atol=1e-12)

    def test_coefficients_examples(self):
        q = np.eye(3)[:, :2]
        npt.assert_allclose(coefficients_z(q, [0.0, 0.0, 1.0]), [0.0, 0.0])
        q1 = np.array([[1.0], [0.0]])
        v = np.array([1.0, 1.0]) / np.sqrt(2)
        npt.assert_allclose(coefficients_z(q1, v), [1 / np.sqrt(2)])

    def test_full_basis_mass_is_one(self):
        rng = np.random.default_rng(4)
        q, _ = np.linalg.qr(rng.standard_normal((7, 7)))
        v = rng.standard_normal(7)
        v /= np.linalg.norm(v)
        z = coefficients_z(q, v)
        assert abs(np.dot(z, z) - 1.0) <= 1e-12


class TestPartialEigen:
    def test_valid_construction(self):
        rng = np.random.default_rng(5)
        q, _ = np.linalg.qr(rng.standard_normal((8, 3)))
        eig = PartialEigen([3.0, 2.0, 1.0], q, trace_hint=7.5)
        assert eig.n == 8 and eig.m == 3 and eig.trace_hint == 7.5

    def test_rejects_non_descending(self):
        q = np.eye(4)[:, :2]
        with pytest.raises(NotDescending):
            PartialEigen([1.0, 2.0], q)

    def test_rejects_non_orthonormal(self):
        vecs = np.ones((4, 2))
        with pytest.raises(NotOrthonormal):
            PartialEigen([2.0, 1.0], vecs)


class TestRankOneUpdate:
    def test_normalization_preserves_product(self):
        v = np.array([3.0, 4.0])
        upd = RankOneUpdate(0.5, v)
        assert abs(np.linalg.norm(upd.v) - 1.0) <= 1e-12
        npt.assert_allclose(upd.rho * np.outer(upd.v, upd.v),
                            0.5 * np.outer(v, v), rtol=1e-14)

    def test_rejects_zero_vector(self):
        with pytest.raises(InputError):
            RankOneUpdate(1.0, [0.0, 0.0])
