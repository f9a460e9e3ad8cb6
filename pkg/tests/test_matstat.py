import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_stable
from corel_lqg import matstat
from corel_lqg.exceptions import ArgumentError, InstabilityError

SQ2 = np.sqrt(2.0)


def rand_sym(rng, d):
    G = rng.standard_normal((d, d))
    return G + G.T


class TestSvec:
    def test_small_example(self):
        np.testing.assert_allclose(matstat.svec([[1, 2], [2, 3]]), [1, 2 * SQ2, 3])

    def test_identity(self):
        np.testing.assert_array_equal(matstat.svec(np.eye(3)), [1, 0, 0, 1, 0, 1])

    def test_inner_product_isometry(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            X, Y = rand_sym(rng, 5), rand_sym(rng, 5)
            assert abs(matstat.svec(X) @ matstat.svec(Y) - np.sum(X * Y)) <= 1e-12 * (1 + abs(np.sum(X * Y)))

    def test_rejects_non_square(self):
        with pytest.raises(ArgumentError):
            matstat.svec(np.ones((2, 3)))

    def test_symmetrizes_within_tolerance(self):
        X = np.array([[1.0, 2.0], [2.0 + 1e-12, 3.0]])
        np.testing.assert_allclose(matstat.smat(matstat.svec(X)), matstat.symmetrize(X), atol=1e-15)

    def test_rejects_asymmetric(self):
        with pytest.raises(ArgumentError):
            matstat.svec([[1.0, 2.0], [0.0, 1.0]])


class TestSmat:
    def test_inverse_example(self):
        np.testing.assert_allclose(matstat.smat([1, 2 * SQ2, 3]), [[1, 2], [2, 3]], atol=1e-15)

    def test_zero(self):
        np.testing.assert_array_equal(matstat.smat(np.zeros(6)), np.zeros((3, 3)))

    def test_round_trip_random(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            d = int(rng.integers(1, 7))
            v = rng.standard_normal(d * (d + 1) // 2)
            np.testing.assert_allclose(matstat.svec(matstat.smat(v)), v, atol=1e-14)

    def test_non_triangular(self):
        with pytest.raises(ArgumentError):
            matstat.smat(np.ones(4))

    @settings(max_examples=50, deadline=None)
    @given(st.integers(1, 6), st.integers(0, 2**32 - 1))
    def test_mutual_inverses(self, d, seed):
        X = rand_sym(np.random.default_rng(seed), d)
        np.testing.assert_allclose(matstat.smat(matstat.svec(X)), X, atol=1e-14 * (1 + np.abs(X).max()))

    def test_lift_matches_quadratic_form(self):
        rng = np.random.default_rng(2)
        X = rng.standard_normal((30, 4))
        N = rand_sym(rng, 4)
        np.testing.assert_allclose(matstat.lift_quadratic(X) @ matstat.svec(N),
                                   np.einsum("ti,ij,tj->t", X, N, X), atol=1e-12)


class TestSymEig:
    def test_diagonal(self):
        e = matstat.sym_eig(np.diag([3.0, 1.0, 2.0]))
        np.testing.assert_allclose(e.values, [3, 2, 1])
        np.testing.assert_allclose(np.abs(e.vectors), np.eye(3)[:, [0, 2, 1]])

    def test_two_by_two(self):
        np.testing.assert_allclose(matstat.sym_eig([[2, 1], [1, 2]]).values, [3, 1])

    def test_reconstruction(self):
        S = rand_sym(np.random.default_rng(3), 8)
        vals, vecs = matstat.sym_eig(S)
        assert np.all(np.diff(vals) <= 0)
        np.testing.assert_allclose(vecs.T @ vecs, np.eye(8), atol=1e-10)
        assert np.linalg.norm(vecs * vals @ vecs.T - S) <= 1e-9 * (1 + np.linalg.norm(S))

    def test_non_finite(self):
        with pytest.raises(ArgumentError):
            matstat.sym_eig([[np.nan, 0], [0, 1]])

    def test_psd_project(self):
        np.testing.assert_allclose(matstat.psd_project(np.diag([1.0, -0.5])), np.diag([1.0, 0.0]))


def moore_penrose_ok(m, p, tol):
    scale = 1 + np.linalg.norm(m, 2)
    return (np.linalg.norm(m @ p @ m - m) <= tol * scale
            and np.linalg.norm(p @ m @ p - p) <= tol * scale * (1 + np.linalg.norm(p, 2))
            and np.linalg.norm(m @ p - (m @ p).T) <= tol * scale
            and np.linalg.norm(p @ m - (p @ m).T) <= tol * scale)


class TestPinv:
    def test_diag(self):
        np.testing.assert_allclose(matstat.pinv(np.diag([2.0, 0.0])), np.diag([0.5, 0.0]))

    def test_orthogonal(self):
        Q, _ = np.linalg.qr(np.random.default_rng(4).standard_normal((4, 4)))
        np.testing.assert_allclose(matstat.pinv(Q), Q.T, atol=1e-12)

    def test_right_inverse(self):
        m = np.random.default_rng(5).standard_normal((3, 7))
        np.testing.assert_allclose(m @ matstat.pinv(m), np.eye(3), atol=1e-9)

    @pytest.mark.parametrize("shape,rank", [((3, 7), 3), ((7, 3), 3), ((6, 6), 2), ((5, 8), 1)])
    def test_moore_penrose_conditions(self, shape, rank):
        rng = np.random.default_rng(sum(shape) + rank)
        m = rng.standard_normal((shape[0], rank)) @ rng.standard_normal((rank, shape[1]))
        assert moore_penrose_ok(m, matstat.pinv(m), 1e-8)

    def test_bad_tol(self):
        with pytest.raises(ArgumentError):
            matstat.pinv(np.eye(2), tol=0.0)


class TestLeastSquares:
    def test_identity(self):
        Y = np.random.default_rng(6).standard_normal((4, 3))
        W, flag = matstat.least_squares(np.eye(4), Y)
        np.testing.assert_allclose(W, Y, atol=1e-14)
        assert not flag

    def test_exact_interpolation(self):
        rng = np.random.default_rng(7)
        X = rng.standard_normal((50, 4))
        W0 = rng.standard_normal((4, 2))
        W, flag = matstat.least_squares(X, X @ W0)
        np.testing.assert_allclose(W, W0, atol=1e-9)
        assert not flag

    def test_duplicated_column_min_norm(self):
        rng = np.random.default_rng(8)
        x = rng.standard_normal(20)
        X = np.column_stack([x, x])
        W, flag = matstat.least_squares(X, 2 * x)
        np.testing.assert_allclose(W, [1.0, 1.0], atol=1e-10)
        assert flag

    def test_row_mismatch(self):
        with pytest.raises(ArgumentError):
            matstat.least_squares(np.ones((3, 2)), np.ones(4))


class TestSpectralRadius:
    def test_diag(self):
        assert matstat.spectral_radius(np.diag([0.9, 0.5])) == pytest.approx(0.9, rel=1e-12)

    def test_rotation(self):
        assert matstat.spectral_radius(0.7 * np.array([[0, -1], [1, 0]])) == pytest.approx(0.7, rel=1e-8)

    def test_nilpotent(self):
        assert matstat.spectral_radius([[0, 1], [0, 0]]) == 0.0

    def test_non_square(self):
        with pytest.raises(ArgumentError):
            matstat.spectral_radius(np.ones((2, 3)))


class TestLyapunov:
    def test_zero_dynamics(self):
        W = np.array([[2.0, 0.5], [0.5, 1.0]])
        np.testing.assert_allclose(matstat.solve_lyapunov(np.zeros((2, 2)), W), W)

    def test_scalar(self):
        assert matstat.solve_lyapunov([[0.5]], [[1.0]])[0, 0] == pytest.approx(4.0 / 3.0, rel=1e-14)

    @pytest.mark.parametrize("n", [6, 45])
    def test_residual(self, n):
        rng = np.random.default_rng(n)
        A = random_stable(rng, n, 0.9)
        G = rng.standard_normal((n, n))
        W = G @ G.T
        S = matstat.solve_lyapunov(A, W)
        assert np.linalg.norm(S - A @ S @ A.T - W) <= 1e-10 * (1 + np.linalg.norm(S))
        assert np.linalg.eigvalsh(S).min() > 0

    def test_series_oracle(self):
        rng = np.random.default_rng(9)
        A = random_stable(rng, 4, 0.8)
        W = np.eye(4)
        S = np.zeros((4, 4))
        P = np.eye(4)
        for _ in range(400):
            S += P @ W @ P.T
            P = A @ P
        np.testing.assert_allclose(matstat.solve_lyapunov(A, W), S, atol=1e-8)

    def test_unstable(self):
        with pytest.raises(InstabilityError):
            matstat.solve_lyapunov([[1.0]], [[1.0]])


class TestGaussian:
    def test_zero_cov(self):
        mean = np.array([1.0, -2.0])
        np.testing.assert_array_equal(matstat.gaussian_sample(np.random.default_rng(0), mean, np.zeros((2, 2))),
                                      mean)

    def test_identity_cov(self):
        draws = matstat.gaussian_sample(np.random.default_rng(1), np.zeros(3), np.eye(3), size=100_000)
        emp = np.cov(draws.T)
        assert np.linalg.norm(emp - np.eye(3), 2) <= 0.05

    def test_determinism(self):
        a = matstat.gaussian_sample(np.random.default_rng(5), np.zeros(2), np.eye(2))
        b = matstat.gaussian_sample(np.random.default_rng(5), np.zeros(2), np.eye(2))
        np.testing.assert_array_equal(a, b)

    def test_indefinite(self):
        with pytest.raises(ArgumentError):
            matstat.gaussian_sample(np.random.default_rng(0), np.zeros(2), np.diag([1.0, -1.0]))

    def test_clamps_tiny_negative(self):
        x = matstat.gaussian_sample(np.random.default_rng(0), np.zeros(2), np.diag([1.0, -1e-13]))
        assert np.all(np.isfinite(x))
