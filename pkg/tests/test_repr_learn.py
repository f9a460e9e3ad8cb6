import numpy as np
import pytest
from scipy.linalg import subspace_angles

from corel_lqg import lqg, matstat, repr_learn, simulate
from corel_lqg.exceptions import ArgumentError

H, SIGMA_U = 4, 0.2


def ref_dataset(model, T, seed, d_x=2):
    traj = simulate.rollout_excite(model, T, H, SIGMA_U, np.random.default_rng(seed))
    return simulate.build_histories(traj, H, d_x, model.R)


class TestQuadraticRegress:
    def test_noiseless_recovery(self):
        rng = np.random.default_rng(0)
        X = rng.standard_normal((200, 2))
        N0 = np.diag([1.0, 2.0])
        fit = repr_learn.quadratic_regress(X, np.einsum("ti,ij,tj->t", X, N0, X) + 3.0)
        np.testing.assert_allclose(fit.N_hat, N0, atol=1e-8)
        assert fit.b_hat == pytest.approx(3.0, abs=1e-8)
        assert not fit.rank_flag
        np.testing.assert_allclose(fit.N_hat, fit.N_hat.T, atol=1e-12)

    def test_constant_targets(self):
        X = np.random.default_rng(1).standard_normal((100, 3))
        fit = repr_learn.quadratic_regress(X, np.full(100, 2.5))
        np.testing.assert_allclose(fit.N_hat, 0.0, atol=1e-10)
        assert fit.b_hat == pytest.approx(2.5)

    def test_noisy(self):
        rng = np.random.default_rng(2)
        X = rng.standard_normal((20_000, 2))
        N0 = np.diag([1.0, 2.0])
        y = np.einsum("ti,ij,tj->t", X, N0, X) + 3.0 + 0.1 * rng.standard_normal(20_000)
        assert np.linalg.norm(repr_learn.quadratic_regress(X, y).N_hat - N0) <= 0.05

    def test_underdetermined_flag(self):
        X = np.random.default_rng(3).standard_normal((5, 4))
        fit = repr_learn.quadratic_regress(X, np.ones(5))
        assert fit.rank_flag
        assert fit.gram_min_eig == 0.0

    def test_zero_samples(self):
        with pytest.raises(ArgumentError):
            repr_learn.quadratic_regress(np.zeros((0, 2)), np.zeros(0))

    def test_first_order_optimality(self):
        rng = np.random.default_rng(4)
        X = rng.standard_normal((500, 3))
        y = rng.standard_normal(500) + X[:, 0] ** 2
        fit = repr_learn.quadratic_regress(X, y)
        F = np.hstack([matstat.lift_quadratic(X), np.ones((500, 1))])
        coef = np.append(matstat.svec(fit.N_hat), fit.b_hat)
        base = np.sum((F @ coef - y) ** 2)
        for _ in range(20):
            d = rng.standard_normal(coef.size)
            assert np.sum((F @ (coef + 1e-4 * d / np.linalg.norm(d)) - y) ** 2) >= base - 1e-9

    def test_chunking_invariance(self):
        X = np.random.default_rng(5).standard_normal((1000, 3))
        G1, _ = repr_learn.lifted_gram(X, chunk=7)
        G2, _ = repr_learn.lifted_gram(X, chunk=4096)
        np.testing.assert_allclose(G1, G2, rtol=1e-12)


class TestDiscoverRank:
    def test_examples(self):
        assert repr_learn.discover_rank([5, 3, 1e-9], 1e-3) == 2
        assert repr_learn.discover_rank([5, 5, 5], 0.5) == 3

    def test_nonpositive(self):
        assert repr_learn.discover_rank([0.0, -1.0], 0.1) == 0

    def test_errors(self):
        with pytest.raises(ArgumentError):
            repr_learn.discover_rank([], 0.1)
        with pytest.raises(ArgumentError):
            repr_learn.discover_rank([1.0], 1.5)

    def test_reference_run(self, ref_model):
        ds = ref_dataset(ref_model, 20_000, 0)
        fit = repr_learn.quadratic_regress(ds.rep_histories, ds.cbar)
        assert repr_learn.discover_rank(matstat.sym_eig(fit.N_hat).values, 0.3) == ref_model.d_x


class TestFactorPsd:
    def test_diagonal(self):
        rep = repr_learn.factor_psd(np.diag([4.0, 1.0, 0.0]), 2)
        np.testing.assert_allclose(rep.M_hat.T @ rep.M_hat, np.diag([4.0, 1.0, 0.0]), atol=1e-12)
        np.testing.assert_allclose(np.abs(rep.M_hat), [[2, 0, 0], [0, 1, 0]], atol=1e-12)

    def test_negative_clamped(self):
        rep = repr_learn.factor_psd(np.diag([4.0, -1.0]), 2)
        np.testing.assert_allclose(rep.M_hat.T @ rep.M_hat, np.diag([4.0, 0.0]), atol=1e-12)

    def test_eckart_young_oracle(self):
        rng = np.random.default_rng(6)
        G = rng.standard_normal((8, 3))
        E = 1e-6 * rng.standard_normal((8, 8))
        E = E + E.T
        N = G @ G.T + E
        rep = repr_learn.factor_psd(N, 3)
        U, s, Vt = np.linalg.svd(N)
        oracle = np.linalg.norm(N - (U[:, :3] * s[:3]) @ Vt[:3])
        resid = np.linalg.norm(rep.M_hat.T @ rep.M_hat - N)
        assert abs(resid - oracle) <= 1e-10
        assert resid <= np.linalg.norm(E) + 1e-12

    def test_too_many_rows(self):
        with pytest.raises(ArgumentError):
            repr_learn.factor_psd(np.eye(2), 3)

    def test_eigenspace_recovery(self):
        rng = np.random.default_rng(7)
        S = rng.standard_normal((6, 6))
        N = S + S.T
        rep = repr_learn.factor_psd(N, 2)
        vals, vecs = matstat.sym_eig(N)
        if vals[1] <= 0:
            pytest.skip("need two positive eigenvalues")
        assert subspace_angles(rep.M_hat.T, vecs[:, :2]).max() <= 1e-8

    def test_round_trip(self):
        rep = repr_learn.factor_psd(np.diag([3.0, 1.0]), 1)
        again = repr_learn.Representation.from_dict(rep.to_dict())
        np.testing.assert_array_equal(again.M_hat, rep.M_hat)
        assert again.d_x_used == 1


class TestEncode:
    def test_identity(self):
        h = np.arange(3.0)
        np.testing.assert_array_equal(repr_learn.encode(np.eye(3), h), h)

    def test_zero(self):
        np.testing.assert_array_equal(repr_learn.encode(np.ones((2, 3)), np.zeros(3)), np.zeros(2))

    def test_batch(self):
        rng = np.random.default_rng(8)
        M, Hs = rng.standard_normal((2, 6)), rng.standard_normal((50, 6))
        np.testing.assert_allclose(repr_learn.encode(M, Hs), Hs @ M.T, atol=1e-14)

    def test_mismatch(self):
        with pytest.raises(ArgumentError):
            repr_learn.encode(np.ones((2, 3)), np.ones(4))


class TestReferenceTrends:
    def test_identification_consistency(self, ref_model):
        nm, _ = lqg.normalize_model(ref_model)
        M_star = lqg.representation_matrix(nm, H)
        N_star = M_star.T @ M_star
        errs = {}
        for T in (2_500, 40_000):
            errs[T] = np.median([
                np.linalg.norm(repr_learn.quadratic_regress(ds.rep_histories, ds.cbar).N_hat - N_star)
                for ds in (ref_dataset(ref_model, T, s) for s in range(8))
            ])
        assert errs[40_000] <= errs[2_500] / 2

    def test_gram_growth(self, ref_model):
        lam = {T: repr_learn.quadratic_regress(ds.rep_histories, ds.cbar).gram_min_eig
               for T, ds in ((T, ref_dataset(ref_model, T, 9)) for T in (5_000, 20_000))}
        assert 0.6 <= lam[20_000] / lam[5_000] <= 1.6
