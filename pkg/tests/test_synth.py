import numpy as np
import pytest

from twosdr.errors import InvalidInputError
from twosdr.linalg import vec
from twosdr.rng import make_rng
from twosdr.synth import (
    HmpcaSynthSpec,
    PcaSynthSpec,
    gen_hmpca_data,
    gen_multivariate_t,
    gen_pca_data,
    random_orthonormal,
)


class TestSpecs:
    def test_pca_snr_analytic(self):
        # sum(10*(26-i), i=1..25) / (40*40*4) = 3250/6400
        assert np.isclose(PcaSynthSpec(n=10, c=4.0).snr, 3250 / 6400)
        assert np.isclose(PcaSynthSpec(n=10, c=20.0).snr, 3250 / 32000)

    def test_hmpca_snr_analytic(self):
        s = HmpcaSynthSpec(n=10, sigma2=1.1)
        c = 1.001 * 1.1
        want = (sum(40.0 * (9 - i) for i in range(1, 9)) - 8 * c) / (
            2500 * 1.1 + 64 * c
        )
        assert np.isclose(s.snr, want)
        assert 0.5 < s.snr < 0.52
        assert 0.095 < HmpcaSynthSpec(n=10, sigma2=5.6).snr < 0.105

    def test_default_c_rule(self):
        s = HmpcaSynthSpec(n=10, sigma2=2.0)
        assert np.isclose(s.c_value, 2.002)
        assert np.isclose(HmpcaSynthSpec(n=10, sigma2=2.0, c=3.0).c_value, 3.0)

    def test_validation(self):
        with pytest.raises(InvalidInputError):
            gen_pca_data(PcaSynthSpec(n=10, r_star=3, delta=(1.0, 2.0, 3.0)))
        with pytest.raises(InvalidInputError):
            gen_hmpca_data(HmpcaSynthSpec(n=10, r_star=2, kappa=(5.0, 4.0),
                                          sigma2=1.1, c=4.9))
        with pytest.raises(InvalidInputError):
            gen_hmpca_data(HmpcaSynthSpec(n=10, noise_family="cauchy"))


class TestGenerators:
    def test_deterministic(self):
        spec = HmpcaSynthSpec(n=5, p=12, q=12, p0_star=3, q0_star=3,
                              r_star=3, kappa=(30.0, 20.0, 10.0), seed=9)
        a, b = gen_hmpca_data(spec), gen_hmpca_data(spec)
        assert np.array_equal(a.stack, b.stack)
        assert np.array_equal(a.truth, b.truth)

    def test_tuple_seed_substreams_differ(self):
        base = dict(n=4, p=10, q=10, p0_star=2, q0_star=2, r_star=2,
                    kappa=(20.0, 10.0))
        a = gen_hmpca_data(HmpcaSynthSpec(seed=(3, 0), **base))
        b = gen_hmpca_data(HmpcaSynthSpec(seed=(3, 1), **base))
        assert not np.array_equal(a.stack, b.stack)

    def test_pca_zero_noise_rank(self):
        spec = PcaSynthSpec(n=40, p=8, q=8, r_star=3,
                            delta=(9.0, 4.0, 1.0), c=0.0)
        data = gen_pca_data(spec)
        Z = vec(data.stack) - vec(data.stack).mean(axis=0)
        assert np.linalg.matrix_rank(Z, tol=1e-8) == 3
        assert np.array_equal(data.stack, data.truth)

    def test_hmpca_zero_noise_in_span(self):
        spec = HmpcaSynthSpec(n=30, p=10, q=10, p0_star=3, q0_star=3,
                              r_star=3, kappa=(9.0, 4.0, 1.0),
                              sigma2=1e-30, c=0.0)
        data = gen_hmpca_data(spec)
        A, B = data.factors["A"], data.factors["B"]
        # projecting onto span(A) x span(B) changes nothing
        cores = np.einsum("ip,nij,jq->npq", A, data.stack, B)
        back = np.einsum("ip,npq,jq->nij", A, cores, B)
        assert np.allclose(back, data.stack, atol=1e-10)

    def test_empirical_snr_matches_analytic(self):
        spec = HmpcaSynthSpec(n=1000, seed=77)
        data = gen_hmpca_data(spec)
        signal = float(np.sum(data.truth**2)) / spec.n
        noise = float(np.sum((data.stack - data.truth) ** 2)) / spec.n
        assert abs(signal / noise - spec.snr) / spec.snr < 0.05

    def test_truth_excludes_all_noise(self):
        spec = HmpcaSynthSpec(n=50, p=10, q=10, p0_star=2, q0_star=2,
                              r_star=2, kappa=(30.0, 20.0), sigma2=1.0,
                              seed=5)
        data = gen_hmpca_data(spec)
        G, nu = data.factors["G"], data.factors["nu"]
        A, B = data.factors["A"], data.factors["B"]
        from twosdr.linalg import unvec

        want = np.einsum("ip,npq,jq->nij", A, unvec(nu @ G.T, 2, 2), B)
        assert np.allclose(data.truth, want, atol=1e-12)


class TestMultivariateT:
    def test_unit_marginal_variance(self):
        draws = gen_multivariate_t(4, 5, 100000, seed=1)
        assert 0.9 <= draws.var() <= 1.1

    def test_gaussian_limit_kurtosis(self):
        draws = gen_multivariate_t(1, 5e5, 200000, seed=2).ravel()
        z = (draws - draws.mean()) / draws.std()
        assert abs(np.mean(z**4) - 3.0) < 0.1

    def test_heavy_tails_at_dof5(self):
        draws = gen_multivariate_t(1, 5, 200000, seed=3).ravel()
        z = (draws - draws.mean()) / draws.std()
        assert np.mean(z**4) > 4.0  # clearly super-Gaussian

    def test_dof_guard(self):
        with pytest.raises(InvalidInputError):
            gen_multivariate_t(3, 2, 10, seed=0)

    def test_deterministic(self):
        a = gen_multivariate_t(3, 5, 50, seed=4)
        b = gen_multivariate_t(3, 5, 50, seed=4)
        assert np.array_equal(a, b)


class TestRandomOrthonormal:
    def test_orthonormal(self):
        Q = random_orthonormal(9, 4, make_rng(6))
        assert np.allclose(Q.T @ Q, np.eye(4), atol=1e-12)

    def test_too_many_columns(self):
        with pytest.raises(InvalidInputError):
            random_orthonormal(3, 5, make_rng(0))
