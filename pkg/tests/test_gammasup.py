import numpy as np
import pytest

from twosdr.errors import InvalidInputError
from twosdr.gammasup import (
    GammaSupConfig,
    bracket_tau,
    gamma_sup,
    normalize_scores,
    phase_transition_scan,
    qexp,
)
from twosdr.metrics import impurity
from twosdr.rng import make_rng


class TestQexp:
    def test_zero_is_one(self):
        for q in (0.5, 0.9, 1.0, 1.5):
            assert np.isclose(qexp(0.0, q), 1.0)

    def test_compact_support(self):
        # q < 1: zero once u <= -1/(1-q) (tested strictly inside the
        # zero region; the boundary itself is float-rounding fuzzy)
        assert qexp(-10.5, 0.9) == 0.0
        assert qexp(-1e6, 0.5) == 0.0

    def test_direct_evaluation_oracle(self):
        # q=0.9, u=-1 -> (1 - 0.1)^10
        assert np.isclose(qexp(-1.0, 0.9), 0.9**10, atol=1e-12)

    def test_q1_is_exp(self):
        u = np.linspace(-2, 1, 7)
        assert np.allclose(qexp(u, 1.0), np.exp(u))


def two_blobs(seed=0, n_per=30, gap=10.0):
    rng = make_rng(seed)
    a = rng.standard_normal((n_per, 2)) * 0.5
    b = rng.standard_normal((n_per, 2)) * 0.5 + np.array([gap, 0.0])
    labels = np.repeat([0, 1], n_per)
    return np.vstack([a, b]), labels


class TestGammaSup:
    def test_large_tau_single_cluster(self):
        pts, _ = two_blobs()
        res = gamma_sup(pts, GammaSupConfig(tau=1e4))
        assert res.n_clusters == 1
        assert np.allclose(res.centers[0], pts.mean(axis=0), atol=1e-3)

    def test_tiny_tau_all_singletons(self):
        pts = np.arange(8, dtype=float)[:, None] * 3.0
        res = gamma_sup(pts, GammaSupConfig(tau=1e-3))
        assert res.n_clusters == 8

    def test_two_blobs_perfect(self):
        pts, labels = two_blobs()
        res = gamma_sup(pts, GammaSupConfig(tau=2.0))
        assert res.n_clusters == 2
        assert impurity(labels, res.labels) == 0.0

    def test_translation_equivariance(self):
        pts, _ = two_blobs(seed=3)
        v = np.array([13.5, -4.25])
        a = gamma_sup(pts, GammaSupConfig(tau=2.0))
        b = gamma_sup(pts + v, GammaSupConfig(tau=2.0))
        assert np.array_equal(a.labels, b.labels)
        assert np.allclose(a.centers + v, b.centers, atol=1e-8)

    def test_scale_covariance(self):
        pts, _ = two_blobs(seed=4)
        a = gamma_sup(pts, GammaSupConfig(tau=2.0))
        b = gamma_sup(pts * 7.0, GammaSupConfig(tau=14.0))
        assert np.array_equal(a.labels, b.labels)

    def test_convex_hull_property(self):
        # one synchronous update keeps representatives inside the
        # bounding box of the previous state (convex combination)
        rng = make_rng(5)
        pts = rng.standard_normal((20, 3))
        res = gamma_sup(pts, GammaSupConfig(tau=1.0, max_iter=1))
        mu = res.centers  # merged means of final representatives
        assert np.all(mu.min(axis=0) >= pts.min(axis=0) - 1e-12)
        assert np.all(mu.max(axis=0) <= pts.max(axis=0) + 1e-12)

    def test_self_weight_is_one(self):
        assert qexp(-0.0, 1 - 0.025) == 1.0

    def test_single_point(self):
        res = gamma_sup(np.array([[1.0, 2.0]]), GammaSupConfig(tau=1.0))
        assert res.n_clusters == 1 and res.labels[0] == 0

    def test_validation(self):
        with pytest.raises(InvalidInputError):
            gamma_sup(np.zeros((3, 2)), GammaSupConfig(tau=-1.0))
        with pytest.raises(InvalidInputError):
            gamma_sup(np.array([[np.inf, 0.0]]), GammaSupConfig(tau=1.0))


def three_blobs(seed=6, n_per=15):
    rng = make_rng(seed)
    centers = np.array([[0.0, 0.0], [12.0, 0.0], [0.0, 12.0]])
    pts = np.vstack([
        c + 0.4 * rng.standard_normal((n_per, 2)) for c in centers
    ])
    labels = np.repeat(np.arange(3), n_per)
    return pts, labels


class TestPhaseTransition:
    def test_bracket(self):
        pts, _ = three_blobs()
        lower, upper = bracket_tau(pts)
        assert gamma_sup(pts, GammaSupConfig(tau=upper)).n_clusters == 1
        assert gamma_sup(pts, GammaSupConfig(tau=lower)).n_clusters == len(pts)

    def test_three_blob_recommendation(self):
        pts, labels = three_blobs()
        scan = phase_transition_scan(pts, min_size=10)
        res = gamma_sup(normalize_scores(pts),
                        GammaSupConfig(tau=scan.recommended_tau))
        sizes = res.sizes()
        assert np.sum(sizes > 10) == 3
        assert impurity(labels, res.labels) == 0.0

    def test_scan_endpoints(self):
        pts, _ = three_blobs(seed=7)
        scan = phase_transition_scan(pts)
        assert scan.n_clusters[-1] == 1
        assert scan.n_clusters[0] == len(pts)

    def test_empty_grid_rejected(self):
        with pytest.raises(InvalidInputError):
            phase_transition_scan(np.zeros((5, 2)), tau_grid=[])


class TestNormalize:
    def test_centered_unit_global_sd(self):
        rng = make_rng(8)
        pts = rng.standard_normal((40, 3)) * 5 + 2
        z = normalize_scores(pts)
        assert np.allclose(z.mean(axis=0), 0.0, atol=1e-12)
        assert np.isclose(z.std(), 1.0, atol=1e-6)
