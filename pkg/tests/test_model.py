import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from semgmm import (
    Assignment,
    DataError,
    DataSet,
    InvalidModelError,
    MixtureModel,
    compute_spread,
    gaussian_log_density,
    log_likelihood,
    validate,
)
from semgmm.ingest import normalize
from semgmm.model import validate_params
from semgmm.rng import substream

HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


class TestDataSet:
    def test_spread_basic(self):
        data = DataSet([[0.0, 1.0], [3.0, -1.0]])
        np.testing.assert_array_equal(compute_spread(data), [3.0, 2.0])

    def test_spread_single_point(self):
        assert compute_spread(DataSet([[5.0]])) == np.array([0.0])

    def test_spread_after_normalization_is_one(self):
        pts = substream(5).random((100, 3)) * 7.0 - 3.0
        normalized, _ = normalize(DataSet(pts))
        np.testing.assert_array_equal(compute_spread(normalized), [1.0, 1.0, 1.0])

    def test_spread_translation_invariant(self):
        pts = substream(6).normal(size=(50, 2))
        shifted = pts + np.array([123.0, -7.0])
        np.testing.assert_allclose(
            compute_spread(DataSet(pts)), compute_spread(DataSet(shifted)),
            rtol=0, atol=1e-12,
        )

    def test_rejects_nan(self):
        with pytest.raises(DataError, match="non-finite"):
            DataSet([[0.0], [float("nan")]])

    def test_rejects_empty(self):
        with pytest.raises(DataError):
            DataSet(np.empty((0, 2)))


class TestMixtureModel:
    def test_valid_construction(self):
        m = MixtureModel([0.5, 0.5], [[0.0], [2.0]], [[[1.0]], [[2.0]]])
        assert validate(m) is None
        assert m.k == 2 and m.d == 1

    def test_weight_drift_renormalized(self):
        m = MixtureModel([0.5 + 2e-10, 0.5], [[0.0], [2.0]], [[[1.0]], [[1.0]]])
        assert abs(m.weights.sum() - 1.0) <= 1e-12

    def test_large_weight_drift_rejected(self):
        with pytest.raises(InvalidModelError, match="sum"):
            MixtureModel([0.7, 0.7], [[0.0], [2.0]], [[[1.0]], [[1.0]]])

    def test_validate_params_not_positive_definite(self):
        # eigendecomposition with eigenvalues (1, -0.1)
        q = np.array([[math.cos(0.3), -math.sin(0.3)], [math.sin(0.3), math.cos(0.3)]])
        bad = q @ np.diag([1.0, -0.1]) @ q.T
        bad = 0.5 * (bad + bad.T)
        msg = validate_params([1.0], [[0.0, 0.0]], [bad[None]][0].reshape(1, 2, 2))
        assert msg is not None and "positive definite" in msg

    def test_validate_params_asymmetric(self):
        cov = np.array([[[1.0, 0.5], [0.2, 1.0]]])
        msg = validate_params([1.0], [[0.0, 0.0]], cov)
        assert msg is not None and "symmetric" in msg

    def test_nonpositive_weight_rejected(self):
        with pytest.raises(InvalidModelError, match="positive"):
            MixtureModel([1.0, 0.0], [[0.0], [1.0]], [[[1.0]], [[1.0]]])


class TestGaussianLogDensity:
    def test_standard_normal_at_origin(self):
        m = MixtureModel([1.0], [[0.0]], [[[1.0]]])
        assert gaussian_log_density(m.means[0], m.chol[0], [0.0]) == pytest.approx(
            -HALF_LOG_2PI, abs=1e-14
        )

    def test_2d_identity_at_origin(self):
        m = MixtureModel([1.0], [[0.0, 0.0]], [np.eye(2)])
        val = gaussian_log_density(m.means[0], m.chol[0], [0.0, 0.0])
        assert val == pytest.approx(-math.log(2 * math.pi), abs=1e-14)

    @pytest.mark.parametrize("d", [1, 3, 7])
    def test_at_mean_identity_cov(self, d):
        mu = substream(8, d).normal(size=d)
        m = MixtureModel([1.0], [mu], [np.eye(d)])
        val = gaussian_log_density(m.means[0], m.chol[0], mu)
        assert val == pytest.approx(-0.5 * d * HALF_LOG_2PI * 2, abs=1e-12)

    def test_normalization_monte_carlo(self):
        # E_p[p(x)] over draws from p equals the L2 norm of the density,
        # (4 pi)^(-D/2) det(Sigma)^(-1/2) for a Gaussian
        rng = substream(9)
        cov = np.array([[2.0, 0.3], [0.3, 0.5]])
        mu = np.array([1.0, -2.0])
        m = MixtureModel([1.0], [mu], [cov])
        g = rng.normal(size=(100_000, 2))
        x = mu + g @ m.chol[0].T
        w = np.exp(gaussian_log_density(mu, m.chol[0], x))
        expected = (4 * math.pi) ** -1.0 / math.sqrt(np.linalg.det(cov))
        se = w.std() / math.sqrt(len(w))
        assert abs(w.mean() - expected) < 3 * se


class TestLogLikelihood:
    def test_single_standard_normal(self):
        m = MixtureModel([1.0], [[0.0]], [[[1.0]]])
        assert log_likelihood(m, DataSet([[0.0]])) == pytest.approx(
            -HALF_LOG_2PI, abs=1e-14
        )

    def test_two_points_sum(self):
        m = MixtureModel([1.0], [[0.0]], [[[1.0]]])
        val = log_likelihood(m, DataSet([[0.0], [1.0]]))
        assert val == pytest.approx(-HALF_LOG_2PI + (-HALF_LOG_2PI - 0.5), abs=1e-13)

    def test_identical_components_collapse(self):
        data = DataSet(substream(10).normal(size=(40, 2)))
        one = MixtureModel([1.0], [[0.0, 0.0]], [np.eye(2)])
        two = MixtureModel([0.5, 0.5], [[0.0, 0.0]] * 2, [np.eye(2)] * 2)
        assert log_likelihood(one, data) == pytest.approx(
            log_likelihood(two, data), abs=1e-12
        )

    def test_permutation_invariance(self):
        data = DataSet(substream(12).normal(size=(30, 1)))
        a = MixtureModel([0.3, 0.7], [[0.0], [2.0]], [[[1.0]], [[0.5]]])
        b = MixtureModel([0.7, 0.3], [[2.0], [0.0]], [[[0.5]], [[1.0]]])
        assert log_likelihood(a, data) == pytest.approx(
            log_likelihood(b, data), abs=1e-12
        )

    def test_dimension_mismatch(self):
        m = MixtureModel([1.0], [[0.0, 0.0]], [np.eye(2)])
        with pytest.raises(DataError, match="dimension"):
            log_likelihood(m, DataSet([[0.0]]))

    def test_no_underflow_high_dim(self):
        d = 27
        m = MixtureModel([1.0], [np.zeros(d)], [np.eye(d) * 1e-4])
        data = DataSet(np.full((3, d), 2.0))
        val = log_likelihood(m, data)
        assert np.isfinite(val)


class TestAssignment:
    def test_counts_match_labels(self):
        a = Assignment([0, 1, 1, 2, 1], k=3)
        np.testing.assert_array_equal(a.counts, [1, 3, 1])
        assert a.counts.sum() == a.n

    def test_out_of_range_rejected(self):
        with pytest.raises(DataError):
            Assignment([0, 3], k=2)


@given(
    pts=hnp.arrays(
        np.float64,
        st.tuples(st.integers(1, 30), st.integers(1, 4)),
        elements=st.floats(-1e6, 1e6),
    ),
    shift=st.floats(-1e6, 1e6),
)
@settings(max_examples=50, deadline=None)
def test_spread_shift_property(pts, shift):
    base = compute_spread(DataSet(pts))
    moved = compute_spread(DataSet(pts + shift))
    assert np.allclose(base, moved, rtol=0, atol=1e-9 * (1 + np.abs(pts).max()))
