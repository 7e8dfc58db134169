import math

import numpy as np
import pytest
from scipy import integrate
from scipy.special import gammaln

from sdeverse.errors import InvalidParameter
from sdeverse.heads import (GmmParams, SkewTParams, gmm_from_dict,
                            gmm_log_density, gmm_sample, gmm_to_dict,
                            skewt_from_dict, skewt_log_density, skewt_sample,
                            skewt_to_dict)
from sdeverse.rng import RngStream, derive_stream


def gauss_head(mean, chol):
    mean = np.atleast_2d(np.asarray(mean, dtype=float))
    chol = np.asarray(chol, dtype=float)[None]
    return GmmParams(weights=np.array([1.0]), means=mean, scale_chols=chol)


def symmetric_t_logpdf(x, loc, scale_chol, dof):
    """Independent multivariate-t density, straight from the textbook formula."""
    x = np.asarray(x, dtype=float)
    d = x.shape[0]
    sigma = scale_chol @ scale_chol.T
    dev = np.linalg.solve(scale_chol, x - loc)
    q = float(dev @ dev)
    return float(
        gammaln((dof + d) / 2.0) - gammaln(dof / 2.0)
        - 0.5 * d * math.log(dof * math.pi)
        - 0.5 * np.linalg.slogdet(sigma)[1]
        - 0.5 * (dof + d) * math.log1p(q / dof)
    )


def test_gmm_standard_normal_log_density():
    p = gauss_head([0.0, 0.0], np.eye(2))
    assert gmm_log_density(p, np.zeros(2)) == pytest.approx(-math.log(2 * math.pi),
                                                            abs=1e-12)


def test_gmm_scalar_gaussian_value():
    p = gauss_head([0.0], [[2.0]])
    want = math.log(1.0 / (2.0 * math.sqrt(2.0 * math.pi))) - 0.5
    assert gmm_log_density(p, np.array([2.0])) == pytest.approx(want, abs=1e-12)


def test_gmm_duplicated_component_identity():
    p1 = gauss_head([0.5, -1.0], np.eye(2))
    p2 = GmmParams(weights=np.array([0.3, 0.7]),
                   means=np.tile(p1.means, (2, 1)),
                   scale_chols=np.tile(p1.scale_chols, (2, 1, 1)))
    for x in (np.zeros(2), np.array([1.0, 2.0]), np.array([-3.0, 0.2])):
        assert gmm_log_density(p2, x) == pytest.approx(gmm_log_density(p1, x),
                                                       abs=1e-12)


def test_gmm_sample_mean_and_zero_weight():
    p = GmmParams(weights=np.array([1.0, 0.0]),
                  means=np.array([[0.0, 0.0], [50.0, 50.0]]),
                  scale_chols=np.stack([np.eye(2), np.eye(2)]))
    draws = gmm_sample(p, 100_000, RngStream(root_seed=42))
    assert draws.shape == (100_000, 2)
    assert np.max(np.abs(draws)) < 10  # second component never selected
    assert np.max(np.abs(draws.mean(axis=0))) < 0.013


def test_gmm_bimodal_balance():
    p = GmmParams(weights=np.array([0.5, 0.5]),
                  means=np.array([[-3.0], [3.0]]),
                  scale_chols=np.ones((2, 1, 1)))
    draws = gmm_sample(p, 40_000, RngStream(root_seed=7))
    assert np.mean(draws < 0) == pytest.approx(0.5, abs=0.02)


def test_gmm_batch_density_matches_scalar():
    p = GmmParams(weights=np.array([0.4, 0.6]),
                  means=np.array([[0.0, 1.0], [2.0, -1.0]]),
                  scale_chols=np.stack([np.eye(2), 0.5 * np.eye(2)]))
    pts = np.array([[0.0, 0.0], [1.0, 1.0], [-2.0, 3.0]])
    batched = gmm_log_density(p, pts)
    assert batched.shape == (3,)
    for row, val in zip(pts, batched):
        assert val == pytest.approx(gmm_log_density(p, row), abs=1e-14)


def test_gmm_parameter_validation():
    with pytest.raises(InvalidParameter):
        GmmParams(weights=np.array([0.5, 0.6]),
                  means=np.zeros((2, 1)), scale_chols=np.ones((2, 1, 1)))
    with pytest.raises(InvalidParameter):
        GmmParams(weights=np.array([1.0]), means=np.zeros((1, 2)),
                  scale_chols=np.array([[[1.0, 0.0], [0.5, -1.0]]]))


def test_skewt_density_at_center_matches_symmetric_t():
    chol = np.array([[1.0, 0.0], [0.3, 0.8]])
    loc = np.array([0.5, -0.5])
    p = SkewTParams(weights=np.array([1.0]), dof=np.array([6.0]),
                    locations=loc[None], scale_chols=chol[None],
                    skews=np.array([[4.0, -2.0]]))
    # at x = mu the skewing factor is exactly 1/2, cancelling the 2
    assert skewt_log_density(p, loc) == pytest.approx(
        symmetric_t_logpdf(loc, loc, chol, 6.0), abs=1e-12)


def test_skewt_zero_skew_equals_symmetric_t():
    chol = np.array([[0.9, 0.0], [-0.2, 1.1]])
    loc = np.array([0.1, 0.7])
    p = SkewTParams(weights=np.array([1.0]), dof=np.array([5.0]),
                    locations=loc[None], scale_chols=chol[None],
                    skews=np.zeros((1, 2)))
    for x in (np.zeros(2), np.array([1.0, -1.0]), np.array([2.5, 0.3])):
        assert skewt_log_density(p, x) == pytest.approx(
            symmetric_t_logpdf(x, loc, chol, 5.0), abs=1e-10)


def test_skewt_gaussian_limit_density():
    p = SkewTParams(weights=np.array([1.0]), dof=np.array([1e6]),
                    locations=np.zeros((1, 1)), scale_chols=np.ones((1, 1, 1)),
                    skews=np.zeros((1, 1)))
    assert skewt_log_density(p, np.zeros(1)) == pytest.approx(
        -0.918939, abs=1e-4)


def test_skewt_gaussian_limit_moments():
    chol = np.array([[1.0, 0.0], [0.5, 0.8]])
    p = SkewTParams(weights=np.array([1.0]), dof=np.array([1e6]),
                    locations=np.array([[1.0, -2.0]]), scale_chols=chol[None],
                    skews=np.zeros((1, 2)))
    draws = skewt_sample(p, 60_000, RngStream(root_seed=3))
    assert np.allclose(draws.mean(axis=0), [1.0, -2.0], atol=0.03)
    assert np.allclose(np.cov(draws, rowvar=False), chol @ chol.T, atol=0.05)


def test_skewt_positive_skew_direction():
    p = SkewTParams(weights=np.array([1.0]), dof=np.array([8.0]),
                    locations=np.zeros((1, 2)),
                    scale_chols=np.stack([np.eye(2)]),
                    skews=np.array([[6.0, 0.0]]))
    draws = skewt_sample(p, 20_000, RngStream(root_seed=11))
    x0 = draws[:, 0] - draws[:, 0].mean()
    skewness = np.mean(x0**3) / np.mean(x0**2) ** 1.5
    assert skewness > 0.2


def test_skewt_degenerate_scale_pins_samples():
    p = SkewTParams(weights=np.array([1.0]), dof=np.array([4.0]),
                    locations=np.array([[5.0]]),
                    scale_chols=np.full((1, 1, 1), 1e-6),
                    skews=np.zeros((1, 1)))
    draws = skewt_sample(p, 5000, RngStream(root_seed=13))
    assert np.all(np.abs(draws - 5.0) < 0.01)


def test_densities_normalize_in_1d():
    g = gauss_head([0.3], [[0.7]])
    total, _ = integrate.quad(lambda x: math.exp(gmm_log_density(g, np.array([x]))),
                              -30, 30, limit=200)
    assert total == pytest.approx(1.0, abs=1e-3)
    s = SkewTParams(weights=np.array([1.0]), dof=np.array([4.5]),
                    locations=np.array([[-0.2]]),
                    scale_chols=np.array([[[0.8]]]),
                    skews=np.array([[3.0]]))
    total, _ = integrate.quad(lambda x: math.exp(skewt_log_density(s, np.array([x]))),
                              -60, 60, limit=400)
    assert total == pytest.approx(1.0, abs=1e-3)


def test_sampler_density_agree_on_likelihood():
    """Perturbing the generating parameters should not raise the likelihood
    of the head's own samples."""
    p = gauss_head([0.0, 0.0], np.eye(2))
    draws = gmm_sample(p, 50_000, RngStream(root_seed=21))
    base = gmm_log_density(p, draws).mean()
    for fac in (0.9, 1.1):
        other = gauss_head([0.0, 0.0], fac * np.eye(2))
        assert gmm_log_density(other, draws).mean() < base


def test_head_dict_round_trips():
    g = GmmParams(weights=np.array([0.25, 0.75]),
                  means=np.array([[0.0, 1.0], [2.0, 3.0]]),
                  scale_chols=np.stack([np.eye(2), np.array([[2.0, 0.0], [0.1, 0.5]])]))
    g2 = gmm_from_dict(gmm_to_dict(g))
    assert np.array_equal(g2.weights, g.weights)
    assert np.array_equal(g2.scale_chols, g.scale_chols)
    s = SkewTParams(weights=np.array([1.0]), dof=np.array([7.0]),
                    locations=np.array([[0.4]]), scale_chols=np.array([[[1.2]]]),
                    skews=np.array([[-2.0]]))
    s2 = skewt_from_dict(skewt_to_dict(s))
    assert np.array_equal(s2.dof, s.dof)
    assert np.array_equal(s2.skews, s.skews)


def test_skewt_requires_heavy_enough_tails():
    with pytest.raises(InvalidParameter):
        SkewTParams(weights=np.array([1.0]), dof=np.array([2.0]),
                    locations=np.zeros((1, 1)), scale_chols=np.ones((1, 1, 1)),
                    skews=np.zeros((1, 1)))
