import numpy as np
import pytest

from attrdesc.metric import (
    ColorGradHist,
    GaussianStats,
    GrayDownsample,
    RandomProjection,
    StatsCache,
    default_extractor,
    extract,
    fit_stats,
    frechet_distance,
    sqrtm_psd,
)


def _stats(mean, cov):
    return GaussianStats(np.asarray(mean, float), np.asarray(cov, float), n=10)


def test_identical_gaussians_have_zero_distance():
    s = _stats([1.0, -2.0], [[2.0, 0.3], [0.3, 1.0]])
    assert frechet_distance(s, s, regularization=0.0) == pytest.approx(0.0, abs=1e-10)


def test_mean_only_shift_closed_form():
    cov = np.eye(3) * 0.5
    a = _stats([0, 0, 0], cov)
    b = _stats([1, 2, 2], cov)
    assert frechet_distance(a, b, regularization=0.0) == pytest.approx(9.0, rel=1e-10)


def test_diagonal_covariance_closed_form():
    a = _stats([0, 0], np.diag([4.0, 1.0]))
    b = _stats([0, 0], np.diag([1.0, 9.0]))
    expected = (2.0 - 1.0) ** 2 + (1.0 - 3.0) ** 2
    assert frechet_distance(a, b, regularization=0.0) == pytest.approx(
        expected, rel=1e-10
    )


def test_distance_symmetric_and_nonnegative():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((50, 6))
    y = rng.standard_normal((60, 6)) * 1.5 + 0.2
    a, b = fit_stats(x), fit_stats(y)
    d_ab = frechet_distance(a, b)
    d_ba = frechet_distance(b, a)
    assert d_ab >= 0.0
    assert d_ab == pytest.approx(d_ba, rel=1e-8)


def test_dim_mismatch_rejected():
    a = _stats([0, 0], np.eye(2))
    b = _stats([0, 0, 0], np.eye(3))
    with pytest.raises(ValueError):
        frechet_distance(a, b)


def test_sqrtm_accuracy_random_psd():
    rng = np.random.default_rng(0)
    for d in (2, 8, 32):
        m = rng.standard_normal((d, d))
        sigma = m @ m.T
        root = sqrtm_psd(sigma)
        err = np.linalg.norm(root @ root - sigma) / np.linalg.norm(sigma)
        assert err < 1e-10
        assert np.allclose(root, root.T)


def test_sqrtm_clamps_tiny_negative_eigenvalues():
    sigma = np.diag([1.0, -1e-14])
    root = sqrtm_psd(sigma)
    assert np.all(np.linalg.eigvalsh(root) >= 0.0)


def test_sqrtm_rejects_asymmetric():
    with pytest.raises(ValueError):
        sqrtm_psd(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_fit_stats_matches_numpy_cov():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((40, 5))
    stats = fit_stats(x)
    assert np.allclose(stats.mean, x.mean(axis=0))
    assert np.allclose(stats.cov, np.cov(x, rowvar=False), atol=1e-12)
    with pytest.raises(ValueError):
        fit_stats(x[:1])


def test_extractor_dimensions():
    img = np.random.default_rng(2).random((64, 64, 3))
    for extractor in (GrayDownsample(16), RandomProjection(64), ColorGradHist()):
        vec = extractor.extract_one(img)
        assert vec.shape == (extractor.dim,)


def test_random_projection_deterministic():
    img = np.random.default_rng(4).random((64, 64, 3))
    a = RandomProjection(32, seed=9).extract_one(img)
    b = RandomProjection(32, seed=9).extract_one(img)
    c = RandomProjection(32, seed=10).extract_one(img)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_color_hist_normalized():
    img = np.random.default_rng(5).random((32, 32, 3))
    ext = ColorGradHist(color_bins=8, orient_bins=6)
    vec = ext.extract_one(img)
    for ch in range(3):
        assert vec[ch * 8 : (ch + 1) * 8].sum() == pytest.approx(1.0)
    assert vec[24:].sum() == pytest.approx(1.0)


def test_extract_stacks_rows():
    imgs = [np.full((16, 16, 3), v, dtype=np.float32) for v in (0.1, 0.9)]
    feats = extract(imgs, GrayDownsample(4))
    assert feats.shape == (2, 16)
    with pytest.raises(ValueError):
        extract([], GrayDownsample(4))


def test_default_extractor_is_projection():
    assert isinstance(default_extractor(), RandomProjection)


def test_stats_json_roundtrip():
    s = _stats([1.5, 2.5], [[1.0, 0.1], [0.1, 2.0]])
    again = GaussianStats.from_json(s.to_json())
    assert np.array_equal(again.mean, s.mean)
    assert np.array_equal(again.cov, s.cov)
    assert again.n == s.n
    with pytest.raises(ValueError):
        GaussianStats.from_json('{"schema": "nope/1"}')


def test_stats_cache_computes_once(tmp_path):
    cache = StatsCache(tmp_path)
    calls = []

    def compute():
        calls.append(1)
        return _stats([0.0], [[1.0]])

    ext = GrayDownsample(4)
    first = cache.get_or_compute("ds1", ext, compute)
    second = cache.get_or_compute("ds1", ext, compute)
    assert len(calls) == 1
    assert np.array_equal(first.mean, second.mean)
    assert cache.get("ds1", GrayDownsample(8)) is None
