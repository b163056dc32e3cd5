import numpy as np
import pytest

from esfd.errors import UsageError
from esfd.sampling import as_param_vector, mirror_batch, norm_floor, sample_batch
from esfd.specfun import chi_mean, chi_variance


def test_deterministic_in_seed():
    theta = np.linspace(-1, 1, 7)
    a = sample_batch(theta, 0.3, 50, 1234)
    b = sample_batch(theta, 0.3, 50, 1234)
    np.testing.assert_array_equal(a.epsilons, b.epsilons)
    c = sample_batch(theta, 0.3, 50, 1235)
    assert not np.array_equal(a.epsilons, c.epsilons)


def test_epsilons_do_not_depend_on_theta():
    a = sample_batch(np.zeros(5), 1.0, 10, 9)
    b = sample_batch(np.full(5, 1e6), 1.0, 10, 9)
    np.testing.assert_array_equal(a.epsilons, b.epsilons)
    np.testing.assert_array_equal(b.alphas(), b.theta + b.epsilons)


def test_batch_is_read_only():
    batch = sample_batch(np.zeros(3), 1.0, 4, 0)
    with pytest.raises(ValueError):
        batch.epsilons[0, 0] = 1.0
    with pytest.raises(ValueError):
        batch.theta[0] = 1.0


def test_per_coordinate_moments():
    lam = 10**5
    batch = sample_batch(np.zeros(100), 1.0, lam, 2024)
    mean = batch.epsilons.mean(axis=0)
    var = batch.epsilons.var(axis=0)
    assert np.all(np.abs(mean) < 3 / np.sqrt(lam) * 1.5)
    assert np.all(np.abs(var - 1) < 0.05)


def test_mean_norm_matches_chi_mean():
    lam, n, sigma = 10**5, 10, 2.0
    norms = np.sqrt(sample_batch(np.zeros(n), sigma, lam, 77).sq_norms())
    se = np.sqrt(chi_variance(n, sigma) / lam)
    assert abs(norms.mean() - chi_mean(n, sigma)) < 3 * se


def test_normalized_norm_spread_shrinks_with_dimension():
    spreads = []
    for n in (4, 64, 1024):
        norms = np.sqrt(sample_batch(np.zeros(n), 1.0, 4000, n).sq_norms()) / chi_mean(n)
        spreads.append(norms.var(ddof=1))
        assert norms.var(ddof=1) == pytest.approx(chi_variance(n) / chi_mean(n) ** 2, rel=0.1)
    assert spreads[0] > spreads[1] > spreads[2]


def test_norm_floor_and_no_resample_in_practice():
    batch = sample_batch(np.zeros(3), 1e-3, 1000, 5)
    assert batch.resamples == 0
    assert np.all(np.sqrt(batch.sq_norms()) > norm_floor(3, 1e-3))


def test_mirror_batch():
    batch = sample_batch(np.ones(4), 0.5, 6, 3)
    m = mirror_batch(batch)
    assert m.lam == 12 and m.mirrored
    np.testing.assert_array_equal(m.epsilons[0::2], batch.epsilons)
    np.testing.assert_array_equal(m.epsilons[1::2], -batch.epsilons)
    assert m.seed == batch.seed and m.sigma == batch.sigma
    np.testing.assert_array_equal(m.theta, batch.theta)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(theta=np.zeros(3), sigma=0.0, lam=5, seed=1),
        dict(theta=np.zeros(3), sigma=-1.0, lam=5, seed=1),
        dict(theta=np.zeros(3), sigma=1.0, lam=0, seed=1),
        dict(theta=np.zeros(3), sigma=1.0, lam=5, seed=-1),
        dict(theta=np.zeros(3), sigma=1.0, lam=5, seed=2**64),
        dict(theta=np.zeros(0), sigma=1.0, lam=5, seed=1),
        dict(theta=np.array([1.0, np.nan]), sigma=1.0, lam=5, seed=1),
    ],
)
def test_invalid_arguments(kwargs):
    with pytest.raises(UsageError):
        sample_batch(**kwargs)


def test_param_vector_validation():
    assert as_param_vector([1, 2]).dtype == np.float64
    with pytest.raises(UsageError):
        as_param_vector([[1.0, 2.0]])
