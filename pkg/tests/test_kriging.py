import math

import numpy as np
import pytest
from scipy.stats import qmc

from mfstune import kriging
from mfstune.errors import InsufficientData
from mfstune.geometry import ThetaBounds, ThetaVector
from mfstune.kriging import Observation, expected_improvement, fit, predict, suggest
from mfstune.sampling import RngStream

BOUNDS = ThetaBounds()


def theta(u):
    return ThetaVector.from_array(BOUNDS.denormalize(u))


def observations(n=8, seed=0, spread=0.3):
    gen = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        u = gen.random(5)
        mean = 3 - 4 * np.sum((u - 0.5) ** 2)
        out.append(Observation(theta(u), tuple(mean + spread * gen.normal(size=5))))
    return out


def test_ei_anchors():
    assert expected_improvement(1.0, 1.0, 1.0) == pytest.approx(1 / math.sqrt(2 * math.pi), abs=1e-12)
    assert expected_improvement(1.0, 1.0, 1.0) == pytest.approx(0.398942, abs=1e-6)
    assert expected_improvement(0.5, 0.0, 1.0) == 0.0
    assert expected_improvement(2.0, 0.0, 1.0) == 1.0


def test_ei_monotone_in_sd_and_mean():
    s = np.linspace(0.01, 3, 50)
    ei = expected_improvement(np.zeros(50), s, 0.5)
    assert np.all(np.diff(ei) > 0)
    mu = np.linspace(-2, 2, 50)
    assert np.all(np.diff(expected_improvement(mu, np.ones(50), 0.0)) > 0)
    assert np.all(expected_improvement(mu, np.ones(50), 0.0) >= np.maximum(mu, 0))


def test_observation_stats():
    o = Observation(theta(np.full(5, 0.5)), (1.0, 2.0, 3.0))
    assert (o.n, o.mean, o.variance) == (3, 2.0, 1.0)
    assert Observation(o.theta, (4.0,)).variance == 0.0
    with pytest.raises(InsufficientData):
        Observation(o.theta, ())


def test_insufficient_data():
    o = Observation(theta(np.full(5, 0.5)), (1.0, 2.0))
    with pytest.raises(InsufficientData):
        fit([o], BOUNDS)
    with pytest.raises(InsufficientData):
        fit([o, Observation(o.theta, (3.0, 4.0))], BOUNDS)


def test_posterior_matches_dense_solve():
    obs = observations(6, seed=1)
    model = fit(obs, BOUNDS, RngStream(0))
    x = np.array([BOUNDS.normalize(o.theta) for o in obs])
    ell, sf2 = model.lengthscales, model.signal_var

    def k(a, b):
        d = (a[:, None, :] - b[None, :, :]) / ell
        return sf2 * np.exp(-0.5 * np.sum(d * d, axis=2))

    cov = k(x, x) + np.diag(model.noise) + model.jitter * np.eye(len(x))
    u = np.random.default_rng(2).random((10, 5))
    ks = k(u, x)
    mean = ks @ np.linalg.solve(cov, model.y)
    var = sf2 - np.einsum("ij,ji->i", ks, np.linalg.solve(cov, ks.T))
    mu, sd = model.predict_normalized(u)
    np.testing.assert_allclose(mu, model.y_mean + model.y_std * mean, atol=1e-8)
    np.testing.assert_allclose(sd, model.y_std * np.sqrt(np.maximum(var, 0)), atol=1e-8)


def test_noiseless_interpolation():
    gen = np.random.default_rng(3)
    obs = [Observation(theta(gen.random(5)), (float(v),) * 50) for v in gen.normal(size=5)]
    model = fit(obs, BOUNDS, hyperparameters=(np.full(5, 0.3), 1.0))
    for o in obs:
        mu, sd = predict(model, o.theta)
        assert mu == pytest.approx(o.mean, abs=1e-6)
        assert sd < 1e-3


def test_equal_means():
    a = Observation(theta(np.full(5, 0.2)), (2.0, 2.0, 2.0))
    b = Observation(theta(np.full(5, 0.8)), (2.0, 2.0, 2.0))
    model = fit([a, b], BOUNDS, RngStream(0))
    for o in (a, b):
        assert predict(model, o.theta)[0] == pytest.approx(2.0, abs=1e-6)


def test_duplicate_theta_with_different_means():
    t = theta(np.full(5, 0.4))
    obs = [Observation(t, (1.0, 1.5)), Observation(t, (3.0, 2.5)), Observation(theta(np.full(5, 0.9)), (0.0, 0.5))]
    model = fit(obs, BOUNDS, RngStream(0))
    mu, _ = predict(model, t)
    assert 1.0 < mu < 3.0


def test_single_value_entries_borrow_variance():
    obs = [Observation(theta(np.full(5, 0.1)), (1.0, 3.0)), Observation(theta(np.full(5, 0.9)), (2.0,))]
    _, _, noise = kriging._training_data(obs, BOUNDS)
    np.testing.assert_allclose(noise, [1.0, 2.0])


def test_prior_reversion_far_away():
    obs = [Observation(theta(np.full(5, 0.0) + 0.01 * k), (float(k), float(k) + 0.1)) for k in range(3)]
    model = fit(obs, BOUNDS, hyperparameters=(np.full(5, 0.05), 1.3))
    _, sd = predict(model, theta(np.ones(5)))
    assert sd == pytest.approx(model.y_std * math.sqrt(1.3), rel=1e-6)


def test_prediction_is_continuous():
    model = fit(observations(), BOUNDS, RngStream(0))
    u = np.full(5, 0.37)
    mu0 = model.predict_normalized(u)[0][0]
    for h in (1e-3, 1e-5, 1e-7):
        assert abs(model.predict_normalized(u + h)[0][0] - mu0) < 1e3 * h * max(1, abs(mu0))


def test_hyperparameters_within_boxes():
    model = fit(observations(12, seed=4), BOUNDS, RngStream(1))
    assert np.all(model.lengthscales >= kriging.LENGTHSCALE_BOX[0] * (1 - 1e-12))
    assert np.all(model.lengthscales <= kriging.LENGTHSCALE_BOX[1] * (1 + 1e-12))
    assert kriging.SIGNAL_BOX[0] * (1 - 1e-12) <= model.signal_var <= kriging.SIGNAL_BOX[1] * (1 + 1e-12)


def test_fit_is_deterministic():
    a = fit(observations(), BOUNDS, RngStream(7))
    b = fit(observations(), BOUNDS, RngStream(7))
    np.testing.assert_array_equal(a.lengthscales, b.lengthscales)
    assert a.signal_var == b.signal_var


def test_likelihood_gradient():
    obs = observations(7, seed=5)
    x, means, noise = kriging._training_data(obs, BOUNDS)
    y = (means - means.mean()) / means.std()
    params = np.r_[np.log([0.3, 0.5, 0.7, 0.4, 0.6]), 0.2]
    _, grad = kriging._neg_log_likelihood(params, x, y, noise, 1.0)
    h = 1e-6
    for i in range(len(params)):
        e = np.zeros_like(params)
        e[i] = h
        fd = (kriging._neg_log_likelihood(params + e, x, y, noise, 1.0)[0]
              - kriging._neg_log_likelihood(params - e, x, y, noise, 1.0)[0]) / (2 * h)
        assert grad[i] == pytest.approx(fd, rel=1e-4, abs=1e-6)


def test_suggest_is_deterministic_and_in_bounds():
    model = fit(observations(), BOUNDS, RngStream(0))
    a = suggest(model, BOUNDS, RngStream(3))
    b = suggest(model, BOUNDS, RngStream(3))
    assert a == b
    assert BOUNDS.contains(a)


def test_suggest_beats_pool_maximum():
    model = fit(observations(10, seed=6), BOUNDS, RngStream(0))
    best = max(o.mean for o in observations(10, seed=6))
    choice = suggest(model, BOUNDS, RngStream(8), best=best)
    pool = np.random.default_rng(9).random((4096, 5))
    mu, sd = model.predict_normalized(pool)
    brute = expected_improvement(mu, sd, best).max()
    assert expected_improvement(model, choice, best) >= 0.95 * brute


def test_suggest_single_peak():
    # noiseless samples of a peak at u = 0.6: EI's maximizer lands near it
    gen = np.random.default_rng(10)
    us = gen.random((30, 5))
    obs = [Observation(theta(u), (float(5 * np.exp(-8 * np.sum((u - 0.6) ** 2))),) * 20) for u in us]
    model = fit(obs, BOUNDS, RngStream(1))
    choice = BOUNDS.normalize(suggest(model, BOUNDS, RngStream(2)))
    assert np.linalg.norm(choice - 0.6) < 0.35


def test_suggest_avoids_failed_theta():
    model = fit(observations(), BOUNDS, RngStream(0))
    first = suggest(model, BOUNDS, RngStream(3))
    second = suggest(model, BOUNDS, RngStream(3), failed=[first])
    assert np.linalg.norm(BOUNDS.normalize(second) - BOUNDS.normalize(first)) > 1e-6


def test_suggest_falls_back_when_pool_excluded():
    model = fit(observations(), BOUNDS, RngStream(0))
    # replay the generator to recover the single pool point
    pool_u = qmc.Sobol(d=5, scramble=True, seed=RngStream(3).generator).random(1)[0]
    choice = suggest(model, BOUNDS, RngStream(3), pool_size=1, failed=[theta(pool_u)])
    assert BOUNDS.contains(choice)
    assert np.linalg.norm(BOUNDS.normalize(choice) - pool_u) > 1e-6
