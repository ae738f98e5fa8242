"""Kriging surrogate over normalized theta and expected-improvement suggestions.

Each observation is a per-theta sample mean; its squared standard error
enters the covariance diagonal, so thinly sampled (preempted) thetas are
trusted less than fully averaged ones.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import linalg, optimize, special
from scipy.stats import qmc

from .errors import InsufficientData, NumericalError
from .geometry import ThetaBounds, ThetaVector
from .sampling import RngStream

__all__ = [
    "Observation",
    "GPSurrogate",
    "fit",
    "predict",
    "expected_improvement",
    "suggest",
    "JITTER",
]

JITTER = 1e-8
LENGTHSCALE_BOX = (1e-2, 1e1)
SIGNAL_BOX = (1e-2, 1e2)
N_STARTS = 8
POOL_SIZE = 2048
EPS_DUP = 1e-6
PRIOR_LENGTHSCALE = 0.5
PRIOR_SD = 1.0


@dataclass(frozen=True)
class Observation:
    theta: ThetaVector
    q_values: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "q_values", tuple(float(q) for q in self.q_values))
        if not self.q_values:
            raise InsufficientData("an observation needs at least one Q value")

    @property
    def n(self) -> int:
        return len(self.q_values)

    @property
    def mean(self) -> float:
        return float(np.mean(self.q_values))

    @property
    def variance(self) -> float:
        return float(np.var(self.q_values, ddof=1)) if self.n > 1 else 0.0


def _sq_dists(a: np.ndarray, b: np.ndarray, lengthscales: np.ndarray) -> np.ndarray:
    d = (a[:, None, :] - b[None, :, :]) / lengthscales
    return np.einsum("ijk,ijk->ij", d, d)


@dataclass(eq=False)
class GPSurrogate:
    """Anisotropic squared-exponential GP on the unit hypercube."""

    bounds: ThetaBounds
    x: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)  # standardized targets
    noise: np.ndarray = field(repr=False)  # standardized noise variances
    y_mean: float
    y_std: float
    lengthscales: np.ndarray
    signal_var: float
    chol: np.ndarray = field(init=False, repr=False)
    alpha: np.ndarray = field(init=False, repr=False)
    jitter: float = field(init=False, default=JITTER)

    def __post_init__(self):
        self.lengthscales = np.asarray(self.lengthscales, dtype=float)
        if np.any(self.lengthscales <= 0) or not self.signal_var > 0:
            raise NumericalError("kernel hyperparameters must be positive")
        self.chol, self.jitter = _factor(self._cov(), self.signal_var)
        self.alpha = linalg.cho_solve((self.chol, True), self.y)

    def _kernel(self, a, b):
        return self.signal_var * np.exp(-0.5 * _sq_dists(a, b, self.lengthscales))

    def _cov(self):
        return self._kernel(self.x, self.x) + np.diag(self.noise)

    def predict_normalized(self, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        u = np.atleast_2d(u)
        ks = self._kernel(u, self.x)
        mean = ks @ self.alpha
        v = linalg.solve_triangular(self.chol, ks.T, lower=True)
        var = np.maximum(self.signal_var - np.einsum("ij,ij->j", v, v), 0.0)
        return self.y_mean + self.y_std * mean, self.y_std * np.sqrt(var)


def _factor(cov: np.ndarray, scale: float):
    jitter = JITTER
    eye = np.eye(len(cov))
    while jitter <= 1e-2 * max(scale, 1.0):
        try:
            return linalg.cholesky(cov + jitter * eye, lower=True), jitter
        except linalg.LinAlgError:
            jitter *= 10
    raise NumericalError("covariance is not positive definite after jitter escalation")


def _neg_log_likelihood(params, x, y, noise, prior_sd=None):
    """Negative log marginal likelihood and its gradient in log-parameters.

    With ``prior_sd`` a log-normal penalty centred on ``PRIOR_LENGTHSCALE``
    is added for every lengthscale.
    """
    ell = np.exp(params[:-1])
    sf2 = math.exp(params[-1])
    n, dim = x.shape
    diff2 = ((x[:, None, :] - x[None, :, :]) / ell) ** 2
    kf = sf2 * np.exp(-0.5 * diff2.sum(axis=2))
    cov = kf + np.diag(noise) + JITTER * np.eye(n)
    try:
        chol = linalg.cholesky(cov, lower=True)
    except linalg.LinAlgError:
        return 1e25, np.zeros_like(params)
    alpha = linalg.cho_solve((chol, True), y)
    nll = 0.5 * y @ alpha + np.log(np.diag(chol)).sum() + 0.5 * n * math.log(2 * math.pi)
    inner = np.outer(alpha, alpha) - linalg.cho_solve((chol, True), np.eye(n))
    grad = np.empty_like(params)
    for d in range(dim):
        grad[d] = -0.5 * np.sum(inner * kf * diff2[:, :, d])
    grad[-1] = -0.5 * np.sum(inner * kf)
    if prior_sd:
        z = (params[:-1] - math.log(PRIOR_LENGTHSCALE)) / prior_sd
        nll += 0.5 * float(z @ z)
        grad[:-1] += z / prior_sd
    return nll, grad


def _training_data(observations: Sequence[Observation], bounds: ThetaBounds):
    x = np.array([bounds.normalize(o.theta) for o in observations])
    means = np.array([o.mean for o in observations])
    variances = np.array([o.variance for o in observations])
    counts = np.array([o.n for o in observations], dtype=float)
    multi = counts > 1
    # a single value carries no spread of its own; borrow the typical one
    if multi.any() and (~multi).any():
        variances[~multi] = np.median(variances[multi])
    noise = np.maximum(variances / counts, JITTER)
    return x, means, noise


def fit(observations: Sequence[Observation], bounds: ThetaBounds, rng: RngStream | None = None,
        n_starts: int = N_STARTS, hyperparameters: tuple[Sequence[float], float] | None = None,
        prior_sd: float | None = PRIOR_SD) -> GPSurrogate:
    """Fit the surrogate by multi-start maximization of the marginal likelihood.

    ``hyperparameters=(lengthscales, signal_var)`` skips the search; the
    values are then taken as given, in standardized units.
    """
    if len(observations) < 2:
        raise InsufficientData("kriging needs at least 2 observations")
    x, means, noise = _training_data(observations, bounds)
    if len(np.unique(np.round(x, 12), axis=0)) < 2:
        raise InsufficientData("kriging needs at least 2 distinct thetas")
    y_mean = float(means.mean())
    y_std = float(means.std())
    if not y_std > 0:
        y_std = 1.0
    y = (means - y_mean) / y_std
    noise = noise / y_std ** 2

    if hyperparameters is not None:
        ell, sf2 = hyperparameters
        return GPSurrogate(bounds, x, y, noise, y_mean, y_std, np.asarray(ell, float), float(sf2))

    dim = x.shape[1]
    lo = np.r_[np.full(dim, math.log(LENGTHSCALE_BOX[0])), math.log(SIGNAL_BOX[0])]
    hi = np.r_[np.full(dim, math.log(LENGTHSCALE_BOX[1])), math.log(SIGNAL_BOX[1])]
    gen = (rng or RngStream(0)).generator
    starts = [np.r_[np.full(dim, math.log(0.3)), 0.0]]
    starts += [lo + (hi - lo) * gen.random(dim + 1) for _ in range(n_starts - 1)]
    best = None
    for start in starts:
        res = optimize.minimize(_neg_log_likelihood, start, args=(x, y, noise, prior_sd), jac=True, method="L-BFGS-B",
                                bounds=list(zip(lo, hi)), options={"maxiter": 200})
        if best is None or res.fun < best.fun:
            best = res
    params = np.clip(best.x, lo, hi)
    return GPSurrogate(bounds, x, y, noise, y_mean, y_std, np.exp(params[:-1]), math.exp(params[-1]))


def predict(model: GPSurrogate, theta: ThetaVector) -> tuple[float, float]:
    """Posterior mean and standard deviation of the mean Q at ``theta``."""
    mu, sd = model.predict_normalized(model.bounds.normalize(theta))
    return float(mu[0]), float(sd[0])


def expected_improvement(mu, s, best: float):
    """Expected improvement over ``best`` for maximization.

    Accepts either a fitted model plus theta (via :func:`predict`) or raw
    posterior moments; array inputs are evaluated elementwise.
    """
    if isinstance(mu, GPSurrogate):
        mu, s = predict(mu, s)
    mu = np.asarray(mu, dtype=float)
    s = np.asarray(s, dtype=float)
    gain = mu - best
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(s > 0, gain / np.where(s > 0, s, 1.0), 0.0)
        ei = np.where(s > 0, gain * special.ndtr(z) + s * np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi), np.maximum(gain, 0.0))
    ei = np.maximum(ei, 0.0)
    return float(ei) if ei.ndim == 0 else ei


def _excluded(u: np.ndarray, failed: np.ndarray, eps: float) -> np.ndarray:
    if len(failed) == 0:
        return np.zeros(len(u), dtype=bool)
    d = np.linalg.norm(u[:, None, :] - failed[None, :, :], axis=2)
    return (d <= eps).any(axis=1)


def suggest(model: GPSurrogate, bounds: ThetaBounds, rng: RngStream, best: float | None = None,
            failed: Sequence[ThetaVector] = (), pool_size: int = POOL_SIZE, eps_dup: float = EPS_DUP) -> ThetaVector:
    """Next theta: EI maximizer over a Sobol pool, refined coordinate-wise.

    Thetas within ``eps_dup`` (normalized distance) of a rank-failed theta
    are never returned; if the whole pool is excluded a uniform random theta
    is drawn instead.
    """
    gen = rng.generator
    if best is None:
        best = float(np.max(model.y_mean + model.y_std * model.y))
    failed_u = np.array([bounds.normalize(t) for t in failed]).reshape(-1, len(bounds.lo))
    sampler = qmc.Sobol(d=len(bounds.lo), scramble=True, seed=gen)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)  # balance warning for non powers of two
        pool = sampler.random(pool_size)
    keep = ~_excluded(pool, failed_u, eps_dup)
    if not keep.any():
        while True:
            u = gen.random(len(bounds.lo))
            if not _excluded(u[None], failed_u, eps_dup)[0]:
                return ThetaVector.from_array(bounds.denormalize(u))
    pool = pool[keep]
    mu, sd = model.predict_normalized(pool)
    ei = expected_improvement(mu, sd, best)
    order = np.lexsort((-sd, -ei))
    u = pool[order[0]].copy()
    current = ei[order[0]]

    def scores(cands):
        m, s_ = model.predict_normalized(cands)
        val = expected_improvement(m, s_, best)
        return np.where(_excluded(cands, failed_u, eps_dup), -np.inf, val)

    dim = len(u)
    moves = np.vstack([np.eye(dim), -np.eye(dim)])
    step = 1.0 / 16
    for _ in range(200):
        if step < 1.0 / 1024:
            break
        cands = np.clip(u + step * moves, 0.0, 1.0)
        vals = scores(cands)
        k = int(np.argmax(vals))
        if vals[k] > current:
            u, current = cands[k], vals[k]
        else:
            step /= 2
    return ThetaVector.from_array(bounds.denormalize(u))
