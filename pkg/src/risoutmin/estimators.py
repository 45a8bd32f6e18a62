"""Scikit-learn style wrappers around the outage solvers.

``fit`` consumes a finite array of equivalent channels ``X`` of shape
``(n_samples, K, UM+1, N)`` as the training stream (cycled if the solver asks
for more samples than provided). ``predict`` returns the SINR of the fitted
beamformer on new channels and ``score`` returns ``1 - max_k outage``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .baselines import run_saa
from .evaluation import evaluate_sinr
from .objective import BeamformingState, sinr
from .smm import run_smm_outmin
from .ssca import StepSizeRule, initialize, run_ssca_outmin
from .trace import StoppingRule


def check_channel_array(X):
    """Validate and return ``X`` as a complex ``(n, K, UM+1, N)`` array."""
    X = np.asarray(X)
    if X.ndim == 3:
        X = X[:, None]
    if X.ndim != 4:
        raise ValueError(f"expected channels of shape (n, K, UM+1, N), got {X.shape}")
    if X.shape[0] < 1:
        raise ValueError("need at least one channel sample")
    X = X.astype(complex)
    if not np.all(np.isfinite(X)):
        raise ValueError("channels contain NaN or inf")
    return X


class _ArrayStream:
    # scenario-like view of a fixed channel array; draws cycle through it in order

    def __init__(self, X, p_max, gamma, noise_power):
        self.X = X
        self.p_max = float(p_max)
        self.n_users = X.shape[1]
        self.gamma = np.broadcast_to(np.asarray(gamma, float), (self.n_users,)).copy()
        self.noise_power = np.broadcast_to(np.asarray(noise_power, float), (self.n_users,)).copy()
        self._pos = 0

    def draw(self, rng=None):
        G = self.X[self._pos % len(self.X)]
        self._pos += 1
        return G

    def draw_many(self, rng, n):
        return np.stack([self.draw(rng) for _ in range(n)])


class _OutageBeamformer(BaseEstimator):
    """Shared fit/predict/score logic; subclasses pick the solver."""

    def __init__(
        self,
        p_max=1.0,
        gamma=1.0,
        noise_power=1.0,
        max_iter=1000,
        tol=1e-4,
        patience=50,
        theta=None,
        mu=None,
        init_trials=64,
        random_state=0,
    ):
        self.p_max = p_max
        self.gamma = gamma
        self.noise_power = noise_power
        self.max_iter = max_iter
        self.tol = tol
        self.patience = patience
        self.theta = theta
        self.mu = mu
        self.init_trials = init_trials
        self.random_state = random_state

    def _solve(self, stream, state, stop, rng, params):
        raise NotImplementedError

    def fit(self, X, y=None):
        X = check_channel_array(X)
        stream = _ArrayStream(X, self.p_max, self.gamma, self.noise_power)
        rng = np.random.default_rng(self.random_state)
        state, params = initialize(stream, rng, self.init_trials, self.theta, self.mu)
        stop = StoppingRule(self.tol, self.patience, self.max_iter)
        state, trace = self._solve(stream, state, stop, rng, params)
        self.F_ = state.F
        self.e_ = state.e
        self.smoothing_ = params
        self.trace_ = trace
        self.n_iter_ = len(trace)
        return self

    @property
    def state_(self):
        check_is_fitted(self, ("F_", "e_"))
        return BeamformingState(self.F_, self.e_)

    def predict(self, X):
        """SINR of the fitted beamformer, shape ``(n_samples, K)``."""
        X = check_channel_array(X)
        state = self.state_
        if X.shape[1:] != (self.F_.shape[1], self.e_.size, self.F_.shape[0]):
            raise ValueError("channel dimensions do not match the fitted beamformer")
        return sinr(state, X, np.broadcast_to(np.asarray(self.noise_power, float), (X.shape[1],)))

    def score(self, X, y=None):
        """``1 - max_k`` empirical outage on ``X``."""
        values = self.predict(X)
        return 1.0 - evaluate_sinr(values, self.gamma).max_outage


class SMMBeamformer(_OutageBeamformer):
    """Single-user stochastic MM with SQUAREM acceleration."""

    def __init__(self, p_max=1.0, gamma=1.0, noise_power=1.0, max_iter=1000, tol=1e-4, patience=50,
                 theta=None, mu=None, init_trials=64, random_state=0, squarem=True):
        super().__init__(p_max, gamma, noise_power, max_iter, tol, patience, theta, mu, init_trials, random_state)
        self.squarem = squarem

    def _solve(self, stream, state, stop, rng, params):
        return run_smm_outmin(stream, state, stop, rng, params, squarem=self.squarem)


class SSCABeamformer(_OutageBeamformer):
    """Multiuser stochastic SCA with Armijo steps."""

    def __init__(self, p_max=1.0, gamma=1.0, noise_power=1.0, max_iter=1000, tol=1e-4, patience=50,
                 theta=None, mu=None, init_trials=64, random_state=0, tau=1.0):
        super().__init__(p_max, gamma, noise_power, max_iter, tol, patience, theta, mu, init_trials, random_state)
        self.tau = tau

    def _solve(self, stream, state, stop, rng, params):
        rule = StepSizeRule()
        return run_ssca_outmin(stream, state, stop, rule, rule, rng, params, tau=self.tau)


class SAABeamformer(_OutageBeamformer):
    """Deterministic MM on the first ``n_samples`` training channels."""

    def __init__(self, p_max=1.0, gamma=1.0, noise_power=1.0, max_iter=1000, tol=1e-4, patience=50,
                 theta=None, mu=None, init_trials=64, random_state=0, n_samples=300):
        super().__init__(p_max, gamma, noise_power, max_iter, tol, patience, theta, mu, init_trials, random_state)
        self.n_samples = n_samples

    def _solve(self, stream, state, stop, rng, params):
        n = min(self.n_samples, len(stream.X) - 1) if len(stream.X) > 1 else 1
        return run_saa(stream, state, n, stop, rng, params)
