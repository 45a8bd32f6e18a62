"""SINR, sigmoid-smoothed outage indicators and the log-sum-exp max.

Complex gradients are returned as the conjugate (Wirtinger) derivative
``dF/dX*``. The real gradient of a real function in the ``(Re X, Im X)``
coordinates is ``2 dF/dX*``, so a directional derivative along ``D`` is
``2 Re <dF/dX*, D>``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class BeamformingState:
    """Precoder ``F`` (N, K) and reflection vector ``e`` (UM+1,)."""

    F: np.ndarray
    e: np.ndarray

    def copy(self):
        return BeamformingState(self.F.copy(), self.e.copy())

    def is_feasible(self, p_max, atol=1e-9):
        power_ok = np.linalg.norm(self.F) ** 2 <= p_max * (1 + atol)
        phases_ok = np.allclose(np.abs(self.e[:-1]), 1.0, atol=atol)
        return bool(power_ok and phases_ok and self.e[-1] == 1)


@dataclass
class SmoothingParams:
    theta: float
    mu: float
    gamma: np.ndarray
    sigma2: np.ndarray

    def __post_init__(self):
        self.gamma = np.atleast_1d(np.asarray(self.gamma, dtype=float))
        self.sigma2 = np.atleast_1d(np.asarray(self.sigma2, dtype=float))
        if not (self.theta > 0 and self.mu > 0 and np.all(self.gamma > 0)):
            raise ValueError("theta, mu and gamma must be positive")


def sigmoid(x, theta=1.0):
    """``1 / (1 + exp(-theta x))`` without overflow for large ``|theta x|``."""
    z = theta * np.asarray(x, dtype=float)
    ez = np.exp(-np.abs(z))
    out = np.where(z >= 0, 1.0 / (1.0 + ez), ez / (1.0 + ez))
    return out if out.ndim else float(out)


def sigmoid_slope(x, theta=1.0):
    """Derivative ``theta e^{-theta x} / (1 + e^{-theta x})^2`` of :func:`sigmoid`."""
    s = sigmoid(x, theta)
    return theta * s * (1.0 - s)


def logsumexp_max(values, mu):
    """Smooth max ``mu ln sum exp(v / mu)``; lies in ``[max, max + mu ln K]``."""
    v = np.asarray(values, dtype=float)
    top = v.max(axis=-1, keepdims=True)
    out = top[..., 0] + mu * np.log(np.exp((v - top) / mu).sum(axis=-1))
    return out if out.ndim else float(out)


def softmax(values, mu):
    v = np.asarray(values, dtype=float) / mu
    w = np.exp(v - v.max(axis=-1, keepdims=True))
    return w / w.sum(axis=-1, keepdims=True)


def gains(F, e, G):
    """``A[..., k, i] = e^H G_k f_i`` for channels ``G`` of shape (..., K, UM+1, N)."""
    return np.einsum("m,...kmn,ni->...ki", e.conj(), G, F)


def upsilon(gamma):
    """Rows ``k`` hold the diagonal of ``Upsilon_k``: ``gamma_k`` with ``-1`` at ``k``."""
    gamma = np.asarray(gamma, dtype=float)
    ups = np.repeat(gamma[:, None], gamma.size, axis=1)
    np.fill_diagonal(ups, -1.0)
    return ups


def sinr(state, G, sigma2):
    """SINR of every user; ``G`` may carry leading sample axes."""
    power = np.abs(gains(state.F, state.e, G)) ** 2
    signal = np.diagonal(power, axis1=-2, axis2=-1)
    interference = power.sum(axis=-1) - signal
    return signal / (interference + np.asarray(sigma2))


def quadratic_args(F, e, G, gamma, sigma2):
    """``x_k = e^H G_k F Upsilon_k F^H G_k^H e + gamma_k sigma_k^2`` for every user.

    Positive exactly when the SINR of user k is below ``gamma_k``.
    """
    power = np.abs(gains(F, e, G)) ** 2
    return (power * upsilon(gamma)).sum(axis=-1) + np.asarray(gamma) * np.asarray(sigma2)


def smooth_single(f, e, G, params):
    """Smoothed outage ``u(gamma sigma^2 - |e^H G f|^2)`` of a single-user link."""
    G = np.asarray(G)
    if G.ndim == 3:
        if G.shape[0] != 1:
            raise ValueError("smooth_single needs a single-user channel")
        G = G[0]
    if np.ndim(f) == 2:
        if f.shape[1] != 1:
            raise ValueError("smooth_single needs a single precoder column")
        f = f[:, 0]
    x = params.gamma[0] * params.sigma2[0] - np.abs(e.conj() @ G @ f) ** 2
    return sigmoid(x, params.theta)


def smooth_multi(state, G, params, k=None):
    """Per-user smoothed outage ``u(x_k)``; one user when ``k`` is given."""
    x = quadratic_args(state.F, state.e, G, params.gamma, params.sigma2)
    values = sigmoid(x, params.theta)
    return values if k is None else values[..., k]


def smooth_objective(state, G, params):
    """Log-sum-exp of the per-user smoothed outages for one channel sample."""
    return logsumexp_max(smooth_multi(state, G, params), params.mu)


def chain_weights(state, G, params):
    """``l_k = softmax_k(u(x)/mu) * u'(x_k)``, the outer chain-rule factors."""
    x = quadratic_args(state.F, state.e, G, params.gamma, params.sigma2)
    values = sigmoid(x, params.theta)
    return softmax(values, params.mu) * sigmoid_slope(x, params.theta)


def conj_grad_F(state, G, params, weights=None):
    """``dF/dF* = sum_k l_k G_k^H e e^H G_k F Upsilon_k``."""
    if weights is None:
        weights = chain_weights(state, G, params)
    a = np.einsum("kmn,m->nk", G.conj(), state.e)  # columns G_k^H e
    A = a.T.conj() @ state.F  # A[k, i] = e^H G_k f_i
    return a @ (weights[:, None] * A * upsilon(params.gamma))


def conj_grad_e(state, G, params, weights=None):
    """``dF/de* = sum_k l_k G_k F Upsilon_k F^H G_k^H e``."""
    if weights is None:
        weights = chain_weights(state, G, params)
    GF = G @ state.F  # (K, UM+1, K)
    A = np.einsum("m,kmi->ki", state.e.conj(), GF)
    coeff = weights[:, None] * upsilon(params.gamma) * A.conj()
    return np.einsum("kmi,ki->m", GF, coeff)


def conj_grad_single_f(f, e, G, params):
    """``d u(gamma sigma^2 - |e^H G f|^2) / d f*``."""
    a = G.conj().T @ e
    x = params.gamma[0] * params.sigma2[0] - np.abs(a.conj() @ f) ** 2
    return -sigmoid_slope(x, params.theta) * a * (a.conj() @ f)


def conj_grad_single_e(f, e, G, params):
    b = G @ f
    x = params.gamma[0] * params.sigma2[0] - np.abs(e.conj() @ b) ** 2
    return -sigmoid_slope(x, params.theta) * b * (b.conj() @ e)


def default_smoothing(state, G, gamma, sigma2, theta=None, mu=None):
    """``theta = 1 / max_k |x_k|`` at the initial point and ``mu = 1 / (100 K)``."""
    gamma = np.atleast_1d(np.asarray(gamma, dtype=float))
    sigma2 = np.atleast_1d(np.asarray(sigma2, dtype=float))
    if theta is None:
        x = quadratic_args(state.F, state.e, G, gamma, sigma2)
        theta = 1.0 / np.max(np.abs(x))
    if mu is None:
        mu = 1.0 / (100.0 * gamma.size)
    return SmoothingParams(theta=float(theta), mu=float(mu), gamma=gamma, sigma2=sigma2)


def mrt_columns(a, p_max, rng=None):
    """Per-user maximum-ratio columns ``sqrt(p_max / K) a_k / ||a_k||``.

    ``a`` holds the effective channels ``G_k^H e`` as columns (N, K). A zero
    column is replaced by a random unit direction so that ``||F||_F^2 = p_max``.
    """
    a = np.asarray(a, dtype=complex)
    n_tx, n_users = a.shape
    norms = np.linalg.norm(a, axis=0)
    F = np.empty_like(a)
    for k in range(n_users):
        if norms[k] > 0:
            F[:, k] = a[:, k] / norms[k]
        else:
            rng = np.random.default_rng(0) if rng is None else rng
            v = rng.standard_normal(n_tx) + 1j * rng.standard_normal(n_tx)
            F[:, k] = v / np.linalg.norm(v)
    return np.sqrt(p_max / n_users) * F
