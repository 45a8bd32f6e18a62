"""Stochastic successive convex approximation for multiuser outage minimization.

The max over users is smoothed by log-sum-exp. Each iteration builds a
proximal linearization of the smoothed objective at the current iterate on a
fresh channel, minimizes the running average in closed form and moves towards
that minimizer with an Armijo step.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .objective import (
    BeamformingState,
    chain_weights,
    conj_grad_e,
    conj_grad_F,
    default_smoothing,
    mrt_columns,
    smooth_objective,
)
from .smm import project_phases, solve_e_subproblem
from .trace import RunTrace


@dataclass
class SscaAccumulator:
    """Running sums of the per-sample proximal surrogate coefficients."""

    n: int
    sum_P_f: np.ndarray
    sum_p_e: np.ndarray
    sum_tau: float

    @classmethod
    def empty(cls, n_tx, n_users, n_phases):
        return cls(0, np.zeros((n_tx, n_users), complex), np.zeros(n_phases, complex), 0.0)


@dataclass
class StepSizeRule:
    """Armijo rule: largest ``xi0 * c2^t`` with sufficient decrease ``c1``."""

    xi0: float = 1.0
    c1: float = 0.01
    c2: float = 0.5
    max_backtracks: int = 30

    def __post_init__(self):
        if not 0 < self.xi0 <= 1:
            raise ValueError("xi0 must lie in (0, 1]")
        if not (0 < self.c1 < 1 and 0 < self.c2 < 1):
            raise ValueError("c1 and c2 must lie in (0, 1)")
        if self.max_backtracks < 1:
            raise ValueError("max_backtracks must be positive")


def softmax_sigmoid_weights(state, G, params):
    """Chain-rule weights ``l_k = softmax_k(u(x)/mu) u'(x_k)`` for one sample."""
    return chain_weights(state, G, params)


def ssca_F_params(state_prev, G, weights, tau, params):
    """``P_f = W_f - (tau/2) F_prev`` with ``W_f = sum_k l_k G_k^H e e^H G_k F Upsilon_k``."""
    W = conj_grad_F(state_prev, G, params, weights)
    return W - 0.5 * tau * state_prev.F


def ssca_e_params(state_prev, G, weights, tau, params):
    """``p_e = w_e - (tau/2) e_prev`` with ``w_e = sum_k l_k G_k F Upsilon_k F^H G_k^H e``."""
    w = conj_grad_e(state_prev, G, params, weights)
    return w - 0.5 * tau * state_prev.e


def solve_F_subproblem(sum_P_f, sum_tau, p_max):
    """Minimizer of ``2 Re tr(P^H F) + (tau/2) ||F||^2`` over ``||F||_F^2 <= p_max``."""
    norm2 = np.vdot(sum_P_f, sum_P_f).real
    if norm2 == 0.0:
        return np.zeros_like(sum_P_f)
    if 4.0 * norm2 / sum_tau**2 <= p_max:
        return -2.0 * sum_P_f / sum_tau
    return -math.sqrt(p_max / norm2) * sum_P_f


def solve_e_subproblem_ssca(sum_p_e, form="separable"):
    """Minimizer of ``2 Re{p^H e}`` over unit-modulus ``e`` with last entry 1."""
    return solve_e_subproblem(sum_p_e, form)


def armijo_step(x_prev, x_hat, objective_fn, gradient_fn, rule):
    """Largest ``xi0 c2^t`` passing the sufficient-decrease test, else 0.

    ``gradient_fn`` returns the conjugate derivative, so the directional
    derivative along ``d = x_hat - x_prev`` is ``2 Re <g, d>``.
    """
    d = x_hat - x_prev
    if not np.any(d):
        return rule.xi0
    slope = 2.0 * np.vdot(gradient_fn(x_prev), d).real
    if slope > 0:
        return 0.0
    f0 = objective_fn(x_prev)
    xi = rule.xi0
    for _ in range(rule.max_backtracks + 1):
        if objective_fn(x_prev + xi * d) <= f0 + rule.c1 * xi * slope:
            return xi
        xi *= rule.c2
    return 0.0


def init_phases(G0, trials, rng, n_grid=64, sweeps=10):
    """Randomized max-min initialization of the reflection vector.

    Draws ``trials`` random feasible phase vectors, then improves every one of
    them by coordinate ascent on ``min_k ||e^H G_k||^2``: each free phase is
    chosen from an ``n_grid`` grid plus its current value, for at most
    ``sweeps`` passes or until a pass changes nothing. Returns the best
    polished candidate, so its score is at least that of every raw draw.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    G0 = np.asarray(G0, dtype=complex)
    n_phases = G0.shape[1]
    e = np.exp(2j * np.pi * rng.random((trials, n_phases)))
    e[:, -1] = 1.0
    if n_phases > 1:
        grid = np.exp(2j * np.pi * np.arange(n_grid) / n_grid)
        R = np.einsum("kmn,kjn->kmj", G0, G0.conj())  # R_k = G_k G_k^H
        v = np.einsum("kmj,tj->tkm", R, e)  # R_k e per candidate
        for _ in range(sweeps):
            changed = False
            for m in range(n_phases - 1):
                old = e[:, m]
                s = v[:, :, m] - R[None, :, m, m] * old[:, None]  # cross terms with element m
                quad = np.einsum("tm,tkm->tk", e.conj(), v).real
                base = quad - 2.0 * (old.conj()[:, None] * s).real
                options = np.concatenate([np.broadcast_to(grid, (trials, n_grid)), old[:, None]], axis=1)
                scores = base[:, None, :] + 2.0 * (options.conj()[:, :, None] * s[:, None, :]).real
                new = options[np.arange(trials), np.argmax(scores.min(axis=2), axis=1)]
                delta = new - old
                if np.any(delta):
                    changed = True
                    e[:, m] = new
                    v += delta[:, None, None] * R[None, :, :, m]
            if not changed:
                break
    gains = np.linalg.norm(np.einsum("tm,kmn->tkn", e.conj(), G0), axis=2) ** 2
    return e[np.argmax(gains.min(axis=1))].copy()


def init_precoder(G0, e0, p_max, rng=None):
    """Per-user MRT ``f_k = sqrt(p_max / K) G_k^H e / ||G_k^H e||``."""
    a = np.einsum("kmn,m->nk", np.asarray(G0).conj(), e0)
    return mrt_columns(a, p_max, rng)


def initialize(scenario, rng, trials=64, theta=None, mu=None, trial_rng=None):
    """Draw the initial channel, build ``(F0, e0)`` and the smoothing constants.

    ``trial_rng`` feeds the random phase candidates; keeping it apart from the
    channel stream ``rng`` makes the channel sequence independent of ``UM``.
    """
    trial_rng = rng if trial_rng is None else trial_rng
    G0 = scenario.draw(rng)
    e0 = init_phases(G0, trials, trial_rng)
    F0 = init_precoder(G0, e0, scenario.p_max, trial_rng)
    state = BeamformingState(F0, e0)
    params = default_smoothing(state, G0, scenario.gamma, scenario.noise_power, theta, mu)
    return state, params


def run_ssca_outmin(
    scenario,
    init_state,
    stop,
    rule_f,
    rule_e,
    rng,
    params,
    *,
    tau=1.0,
    e_form="separable",
    precoder="ssca",
):
    """SSCA-OutMin: Armijo-damped moves towards the averaged-surrogate minimizers.

    The phase update is the convex combination followed by the entrywise
    projection back onto unit modulus. ``precoder="smrt"`` swaps the precoder
    update for per-user running-mean MRT. Returns the final state and a trace
    whose objective is the per-sample smoothed objective at the new iterate.
    """
    F = np.asarray(init_state.F, complex).copy()
    e = np.asarray(init_state.e, complex).copy()
    n_tx, n_users = F.shape
    n_phases = e.size
    p_max = scenario.p_max
    acc = SscaAccumulator.empty(n_tx, n_users, n_phases)
    smrt_sum = np.zeros((n_tx, n_users), complex)
    trace = RunTrace(meta={"theta": params.theta, "mu": params.mu, "solver": "ssca", "precoder": precoder})
    monitor = stop.monitor()

    while True:
        G = scenario.draw(rng)
        start = time.perf_counter_ns()
        state = BeamformingState(F, e)
        weights = softmax_sigmoid_weights(state, G, params)
        acc.n += 1
        acc.sum_tau += tau
        acc.sum_P_f += ssca_F_params(state, G, weights, tau, params)

        def obj_F(X):
            return smooth_objective(BeamformingState(X, e), G, params)

        def grad_F(X):
            return conj_grad_F(BeamformingState(X, e), G, params)

        if precoder == "smrt":
            smrt_sum += np.einsum("kmn,m->nk", G.conj(), e)
            F_hat = mrt_columns(smrt_sum, p_max, rng)
            xi_f = 1.0
        else:
            F_hat = solve_F_subproblem(acc.sum_P_f, acc.sum_tau, p_max)
            xi_f = armijo_step(F, F_hat, obj_F, grad_F, rule_f)
        direction = np.linalg.norm(F_hat - F)
        F_new = F + xi_f * (F_hat - F)
        obj_f = obj_F(F_new)

        xi_e = math.nan
        e_new = e
        if n_phases > 1:
            state = BeamformingState(F_new, e)
            acc.sum_p_e += ssca_e_params(state, G, chain_weights(state, G, params), tau, params)
            e_hat = solve_e_subproblem_ssca(acc.sum_p_e, e_form)

            def obj_e(x):
                return smooth_objective(BeamformingState(F_new, x), G, params)

            def grad_e(x):
                return conj_grad_e(BeamformingState(F_new, x), G, params)

            xi_e = armijo_step(e, e_hat, obj_e, grad_e, rule_e)
            e_new = project_phases(e + xi_e * (e_hat - e))
        obj_e_val = smooth_objective(BeamformingState(F_new, e_new), G, params)

        change = max(np.linalg.norm(F_new - F), np.linalg.norm(e_new - e))
        F, e = F_new, e_new
        trace.record(
            obj_f, obj_e_val, xi_f, xi_e, wall_ns=time.perf_counter_ns() - start, direction_norm=direction
        )
        if monitor.update(change):
            break

    trace.meta["accumulator"] = acc
    return BeamformingState(F, e), trace
