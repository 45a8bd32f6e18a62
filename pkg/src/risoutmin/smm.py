"""Stochastic majorization-minimization for single-user outage minimization.

Each iteration draws one channel, builds quadratic (precoder) and linear
(phase) upper bounds of the smoothed outage around the current iterate, adds
their coefficients to running sums, and minimizes the averaged bound in closed
form. SQUAREM extrapolation accelerates both block updates.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .objective import BeamformingState, mrt_columns, sigmoid
from .trace import RunTrace


@dataclass
class SmmAccumulator:
    """Running sums of the per-sample surrogate coefficients."""

    n: int
    sum_alpha_f: float
    sum_d_f: np.ndarray
    sum_d_e: np.ndarray
    sum_const_f: float = 0.0
    sum_const_e: float = 0.0

    @classmethod
    def empty(cls, n_tx, n_phases):
        return cls(0, 0.0, np.zeros(n_tx, complex), np.zeros(n_phases, complex))


def _smooth(x, theta):
    # scalar sigmoid and its slope; the hot loops avoid array dispatch
    z = theta * x
    if z >= 0:
        s = 1.0 / (1.0 + math.exp(-z))
    else:
        ez = math.exp(z)
        s = ez / (1.0 + ez)
    return s, theta * s * (1.0 - s)


def f_surrogate_params(f_prev, e_prev, G, theta, gamma, sigma2, p_max, with_const=False):
    """Coefficients ``(d_f, alpha_f)`` of the bound ``2 Re{d^H f} + alpha ||f||^2 + const``.

    ``alpha_f = theta^2 / 2 * p_max * (e^H G G^H e)^2`` dominates the largest
    curvature of the smoothed outage along any segment inside the power ball.
    """
    c = e_prev.conj() @ G  # a^H with a = G^H e
    inner = c @ f_prev
    value, slope = _smooth(gamma * sigma2 - (inner.real**2 + inner.imag**2), theta)
    m = (-slope * inner) * c.conj()
    alpha = 0.5 * theta**2 * p_max * np.vdot(c, c).real ** 2
    d = m - alpha * f_prev
    if not with_const:
        return d, alpha
    const = value + alpha * np.vdot(f_prev, f_prev).real - 2.0 * np.vdot(m, f_prev).real
    return d, alpha, const


def e_surrogate_params(f_prev, e_prev, G, theta, gamma, sigma2, with_const=False):
    """Coefficients ``(d_e, alpha_e)`` of the linear bound ``2 Re{d_e^H e} + const`` on S_e."""
    b = G @ f_prev
    inner = np.vdot(b, e_prev)  # f^H G^H e
    value, slope = _smooth(gamma * sigma2 - (inner.real**2 + inner.imag**2), theta)
    m = (-slope * inner) * b
    n_phases = e_prev.size
    alpha = 0.5 * theta**2 * n_phases * np.vdot(b, b).real ** 2
    d = m - alpha * e_prev
    if not with_const:
        return d, alpha
    const = value + 2.0 * n_phases * alpha - 2.0 * np.vdot(m, e_prev).real
    return d, alpha, const


def solve_f_subproblem(sum_d_f, sum_alpha_f, p_max):
    """Global minimizer of ``2 Re{d^H f} + alpha ||f||^2`` over ``||f||^2 <= p_max``."""
    norm2 = np.vdot(sum_d_f, sum_d_f).real
    if norm2 == 0.0:
        return np.zeros_like(sum_d_f)
    if sum_alpha_f > 0 and norm2 / sum_alpha_f**2 <= p_max:
        return -sum_d_f / sum_alpha_f
    return -math.sqrt(p_max / norm2) * sum_d_f


def solve_e_subproblem(sum_d_e, form="separable"):
    """Minimizer of ``2 Re{d^H e}`` over unit-modulus ``e`` with last entry 1.

    ``form="separable"`` returns ``-exp(j angle d_m)`` per entry. ``"rotated"``
    minimizes with the last entry free and then rotates it to 1, giving
    ``exp(j angle(d / d_last))``; both leave the true objective unchanged under a
    common phase, but only the first minimizes the surrogate on S_e.
    """
    d = np.asarray(sum_d_e, dtype=complex)
    if form == "rotated" and d[-1] != 0:
        e = _unit(d / d[-1])
    elif form in ("separable", "rotated"):
        e = _unit(-d)
    else:
        raise ValueError(f"unknown e-update form {form!r}")
    e[-1] = 1.0
    return e


def project_power(x, reference):
    """Rescale ``x`` to the norm of ``reference`` (a feasible precoder)."""
    norm2 = np.vdot(x, x).real
    if norm2 == 0:
        return reference.copy()
    return x * math.sqrt(np.vdot(reference, reference).real / norm2)


def _unit(x):
    # x / |x| entrywise, 1 where x = 0
    mag = np.abs(x)
    return np.divide(x, mag, out=np.ones(x.shape, complex), where=mag > 0)


def project_phases(x, reference=None):
    """Entrywise projection onto unit modulus, last entry pinned to 1."""
    e = _unit(np.asarray(x, dtype=complex))
    e[-1] = 1.0
    return e


@dataclass
class SquaremInfo:
    omega: float
    backtracks: int
    accelerated: bool


def squarem_step(x_prev, one_step_map, projector, objective, max_backtracks=20, paper_signs=False):
    """One safeguarded squared-extrapolation step for the fixed-point map.

    The extrapolated point ``P(x - 2 w j1 + w^2 j2)`` is accepted once it does
    not increase ``objective`` relative to ``x_prev``; otherwise ``w`` moves
    halfway towards -1, where the extrapolation equals the plain two-step
    iterate. After ``max_backtracks`` rejections the plain iterate is returned.
    ``paper_signs`` negates the projected point as in the published listing.
    """
    x1 = one_step_map(x_prev)
    j1 = x1 - x_prev
    if not np.any(j1):
        return x1, SquaremInfo(math.nan, 0, False)
    x2 = one_step_map(x1)
    j2 = x2 - x1 - j1
    norm_j2 = math.sqrt(np.vdot(j2, j2).real)
    if norm_j2 == 0:
        return x2, SquaremInfo(math.nan, 0, False)
    omega = -math.sqrt(np.vdot(j1, j1).real) / norm_j2
    sign = -1.0 if paper_signs else 1.0
    baseline = objective(x_prev)
    for t in range(max_backtracks + 1):
        candidate = sign * projector(x_prev - 2 * omega * j1 + omega**2 * j2, x2)
        if objective(candidate) <= baseline:
            return candidate, SquaremInfo(omega, t, True)
        omega = (omega - 1.0) / 2.0
    return x2, SquaremInfo(omega, max_backtracks, False)


def _single_user_params(params):
    return params.theta, float(params.gamma[0]), float(params.sigma2[0])


def run_smm_outmin(
    scenario,
    init_state,
    stop,
    rng,
    params,
    *,
    squarem=True,
    e_form="separable",
    paper_signs=False,
    precoder="smm",
    track_gap=False,
):
    """SMM-OutMin: alternate SMM precoder and phase updates over a channel stream.

    ``scenario`` supplies ``draw(rng)``, ``p_max`` and ``n_users == 1``;
    ``params`` holds the smoothing constants. ``precoder="smrt"`` replaces the
    precoder update by the normalized running mean of ``G^H e``.
    Returns the final :class:`BeamformingState` and a :class:`RunTrace`.
    """
    if scenario.n_users != 1:
        raise ValueError("SMM-OutMin handles a single user; use SSCA for K > 1")
    theta, gamma, sigma2 = _single_user_params(params)
    p_max = scenario.p_max
    f = np.asarray(init_state.F, complex)[:, 0].copy()
    e = np.asarray(init_state.e, complex).copy()
    n_tx, n_phases = f.size, e.size
    acc = SmmAccumulator.empty(n_tx, n_phases)
    smrt_sum = np.zeros(n_tx, complex)
    history = []
    trace = RunTrace(meta={"theta": theta, "mu": params.mu, "solver": "smm", "precoder": precoder})
    monitor = stop.monitor()
    prev = None

    while True:
        G = scenario.draw(rng)[0]
        start = time.perf_counter_ns()
        n = acc.n + 1

        # precoder block, e fixed at e^{n-1}
        if precoder == "smrt":
            smrt_sum += G.conj().T @ e
            f_new = mrt_columns(smrt_sum[:, None], p_max, rng)[:, 0]
            d_n, alpha_n, c_n = f_surrogate_params(f, e, G, theta, gamma, sigma2, p_max, with_const=True)
        else:
            d_n, alpha_n, c_n = f_surrogate_params(f, e, G, theta, gamma, sigma2, p_max, with_const=True)
            sum_d = acc.sum_d_f + d_n
            sum_alpha = acc.sum_alpha_f + alpha_n

            def f_map(x):
                d_x, alpha_x = f_surrogate_params(x, e, G, theta, gamma, sigma2, p_max)
                return solve_f_subproblem(acc.sum_d_f + d_x, acc.sum_alpha_f + alpha_x, p_max)

            def f_obj(x):
                return 2.0 * np.vdot(sum_d, x).real + sum_alpha * np.vdot(x, x).real

            if squarem:
                f_new, _ = squarem_step(f, f_map, project_power, f_obj, paper_signs=paper_signs)
            else:
                f_new = f_map(f)
        acc.sum_d_f += d_n
        acc.sum_alpha_f += alpha_n
        acc.sum_const_f += c_n
        acc.n = n
        obj_f = (
            acc.sum_const_f + 2.0 * np.vdot(acc.sum_d_f, f_new).real + acc.sum_alpha_f * np.vdot(f_new, f_new).real
        ) / n

        extra = {}
        if track_gap:
            history.append(G.conj().T @ e)
            a = np.asarray(history)
            true_avg = sigmoid(gamma * sigma2 - np.abs(a.conj() @ f_new) ** 2, theta).mean()
            extra["gap"] = obj_f - true_avg
        f = f_new

        # phase block, f fixed at f^n
        if n_phases > 1:
            d_n, _, c_n = e_surrogate_params(f, e, G, theta, gamma, sigma2, with_const=True)
            sum_d_e = acc.sum_d_e + d_n

            def e_map(x):
                d_x, _ = e_surrogate_params(f, x, G, theta, gamma, sigma2)
                return solve_e_subproblem(acc.sum_d_e + d_x, e_form)

            def e_obj(x):
                return 2.0 * np.vdot(sum_d_e, x).real

            if squarem:
                e_new, _ = squarem_step(e, e_map, project_phases, e_obj, paper_signs=paper_signs)
            else:
                e_new = e_map(e)
            acc.sum_d_e += d_n
            acc.sum_const_e += c_n
            e = e_new
            obj_e = (acc.sum_const_e + 2.0 * np.vdot(acc.sum_d_e, e).real) / n
        else:
            obj_e = obj_f

        trace.record(obj_f, obj_e, wall_ns=time.perf_counter_ns() - start, **extra)
        change = math.inf if prev is None else max(abs(obj_f - prev[0]), abs(obj_e - prev[1]))
        prev = (obj_f, obj_e)
        if monitor.update(change):
            break

    trace.meta["accumulator"] = acc
    return BeamformingState(f[:, None], e), trace
