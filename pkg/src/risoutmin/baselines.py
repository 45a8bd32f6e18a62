"""Comparison schemes: SMRT, no RIS, no blockage awareness, imperfect CSI and SAA."""

from __future__ import annotations

import dataclasses
import enum
import time

import numpy as np

from .channel import CSI_ERROR_STREAM, stream_rng
from .objective import BeamformingState, mrt_columns, sigmoid, sigmoid_slope
from .smm import project_phases, solve_e_subproblem, solve_f_subproblem
from .trace import RunTrace


class SchemeId(str, enum.Enum):
    SMM = "smm"
    SSCA = "ssca"
    SMRT = "smrt"
    NORIS = "noris"
    NONROBUST = "nonrobust"
    IMPERFECT_CSI = "imperfect_csi"
    SAA = "saa"


def smrt_precoder(acc_channels, p_max, rng=None):
    """Normalized running mean of the matched filters ``G_k^H e``.

    ``acc_channels`` is the running mean (or sum) as an ``(N,)`` vector or
    ``(N, K)`` matrix; each user gets ``p_max / K`` of the power.
    """
    a = np.asarray(acc_channels, dtype=complex)
    if a.ndim == 1:
        return mrt_columns(a[:, None], p_max, rng)[:, 0]
    return mrt_columns(a, p_max, rng)


def make_noris_scenario(scenario):
    """Drop every RIS so that ``G_k`` is the single row ``h_bk^H``."""
    return scenario.replace(bs_ris=(), ris_user=())


def make_nonrobust_scenario(scenario):
    """Training view of ``scenario`` that ignores blockage (``p_block = 0``)."""
    return scenario.replace(p_block=np.zeros_like(scenario.p_block))


def _perturb(link, rng, err):
    def shift(value):
        if value is None:
            return None
        value = np.asarray(value, dtype=float)
        out = value + err * rng.choice((-1.0, 1.0), size=value.shape)
        return float(out) if out.ndim == 0 else out

    return dataclasses.replace(
        link,
        los_az=shift(link.los_az),
        los_el=shift(link.los_el),
        cluster_az=shift(link.cluster_az),
        cluster_el=shift(link.cluster_el),
        los_aoa_az=shift(link.los_aoa_az),
        los_aoa_el=shift(link.los_aoa_el),
        cluster_aoa_az=shift(link.cluster_aoa_az),
        cluster_aoa_el=shift(link.cluster_aoa_el),
    )


def make_imperfect_csi_scenario(scenario, err, seed=0):
    """Training view whose central angles are off by ``err`` radians.

    Every central angle gets its own random sign, drawn once from the CSI-error
    stream of ``seed`` so the error is fixed across iterations.
    """
    if err == 0:
        return scenario
    rng = stream_rng(seed, CSI_ERROR_STREAM)
    return scenario.replace(
        direct=tuple(_perturb(link, rng, err) for link in scenario.direct),
        bs_ris=tuple(_perturb(link, rng, err) for link in scenario.bs_ris),
        ris_user=tuple(tuple(_perturb(link, rng, err) for link in row) for row in scenario.ris_user),
    )


def _saa_terms(f, e, Gs, theta, gamma, sigma2):
    a = np.einsum("smn,m->sn", Gs.conj(), e)  # rows G_s^H e
    inner = a.conj() @ f
    x = gamma * sigma2 - np.abs(inner) ** 2
    return a, inner, x


def saa_objective(f, e, Gs, params):
    """Sample-average smoothed outage over a fixed channel set."""
    _, _, x = _saa_terms(f, e, Gs, params.theta, params.gamma[0], params.sigma2[0])
    return float(sigmoid(x, params.theta).mean())


def run_saa(scenario, init_state, n_samples, stop, rng, params):
    """Deterministic MM on ``n_samples`` pre-drawn channels.

    Every iteration re-expands the precoder and phase bounds of all samples at
    the current iterate and applies the same closed forms as SMM. The traced
    objective is the true sample-average smoothed outage, which never increases.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    if scenario.n_users != 1:
        raise ValueError("SAA baseline handles a single user")
    theta, gamma, sigma2 = params.theta, float(params.gamma[0]), float(params.sigma2[0])
    p_max = scenario.p_max
    Gs = scenario.draw_many(rng, n_samples)[:, 0]
    f = np.asarray(init_state.F, complex)[:, 0].copy()
    e = np.asarray(init_state.e, complex).copy()
    n_phases = e.size
    trace = RunTrace(meta={"theta": theta, "mu": params.mu, "solver": "saa", "n_samples": n_samples})
    monitor = stop.monitor()
    prev = saa_objective(f, e, Gs, params)

    while True:
        start = time.perf_counter_ns()
        a, inner, x = _saa_terms(f, e, Gs, theta, gamma, sigma2)
        m = -(sigmoid_slope(x, theta) * inner)[:, None] * a
        alpha = 0.5 * theta**2 * p_max * np.einsum("sn,sn->s", a.conj(), a).real ** 2
        f = solve_f_subproblem((m - alpha[:, None] * f).sum(axis=0), alpha.sum(), p_max)

        if n_phases > 1:
            b = Gs @ f  # (S, UM+1)
            inner = b.conj() @ e
            x = gamma * sigma2 - np.abs(inner) ** 2
            m = -(sigmoid_slope(x, theta) * inner)[:, None] * b
            alpha = 0.5 * theta**2 * n_phases * np.einsum("sm,sm->s", b.conj(), b).real ** 2
            e = project_phases(solve_e_subproblem((m - alpha[:, None] * e).sum(axis=0)))
        wall = time.perf_counter_ns() - start

        obj = saa_objective(f, e, Gs, params)
        trace.record(obj, obj, wall_ns=wall)
        change = abs(obj - prev)
        prev = obj
        if monitor.update(change):
            break
    return BeamformingState(f[:, None], e), trace
