"""Monte Carlo outage/effective-rate estimation, scheme training and sweeps."""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .baselines import (
    SchemeId,
    make_imperfect_csi_scenario,
    make_noris_scenario,
    make_nonrobust_scenario,
    run_saa,
)
from .channel import EVAL_STREAM, TRAIN_STREAM, init_rng, realize_scenario, stream_rng
from .config import RunConfig
from .objective import sinr
from .smm import run_smm_outmin
from .ssca import StepSizeRule, initialize, run_ssca_outmin
from .trace import StoppingRule

SWEEP_AXES = {"p_block": "p_block", "M": "elems_per_ris", "N": "n_tx", "K": "n_users"}
SWEEP_COLUMNS = ("axis", "value", "scheme", "max_outage", "min_eff_rate", "std_err")


@dataclass
class EvalReport:
    """Monte Carlo estimates for one beamforming state.

    ``outage_std_err`` is the binomial standard error of each user's outage
    estimate; ``std_err`` is that of the worst user.
    """

    outage: list
    max_outage: float
    eff_rate: list
    min_eff_rate: float
    outage_std_err: list
    std_err: float
    n_samples: int
    seed: int | None

    def to_dict(self):
        return asdict(self)


def evaluate_sinr(sinr_values, gamma, seed=None):
    """Summarize an ``(n, K)`` array of SINR draws against thresholds ``gamma``."""
    sinr_values = np.atleast_2d(np.asarray(sinr_values, dtype=float))
    n = sinr_values.shape[0]
    if n == 0:
        raise ValueError("n_samples must be positive")
    gamma = np.broadcast_to(np.asarray(gamma, dtype=float), sinr_values.shape[1:])
    ok = sinr_values >= gamma
    outage = (sinr_values <= gamma).mean(axis=0)
    rate = np.where(ok, np.log2(1.0 + sinr_values), 0.0).mean(axis=0)
    std_err = np.sqrt(outage * (1.0 - outage) / n)
    worst = int(np.argmax(outage))
    return EvalReport(
        outage=outage.tolist(),
        max_outage=float(outage[worst]),
        eff_rate=rate.tolist(),
        min_eff_rate=float(rate.min()),
        outage_std_err=std_err.tolist(),
        std_err=float(std_err[worst]),
        n_samples=int(n),
        seed=seed,
    )


def sample_sinr(state, scenario, n_samples, rng, batch=250):
    """``(n_samples, K)`` SINR draws of ``state`` on fresh channels."""
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    values = []
    remaining = n_samples
    while remaining:
        size = min(batch, remaining)
        G = scenario.draw_many(rng, size)
        values.append(sinr(state, G, scenario.noise_power))
        remaining -= size
    return np.concatenate(values)


def monte_carlo_eval(state, scenario, n_samples, rng, seed=None, batch=250):
    """Outage and effective rate of ``state`` over ``n_samples`` fresh channels."""
    return evaluate_sinr(sample_sinr(state, scenario, n_samples, rng, batch), scenario.gamma, seed)


def paired_outage_gap(outage_a, outage_b):
    """Mean of ``b - a`` over paired outage indicators and its standard error.

    Both arrays hold the worst-user outage events on the same channel draws, so
    the error reflects only the discordant pairs.
    """
    diff = np.asarray(outage_b, dtype=float) - np.asarray(outage_a, dtype=float)
    n = diff.size
    if n < 2:
        raise ValueError("need at least two paired samples")
    return float(diff.mean()), float(diff.std(ddof=1) / math.sqrt(n))


def _pick_solver(scheme, n_users):
    if scheme == SchemeId.SSCA or (n_users > 1 and scheme != SchemeId.SAA):
        return "ssca"
    if scheme == SchemeId.SAA:
        if n_users > 1:
            raise ValueError("the SAA baseline is single-user")
        return "saa"
    return "smm"


def train_scheme(scenario, scheme, run, seed):
    """Train ``scheme`` on its view of ``scenario``.

    Returns ``(state, trace, eval_scenario)``; the evaluation scenario keeps the
    true blockage law and angles and only differs for the no-RIS scheme.
    """
    scheme = SchemeId(scheme)
    cfg = scenario.config
    train = scenario
    if scheme == SchemeId.NORIS:
        train = make_noris_scenario(scenario)
    elif scheme == SchemeId.NONROBUST:
        train = make_nonrobust_scenario(scenario)
    elif scheme == SchemeId.IMPERFECT_CSI:
        train = make_imperfect_csi_scenario(scenario, cfg.csi_angle_error, seed)
    eval_scenario = train if scheme == SchemeId.NORIS else scenario

    rng = stream_rng(seed, TRAIN_STREAM)
    state, params = initialize(train, rng, run.init_trials, cfg.theta, cfg.mu, trial_rng=init_rng(seed))
    stop = StoppingRule(run.tol, run.patience, run.max_iter)
    precoder = "smrt" if scheme == SchemeId.SMRT else None
    solver = _pick_solver(scheme, scenario.n_users)
    if solver == "saa":
        state, trace = run_saa(train, state, run.saa_samples, stop, rng, params)
    elif solver == "smm":
        state, trace = run_smm_outmin(train, state, stop, rng, params, precoder=precoder or "smm")
    else:
        rule = StepSizeRule()
        state, trace = run_ssca_outmin(
            train, state, stop, rule, rule, rng, params, tau=cfg.tau, precoder=precoder or "ssca"
        )
    trace.meta.update(scheme=scheme.value, seed=seed)
    return state, trace, eval_scenario


def run_once(run, scheme=None, scenario=None):
    """Train one scheme and evaluate it on the paired evaluation stream."""
    scheme = scheme or run.scheme
    if scenario is None:
        scenario = realize_scenario(run.scenario, run.seed)
    state, trace, eval_scenario = train_scheme(scenario, scheme, run, run.seed)
    report = monte_carlo_eval(state, eval_scenario, run.mc_samples, stream_rng(run.seed, EVAL_STREAM), run.seed)
    return state, trace, report


def _cell(job):
    run, axis, value, scheme, reps = job
    reports = []
    for r in range(reps):
        rep_run = _with_seed(run, run.seed + r)
        reports.append(run_once(rep_run, scheme)[2])
    return _pool(axis, value, scheme, reports)


def _with_seed(run, seed):
    return RunConfig(**{**run.__dict__, "seed": seed})


def _pool(axis, value, scheme, reports):
    n = sum(r.n_samples for r in reports)
    outage = np.sum([np.asarray(r.outage) * r.n_samples for r in reports], axis=0) / n
    rate = np.sum([np.asarray(r.eff_rate) * r.n_samples for r in reports], axis=0) / n
    worst = int(np.argmax(outage))
    p = float(outage[worst])
    return {
        "axis": axis,
        "value": value,
        "scheme": scheme,
        "max_outage": p,
        "min_eff_rate": float(rate.min()),
        "std_err": math.sqrt(p * (1.0 - p) / n),
        "eval_seeds": [r.seed for r in reports],
    }


def worker_count():
    """Worker cap from ``RIS_OUTMIN_THREADS`` (default 1, sequential)."""
    try:
        return max(1, int(os.environ.get("RIS_OUTMIN_THREADS", "1")))
    except ValueError:
        return 1


def sweep(run, axis, values, schemes, reps=1, workers=None):
    """Train and evaluate every ``(value, scheme)`` cell; one row per cell.

    All cells of one repetition share the scenario seed and hence the
    evaluation stream, so schemes are compared on identical channels.
    """
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {axis!r}; expected one of {sorted(SWEEP_AXES)}")
    if reps < 1:
        raise ValueError("reps must be positive")
    jobs = []
    for value in values:
        field = SWEEP_AXES[axis]
        value = float(value) if axis == "p_block" else int(round(value))
        scenario = run.scenario.replace(**{field: value})
        scenario.validate()
        cell_run = RunConfig(**{**run.__dict__, "scenario": scenario})
        for scheme in schemes:
            jobs.append((cell_run, axis, value, SchemeId(scheme).value, reps))
    workers = worker_count() if workers is None else workers
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            return list(pool.map(_cell, jobs))
    return [_cell(job) for job in jobs]
