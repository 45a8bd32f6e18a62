"""Stopping rules and per-iteration run traces shared by the solvers."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np


@dataclass
class StoppingRule:
    """Stop once the monitored change stays below ``tol`` for ``patience``
    consecutive iterations, or after ``max_iter`` iterations."""

    tol: float = 1e-4
    patience: int = 50
    max_iter: int = 1000

    def __post_init__(self):
        if self.max_iter < 1 or self.patience < 1 or self.tol < 0:
            raise ValueError("invalid stopping rule")

    def monitor(self):
        return _Monitor(self)


class _Monitor:
    def __init__(self, rule):
        self.rule = rule
        self.quiet = 0
        self.n = 0

    def update(self, change):
        self.n += 1
        self.quiet = self.quiet + 1 if change < self.rule.tol else 0
        return self.quiet >= self.rule.patience or self.n >= self.rule.max_iter


TRACE_COLUMNS = ("iter", "objective", "step_size_f", "step_size_e", "wall_ns")


@dataclass
class RunTrace:
    """Per-iteration diagnostics of one solver run.

    ``objective_f``/``objective_e`` are the averaged surrogate values after the
    precoder and phase updates. ``gap`` holds the averaged-surrogate minus
    averaged-objective statistic (SMM, when tracked) and ``direction_norm`` the
    distance ``||F_hat^n - F^{n-1}||`` (SSCA).
    """

    objective_f: list = field(default_factory=list)
    objective_e: list = field(default_factory=list)
    step_size_f: list = field(default_factory=list)
    step_size_e: list = field(default_factory=list)
    wall_time_ns: list = field(default_factory=list)
    gap: list = field(default_factory=list)
    direction_norm: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.objective_f)

    def record(self, objective_f, objective_e, step_f=math.nan, step_e=math.nan, wall_ns=0, **extra):
        self.objective_f.append(float(objective_f))
        self.objective_e.append(float(objective_e))
        self.step_size_f.append(float(step_f))
        self.step_size_e.append(float(step_e))
        self.wall_time_ns.append(int(wall_ns))
        for key, value in extra.items():
            getattr(self, key).append(float(value))

    def rows(self):
        for n in range(len(self)):
            yield (
                n + 1,
                self.objective_f[n],
                self.step_size_f[n],
                self.step_size_e[n],
                self.wall_time_ns[n],
            )

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(TRACE_COLUMNS)
            for it, obj, xf, xe, ns in self.rows():
                writer.writerow([it, repr(obj), repr(xf), repr(xe), ns])

    def mean_wall_ns(self):
        return float(np.mean(self.wall_time_ns)) if self.wall_time_ns else math.nan


def moving_average(values, window):
    values = np.asarray(values, dtype=float)
    if values.size < window:
        return values.copy()
    kernel = np.ones(window) / window
    return np.convolve(values, kernel, mode="valid")
