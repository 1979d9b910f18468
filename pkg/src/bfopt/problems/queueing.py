"""Single-server exponential queue with a service-rate penalty.

The decision variable is the service rate mu (d = 1).  One replication
simulates exponential arrivals (rate lam) and services (rate mu) over a
fixed time horizon via the Lindley recursion; the objective draw is the
mean sojourn of customers completing within the horizon (after a warmup
count) plus the capacity penalty 0.1 * mu^2.  The LF draw reads the same
event stream truncated at a fraction of the horizon, so one HF replication
yields the LF replication for free and a paired call is charged w_h only.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..oracle import BiFidelityOracle

PENALTY = 0.1


@dataclass
class QueuePath:
    """Instrumented single replication: per-customer event log."""

    arrivals: np.ndarray
    sojourns: np.ndarray
    departures: np.ndarray


def simulate_queue_path(mu: float, lam: float, horizon: float,
                        rng: np.random.Generator) -> QueuePath:
    """One replication.  Draws come in fixed-size chunks whose pattern
    depends only on (lam, horizon), so common random numbers stay aligned
    across different service rates on the same stream."""
    chunk = int(math.ceil(lam * horizon + 6.0 * math.sqrt(lam * horizon) + 64))
    inter = []
    unit_services = []
    total = 0.0
    while True:
        a = rng.exponential(1.0 / lam, chunk)
        s = rng.exponential(1.0, chunk)  # unit-mean; scaled by 1/mu at use
        inter.append(a)
        unit_services.append(s)
        total += float(a.sum())
        if total > horizon:
            break
    inter = np.concatenate(inter)
    unit_services = np.concatenate(unit_services)
    arrivals = np.cumsum(inter)
    n = int(np.searchsorted(arrivals, horizon, side="right"))
    if n == 0:
        empty = np.empty(0)
        return QueuePath(empty, empty, empty)
    arrivals = arrivals[:n]
    services = unit_services[:n] / mu
    # Lindley waiting times via prefix minima
    if n > 1:
        u = services[:-1] - inter[1:n]
        prefix = np.concatenate([[0.0], np.cumsum(u)])
    else:
        prefix = np.zeros(1)
    wait = prefix - np.minimum.accumulate(prefix)
    sojourns = wait + services
    return QueuePath(arrivals, sojourns, arrivals + sojourns)


def mean_sojourn(path: QueuePath, horizon: float, warmup: int) -> float:
    """Mean sojourn of completed customers past the warmup count (0 if none)."""
    if path.arrivals.size == 0:
        return 0.0
    done = path.departures <= horizon
    done[:warmup] = False
    if not np.any(done):
        return 0.0
    return float(path.sojourns[done].mean())


class QueueProblem(BiFidelityOracle):
    """Registry problem ``mm1``: minimize sojourn time plus 0.1 * mu^2."""

    lf_free_with_hf = True

    def __init__(self, lam: float = 1.0, ratio: float = 0.3,
                 horizon: float = 1000.0, warmup: int = 100):
        if lam <= 0 or not (0.0 < ratio < 1.0):
            raise ValueError("need lam > 0 and ratio in (0, 1)")
        self.lam = float(lam)
        self.ratio = float(ratio)
        self.horizon = float(horizon)
        self.horizon_l = ratio * float(horizon)
        self.warmup = int(warmup)
        self.warmup_l = int(round(warmup * ratio))
        self.dim = 1
        self.lower = np.array([self.lam + 0.1])
        self.upper = np.array([self.lam + 10.0])
        self.w_h = 1.0
        self.w_l = float(ratio)
        self.name = f"mm1?lambda={lam:g}&ratio={ratio:g}"

    def simulate(self, mu: float, rng: np.random.Generator) -> tuple:
        """(hf_draw, lf_draw) from one event stream; LF is the exact prefix."""
        path = simulate_queue_path(mu, self.lam, self.horizon, rng)
        hf = mean_sojourn(path, self.horizon, self.warmup) + PENALTY * mu * mu
        lf = mean_sojourn(path, self.horizon_l, self.warmup_l) + PENALTY * mu * mu
        return hf, lf

    # -- oracle contract -----------------------------------------------------

    def draw_joint(self, x, rng):
        return self.simulate(float(x[0]), rng)

    def draw_lf(self, x, rng):
        mu = float(x[0])
        path = simulate_queue_path(mu, self.lam, self.horizon_l, rng)
        return mean_sojourn(path, self.horizon_l, self.warmup_l) + PENALTY * mu * mu

    @property
    def x0(self) -> np.ndarray:
        return np.array([self.lam + 2.0])

    @property
    def delta_max(self) -> float:
        return 5.0

    def true_objective(self, x):
        """Steady-state objective 1/(mu - lam) + 0.1 mu^2 (None if unstable)."""
        mu = float(x[0])
        if mu <= self.lam:
            return None
        return 1.0 / (mu - self.lam) + PENALTY * mu * mu

    def reference_optimum(self):
        from scipy.optimize import brentq

        mu = brentq(lambda m: 0.2 * m * (m - self.lam) ** 2 - 1.0,
                    self.lam + 1e-9, self.lam + 10.0)
        return np.array([mu]), 1.0 / (mu - self.lam) + PENALTY * mu * mu


def mm1_simulate(mu: float, problem: QueueProblem, rng: np.random.Generator):
    """(hf_draw, lf_draw) convenience wrapper."""
    return problem.simulate(mu, rng)
