"""Baseline solvers: Nelder-Mead simplex and ADAM on finite differences.

Both use a fixed per-evaluation HF sample size and share the cost ledger
with the trust-region solvers, so budget accounting is identical across
the comparison set.
"""
from __future__ import annotations

import math

import numpy as np

from ..oracle import BudgetExceededError
from .base import IterationRecord, SolverBase


class NelderMead(SolverBase):
    """Standard reflect/expand/contract/shrink simplex with noisy means."""

    name = "nelder-mead"
    alpha_r = 1.0
    gamma_e = 2.0
    beta_c = 0.5
    delta_s = 0.5

    def _setup(self, x0: np.ndarray) -> None:
        d = self.oracle.dim
        if self.cfg.nm_initial_step is not None:
            steps = np.full(d, float(self.cfg.nm_initial_step))
        else:
            steps = 0.05 * (self.oracle.upper - self.oracle.lower)
        self.vertices = [x0.copy()]
        for i in range(d):
            v = x0.copy()
            v[i] += steps[i]
            self.vertices.append(self.clip(v))
        self.values = None
        self.k = 1

    def _f(self, x: np.ndarray) -> float:
        s = self.sampler(x)
        s.ensure_hf(max(self.cfg.nm_sample_size, s.n_hf))
        return s.acc.cmc_value()

    def step(self) -> None:
        try:
            self._iterate()
        except BudgetExceededError:
            self.finished = True
        best = self.vertices[0]
        est = self.values[0] if self.values is not None else math.nan
        rec = IterationRecord(k=self.k, branch="simplex",
                              incumbent_after=tuple(best),
                              cumulative_cost=self.ctx.ledger.total_cost,
                              incumbent_estimate=est)
        self.history.records.append(rec)
        self.k += 1

    def _order(self) -> None:
        idx = np.argsort(self.values)
        self.vertices = [self.vertices[i] for i in idx]
        self.values = [self.values[i] for i in idx]

    def _iterate(self) -> None:
        if self.values is None:
            self.values = [self._f(v) for v in self.vertices]
            self._order()
            self.record_move(self.vertices[0], self.values[0])
            return
        prev_best = tuple(self.vertices[0])
        centroid = np.mean(self.vertices[:-1], axis=0)
        worst = self.vertices[-1]
        xr = self.clip(centroid + self.alpha_r * (centroid - worst))
        fr = self._f(xr)
        if self.values[0] <= fr < self.values[-2]:
            self.vertices[-1], self.values[-1] = xr, fr
        elif fr < self.values[0]:
            xe = self.clip(centroid + self.gamma_e * (centroid - worst))
            fe = self._f(xe)
            if fe < fr:
                self.vertices[-1], self.values[-1] = xe, fe
            else:
                self.vertices[-1], self.values[-1] = xr, fr
        else:
            xc = self.clip(centroid + self.beta_c * (worst - centroid))
            fc = self._f(xc)
            if fc < self.values[-1]:
                self.vertices[-1], self.values[-1] = xc, fc
            else:
                best = self.vertices[0]
                for i in range(1, len(self.vertices)):
                    self.vertices[i] = self.clip(
                        best + self.delta_s * (self.vertices[i] - best))
                    self.values[i] = self._f(self.vertices[i])
        self._order()
        if tuple(self.vertices[0]) != prev_best:
            self.record_move(self.vertices[0], self.values[0])


class AdamFd(SolverBase):
    """ADAM with central finite-difference gradient estimates."""

    name = "adam-fd"

    def _setup(self, x0: np.ndarray) -> None:
        self.x = x0.copy()
        self.m = np.zeros_like(self.x)
        self.v = np.zeros_like(self.x)
        self.t = 0
        if self.cfg.adam_fd_step is not None:
            self.h = float(self.cfg.adam_fd_step)
        else:
            self.h = 0.01 * float(np.min(self.oracle.upper - self.oracle.lower))
        self.k = 1

    def _f(self, x: np.ndarray) -> float:
        s = self.sampler(x)
        s.ensure_hf(max(self.cfg.adam_sample_size, s.n_hf))
        return s.acc.cmc_value()

    def gradient_estimate(self, x: np.ndarray) -> np.ndarray:
        g = np.zeros_like(x)
        for i in range(x.size):
            xp = x.copy()
            xm = x.copy()
            xp[i] = min(x[i] + self.h, self.oracle.upper[i])
            xm[i] = max(x[i] - self.h, self.oracle.lower[i])
            span = xp[i] - xm[i]
            if span <= 0:
                g[i] = 0.0
                continue
            g[i] = (self._f(xp) - self._f(xm)) / span
        return g

    def update_direction(self, grad: np.ndarray) -> np.ndarray:
        """One ADAM update; returns the (bias-corrected, clipped) step."""
        cfg = self.cfg
        self.t += 1
        self.m = cfg.adam_beta1 * self.m + (1 - cfg.adam_beta1) * grad
        self.v = cfg.adam_beta2 * self.v + (1 - cfg.adam_beta2) * grad * grad
        m_hat = self.m / (1 - cfg.adam_beta1 ** self.t)
        v_hat = self.v / (1 - cfg.adam_beta2 ** self.t)
        return -cfg.adam_lr * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)

    def step(self) -> None:
        try:
            grad = self.gradient_estimate(self.x)
            move = self.update_direction(grad)
            self.x = self.clip(self.x + move)
            est = self._f(self.x)
            self.record_move(self.x, est)
        except BudgetExceededError:
            self.finished = True
            est = math.nan
        rec = IterationRecord(k=self.k, branch="adam",
                              incumbent_after=tuple(self.x),
                              cumulative_cost=self.ctx.ledger.total_cost,
                              incumbent_estimate=est)
        self.history.records.append(rec)
        self.k += 1
