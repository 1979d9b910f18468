"""Function estimation: streaming moments, BFMC variance law, adaptive sampling.

The bi-fidelity estimator at a point x with n paired draws, v total LF draws
and coefficient c is

    F_bf(x, n, v, c) = mean_h(n) - c * (mean_l over the n paired draws
                                        - mean_l over all v draws),

an unbiased HF estimate for any c.  ``bas`` drives the adaptive loop that
chooses between this estimator and the crude HF mean, growing (n, v) until
the plug-in variance drops below kappa^2 * delta^4 / lambda.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .oracle import BudgetExceededError, RunContext

# Correlation estimates are clamped away from +-1 before planning; finite
# sample cross-moments can exceed Cauchy-Schwarz numerically.
RHO_CLAMP = 0.999


class DegenerateLfError(ValueError):
    """LF variance estimate is zero; the caller must fall back to CMC."""


class EmptyAccumulatorError(ValueError):
    pass


class MomentAccumulator:
    """Streaming one-pass moments for one design point.

    Tracks three sections: all HF draws, the paired (hf, lf) subset, and all
    LF draws (paired ones plus fresh extras).  Updates use Welford-style
    recurrences; variances divide by the count, matching the plug-in
    convention of the sampling rules.
    """

    def __init__(self):
        self.n_hf = 0
        self.mean_h = 0.0
        self.m2_h = 0.0
        self.n_paired = 0
        self.mean_h_paired = 0.0
        self.mean_l_paired = 0.0
        self.m2_hl = 0.0
        self.v_lf_total = 0
        self.mean_l = 0.0
        self.m2_l = 0.0

    # -- updates -----------------------------------------------------------

    def add_hf(self, h: float) -> None:
        self.n_hf += 1
        d = h - self.mean_h
        self.mean_h += d / self.n_hf
        self.m2_h += d * (h - self.mean_h)

    def _add_lf_any(self, l: float) -> None:
        self.v_lf_total += 1
        d = l - self.mean_l
        self.mean_l += d / self.v_lf_total
        self.m2_l += d * (l - self.mean_l)

    def _add_pair_section(self, h: float, l: float) -> None:
        self.n_paired += 1
        dh = h - self.mean_h_paired
        self.mean_h_paired += dh / self.n_paired
        dl = l - self.mean_l_paired
        self.mean_l_paired += dl / self.n_paired
        # cross co-moment uses the pre-update h deviation, post-update l mean
        self.m2_hl += dh * (l - self.mean_l_paired)

    def add_paired(self, h: float, l: float) -> None:
        self.add_hf(h)
        self._add_pair_section(h, l)
        self._add_lf_any(l)

    def complete_pair(self, h: float, l: float) -> None:
        """Attach the LF half to an HF draw already counted in ``add_hf``."""
        self._add_pair_section(h, l)
        self._add_lf_any(l)

    def add_lf_extra(self, l: float) -> None:
        self._add_lf_any(l)

    # -- estimates ----------------------------------------------------------

    @property
    def var_h(self) -> float:
        return self.m2_h / self.n_hf if self.n_hf >= 2 else 0.0

    @property
    def sd_h(self) -> float:
        return math.sqrt(max(self.var_h, 0.0))

    @property
    def var_l(self) -> float:
        return self.m2_l / self.v_lf_total if self.v_lf_total >= 2 else 0.0

    @property
    def cov_hl(self) -> float:
        return self.m2_hl / self.n_paired if self.n_paired >= 2 else 0.0

    @property
    def cov_hl_clamped(self) -> float:
        bound = RHO_CLAMP * math.sqrt(max(self.var_h * self.var_l, 0.0))
        return min(max(self.cov_hl, -bound), bound)

    def cmc_value(self) -> float:
        if self.n_hf < 1:
            raise EmptyAccumulatorError("no HF draws")
        return self.mean_h

    def bfmc_value(self, c: float) -> float:
        if self.n_paired != self.n_hf:
            raise RuntimeError("bi-fidelity estimate requires fully paired HF draws")
        return self.mean_h - c * (self.mean_l_paired - self.mean_l)


def cmc_mean(acc: MomentAccumulator) -> float:
    """Crude Monte Carlo estimate: plain mean of the HF draws."""
    return acc.cmc_value()


def var_bfmc(sigma2_h: float, sigma2_l: float, sigma_hl: float,
             n: int, v: int, c: float) -> float:
    """Variance of the bi-fidelity estimator at sample sizes (n, v), coeff c."""
    if n < 1 or v < 1:
        raise ValueError("sample sizes must be positive")
    m = max(n, v)
    return (sigma2_h / n
            + c * c * (1.0 / n + 1.0 / v - 2.0 / m) * sigma2_l
            + 2.0 * c * (1.0 / m - 1.0 / n) * sigma_hl)


def optimal_coefficient(sigma2_l: float, sigma_hl: float) -> float:
    """Variance-minimizing coefficient for v > n: the LF regression slope."""
    if sigma2_l <= 0.0:
        raise DegenerateLfError("zero LF variance")
    return sigma_hl / sigma2_l


def predicted_cmc_size(sigma_hat_h: float, kappa: float, lam: float,
                       delta: float) -> int:
    """Smallest n with sigma_hat_h / sqrt(n) <= kappa * delta^2 / sqrt(lam)."""
    if delta <= 0.0:
        raise ValueError("delta must be positive")
    target = kappa * kappa * delta ** 4 / lam
    if sigma_hat_h <= 0.0 or target <= 0.0:
        return 1
    return max(1, math.ceil(sigma_hat_h * sigma_hat_h / target - 1e-12))


@dataclass
class BfmcPlan:
    """Projected sample sizes and coefficient from the allocation problem."""

    n_star: int
    v_star: int
    c_star: float
    feasible: bool = True

    def cost(self, w_h: float, w_l: float) -> float:
        if not self.feasible:
            return math.inf
        return w_h * self.n_star + w_l * self.v_star


SENTINEL_PLAN = BfmcPlan(n_star=0, v_star=0, c_star=0.0, feasible=False)


@dataclass
class EstimateRecord:
    """A function estimate with its method tag and plug-in variance."""

    value: float
    method: str  # "CMC" or "BFMC"
    n: int
    v: int
    c: float
    plug_in_variance: float
    truncated: bool = False


@dataclass
class SamplingConfig:
    """Per-iteration sampling parameters for the adaptive loop."""

    kappa: float
    lambda_k: float
    sigma0: float
    s_h: int
    s_l: int
    w_h: float
    w_l: float

    def __post_init__(self):
        if self.kappa <= 0 or self.sigma0 <= 0 or self.lambda_k < 2:
            raise ValueError("need kappa > 0, sigma0 > 0, lambda_k >= 2")
        if not (1 <= self.s_h < self.s_l):
            raise ValueError("need 1 <= s_h < s_l")

    def variance_target(self, delta: float) -> float:
        return self.kappa ** 2 * delta ** 4 / self.lambda_k

    def floor_n(self, delta: float) -> int:
        return max(1, math.ceil(self.sigma0 ** 2 * self.lambda_k
                                / (self.kappa ** 2 * delta ** 4) - 1e-12))


def solve_bfmc_plan(acc: MomentAccumulator, cfg: SamplingConfig, delta: float,
                    n_cap: Optional[int] = None) -> BfmcPlan:
    """Minimize projected cost w_h*n + w_l*v subject to the variance target.

    Substituting the optimal coefficient gives Var(n, v) = a/n + b/v with
    a = sigma2_h (1 - rho^2) and b = sigma2_h rho^2, so the continuous
    optimum has ratio v/n = sqrt((w_h/w_l) rho^2 / (1 - rho^2)).  The
    interior solution is rounded up and repaired against the bounds
    n >= n_hf, v >= max(v_current, n + 1); a coarse log grid backstops the
    degenerate corners.
    """
    sigma2_h = acc.var_h
    sigma2_l = acc.var_l
    if acc.n_paired < 2 or acc.v_lf_total <= acc.n_paired:
        return SENTINEL_PLAN
    if not (sigma2_l > 0.0 and np.isfinite(sigma2_l)) or sigma2_h <= 0.0:
        return SENTINEL_PLAN
    raw_rho = acc.cov_hl / math.sqrt(sigma2_h * sigma2_l)
    if abs(raw_rho) >= 1.0:
        return SENTINEL_PLAN
    rho = min(max(raw_rho, -RHO_CLAMP), RHO_CLAMP)
    c_star = optimal_coefficient(sigma2_l, acc.cov_hl_clamped)

    tau = cfg.variance_target(delta)
    if tau <= 0.0:
        return SENTINEL_PLAN
    a = sigma2_h * (1.0 - rho * rho)
    b = sigma2_h * rho * rho

    n_lo = max(acc.n_hf, 1)
    n_hi = max(n_lo, n_cap) if n_cap is not None else max(n_lo, math.ceil(sigma2_h / tau))
    v_lo = acc.v_lf_total

    def min_feasible_v(n: int) -> Optional[int]:
        rem = tau - a / n
        if b <= 0.0:
            v_need = 0
        elif rem <= 0.0:
            return None
        else:
            v_need = math.ceil(b / rem - 1e-12)
        return max(v_lo, n + 1, v_need)

    candidates = {n_lo, n_hi}
    if b > 0.0 and cfg.w_l > 0.0:
        ratio = math.sqrt((cfg.w_h / cfg.w_l) * (rho * rho) / (1.0 - rho * rho))
        n_int = (a + b / ratio) / tau if ratio > 0 else a / tau
        for k in (math.floor(n_int), math.ceil(n_int), math.ceil(n_int) + 1):
            candidates.add(min(max(k, n_lo), n_hi))
    else:
        candidates.add(min(max(math.ceil(a / tau), n_lo), n_hi))
    # coarse log grid fallback candidates, cheap and always sane
    for t in np.geomspace(n_lo, n_hi, num=9):
        candidates.add(min(max(int(round(t)), n_lo), n_hi))

    best = None
    for n in sorted(candidates):
        v = min_feasible_v(n)
        if v is None:
            continue
        cost = cfg.w_h * n + cfg.w_l * v
        if best is None or cost < best[0]:
            best = (cost, n, v)
    if best is None:
        return SENTINEL_PLAN
    return BfmcPlan(n_star=best[1], v_star=best[2], c_star=c_star)


class PointSampler:
    """Binds one design point to its accumulator and draw bookkeeping."""

    def __init__(self, ctx: RunContext, x: np.ndarray):
        self.ctx = ctx
        self.x = np.asarray(x, dtype=float)
        self.acc = MomentAccumulator()
        self._hf_values: list = []  # paired-substream HF draws, in draw order

    @property
    def n_hf(self) -> int:
        return self.acc.n_hf

    @property
    def n_paired(self) -> int:
        return self.acc.n_paired

    @property
    def v_lf(self) -> int:
        return self.acc.v_lf_total

    def ensure_pairs(self, n: int) -> None:
        """Grow the paired count to n, completing banked halves first."""
        while self.acc.n_paired < n:
            if self.acc.n_paired < self.acc.n_hf:
                s = self.ctx.complete_lf(self.x)
                h = self._hf_values[self.acc.n_paired]
                self.acc.complete_pair(h, s.lf_value)
            else:
                s = self.ctx.draw_pair(self.x)
                self._hf_values.append(s.hf_value)
                self.acc.add_paired(s.hf_value, s.lf_value)

    def pair_up_all(self) -> None:
        self.ensure_pairs(self.acc.n_hf)

    def ensure_hf(self, n: int) -> None:
        while self.acc.n_hf < n:
            s = self.ctx.draw_hf(self.x)
            self._hf_values.append(s.hf_value)
            if s.lf_value is not None:
                self.acc.add_paired(s.hf_value, s.lf_value)
            else:
                self.acc.add_hf(s.hf_value)

    def ensure_lf_total(self, v: int) -> None:
        while self.acc.v_lf_total < v:
            s = self.ctx.draw_lf_extra(self.x)
            self.acc.add_lf_extra(s.lf_value)


def _cmc_record(acc: MomentAccumulator, c: float, truncated: bool = False) -> EstimateRecord:
    return EstimateRecord(value=acc.cmc_value(), method="CMC", n=acc.n_hf,
                          v=acc.v_lf_total, c=c,
                          plug_in_variance=acc.var_h / max(acc.n_hf, 1),
                          truncated=truncated)


def _bfmc_record(acc: MomentAccumulator, c: float, truncated: bool = False) -> EstimateRecord:
    plug = var_bfmc(acc.var_h, acc.var_l, acc.cov_hl_clamped,
                    acc.n_hf, acc.v_lf_total, c)
    return EstimateRecord(value=acc.bfmc_value(c), method="BFMC", n=acc.n_hf,
                          v=acc.v_lf_total, c=c, plug_in_variance=plug,
                          truncated=truncated)


def bas(sampler: PointSampler, delta: float, cfg: SamplingConfig) -> EstimateRecord:
    """Bi-fidelity adaptive sampling at one design point.

    Streams draws, choosing online between the crude HF mean and the
    bi-fidelity estimator by comparing the projected cost of the allocation
    plan with the predicted CMC cost, until the selected method meets the
    variance target.  Returned sample sizes are stopping times of the draw
    history; the HF count never falls below the sigma0 floor.
    """
    acc = sampler.acc
    c = 0.0
    try:
        n_start = max(cfg.floor_n(delta), acc.n_hf)
        sampler.ensure_pairs(n_start)
        sampler.ensure_lf_total(max(acc.v_lf_total, n_start + 1))
        while True:
            n_pred = predicted_cmc_size(acc.sd_h, cfg.kappa, cfg.lambda_k, delta)
            plan = solve_bfmc_plan(acc, cfg, delta, n_cap=n_pred)
            if plan.cost(cfg.w_h, cfg.w_l) <= cfg.w_h * n_pred:
                c = plan.c_star
                sampler.pair_up_all()
                sampler.ensure_lf_total(max(acc.n_hf + 1, acc.v_lf_total))
                plug = var_bfmc(acc.var_h, acc.var_l, acc.cov_hl_clamped,
                                acc.n_hf, acc.v_lf_total, c)
                if plug <= cfg.variance_target(delta):
                    return _bfmc_record(acc, c)
                if acc.n_hf >= plan.n_star - 1:
                    sampler.ensure_lf_total(acc.v_lf_total + cfg.s_l)
                else:
                    sampler.ensure_pairs(acc.n_hf + cfg.s_h)
            else:
                if acc.n_hf >= n_pred:
                    return _cmc_record(acc, c)
                sampler.ensure_hf(acc.n_hf + cfg.s_h)
    except BudgetExceededError:
        if acc.n_hf < 1:
            raise
        if acc.n_paired == acc.n_hf and acc.v_lf_total > acc.n_hf:
            bf = _bfmc_record(acc, c, truncated=True)
            cm = _cmc_record(acc, c, truncated=True)
            return bf if bf.plug_in_variance < cm.plug_in_variance else cm
        return _cmc_record(acc, c, truncated=True)


def cmc_adaptive(sampler: PointSampler, delta: float, cfg: SamplingConfig,
                 fidelity: str = "hf") -> EstimateRecord:
    """Single-fidelity adaptive sampling rule.

    Grows the sample until max(sigma0, sigma_hat) / sqrt(n) falls below
    kappa * delta^2 / sqrt(lambda).  Runs on HF draws for the single-fidelity
    solvers and on LF draws when certifying LF means for model building.
    """
    if delta <= 0.0:
        raise ValueError("delta must be positive")
    acc = sampler.acc
    threshold = cfg.kappa * delta ** 2 / math.sqrt(cfg.lambda_k)
    batch = cfg.s_h if fidelity == "hf" else cfg.s_l

    def count():
        return acc.n_hf if fidelity == "hf" else acc.v_lf_total

    def sd():
        return acc.sd_h if fidelity == "hf" else math.sqrt(max(acc.var_l, 0.0))

    def grow(target):
        if fidelity == "hf":
            sampler.ensure_hf(target)
        else:
            sampler.ensure_lf_total(target)

    truncated = False
    try:
        grow(max(cfg.floor_n(delta), count()))
        while max(cfg.sigma0, sd()) / math.sqrt(count()) > threshold:
            grow(count() + batch)
    except BudgetExceededError:
        if count() < 1:
            raise
        truncated = True
    if fidelity == "hf":
        return _cmc_record(acc, 0.0, truncated=truncated)
    return EstimateRecord(value=acc.mean_l, method="CMC", n=acc.v_lf_total,
                          v=acc.v_lf_total, c=0.0,
                          plug_in_variance=acc.var_l / max(acc.v_lf_total, 1),
                          truncated=truncated)
