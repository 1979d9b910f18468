"""Adaptive-sampling trust-region solvers (bi-fidelity and single-fidelity).

The bi-fidelity solver keeps two radii: an LF radius driving an inner loop
that hunts for improving iterates using only the cheap oracle, and an HF
radius governing model building on the expensive oracle whenever the inner
loop gives up.  A correlation constant ``alpha`` learned from iteration
history gates the inner loop.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..estimators import EstimateRecord, bas, cmc_adaptive
from ..models import (GeometryError, fit_interpolation, minimize_model,
                      select_hf_design_set, select_lf_design_set)
from ..oracle import BudgetExceededError
from .base import IterationRecord, SolverBase


@dataclass
class _TrState:
    x: np.ndarray
    delta_h: float
    delta_l: float
    alpha: float
    k: int
    last_step: Optional[np.ndarray] = None


def _ratio(numer: float, denom: float) -> float:
    # a model that predicts no decrease cannot certify a step
    if denom <= 0.0 or not np.isfinite(denom):
        return -math.inf
    return numer / denom


class AstroBfdf(SolverBase):
    """Bi-fidelity adaptive-sampling trust-region solver."""

    name = "astro-bfdf"

    def _setup(self, x0: np.ndarray) -> None:
        self.calibrate_kappa(x0, paired=True)
        self.state = _TrState(x=x0.copy(), delta_h=self.cfg.delta0,
                              delta_l=self.cfg.delta0, alpha=self.cfg.alpha0, k=1)

    def calibrate_kappa(self, x0: np.ndarray, paired: bool = True) -> None:
        cfg = self.cfg
        if cfg.kappa is not None:
            return
        lam = cfg.lambda_k(1, self.oracle.dim)
        sampler = self.sampler(x0)
        kappa = cfg.sigma0
        try:
            if paired:
                sampler.ensure_pairs(2)
                sampler.ensure_lf_total(3)
            else:
                sampler.ensure_hf(2)
            while True:
                kappa = max(abs(sampler.acc.mean_h) / cfg.delta0 ** 2, cfg.sigma0)
                needed = lam * max(sampler.acc.var_h, cfg.sigma0 ** 2) / (
                    kappa ** 2 * cfg.delta0 ** 4)
                if sampler.n_hf >= needed:
                    break
                if paired:
                    sampler.ensure_pairs(sampler.n_hf + 1)
                else:
                    sampler.ensure_hf(sampler.n_hf + 1)
        except BudgetExceededError:
            self.finished = True
        cfg.kappa = kappa

    # -- inner loop ----------------------------------------------------------

    def _inner(self, scfg) -> dict:
        """LF-only search; returns the handoff flag and candidate."""
        cfg = self.cfg
        st = self.state
        out = {"hf_needed": True, "candidate": st.x, "rho_l": math.nan,
               "grad_l": math.nan, "estimate": math.nan}
        while True:
            if st.alpha < cfg.alpha_th:
                break
            design = select_lf_design_set(st.x, st.delta_l,
                                          self.oracle.lower, self.oracle.upper)
            try:
                lf_values = [cmc_adaptive(self.sampler(p), st.delta_l, scfg,
                                          fidelity="lf").value
                             for p in design.points]
                model = fit_interpolation(design, lf_values)
            except GeometryError:
                st.delta_l *= cfg.gamma_shrink
                st.alpha *= cfg.gamma_shrink
                continue
            sub = minimize_model(model, st.delta_l, cfg.kappa_fcd)
            candidate = self.clip(st.x + sub.step)
            center_rec = bas(self.sampler(st.x), st.delta_l, scfg)
            cand_rec = bas(self.sampler(candidate), st.delta_l, scfg)
            model_drop = model.value(st.x) - model.value(candidate)
            rho = (center_rec.value - cand_rec.value) / max(
                cfg.zeta * st.delta_h ** 2, model_drop)
            grad_norm = model.grad_norm
            if rho >= cfg.eta and grad_norm >= cfg.eps_hat:
                out.update(hf_needed=False, candidate=candidate, rho_l=rho,
                           grad_l=grad_norm, estimate=cand_rec.value)
                break
            st.delta_l *= cfg.gamma_shrink
            st.alpha *= cfg.gamma_shrink
        st.delta_h = max(st.delta_h, st.delta_l)
        return out

    # -- shared estimation helpers --------------------------------------------

    def _estimate_with_plan(self, x: np.ndarray, rec: EstimateRecord) -> float:
        """Estimate at a non-center design point reusing the center's plan."""
        s = self.sampler(x)
        if rec.method == "BFMC":
            s.ensure_pairs(max(rec.n, s.n_hf))
            s.pair_up_all()
            s.ensure_lf_total(max(rec.v, s.n_hf + 1))
            return s.acc.bfmc_value(rec.c)
        s.ensure_hf(max(rec.n, s.n_hf))
        return s.acc.cmc_value()

    def _evaluate(self, x: np.ndarray, delta: float, scfg) -> EstimateRecord:
        return bas(self.sampler(x), delta, scfg)

    # -- outer iteration -------------------------------------------------------

    def step(self) -> None:
        cfg = self.cfg
        st = self.state
        lam = cfg.lambda_k(st.k, self.oracle.dim)
        scfg = cfg.sampling(lam, self.oracle)
        rec = IterationRecord(k=st.k, branch="HF-model",
                              delta_h_before=st.delta_h)
        try:
            inner = self._inner(scfg)
            if not inner["hf_needed"]:
                st.last_step = inner["candidate"] - st.x
                st.x = inner["candidate"]
                st.delta_l *= cfg.gamma_expand
                st.alpha = min(cfg.gamma_expand * st.alpha, 1.0)
                st.delta_h = max(st.delta_h, st.delta_l)  # keep radius order
                rec.branch = "LF-success"
                rec.rho_hat_l = inner["rho_l"]
                rec.model_grad_norm_l = inner["grad_l"]
                rec.incumbent_estimate = inner["estimate"]
                self.record_move(st.x, inner["estimate"])
            else:
                self._hf_iteration(scfg, rec)
        except BudgetExceededError:
            self.finished = True
        rec.alpha_after = st.alpha
        rec.delta_h_after = st.delta_h
        rec.delta_l_after = st.delta_l
        rec.incumbent_after = tuple(st.x)
        rec.cumulative_cost = self.ctx.ledger.total_cost
        self.history.records.append(rec)
        st.k += 1

    def _hf_iteration(self, scfg, rec: IterationRecord) -> None:
        cfg = self.cfg
        st = self.state
        delta = st.delta_h

        design = None
        for attempt in range(2):
            cache = self.cached_points(st.x, delta) if attempt == 0 else []
            last = st.last_step if attempt == 0 else None
            design = select_hf_design_set(st.x, delta, cache, last,
                                          self.oracle.lower, self.oracle.upper)
            center_rec = self._evaluate(st.x, delta, scfg)
            hf_values = [center_rec.value]
            for p in design.points[1:]:
                hf_values.append(self._estimate_with_plan(p, center_rec))
            lf_values = [cmc_adaptive(self.sampler(p), delta, scfg,
                                      fidelity="lf").value
                         for p in design.points]
            try:
                model_h = fit_interpolation(design, hf_values)
                model_l = fit_interpolation(design, lf_values)
                break
            except GeometryError:
                if attempt == 1:
                    st.delta_h *= cfg.gamma_shrink
                    st.delta_l = min(st.delta_l, st.delta_h)
                    rec.branch = "HF-failure"
                    return

        sub_h = minimize_model(model_h, delta, cfg.kappa_fcd)
        sub_l = minimize_model(model_l, delta, cfg.kappa_fcd)
        cand_h = self.clip(st.x + sub_h.step)
        cand_l = self.clip(st.x + sub_l.step)
        rec_h = self._evaluate(cand_h, delta, scfg)
        if np.array_equal(cand_h, cand_l):
            rec_l = rec_h
        else:
            rec_l = self._evaluate(cand_l, delta, scfg)
        if rec_h.value <= rec_l.value:
            cand, cand_rec = cand_h, rec_h
        else:
            cand, cand_rec = cand_l, rec_l

        rho = _ratio(center_rec.value - cand_rec.value,
                     model_h.value(st.x) - model_h.value(cand))
        rho_l = (center_rec.value - rec_l.value) / max(
            cfg.zeta * delta ** 2, model_l.value(st.x) - model_l.value(cand_l))
        rec.rho_hat = rho
        rec.rho_hat_l = rho_l
        rec.model_grad_norm_h = model_h.grad_norm
        rec.model_grad_norm_l = model_l.grad_norm

        if rho_l >= cfg.eta and model_l.grad_norm >= cfg.eps_hat:
            st.alpha = min(cfg.gamma_expand * st.alpha, 1.0)
        else:
            st.alpha *= cfg.gamma_shrink

        if rho >= cfg.eta and cfg.mu * model_h.grad_norm >= delta:
            st.last_step = cand - st.x
            st.x = cand
            st.delta_h = min(cfg.gamma_expand * st.delta_h, cfg.delta_max)
            rec.branch = "HF-success"
            rec.incumbent_estimate = cand_rec.value
            self.record_move(st.x, cand_rec.value)
        else:
            st.delta_h *= cfg.gamma_shrink
            rec.branch = "HF-failure"
            rec.incumbent_estimate = center_rec.value
        st.delta_l = min(st.delta_l, st.delta_h)


class AstroDf(SolverBase):
    """Single-fidelity adaptive-sampling trust-region baseline."""

    name = "astro-df"

    def _setup(self, x0: np.ndarray) -> None:
        # HF-only draws; free-LF oracles still bank their byproduct values
        self.calibrate_kappa(x0, paired=False)
        self.state = _TrState(x=x0.copy(), delta_h=self.cfg.delta0,
                              delta_l=self.cfg.delta0, alpha=math.nan, k=1)

    calibrate_kappa = AstroBfdf.calibrate_kappa

    def step(self) -> None:
        cfg = self.cfg
        st = self.state
        lam = cfg.lambda_k(st.k, self.oracle.dim)
        scfg = cfg.sampling(lam, self.oracle)
        rec = IterationRecord(k=st.k, branch="HF-model",
                              delta_h_before=st.delta_h)
        try:
            self._iterate(scfg, rec)
        except BudgetExceededError:
            self.finished = True
        rec.delta_h_after = st.delta_h
        rec.delta_l_after = st.delta_h
        rec.incumbent_after = tuple(st.x)
        rec.cumulative_cost = self.ctx.ledger.total_cost
        self.history.records.append(rec)
        st.k += 1

    def _iterate(self, scfg, rec: IterationRecord) -> None:
        cfg = self.cfg
        st = self.state
        delta = st.delta_h
        for attempt in range(2):
            cache = self.cached_points(st.x, delta) if attempt == 0 else []
            last = st.last_step if attempt == 0 else None
            design = select_hf_design_set(st.x, delta, cache, last,
                                          self.oracle.lower, self.oracle.upper)
            values = [cmc_adaptive(self.sampler(p), delta, scfg, fidelity="hf").value
                      for p in design.points]
            try:
                model = fit_interpolation(design, values)
                break
            except GeometryError:
                if attempt == 1:
                    st.delta_h *= cfg.gamma_shrink
                    rec.branch = "HF-failure"
                    return
        center_value = values[0]
        sub = minimize_model(model, delta, cfg.kappa_fcd)
        cand = self.clip(st.x + sub.step)
        cand_rec = cmc_adaptive(self.sampler(cand), delta, scfg, fidelity="hf")
        rho = _ratio(center_value - cand_rec.value,
                     model.value(st.x) - model.value(cand))
        rec.rho_hat = rho
        rec.model_grad_norm_h = model.grad_norm
        if rho >= cfg.eta and cfg.mu * model.grad_norm >= delta:
            st.last_step = cand - st.x
            st.x = cand
            st.delta_h = min(cfg.gamma_expand * st.delta_h, cfg.delta_max)
            rec.branch = "HF-success"
            rec.incumbent_estimate = cand_rec.value
            self.record_move(st.x, cand_rec.value)
        else:
            st.delta_h *= cfg.gamma_shrink
            rec.branch = "HF-failure"
            rec.incumbent_estimate = center_value
