"""Shared solver contract: configuration, state, run records, registry."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from ..estimators import PointSampler, SamplingConfig
from ..oracle import BiFidelityOracle, RunContext


@dataclass
class SolverConfig:
    """Trust-region and sampling hyper-parameters.

    Defaults follow the standard recipe for this solver family: fitness
    threshold eta = 0.1, expansion 1.5 / shrinkage 0.75 (bound by role),
    correlation constants alpha0 = 0.5 / alpha_th = 0.3, LF gradient floor
    1e-3, sufficient-reduction constant 0.01, variance floor sigma0 = 0.1,
    HF batch 1 and LF batch ceil(w_h/w_l).  kappa and the initial radius
    are derived per problem unless given explicitly.
    """

    eta: float = 0.1
    mu: float = 1000.0
    gamma_expand: float = 1.5
    gamma_shrink: float = 0.75
    alpha0: float = 0.5
    alpha_th: float = 0.3
    eps_hat: float = 1e-3
    zeta: float = 0.01
    sigma0: float = 0.1
    kappa: Optional[float] = None
    kappa_fcd: float = 0.5
    delta_max: Optional[float] = None
    delta0: Optional[float] = None
    s_h: int = 1
    s_l: Optional[int] = None
    # baseline knobs
    nm_sample_size: int = 10
    nm_initial_step: Optional[float] = None
    adam_sample_size: int = 10
    adam_lr: float = 0.5
    adam_fd_step: Optional[float] = None
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def lambda_k(self, k: int, dim: int) -> float:
        """Sample-size lower-bound schedule, log base 10, iterations from 1."""
        t = math.log10(k + 0.1)
        growth = max(1.0, t ** 1.01) if t > 0 else 1.0
        return max(5.0, 2.0 * math.log10(dim + 0.5) * growth)

    def resolve(self, oracle: BiFidelityOracle) -> "SolverConfig":
        cfg = replace(self)
        if cfg.delta_max is None:
            cfg.delta_max = float(oracle.delta_max)
        if cfg.delta0 is None:
            raw = 10.0 ** (math.ceil(math.log10(cfg.delta_max ** 2) - 1.0) / oracle.dim)
            cfg.delta0 = min(raw, cfg.delta_max)
        else:
            cfg.delta0 = min(cfg.delta0, cfg.delta_max)
        if cfg.s_l is None:
            cfg.s_l = max(cfg.s_h + 1, math.ceil(oracle.w_h / oracle.w_l))
        return cfg

    def sampling(self, lam: float, oracle: BiFidelityOracle) -> SamplingConfig:
        return SamplingConfig(kappa=self.kappa, lambda_k=lam, sigma0=self.sigma0,
                              s_h=self.s_h, s_l=self.s_l,
                              w_h=oracle.w_h, w_l=oracle.w_l)


@dataclass
class IterationRecord:
    """Audit trail of one outer iteration (append-only)."""

    k: int
    branch: str  # LF-success | HF-success | HF-failure | HF-model
    rho_hat: float = math.nan
    rho_hat_l: float = math.nan
    model_grad_norm_h: float = math.nan
    model_grad_norm_l: float = math.nan
    alpha_after: float = math.nan
    delta_h_before: float = math.nan
    delta_h_after: float = math.nan
    delta_l_after: float = math.nan
    incumbent_after: tuple = ()
    cumulative_cost: float = 0.0
    incumbent_estimate: float = math.nan


@dataclass
class RunHistory:
    solver: str
    problem: str
    seed: int
    budget: float
    x0: tuple
    records: list = field(default_factory=list)
    trajectory: list = field(default_factory=list)  # (cost, incumbent tuple)
    final_x: tuple = ()
    total_cost: float = 0.0
    hf_calls: int = 0
    lf_calls: int = 0

    def incumbent_at(self, cost: float) -> tuple:
        best = self.trajectory[0][1]
        for c, x in self.trajectory:
            if c <= cost + 1e-9:
                best = x
            else:
                break
        return best


class SolverBase:
    """initialize / step / history contract shared by all solvers."""

    name = "solver"

    def __init__(self):
        self.ctx: Optional[RunContext] = None
        self.cfg: Optional[SolverConfig] = None
        self.history: Optional[RunHistory] = None
        self._samplers: dict = {}
        self.finished = False

    # -- shared plumbing -----------------------------------------------------

    def initialize(self, oracle: BiFidelityOracle, seed: int, cfg: SolverConfig,
                   budget: float, problem_entropy: int = 0) -> None:
        self.oracle = oracle
        self.cfg = cfg.resolve(oracle)
        self.ctx = RunContext(oracle, (problem_entropy,), seed, budget)
        self._samplers = {}
        self.finished = False
        x0 = np.asarray(oracle.x0, dtype=float)
        self.history = RunHistory(solver=self.name, problem=oracle.name,
                                  seed=seed, budget=budget, x0=tuple(x0))
        self.history.trajectory.append((0.0, tuple(x0)))
        self._setup(x0)

    def _setup(self, x0: np.ndarray) -> None:
        raise NotImplementedError

    def step(self) -> None:
        raise NotImplementedError

    def sampler(self, x: np.ndarray) -> PointSampler:
        key = np.ascontiguousarray(x, dtype=np.float64).tobytes()
        s = self._samplers.get(key)
        if s is None:
            s = PointSampler(self.ctx, x)
            self._samplers[key] = s
        return s

    def cached_points(self, center: np.ndarray, delta: float) -> list:
        """Points with banked draws inside the ball, most-sampled first."""
        out = []
        for s in self._samplers.values():
            if s.n_hf < 1:
                continue
            dist = np.linalg.norm(s.x - center)
            if 1e-12 < dist <= delta:
                out.append((s.n_hf, s.x))
        out.sort(key=lambda t: -t[0])
        return [x for _, x in out]

    def clip(self, x: np.ndarray) -> np.ndarray:
        return np.clip(x, self.oracle.lower, self.oracle.upper)

    def record_move(self, x: np.ndarray, estimate: float) -> None:
        self.history.trajectory.append((self.ctx.ledger.total_cost, tuple(x)))

    def finalize(self) -> RunHistory:
        self.history.final_x = self.history.trajectory[-1][1]
        self.history.total_cost = self.ctx.ledger.total_cost
        self.history.hf_calls = self.ctx.ledger.hf_calls_total
        self.history.lf_calls = self.ctx.ledger.lf_calls_total
        return self.history


def run(solver_id: str, oracle: BiFidelityOracle, budget: float, seed: int,
        cfg: Optional[SolverConfig] = None, problem_entropy: int = 0) -> RunHistory:
    """Run a registered solver on a problem until the budget is spent."""
    from . import make_solver

    solver = make_solver(solver_id)
    solver.initialize(oracle, seed, cfg or SolverConfig(), budget,
                      problem_entropy=problem_entropy)
    while not solver.finished and solver.ctx.remaining() > 0:
        solver.step()
    return solver.finalize()
