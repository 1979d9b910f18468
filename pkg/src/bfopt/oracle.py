"""Bi-fidelity stochastic oracle contract and expended-budget accounting.

An oracle produces noisy zeroth-order evaluations of a high-fidelity (HF)
objective and of a cheaper low-fidelity (LF) surrogate.  Paired draws share
one underlying randomness realization; LF-only draws use a separate
substream so they never disturb the paired cursor.  All sampling for one
run goes through a :class:`RunContext`, which owns the stream factory, the
cost ledger, and per-point draw state.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .streams import ROLE_LF_EXTRA, ROLE_PAIRED, StreamFactory, StreamKey


class BudgetExceededError(RuntimeError):
    """Raised when a draw would push the ledger past the budget cap."""


class EvaluationError(ValueError):
    """Raised on oracle calls outside the problem domain."""


@dataclass
class OracleSample:
    """One oracle response; at least one of the two values is present."""

    hf_value: Optional[float] = None
    lf_value: Optional[float] = None
    hf_calls: int = 0
    lf_calls: int = 0


@dataclass
class CostLedger:
    """Call counts and per-call costs; total cost is derived, never drifted."""

    w_h: float = 1.0
    w_l: float = 0.1
    hf_calls_total: int = 0
    lf_calls_total: int = 0

    @property
    def total_cost(self) -> float:
        return self.w_h * self.hf_calls_total + self.w_l * self.lf_calls_total

    def charge(self, hf_calls: int = 0, lf_calls: int = 0) -> None:
        self.hf_calls_total += hf_calls
        self.lf_calls_total += lf_calls


def remaining_budget(ledger: CostLedger, budget_cap: float) -> float:
    return budget_cap - ledger.total_cost


class BiFidelityOracle:
    """Immutable description of a bi-fidelity problem.

    Subclasses implement ``draw_joint`` (one shared-realization HF/LF pair)
    and ``draw_lf`` (one fresh-realization LF draw).  When ``lf_free_with_hf``
    is true (discrete-event simulators whose LF output is a truncated run of
    the same event stream), a joint draw is charged ``w_h`` only.
    """

    name = "oracle"
    dim: int = 1
    lower: np.ndarray
    upper: np.ndarray
    w_h: float = 1.0
    w_l: float = 0.1
    lf_free_with_hf: bool = False

    def draw_joint(self, x: np.ndarray, rng: np.random.Generator) -> tuple:
        raise NotImplementedError

    def draw_lf(self, x: np.ndarray, rng: np.random.Generator) -> float:
        raise NotImplementedError

    def batch_joint(self, x: np.ndarray, rng: np.random.Generator, n: int) -> tuple:
        """n joint draws; subclasses override with vectorized paths."""
        hf = np.empty(n)
        lf = np.empty(n)
        for i in range(n):
            hf[i], lf[i] = self.draw_joint(x, rng)
        return hf, lf

    def batch_hf(self, x: np.ndarray, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.batch_joint(x, rng, n)[0]

    @property
    def x0(self) -> np.ndarray:
        raise NotImplementedError

    @property
    def delta_max(self) -> float:
        raise NotImplementedError

    def check_domain(self, x: np.ndarray) -> None:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,) or not np.all(np.isfinite(x)):
            raise EvaluationError(f"{self.name}: bad design point {x!r}")
        if np.any(x < self.lower - 1e-9) or np.any(x > self.upper + 1e-9):
            raise EvaluationError(f"{self.name}: point {x!r} outside domain box")

    def true_objective(self, x: np.ndarray) -> Optional[float]:
        """Noiseless HF objective when available (synthetic families)."""
        return None

    def reference_optimum(self):
        """(x_star, value_star) metadata for gap computation, or None."""
        return None


@dataclass
class _PointChannel:
    """Draw state of one design point inside one run context.

    The paired substream yields shared-realization (hf, lf) pairs in draw
    order; HF-only draws consume a pair but bank the LF half unpaid, so a
    later completion releases the exact same value once ``w_l`` is charged.
    The LF-extra substream is independent and holds fresh LF draws.
    """

    paired_rng: np.random.Generator
    lf_rng: np.random.Generator
    pending_lf: list = field(default_factory=list)


class RunContext:
    """Per-run sampling state: streams, ledger, budget cap, point channels."""

    def __init__(self, oracle: BiFidelityOracle, base_entropy, macrorep_id: int,
                 budget: float):
        entropy = base_entropy if isinstance(base_entropy, (tuple, list)) else (base_entropy,)
        self.oracle = oracle
        self.factory = StreamFactory(*entropy)
        self.macrorep_id = int(macrorep_id)
        self.budget = float(budget)
        self.ledger = CostLedger(w_h=oracle.w_h, w_l=oracle.w_l)
        self._channels: dict = {}

    def remaining(self) -> float:
        return remaining_budget(self.ledger, self.budget)

    def _require(self, cost: float) -> None:
        if cost > self.remaining() + 1e-9:
            raise BudgetExceededError(
                f"cost {cost} exceeds remaining budget {self.remaining():.6g}")

    def channel(self, x: np.ndarray) -> _PointChannel:
        key = np.ascontiguousarray(x, dtype=np.float64).tobytes()
        chan = self._channels.get(key)
        if chan is None:
            chan = _PointChannel(
                paired_rng=self.factory.generator(
                    StreamKey.for_point(self.macrorep_id, x, ROLE_PAIRED)),
                lf_rng=self.factory.generator(
                    StreamKey.for_point(self.macrorep_id, x, ROLE_LF_EXTRA)),
            )
            self._channels[key] = chan
        return chan

    # -- draw primitives ---------------------------------------------------

    def draw_pair(self, x: np.ndarray) -> OracleSample:
        """One shared-realization (hf, lf) pair, both halves purchased."""
        self.oracle.check_domain(x)
        cost = self.oracle.w_h if self.oracle.lf_free_with_hf else self.oracle.w_h + self.oracle.w_l
        self._require(cost)
        chan = self.channel(x)
        hf, lf = self.oracle.draw_joint(x, chan.paired_rng)
        lf_calls = 0 if self.oracle.lf_free_with_hf else 1
        self.ledger.charge(hf_calls=1, lf_calls=lf_calls)
        return OracleSample(hf_value=hf, lf_value=lf, hf_calls=1, lf_calls=lf_calls)

    def draw_hf(self, x: np.ndarray) -> OracleSample:
        """One HF draw at cost ``w_h``.

        For oracles with a free LF byproduct the sample carries the LF value
        too; otherwise the LF half stays banked for a later completion.
        """
        self.oracle.check_domain(x)
        self._require(self.oracle.w_h)
        chan = self.channel(x)
        hf, lf = self.oracle.draw_joint(x, chan.paired_rng)
        self.ledger.charge(hf_calls=1)
        if self.oracle.lf_free_with_hf:
            return OracleSample(hf_value=hf, lf_value=lf, hf_calls=1)
        chan.pending_lf.append(lf)
        return OracleSample(hf_value=hf, hf_calls=1)

    def complete_lf(self, x: np.ndarray) -> OracleSample:
        """Purchase the LF half of the oldest unpaired HF draw at ``x``."""
        chan = self.channel(x)
        if not chan.pending_lf:
            raise RuntimeError("no unpaired HF draw to complete")
        self._require(self.oracle.w_l)
        lf = chan.pending_lf.pop(0)
        self.ledger.charge(lf_calls=1)
        return OracleSample(lf_value=lf, lf_calls=1)

    def draw_lf_extra(self, x: np.ndarray) -> OracleSample:
        """One fresh-realization LF draw (separate substream) at ``w_l``."""
        self.oracle.check_domain(x)
        self._require(self.oracle.w_l)
        chan = self.channel(x)
        lf = self.oracle.draw_lf(x, chan.lf_rng)
        self.ledger.charge(lf_calls=1)
        return OracleSample(lf_value=lf, lf_calls=1)


def sample_paired(ctx: RunContext, x: np.ndarray) -> OracleSample:
    """Paired HF/LF draw generated from the same underlying realization."""
    return ctx.draw_pair(x)


def sample_hf_only(ctx: RunContext, x: np.ndarray) -> OracleSample:
    """HF-only draw; free-LF oracles still report the byproduct value."""
    return ctx.draw_hf(x)


def sample_lf_only(ctx: RunContext, x: np.ndarray) -> OracleSample:
    """LF draw with fresh randomness, never touching the paired cursor."""
    return ctx.draw_lf_extra(x)
