"""Local model construction and trust-region subproblem minimization.

Models are diagonal-Hessian quadratics interpolating 2d+1 estimates on a
ball: the center, d offset points, and their mirror images through the
center.  The subproblem is solved exactly; the diagonal Hessian reduces the
constrained minimization to a scalar secular equation in the multiplier.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq

# Affine-independence proxy: accept reused directions only while the unit
# direction matrix keeps condition number below 1/theta.
THETA_GEO = 1e-3
# Reused points closer to the center than this fraction of the radius ruin
# the quadratic rows of the interpolation system.
MIN_REUSE_FRACTION = 0.1


class GeometryError(RuntimeError):
    """Interpolation system is too ill-conditioned to trust."""


@dataclass
class DesignSet:
    center: np.ndarray
    points: list  # 2d+1 arrays, center first, then d offsets, then d mirrors
    reuse_flags: list = field(default_factory=list)

    @property
    def dim(self) -> int:
        return self.center.size


@dataclass
class InterpModel:
    """Quadratic with diagonal Hessian around ``center``."""

    center: np.ndarray
    nu0: float
    grad: np.ndarray
    hess_diag: np.ndarray

    def value(self, x: np.ndarray) -> float:
        s = np.asarray(x, dtype=float) - self.center
        return float(self.nu0 + self.grad @ s + 0.5 * (self.hess_diag * s) @ s)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        s = np.asarray(x, dtype=float) - self.center
        return self.grad + self.hess_diag * s

    @property
    def grad_norm(self) -> float:
        return float(np.linalg.norm(self.grad))

    @property
    def hess_norm(self) -> float:
        return float(np.max(np.abs(self.hess_diag))) if self.hess_diag.size else 0.0


@dataclass
class SubproblemResult:
    step: np.ndarray
    predicted_reduction: float
    cauchy_reduction: float


def model_value(model: InterpModel, x: np.ndarray) -> float:
    return model.value(x)


def model_gradient(model: InterpModel, x: np.ndarray) -> np.ndarray:
    return model.gradient(x)


def _box_offsets(center: np.ndarray, delta: float, lower=None, upper=None) -> np.ndarray:
    """Per-coordinate signed offset magnitudes for a coordinate-basis set.

    Prefers +delta; shortens or flips a direction when the domain box cuts
    it off, keeping every point inside the box and distinct from the center.
    """
    d = center.size
    plus = np.full(d, delta)
    minus = np.full(d, -delta)
    if lower is None or upper is None:
        return np.stack([plus, minus])
    room_up = np.asarray(upper, dtype=float) - center
    room_dn = center - np.asarray(lower, dtype=float)
    for i in range(d):
        up = min(delta, room_up[i])
        dn = min(delta, room_dn[i])
        if up < 0.05 * delta and dn >= 0.05 * delta:
            # no room above: stack both points below at distinct radii
            plus[i] = -0.5 * dn
            minus[i] = -dn
        elif dn < 0.05 * delta and up >= 0.05 * delta:
            plus[i] = up
            minus[i] = 0.5 * up
        else:
            plus[i] = up
            minus[i] = -dn
    return np.stack([plus, minus])


def select_lf_design_set(center: np.ndarray, delta: float,
                         lower=None, upper=None) -> DesignSet:
    """Plain +- coordinate basis at radius delta around the center."""
    center = np.asarray(center, dtype=float)
    d = center.size
    offs = _box_offsets(center, delta, lower, upper)
    points = [center.copy()]
    for i in range(d):
        p = center.copy()
        p[i] += offs[0, i]
        points.append(p)
    for i in range(d):
        p = center.copy()
        p[i] += offs[1, i]
        points.append(p)
    return DesignSet(center=center, points=points,
                     reuse_flags=[False] * (2 * d + 1))


def _rotation_to(direction: np.ndarray) -> np.ndarray:
    """Orthogonal matrix whose first column is the given unit direction."""
    d = direction.size
    e1 = np.zeros(d)
    e1[0] = 1.0
    w = e1 - direction
    nw = np.linalg.norm(w)
    if nw < 1e-12:
        return np.eye(d)
    w = w / nw
    return np.eye(d) - 2.0 * np.outer(w, w)


def _keeps_geometry(dirs: list, candidate: np.ndarray) -> bool:
    mat = np.array(dirs + [candidate])
    s = np.linalg.svd(mat, compute_uv=False)
    return s[-1] > THETA_GEO * s[0]


def select_hf_design_set(center: np.ndarray, delta: float,
                         cache_points: Sequence[np.ndarray] = (),
                         last_step: Optional[np.ndarray] = None,
                         lower=None, upper=None) -> DesignSet:
    """Design set that reuses cached points passing the geometry filter.

    Cached points inside the ball are admitted (most-sampled callers should
    order them first) while their unit directions keep the direction matrix
    well conditioned; remaining directions come from the coordinate basis
    rotated to align with the last accepted step.
    """
    center = np.asarray(center, dtype=float)
    d = center.size
    dirs: list = []
    offsets: list = []
    reused: list = []
    for p in cache_points:
        if len(dirs) >= d:
            break
        p = np.asarray(p, dtype=float)
        off = p - center
        dist = np.linalg.norm(off)
        if dist > delta * (1 + 1e-9) or dist < MIN_REUSE_FRACTION * delta:
            continue
        u = off / dist
        if _keeps_geometry(dirs, u):
            dirs.append(u)
            offsets.append(off)
            reused.append(True)

    if last_step is not None and np.linalg.norm(last_step) > 1e-12:
        basis = _rotation_to(np.asarray(last_step, dtype=float)
                             / np.linalg.norm(last_step)).T
        identity = False
    else:
        basis = np.eye(d)
        identity = True
    box_off = _box_offsets(center, delta, lower, upper)
    for j in range(d):
        if len(dirs) >= d:
            break
        u = basis[j]
        if not _keeps_geometry(dirs, u):
            continue
        if identity:
            off = np.zeros(d)
            off[j] = box_off[0, j]  # box-trimmed coordinate offset
        else:
            off = delta * u
            if lower is not None and upper is not None:
                off = np.clip(center + off, lower, upper) - center
                if np.linalg.norm(off) < 0.05 * delta:
                    continue
        dirs.append(off / np.linalg.norm(off))
        offsets.append(off)
        reused.append(False)

    points = [center.copy()]
    flags = [True]
    for off in offsets:
        points.append(center + off)
    flags.extend(reused)
    for off in offsets:
        mirror = center - off
        if lower is not None and upper is not None:
            clipped = np.clip(mirror, lower, upper)
            if np.linalg.norm(clipped - center) < 0.05 * delta:
                # no room through the center: fold back onto the offset ray
                clipped = center + 0.5 * off
            mirror = clipped
        points.append(mirror)
    flags.extend([False] * len(offsets))
    return DesignSet(center=center, points=points, reuse_flags=flags)


def fit_interpolation(design: DesignSet, estimates: Sequence[float]) -> InterpModel:
    """Solve the (2d+1) x (2d+1) system for basis {1, s_i, s_i^2}."""
    pts = np.array(design.points, dtype=float)
    y = np.asarray(estimates, dtype=float)
    if y.size != pts.shape[0]:
        raise ValueError("estimate count must match design size")
    d = design.dim
    scale = max(np.max(np.linalg.norm(pts - design.center, axis=1)), 1e-30)
    t = (pts - design.center) / scale
    phi = np.concatenate([np.ones((pts.shape[0], 1)), t, t * t], axis=1)
    try:
        cond = np.linalg.cond(phi)
    except np.linalg.LinAlgError:
        raise GeometryError("singular interpolation matrix")
    if not np.isfinite(cond) or cond > 1e10:
        raise GeometryError(f"ill-conditioned interpolation matrix (cond={cond:.3g})")
    nu = np.linalg.solve(phi, y)
    return InterpModel(center=design.center.copy(), nu0=float(nu[0]),
                       grad=nu[1:d + 1] / scale,
                       hess_diag=2.0 * nu[d + 1:] / scale ** 2)


def cauchy_reduction(model: InterpModel, delta: float) -> float:
    """Guaranteed decrease of the steepest-descent step within the ball."""
    if delta <= 0.0:
        raise ValueError("delta must be positive")
    g = model.grad_norm
    if g == 0.0:
        return 0.0
    h = model.hess_norm
    ratio = g / h if h > 0.0 else math.inf
    return 0.5 * g * min(ratio, delta)


def _cauchy_point(model: InterpModel, delta: float) -> np.ndarray:
    g = model.grad
    gnorm = np.linalg.norm(g)
    if gnorm == 0.0:
        return np.zeros_like(g)
    ghg = float((model.hess_diag * g) @ g)
    t_max = delta / gnorm
    if ghg > 0.0:
        t = min(gnorm ** 2 / ghg, t_max)
    else:
        t = t_max
    return -t * g


def _reduction(model: InterpModel, step: np.ndarray) -> float:
    return -float(model.grad @ step + 0.5 * (model.hess_diag * step) @ step)


def minimize_model(model: InterpModel, delta: float,
                   kappa_fcd: float = 0.5) -> SubproblemResult:
    """Exact minimizer of the diagonal quadratic over the L2 ball.

    Interior Newton point when the Hessian is positive and the step fits;
    otherwise the boundary multiplier solves a scalar secular equation,
    with the hard case handled along the most negative curvature
    coordinate.  Falls back to the Cauchy point on numerical failure.
    """
    if delta <= 0.0:
        raise ValueError("delta must be positive")
    g = model.grad
    h = model.hess_diag
    step = None
    try:
        if np.all(h > 0.0):
            newton = -g / h
            if np.linalg.norm(newton) <= delta:
                step = newton
        if step is None:
            gnorm = np.linalg.norm(g)
            if gnorm == 0.0:
                imin = int(np.argmin(h))
                if h[imin] >= 0.0:
                    step = np.zeros_like(g)
                else:
                    step = np.zeros_like(g)
                    step[imin] = delta
            else:
                h_min = float(np.min(h))
                mu_lo = max(0.0, -h_min)
                hard_idx = np.abs(h - (-mu_lo)) < 1e-14 if mu_lo > 0 else np.zeros_like(h, dtype=bool)

                def snorm(mu):
                    denom = h + mu
                    s = np.zeros_like(g)
                    mask = denom > 0
                    s[mask] = -g[mask] / denom[mask]
                    return np.linalg.norm(s)

                if mu_lo > 0.0 and np.all(np.abs(g[hard_idx]) < 1e-14):
                    # hard case: fill along the most negative curvature axis
                    denom = h + mu_lo
                    s = np.zeros_like(g)
                    mask = denom > 1e-14
                    s[mask] = -g[mask] / denom[mask]
                    if np.linalg.norm(s) <= delta:
                        gap = delta ** 2 - float(s @ s)
                        s[int(np.argmin(h))] += math.sqrt(max(gap, 0.0))
                        step = s
                if step is None:
                    scale = max(np.max(np.abs(h)), gnorm / delta, 1.0)
                    lo = mu_lo + 1e-14 * scale
                    hi = max(mu_lo * 2, gnorm / delta + np.max(np.abs(h)) + 1.0)
                    tries = 0
                    while snorm(hi) > delta and tries < 200:
                        hi *= 2.0
                        tries += 1
                    while snorm(lo) < delta and lo > mu_lo * (1 + 1e-15) + 1e-300:
                        lo = mu_lo + (lo - mu_lo) * 0.5
                        if lo - mu_lo < 1e-18 * scale:
                            break
                    mu = brentq(lambda m: snorm(m) - delta, lo, hi,
                                xtol=1e-14, rtol=1e-14, maxiter=300)
                    denom = h + mu
                    s = np.zeros_like(g)
                    mask = denom > 0
                    s[mask] = -g[mask] / denom[mask]
                    step = s
        if step is None or not np.all(np.isfinite(step)):
            raise FloatingPointError
        nrm = np.linalg.norm(step)
        if nrm > delta:
            step = step * (delta / nrm)
    except Exception:
        step = _cauchy_point(model, delta)

    cauchy = cauchy_reduction(model, delta)
    red = _reduction(model, step)
    if red < kappa_fcd * cauchy or not np.isfinite(red):
        step = _cauchy_point(model, delta)
        red = _reduction(model, step)
    return SubproblemResult(step=step, predicted_reduction=red,
                            cauchy_reduction=cauchy)
