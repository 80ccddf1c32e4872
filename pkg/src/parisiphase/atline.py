"""Fixed-point machinery for the one-atom candidate: the set Q_* of solutions
of E tanh^2(sqrt(xi'(q)) Z + h) = q, the stability functional
alpha(q) = xi''(q) E sech^4(sqrt(xi'(q)) Z + h), the selected fixed point q_*,
the generalized AT region alpha <= 1, level-set tracing, the 2/3 sufficient
region, and related bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .constants import LAMBDA0
from .gauss import (DEFAULT_CFG, Gaussian1, NumericalError, QuadratureConfig,
                    expect1, expect1_batch, sech)
from .model import Model, SystemPoint

__all__ = ["ATRecord", "LevelSetPoint", "LevelSetResult", "TwoThirdsRecord",
           "fixed_points", "alpha_of", "in_AT", "beta_star", "level_set",
           "two_thirds_boundary", "qstar_lower_bounds", "stability_jacobian",
           "qlim_inequality"]

_SUPPORT = (-46.0, 46.0)     # sech^2/sech^4 tails are < 1e-39 outside
_AT_TOL = 1e-9
_ALPHA_TIE = 1e-9


@dataclass(frozen=True)
class ATRecord:
    point: SystemPoint
    roots: tuple
    alpha_at_root: tuple
    alpha: float
    q_star: float

    def on_boundary(self) -> bool:
        return abs(self.alpha - 1.0) <= _AT_TOL


def _phi_batch(model: Model, point: SystemPoint, qs, cfg, points=2001):
    """E tanh^2(sqrt(xi'(q)) Z + h) - q on an array of q, via 1 - E sech^2."""
    stds = np.sqrt(point.beta ** 2 * model.xi0_d1(np.asarray(qs, dtype=float)))
    e2 = expect1_batch(lambda y: sech(y) ** 2, np.full_like(stds, point.h),
                       stds, cfg, support=_SUPPORT, points=points)
    return (1.0 - e2) - np.asarray(qs, dtype=float)


def _phi_accurate(model: Model, point: SystemPoint, q: float, cfg) -> float:
    std = math.sqrt(point.beta ** 2 * model.xi0_d1(q))
    e2 = expect1(lambda y: sech(y) ** 2, Gaussian1(point.h, std), cfg,
                 support=_SUPPORT)
    return (1.0 - e2) - q


def _alpha_at(model: Model, point: SystemPoint, q: float, cfg) -> float:
    std = math.sqrt(point.beta ** 2 * model.xi0_d1(q))
    e4 = expect1(lambda y: sech(y) ** 4, Gaussian1(point.h, std), cfg,
                 support=_SUPPORT)
    return point.beta ** 2 * model.xi0_d2(q) * e4


def fixed_points(model: Model, point: SystemPoint,
                 cfg: QuadratureConfig = DEFAULT_CFG,
                 scan_step: float = 1e-3, scan_points: int = 2001) -> ATRecord:
    """Scan + bisection root finding for the fixed-point set, with the
    stability value at every root and the canonical selection of q_*."""
    n = int(round(1.0 / scan_step)) + 1
    qs = np.linspace(0.0, 1.0, n)
    vals = _phi_batch(model, point, qs, cfg, points=scan_points)
    roots = []
    for i in range(n - 1):
        if abs(vals[i]) < 1e-13:
            roots.append(float(qs[i]))
        elif vals[i] * vals[i + 1] < 0.0:
            lo, hi = float(qs[i]), float(qs[i + 1])
            # coarse bisection with a mid-resolution rule, polished at full
            fast = QuadratureConfig(nodes_1d=cfg.nodes_1d, truncation=cfg.truncation,
                                    std_switch=cfg.std_switch, simpson_points=4001,
                                    box_step=cfg.box_step)
            flo = _phi_accurate(model, point, lo, fast)
            while hi - lo > 1e-9:
                mid = 0.5 * (lo + hi)
                fm = _phi_accurate(model, point, mid, fast)
                if flo * fm <= 0.0:
                    hi = mid
                else:
                    lo, flo = mid, fm
            flo = _phi_accurate(model, point, lo, cfg)
            while hi - lo > 1e-12:
                mid = 0.5 * (lo + hi)
                fm = _phi_accurate(model, point, mid, cfg)
                if flo * fm <= 0.0:
                    hi = mid
                else:
                    lo, flo = mid, fm
            roots.append(0.5 * (lo + hi))
    if abs(vals[-1]) < 1e-13:
        roots.append(float(qs[-1]))
    dedup = []
    for r in roots:
        if not dedup or r - dedup[-1] > 1e-10:
            dedup.append(r)
    if not dedup:
        raise NumericalError("no fixed point found; quadrature failure "
                             "(the map always crosses the diagonal)")
    alphas = [_alpha_at(model, point, q, cfg) for q in dedup]
    a_min = min(alphas)
    q_star = max(q for q, a in zip(dedup, alphas) if a <= a_min + _ALPHA_TIE)
    return ATRecord(point=point, roots=tuple(dedup), alpha_at_root=tuple(alphas),
                    alpha=a_min, q_star=q_star)


def alpha_of(model: Model, point: SystemPoint,
             cfg: QuadratureConfig = DEFAULT_CFG) -> float:
    return fixed_points(model, point, cfg).alpha


def in_AT(model: Model, point: SystemPoint, cfg: QuadratureConfig = DEFAULT_CFG,
          record: ATRecord = None) -> bool:
    """Membership in the region alpha(beta, h) <= 1 (tolerance 1e-9)."""
    if record is None:
        record = fixed_points(model, point, cfg)
    return record.alpha <= 1.0 + _AT_TOL


def beta_star(model: Model) -> float:
    """Temperature threshold 1/sqrt(xi0''(1)) below which the one-atom phase
    is automatic."""
    return 1.0 / math.sqrt(model.xi0_d2(1.0))


# ---------------------------------------------------------------------------
# level sets of alpha
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LevelSetPoint:
    alpha_target: float
    beta: float
    h: float
    q_star: float
    branch: int = 0


@dataclass
class LevelSetResult:
    points: list
    missing_betas: list = field(default_factory=list)
    multivalued_betas: list = field(default_factory=list)


def _alpha_at_h(model, beta, h, cfg, fast=False):
    if fast:
        return fixed_points(model, SystemPoint(beta, h), cfg,
                            scan_step=2e-3, scan_points=401)
    return fixed_points(model, SystemPoint(beta, h), cfg)


def level_set(model: Model, alpha_target: float, beta_range, n_points: int,
              cfg: QuadratureConfig = DEFAULT_CFG, h_max: float = None,
              n_scan: int = 36) -> LevelSetResult:
    """For each beta in the range, all h >= 0 with alpha(beta, h) = target.

    The h-axis is scanned for sign changes of alpha - target and each bracket
    is bisected; multiple solutions are all emitted with branch labels rather
    than silently selecting one.
    """
    if not (0.0 < alpha_target <= 2.0):
        raise ValueError("alpha_target must lie in (0, 2]")
    fast_cfg = QuadratureConfig(nodes_1d=cfg.nodes_1d, truncation=cfg.truncation,
                                std_switch=cfg.std_switch, simpson_points=8001,
                                box_step=cfg.box_step)
    betas = np.linspace(beta_range[0], beta_range[1], n_points)
    result = LevelSetResult(points=[])
    for beta in betas:
        hi = h_max if h_max is not None else _default_h_max(model, beta,
                                                            alpha_target, fast_cfg)
        hs = np.linspace(0.0, hi, n_scan)
        diffs = [_alpha_at_h(model, beta, h, fast_cfg, fast=True).alpha
                 - alpha_target for h in hs]
        brackets = []
        for i in range(len(hs) - 1):
            if diffs[i] == 0.0:
                brackets.append((hs[i], hs[i]))
            elif diffs[i] * diffs[i + 1] < 0.0:
                brackets.append((hs[i], hs[i + 1]))
        if not brackets:
            result.missing_betas.append(float(beta))
            continue
        if len(brackets) > 1:
            result.multivalued_betas.append(float(beta))
        for branch, (lo, hi_b) in enumerate(brackets):
            flo = _alpha_at_h(model, beta, lo, fast_cfg, fast=True).alpha - alpha_target
            while hi_b - lo > 1e-9:
                mid = 0.5 * (lo + hi_b)
                fm = _alpha_at_h(model, beta, mid, fast_cfg, fast=True).alpha \
                    - alpha_target
                if flo * fm <= 0.0:
                    hi_b = mid
                else:
                    lo, flo = mid, fm
            # secant polish at full resolution
            h_sol = 0.5 * (lo + hi_b)
            rec = _alpha_at_h(model, beta, h_sol, cfg)
            for _ in range(4):
                if abs(rec.alpha - alpha_target) <= 1e-9:
                    break
                d = 1e-5 * max(1.0, h_sol)
                rec_d = _alpha_at_h(model, beta, h_sol + d, cfg)
                slope = (rec_d.alpha - rec.alpha) / d
                if slope == 0.0:
                    break
                h_sol = max(h_sol - (rec.alpha - alpha_target) / slope, 0.0)
                rec = _alpha_at_h(model, beta, h_sol, cfg)
            result.points.append(LevelSetPoint(alpha_target, float(beta),
                                               float(h_sol), rec.q_star, branch))
    return result


def _default_h_max(model, beta, alpha_target, cfg):
    h = max(4.0, 2.0 * beta)
    for _ in range(12):
        if _alpha_at_h(model, beta, h, cfg).alpha < 0.5 * alpha_target:
            return h
        h *= 1.6
    return h


# ---------------------------------------------------------------------------
# sufficient regions and bounds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TwoThirdsRecord:
    lhs: float          # alpha at the point
    rhs: float
    in_region: bool
    q_star: float


def two_thirds_boundary(model: Model, point: SystemPoint,
                        cfg: QuadratureConfig = DEFAULT_CFG,
                        record: ATRecord = None) -> TwoThirdsRecord:
    """The sufficient one-atom region
    alpha <= (2/3)(xi0''(q*)/xi0''(1)) (1 - L0 xi0''(1) / (beta xi0'(q*)^{3/2}))
    for h > 0."""
    if record is None:
        record = fixed_points(model, point, cfg)
    q = record.q_star
    xi0p_q = model.xi0_d1(q)
    if point.h <= 0.0 or xi0p_q <= 0.0:
        return TwoThirdsRecord(record.alpha, -math.inf, False, q)
    rhs = (2.0 / 3.0) * (model.xi0_d2(q) / model.xi0_d2(1.0)) \
        * (1.0 - LAMBDA0 * model.xi0_d2(1.0) / (point.beta * xi0p_q ** 1.5))
    return TwoThirdsRecord(record.alpha, rhs, record.alpha <= rhs, q)


def qstar_lower_bounds(model: Model, point: SystemPoint, alpha: float = None,
                       cfg: QuadratureConfig = DEFAULT_CFG, record: ATRecord = None):
    """A priori lower bounds on q_*: (1/2) tanh^2 h always, and for mixtures
    with a p=2 component, 1 - sqrt(alpha) / (sqrt(2) beta beta_2)."""
    bound_tanh = 0.5 * math.tanh(point.h) ** 2
    c2 = dict(model.coefficients).get(2, 0.0)
    if c2 <= 0.0:
        return bound_tanh, None
    if alpha is None:
        if record is None:
            record = fixed_points(model, point, cfg)
        alpha = record.alpha
    beta2 = math.sqrt(c2)
    return bound_tanh, 1.0 - math.sqrt(alpha) / (math.sqrt(2.0) * point.beta * beta2)


def stability_jacobian(model: Model, point: SystemPoint, q: float,
                       cfg: QuadratureConfig = DEFAULT_CFG) -> float:
    """d/dq of the fixed-point map minus 1 at q, in the integrated-by-parts
    form xi''(q) E[3 sech^4 - 2 sech^2](X) - 1; negative values mean the
    root is stable and persists under perturbation of (beta, h)."""
    std = math.sqrt(point.beta ** 2 * model.xi0_d1(q))
    val = expect1(lambda y: 3.0 * sech(y) ** 4 - 2.0 * sech(y) ** 2,
                  Gaussian1(point.h, std), cfg, support=_SUPPORT)
    return point.beta ** 2 * model.xi0_d2(q) * val - 1.0


def qlim_inequality(model: Model, point: SystemPoint,
                    cfg: QuadratureConfig = DEFAULT_CFG, record: ATRecord = None):
    """|xi''(q*)(1 - q*) - (3/2) alpha| <= L0 xi0''(q*) / (beta xi0'(q*)^{3/2}),
    the quantitative h > 0 estimate behind the large-beta asymptotics."""
    if record is None:
        record = fixed_points(model, point, cfg)
    q = record.q_star
    if point.h <= 0.0 or model.xi0_d1(q) <= 0.0:
        raise ValueError("estimate requires h > 0 (so that q_* > 0)")
    lhs = abs(point.beta ** 2 * model.xi0_d2(q) * (1.0 - q) - 1.5 * record.alpha)
    rhs = LAMBDA0 * model.xi0_d2(q) / (point.beta * model.xi0_d1(q) ** 1.5)
    return lhs, rhs, lhs <= rhs
