"""Deterministic Gaussian expectation engine in one and two dimensions.

Default rule is Gauss-Hermite in the probabilists' normalization, with nodes
computed in-house by Newton iteration on the orthonormal Hermite recurrence.
Integrands concentrated near the origin on a scale much smaller than the
Gaussian one (large std) are handled by composite Simpson in y-space, either
over the full truncated range or over a caller-supplied support window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import erf

__all__ = [
    "Gaussian1", "Gaussian2", "QuadratureConfig", "NumericalError",
    "gauss_hermite", "expect1", "expect1_batch", "expect2", "nested_expect",
    "expect_logcosh", "expect_abs", "logcosh", "sech",
]

SQRT2PI = math.sqrt(2.0 * math.pi)
_LOG2 = math.log(2.0)


class NumericalError(RuntimeError):
    """Quadrature or solver failure (non-finite values, lost accuracy)."""


# ---------------------------------------------------------------------------
# stable elementary functions
# ---------------------------------------------------------------------------

def logcosh(y):
    """log cosh(y) without overflow."""
    a = np.abs(y)
    return a + np.log1p(np.exp(-2.0 * a)) - _LOG2


def sech(y):
    """sech(y) without overflow."""
    a = np.abs(y)
    e = np.exp(-a)
    return 2.0 * e / (1.0 + e * e)


# ---------------------------------------------------------------------------
# types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Gaussian1:
    mean: float
    std: float

    def __post_init__(self):
        if self.std < 0.0:
            raise ValueError("std must be nonnegative")


@dataclass(frozen=True)
class Gaussian2:
    mean: tuple        # (m1, m2)
    covariance: tuple  # ((s11, s12), (s21, s22))

    def __post_init__(self):
        m = np.asarray(self.mean, dtype=float)
        s = np.asarray(self.covariance, dtype=float)
        if m.shape != (2,) or s.shape != (2, 2):
            raise ValueError("mean must be a 2-vector, covariance a 2x2 matrix")
        scale = max(1.0, float(np.abs(s).max()))
        if abs(s[0, 1] - s[1, 0]) > 1e-10 * scale:
            raise ValueError("covariance not symmetric")
        object.__setattr__(self, "mean", (float(m[0]), float(m[1])))
        object.__setattr__(self, "covariance",
                           ((float(s[0, 0]), float(s[0, 1])),
                            (float(s[1, 0]), float(s[1, 1]))))


@dataclass(frozen=True)
class QuadratureConfig:
    nodes_1d: int = 101
    truncation: float = 12.0     # in standard deviations
    std_switch: float = 30.0     # above this, Simpson is the reference path
    simpson_points: int = 20001  # composite Simpson resolution (odd)
    box_step: float = 0.05       # Simpson step on support-clipped axes
    target_abs: float = 1e-10    # internal accuracy target for desk-scale integrals

    def __post_init__(self):
        if self.nodes_1d < 3:
            raise ValueError("nodes_1d must be >= 3")
        if self.truncation < 6.0:
            raise ValueError("truncation must be >= 6 standard deviations")
        if self.simpson_points < 5:
            raise ValueError("simpson_points must be >= 5")


DEFAULT_CFG = QuadratureConfig()


# ---------------------------------------------------------------------------
# Gauss-Hermite nodes (probabilists' weight e^{-x^2/2}/sqrt(2 pi))
# ---------------------------------------------------------------------------

def _hermenorm_eval(x, n):
    """Orthonormal probabilists' Hermite p_n(x), p_n'(x), sum_{k<n} p_k(x)^2.

    For large n the low-order polynomials overflow at the extreme nodes; the
    corresponding weights underflow to 0 there, which is the right limit."""
    p_prev = np.zeros_like(x)
    p = np.full_like(x, (2.0 * math.pi) ** -0.25)
    ssq = p * p
    with np.errstate(over="ignore"):
        for k in range(1, n + 1):
            p_prev, p = p, (x * p - math.sqrt(k - 1) * p_prev) / math.sqrt(k)
            if k < n:
                ssq = ssq + p * p
    dp = math.sqrt(n) * p_prev
    return p, dp, ssq


@lru_cache(maxsize=64)
def gauss_hermite(n: int):
    """Nodes/weights so that sum w_i f(x_i) ~ E f(Z), Z standard normal."""
    if n < 1:
        raise ValueError("need at least one node")
    off = np.sqrt(np.arange(1.0, n))
    x = np.linalg.eigvalsh(np.diag(off, 1) + np.diag(off, -1))
    for _ in range(3):  # Newton polish on the orthonormal recurrence
        p, dp, _ = _hermenorm_eval(x, n)
        x = x - p / dp
    x = 0.5 * (x - x[::-1])  # enforce symmetry
    if n % 2 == 1:
        x[n // 2] = 0.0
    _, _, ssq = _hermenorm_eval(x, n)
    w = 1.0 / ssq
    w = 0.5 * (w + w[::-1])
    w = w / w.sum()  # probabilists' weights sum to sqrt(2 pi); normalize to 1
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def _simpson_weights(n: int):
    if n % 2 == 0:
        n += 1
    w = np.ones(n)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return n, w / 3.0


# ---------------------------------------------------------------------------
# 1-d expectations
# ---------------------------------------------------------------------------

def _simpson_gaussian(f, mean, std, lo, hi, n):
    n, w = _simpson_weights(n)
    y = np.linspace(lo, hi, n)
    z = (y - mean) / std
    dens = np.exp(-0.5 * z * z) / (std * SQRT2PI)
    vals = np.asarray(f(y), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise NumericalError("non-finite integrand values on quadrature nodes")
    step = (hi - lo) / (n - 1)
    return float(np.dot(w, vals * dens)) * step


def expect1(f, g: Gaussian1, cfg: QuadratureConfig = DEFAULT_CFG, support=None):
    """E f(mean + std Z) for scalar f; degenerate std=0 returns f(mean) exactly.

    `support` is an optional (lo, hi) window outside which f is negligible;
    when given, the reference path is composite Simpson on the clipped range,
    which stays accurate when std is much larger than the integrand scale.
    """
    if g.std == 0.0:
        if support is not None and not (support[0] <= g.mean <= support[1]):
            return 0.0
        v = float(np.asarray(f(np.asarray([g.mean])))[0])
        if not math.isfinite(v):
            raise NumericalError("non-finite integrand at degenerate point")
        return v
    lo = g.mean - cfg.truncation * g.std
    hi = g.mean + cfg.truncation * g.std
    if support is not None:
        lo, hi = max(lo, support[0]), min(hi, support[1])
        if lo >= hi:
            return 0.0
        return _simpson_gaussian(f, g.mean, g.std, lo, hi, cfg.simpson_points)
    if g.std > cfg.std_switch:
        return _simpson_gaussian(f, g.mean, g.std, lo, hi, cfg.simpson_points)
    z, w = gauss_hermite(cfg.nodes_1d)
    vals = np.asarray(f(g.mean + g.std * z), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise NumericalError("non-finite integrand values on quadrature nodes")
    return float(np.dot(w, vals))


def expect1_batch(f, means, stds, cfg: QuadratureConfig = DEFAULT_CFG,
                  support=None, points=4001):
    """Vectorized E f(mean_i + std_i Z) over arrays of means/stds.

    Uses row-wise composite Simpson on per-row clipped ranges; meant for
    scan/bracketing passes where thousands of (mean, std) pairs are needed.
    """
    means = np.asarray(means, dtype=float)
    stds = np.asarray(stds, dtype=float)
    out = np.empty(np.broadcast(means, stds).shape)
    means, stds = np.broadcast_arrays(means, stds)
    degen = stds == 0.0
    if degen.any():
        dv = np.asarray(f(means[degen]), dtype=float)
        if support is not None:
            inside = (means[degen] >= support[0]) & (means[degen] <= support[1])
            dv = np.where(inside, dv, 0.0)
        out[degen] = dv
    act = ~degen
    if act.any():
        m = means[act][:, None]
        s = stds[act][:, None]
        n, w = _simpson_weights(points)
        if support is not None and np.all(m - cfg.truncation * s <= support[0]) \
                and np.all(m + cfg.truncation * s >= support[1]):
            # shared window: single f evaluation, one matrix-vector product
            y = np.linspace(support[0], support[1], n)
            z = (y[None, :] - m) / s
            dens = np.exp(-0.5 * z * z) / (s[:, 0] * SQRT2PI)[:, None]
            step = (support[1] - support[0]) / (n - 1)
            out[act] = dens @ (np.asarray(f(y), dtype=float) * w) * step
            return out
        lo = m - cfg.truncation * s
        hi = m + cfg.truncation * s
        if support is not None:
            lo = np.maximum(lo, support[0])
            hi = np.minimum(hi, support[1])
        empty = (hi <= lo)[:, 0]
        hi = np.maximum(hi, lo + 1e-300)
        t = np.linspace(0.0, 1.0, n)[None, :]
        y = lo + (hi - lo) * t
        z = (y - m) / s
        dens = np.exp(-0.5 * z * z) / (s * SQRT2PI)
        vals = f(y) * dens
        step = (hi[:, 0] - lo[:, 0]) / (n - 1)
        res = (vals @ w) * step
        res[empty] = 0.0
        out[act] = res
    return out


def expect_abs(g: Gaussian1):
    """E |Y| for Y ~ N(mean, std^2), in closed form."""
    m, s = g.mean, g.std
    if s == 0.0:
        return abs(m)
    return s * math.sqrt(2.0 / math.pi) * math.exp(-0.5 * (m / s) ** 2) \
        + m * erf(m / (s * math.sqrt(2.0)))


def expect_logcosh(g: Gaussian1, cfg: QuadratureConfig = DEFAULT_CFG):
    """E log cosh(Y), robust for all std.

    Splits log cosh(y) = |y| - log 2 + log(1 + e^{-2|y|}); the first part has a
    closed form and the remainder is integrated over its compact support.
    """
    if g.std == 0.0:
        return float(logcosh(g.mean))
    if g.std <= 1.0:
        z, w = gauss_hermite(cfg.nodes_1d)
        return float(np.dot(w, logcosh(g.mean + g.std * z)))
    # split the remainder window at 0 so its |y| kink lands on a panel edge
    f = lambda y: np.log1p(np.exp(-2.0 * np.abs(y)))
    rem = expect1(f, g, cfg, support=(-21.0, 0.0)) \
        + expect1(f, g, cfg, support=(0.0, 21.0))
    return expect_abs(g) - _LOG2 + rem


# ---------------------------------------------------------------------------
# 2-d expectations
# ---------------------------------------------------------------------------

def _eigen_frame(g: Gaussian2):
    s = np.asarray(g.covariance)
    lam, vec = np.linalg.eigh(s)
    if lam[0] < -1e-12:
        raise ValueError(f"covariance has negative eigenvalue {lam[0]}")
    lam = np.clip(lam, 0.0, None)
    # ascending order from eigh; keep as-is (axis roles are symmetric here)
    return lam, vec


def _axis_window(mean, v, lam_sqrt, cfg, support_box):
    lo = -cfg.truncation * lam_sqrt
    hi = cfg.truncation * lam_sqrt
    if support_box is None:
        return lo, hi
    bx, by = support_box
    # bounding interval of the box corners in this principal coordinate
    m = np.asarray(mean)
    ts = [float(np.dot(np.array([sx * bx, sy * by]) - m, v))
          for sx in (-1.0, 1.0) for sy in (-1.0, 1.0)]
    return max(lo, min(ts)), min(hi, max(ts))


def _axis_rule(lam_sqrt, lo, hi, cfg, clipped):
    if lam_sqrt == 0.0:
        return np.array([0.0]), np.array([1.0])
    if not clipped and lam_sqrt <= cfg.std_switch:
        z, w = gauss_hermite(cfg.nodes_1d)
        return lam_sqrt * z, w
    if hi <= lo:
        return np.array([0.0]), np.array([0.0])
    if clipped:
        step = min(cfg.box_step, lam_sqrt / 16.0)  # resolve integrand and density
        n = int(math.ceil((hi - lo) / step)) + 1
        n = min(max(n, 401), cfg.simpson_points)
    else:
        n = cfg.simpson_points
    n, w = _simpson_weights(n)
    t = np.linspace(lo, hi, n)
    dens = np.exp(-0.5 * (t / lam_sqrt) ** 2) / (lam_sqrt * SQRT2PI)
    step = (hi - lo) / (n - 1)
    return t, w * dens * step


def expect2(f, g: Gaussian2, cfg: QuadratureConfig = DEFAULT_CFG, support_box=None):
    """E f(m + sqrt(S) Z) for bivariate f by tensor quadrature along the
    eigenvectors of S; rank-deficient S degrades to a 1-d integral.

    `support_box` = (bx, by) marks f as negligible outside [-bx,bx]x[-by,by];
    the principal-axis windows are then clipped accordingly and integrated by
    Simpson, which keeps the large-eigenvalue regime accurate.
    """
    lam, vec = _eigen_frame(g)
    m = np.asarray(g.mean)
    tiny = 1e-13 * max(1.0, lam[1])
    if lam[1] <= tiny:  # fully degenerate
        return float(f(m[0], m[1]))
    if lam[0] <= tiny:  # rank one: 1-d integral along the live axis
        v = vec[:, 1]
        g1 = Gaussian1(0.0, math.sqrt(lam[1]))
        sup = None
        if support_box is not None:
            lo, hi = _axis_window(g.mean, v, math.sqrt(lam[1]), cfg, support_box)
            sup = (lo, hi)
        return expect1(lambda t: f(m[0] + t * v[0], m[1] + t * v[1]), g1, cfg,
                       support=sup)

    clipped = support_box is not None
    nodes, weights = [], []
    for i in (0, 1):
        ls = math.sqrt(lam[i])
        lo, hi = _axis_window(g.mean, vec[:, i], ls, cfg, support_box)
        t, w = _axis_rule(ls, lo, hi, cfg, clipped)
        nodes.append(t)
        weights.append(w)
    t1 = nodes[0][:, None]
    t2 = nodes[1][None, :]
    x = m[0] + t1 * vec[0, 0] + t2 * vec[0, 1]
    y = m[1] + t1 * vec[1, 0] + t2 * vec[1, 1]
    vals = np.asarray(f(x, y), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise NumericalError("non-finite integrand values on quadrature nodes")
    return float(weights[0] @ vals @ weights[1])


# ---------------------------------------------------------------------------
# nested expectations
# ---------------------------------------------------------------------------

def _unit_scale_rule(g: Gaussian1, cfg, step=0.02, n_max=6001):
    """Nodes/weights resolving unit-scale structure under N(mean, std^2)."""
    if g.std == 0.0:
        return np.array([g.mean]), np.array([1.0])
    if g.std <= 1.2:
        z, w = gauss_hermite(cfg.nodes_1d)
        return g.mean + g.std * z, w
    lo = g.mean - cfg.truncation * g.std
    hi = g.mean + cfg.truncation * g.std
    n = min(max(int(math.ceil((hi - lo) / step)) + 1, 801), n_max)
    n, w = _simpson_weights(n)
    y = np.linspace(lo, hi, n)
    dens = np.exp(-0.5 * ((y - g.mean) / g.std) ** 2) / (g.std * SQRT2PI)
    return y, w * dens * (hi - lo) / (n - 1)


def nested_expect(outer_f, inner_kernel, g_outer: Gaussian1, g_inner: Gaussian1,
                  cfg: QuadratureConfig = DEFAULT_CFG):
    """E[ outer_f(E'[k_1(Y')], ..., E'[k_m(Y')]) ] with Y ~ g_outer and
    Y' = Y + g_inner increment.

    `inner_kernel` maps an array of Y' values to a tuple of component arrays;
    `outer_f` combines the inner expectations into the outer integrand.  The
    quadrature resolves unit-scale structure of the kernels at any width.
    """
    yo, wo = _unit_scale_rule(g_outer, cfg)
    if g_inner.std == 0.0:
        yp = yo[:, None] + g_inner.mean
        wi = np.array([1.0])
    else:
        yi, wi = _unit_scale_rule(Gaussian1(g_inner.mean, g_inner.std), cfg,
                                  n_max=3001)
        yp = yo[:, None] + yi[None, :]
    comps = inner_kernel(yp)
    if isinstance(comps, np.ndarray):
        comps = (comps,)
    inner_vals = [c @ wi for c in comps]
    outer_vals = np.asarray(outer_f(*inner_vals), dtype=float)
    if not np.all(np.isfinite(outer_vals)):
        raise NumericalError("non-finite nested integrand")
    return float(np.dot(wo, outer_vals))
