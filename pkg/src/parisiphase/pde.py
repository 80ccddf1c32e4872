"""Backward semilinear heat equation for atomic order-parameter measures.

The exact solver works layer by layer: on each interval where the measure's
cdf is constant the equation linearizes under an exponential change of
variables, so the solution is a Gaussian convolution of the next layer up,
with terminal data log cosh(x).  Spatial derivatives up to third order are
propagated analytically through each convolution layer (tilted-moment
recursions).  An independent Crank-Nicolson finite-difference solver is kept
for cross-validation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded
from scipy.special import erf

from .gauss import (DEFAULT_CFG, Gaussian1, NumericalError, QuadratureConfig,
                    SQRT2PI, expect1_batch, gauss_hermite, logcosh, sech)
from .model import Model, SystemPoint

__all__ = ["DiscreteMeasure", "ParisiSolution", "FDGrid", "solve_cole_hopf",
           "solve_fd", "default_fd_grid", "measure_distance", "lipschitz_audit",
           "pde_residual", "LipschitzReport"]


# ---------------------------------------------------------------------------
# measures
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DiscreteMeasure:
    """k-atomic probability measure on [0,1].

    `atoms` are the jump locations q_1 < ... < q_k and `cdf` the values
    m_i = mu[0, t] for t in [q_i, q_{i+1}), with m_k = 1.
    """

    atoms: tuple
    cdf: tuple

    def __post_init__(self):
        atoms = tuple(float(q) for q in self.atoms)
        cdf = tuple(float(m) for m in self.cdf)
        if len(atoms) == 0 or len(atoms) != len(cdf):
            raise ValueError("atoms and cdf must be nonempty and equal length")
        if any(q < 0.0 or q > 1.0 for q in atoms):
            raise ValueError("atoms must lie in [0,1]")
        if any(b <= a for a, b in zip(atoms, atoms[1:])):
            raise ValueError("atoms must be strictly increasing")
        if any(b < a for a, b in zip(cdf, cdf[1:])):
            raise ValueError("cdf must be nondecreasing")
        if not (cdf[0] > 0.0):
            raise ValueError("first cdf value must be positive")
        if abs(cdf[-1] - 1.0) > 1e-12:
            raise ValueError("cdf must end at 1")
        cdf = cdf[:-1] + (1.0,)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "cdf", cdf)

    @classmethod
    def dirac(cls, q: float) -> "DiscreteMeasure":
        return cls((q,), (1.0,))

    @classmethod
    def from_weights(cls, atoms, weights) -> "DiscreteMeasure":
        w = np.asarray(weights, dtype=float)
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        return cls(tuple(atoms), tuple(np.cumsum(w / w.sum())))

    @classmethod
    def parse(cls, spec: str) -> "DiscreteMeasure":
        """Parse 'q1:m1[,q2:m2...]' with m_i the cdf values."""
        atoms, cdf = [], []
        for part in spec.split(","):
            q_str, m_str = part.strip().split(":")
            atoms.append(float(q_str))
            cdf.append(float(m_str))
        return cls(tuple(atoms), tuple(cdf))

    @property
    def k(self) -> int:
        return len(self.atoms)

    @property
    def weights(self) -> tuple:
        prev = (0.0,) + self.cdf[:-1]
        return tuple(m - p for m, p in zip(self.cdf, prev))

    def mass_below(self, t):
        """mu[0, t], right-continuous in t."""
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for q, m in zip(self.atoms, self.cdf):
            out = np.where(t >= q, m, out)
        return float(out) if out.ndim == 0 else out

    def spec_string(self) -> str:
        return ",".join(f"{q:.12g}:{m:.12g}" for q, m in zip(self.atoms, self.cdf))


def measure_distance(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    """d(mu,nu) = int_0^1 |mu[0,s] - nu[0,s]| ds, exactly."""
    pts = sorted(set(mu.atoms) | set(nu.atoms) | {0.0, 1.0})
    total = 0.0
    for a, b in zip(pts, pts[1:]):
        total += abs(mu.mass_below(a) - nu.mass_below(a)) * (b - a)
    return total


# ---------------------------------------------------------------------------
# exact layered solver
# ---------------------------------------------------------------------------

class ParisiSolution:
    """Evaluates u, u_x, u_xx, u_xxx at any (t, x) for a fixed atomic measure.

    Immutable after construction; evaluations at distinct points are
    independent and can run concurrently.
    """

    _CHUNK_BUDGET = 4_000_000  # max tensor entries per evaluation chunk

    def __init__(self, model: Model, point: SystemPoint, measure: DiscreteMeasure,
                 cfg: QuadratureConfig = DEFAULT_CFG):
        self.model = model
        self.point = point
        self.measure = measure
        self.cfg = cfg
        b2 = point.beta ** 2
        self._xip_atoms = tuple(b2 * model.xi0_d1(q) for q in measure.atoms)
        self._xip1 = b2 * model.xi0_d1(1.0)

    # -- public API -------------------------------------------------------------

    def evaluate(self, t: float, x, order: int = 3):
        """Return (u, u_x, u_xx, u_xxx) at time t and position(s) x; entries
        above `order` are None (skipping them saves tensor reductions)."""
        scalar = np.isscalar(x)
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = self._eval_chunked(float(t), x, order)
        if scalar:
            return tuple(None if a is None else float(a[0]) for a in out)
        return out

    def u(self, t, x):
        return self.evaluate(t, x, order=0)[0]

    def u_x(self, t, x):
        return self.evaluate(t, x, order=1)[1]

    def u_xx(self, t, x):
        return self.evaluate(t, x, order=2)[2]

    def u_xxx(self, t, x):
        return self.evaluate(t, x, order=3)[3]

    # -- internals ----------------------------------------------------------------

    def _xip(self, t):
        return self.point.beta ** 2 * self.model.xi0_d1(t)

    def _interval(self, t: float) -> int:
        """Index i such that mu[0,t] = cdf[i-1] (i=0 before the first atom)."""
        atoms = self.measure.atoms
        i = 0
        while i < len(atoms) and t >= atoms[i]:
            i += 1
        return i

    def _layer_nodes(self, s: float):
        # resolve the unit-scale curvature of log cosh under wide convolutions
        n = max(self.cfg.nodes_1d, min(2400, int(40.0 * s * s) + 1))
        return gauss_hermite(n)

    def _eval_chunked(self, t, x, order=3):
        i = self._interval(t)
        k = self.measure.k
        depth = k - i
        if depth <= 0:
            return self._top(t, x)
        if k == 1:
            return self._below_single_atom(t, x, order)
        width = 1
        for j in range(i, k):
            s2 = self._xip_atoms[j] - (self._xip(t) if j == i else self._xip_atoms[j - 1])
            s = math.sqrt(max(s2, 0.0))
            if s > 35.0:
                raise NumericalError(
                    f"convolution layer std {s:.1f} too wide for the exact "
                    "multi-atom solver; reduce beta or use the FD solver")
            width *= len(self._layer_nodes(s)[0])
        chunk = max(1, self._CHUNK_BUDGET // max(width, 1))
        if x.size <= chunk:
            return self._eval(t, x, i, order)
        outs = [self._eval(t, x[j:j + chunk], i, order)
                for j in range(0, x.size, chunk)]
        return tuple(None if outs[0][m] is None
                     else np.concatenate([o[m] for o in outs]) for m in range(4))

    def _top(self, t, x):
        c = 0.5 * (self._xip1 - self._xip(t))
        th = np.tanh(x)
        s2 = sech(x) ** 2
        return logcosh(x) + c, th, s2, -2.0 * th * s2

    def _eval(self, t, x, i, order=3):
        """Recursive layered evaluation; t lies in interval i (mu[0,t]=cdf[i-1])."""
        k = self.measure.k
        if i >= k:
            return self._top(t, x)
        q_next = self.measure.atoms[i]
        s = math.sqrt(max(self._xip_atoms[i] - self._xip(t), 0.0))
        if s == 0.0:
            return self._eval(q_next, x, i + 1, order)
        z, w = self._layer_nodes(s)
        y = x[..., None] + s * z
        u1, ux1, uxx1, uxxx1 = self._eval(q_next, y, i + 1, order)
        m = 0.0 if i == 0 else self.measure.cdf[i - 1]
        if m == 0.0:
            return (u1 @ w,
                    ux1 @ w if order >= 1 else None,
                    uxx1 @ w if order >= 2 else None,
                    uxxx1 @ w if order >= 3 else None)
        big = np.max(u1, axis=-1, keepdims=True)
        om = w * np.exp(m * (u1 - big))
        z0 = np.sum(om, axis=-1)
        om = om / z0[..., None]
        u = big[..., 0] + np.log(z0) / m
        ux = uxx = uxxx = None
        if order >= 1:
            e_ux = np.sum(om * ux1, axis=-1)
            ux = e_ux
        if order >= 2:
            e_ux2 = np.sum(om * ux1 * ux1, axis=-1)
            e_uxx = np.sum(om * uxx1, axis=-1)
            uxx = e_uxx + m * (e_ux2 - e_ux * e_ux)
        if order >= 3:
            e_ux3 = np.sum(om * ux1 ** 3, axis=-1)
            e_uxuxx = np.sum(om * ux1 * uxx1, axis=-1)
            e_uxxx = np.sum(om * uxxx1, axis=-1)
            uxxx = (e_uxxx + 3.0 * m * (e_uxuxx - e_ux * e_uxx)
                    + m * m * (e_ux3 - 3.0 * e_ux2 * e_ux + 2.0 * e_ux ** 3))
        return u, ux, uxx, uxxx

    # -- robust single-atom path ---------------------------------------------------

    def _below_single_atom(self, t, x, order=3):
        """For a one-atom measure below its atom the four Gaussian convolutions
        of the explicit terminal layer are computed with closed forms for the
        unbounded parts, valid for arbitrarily wide layers."""
        q = self.measure.atoms[0]
        s = math.sqrt(max(self._xip_atoms[0] - self._xip(t), 0.0))
        c = 0.5 * (self._xip1 - self._xip_atoms[0])
        if s == 0.0:
            return self._top(q, x)
        cfg = self.cfg
        u = _e_logcosh_batch(x, s, cfg) + c
        ux = _e_tanh_batch(x, s, cfg) if order >= 1 else None
        uxx = _win_batch(lambda y: sech(y) ** 2, x, s, cfg) if order >= 2 else None
        uxxx = _win_batch(lambda y: -2.0 * np.tanh(y) * sech(y) ** 2, x, s, cfg)             if order >= 3 else None
        return u, ux, uxx, uxxx


_WIN = 24.0  # half-width outside which sech-type integrands are negligible


def _win_batch(f, means, s, cfg):
    return expect1_batch(f, means, np.broadcast_to(np.asarray(s, float), means.shape),
                         cfg, support=(-_WIN, _WIN))


def _e_logcosh_batch(means, s, cfg):
    """Vectorized E log cosh(mean_i + s_i Z), robust for any widths."""
    means = np.asarray(means, dtype=float)
    stds = np.broadcast_to(np.asarray(s, dtype=float), means.shape)
    out = np.empty(means.shape)
    degen = stds == 0.0
    if degen.any():
        out[degen] = logcosh(means[degen])
    if degen.all():
        return out
    a = ~degen
    m, sd = means[a], stds[a]
    e_abs = (sd * math.sqrt(2.0 / math.pi) * np.exp(-0.5 * (m / sd) ** 2)
             + m * erf(m / (sd * math.sqrt(2.0))))
    f = lambda y: np.log1p(np.exp(-2.0 * np.abs(y)))
    rem = expect1_batch(f, m, sd, cfg, support=(-22.0, 0.0)) \
        + expect1_batch(f, m, sd, cfg, support=(0.0, 22.0))
    out[a] = e_abs - math.log(2.0) + rem
    return out


def _e_tanh_batch(means, s, cfg):
    means = np.asarray(means, dtype=float)
    stds = np.broadcast_to(np.asarray(s, dtype=float), means.shape)
    i_plus = expect1_batch(lambda y: 1.0 - np.tanh(y), means, stds, cfg,
                           support=(0.0, 22.0))
    i_minus = expect1_batch(lambda y: 1.0 + np.tanh(y), means, stds, cfg,
                            support=(-22.0, 0.0))
    sd = np.where(stds == 0.0, 1e-300, stds)
    return erf(means / (sd * math.sqrt(2.0))) - i_plus + i_minus


def solve_cole_hopf(model: Model, point: SystemPoint, measure: DiscreteMeasure,
                    cfg: QuadratureConfig = DEFAULT_CFG) -> ParisiSolution:
    return ParisiSolution(model, point, measure, cfg)


# ---------------------------------------------------------------------------
# finite-difference cross-solver
# ---------------------------------------------------------------------------

@dataclass
class FDGrid:
    x: np.ndarray       # spatial grid
    t: np.ndarray       # time levels, increasing, t[0]=0, t[-1]=1
    u: np.ndarray       # u[j, i] = u(t[j], x[i])

    def value(self, t: float, x: float) -> float:
        j = int(np.argmin(np.abs(self.t - t)))
        return _interp_cubic(self.x, self.u[j], x)

    def u0h(self, h: float) -> float:
        return _interp_cubic(self.x, self.u[0], h)


def _interp_cubic(xg, vals, x):
    """Local 4-point Lagrange interpolation on a uniform grid."""
    n = len(xg)
    i = int(np.clip(np.searchsorted(xg, x) - 1, 1, n - 3))
    xs = xg[i - 1:i + 3]
    ys = vals[i - 1:i + 3]
    out = 0.0
    for a in range(4):
        term = ys[a]
        for b in range(4):
            if a != b:
                term *= (x - xs[b]) / (xs[a] - xs[b])
        out += term
    return float(out)


def default_fd_grid(model: Model, point: SystemPoint, nx: int = 2001, nt: int = 4000):
    xip1 = point.beta ** 2 * model.xi0_d1(1.0)
    L = point.h + 8.0 * math.sqrt(xip1) + 1.0
    return L, nx, nt


def _time_levels(measure: DiscreteMeasure, nt: int):
    brk = [0.0] + [q for q in measure.atoms if 0.0 < q < 1.0] + [1.0]
    brk = sorted(set(brk))
    levels = [np.array([0.0])]
    for a, b in zip(brk, brk[1:]):
        n = max(8, int(round(nt * (b - a))))
        levels.append(np.linspace(a, b, n + 1)[1:])
    return np.concatenate(levels)


def solve_fd(model: Model, point: SystemPoint, measure: DiscreteMeasure,
             x_max: float = None, nx: int = 2001, nt: int = 4000) -> FDGrid:
    """Crank-Nicolson on the diffusion term, explicit nonlinear term,
    zero-curvature boundary condition (u is asymptotically linear)."""
    L_def, _, _ = default_fd_grid(model, point)
    L = x_max if x_max is not None else L_def
    xip1 = point.beta ** 2 * model.xi0_d1(1.0)
    if L < point.h + 8.0 * math.sqrt(xip1):
        raise ValueError("x_max must cover h + 8 sqrt(xi'(1))")
    if nx < 401 or nt < 400:
        raise ValueError("need nx >= 401 and nt >= 400")
    x = np.linspace(-L, L, nx)
    dx = x[1] - x[0]
    times = _time_levels(measure, nt)
    b2 = point.beta ** 2

    u = logcosh(x).copy()
    rows = np.empty((len(times), nx))
    rows[-1] = u

    # 4th-order central second difference; zero rows at the boundary enforce
    # u_xx = 0 there, next-to-boundary rows fall back to the 3-point stencil
    c2, c1, c0 = -1.0 / 12.0, 4.0 / 3.0, -5.0 / 2.0
    d0 = np.zeros(nx)             # A[i, i]
    dp1 = np.zeros(nx - 1)        # dp1[i] = A[i, i+1]
    dm1 = np.zeros(nx - 1)        # dm1[i] = A[i+1, i]
    dp2 = np.zeros(nx - 2)        # dp2[i] = A[i, i+2]
    dm2 = np.zeros(nx - 2)        # dm2[i] = A[i+2, i]
    d0[2:nx - 2] = c0
    d0[1] = d0[nx - 2] = -2.0
    dp1[2:nx - 2] = c1
    dp1[1] = dp1[nx - 2] = 1.0
    dm1[1:nx - 3] = c1            # rows 2..nx-3
    dm1[0] = dm1[nx - 3] = 1.0    # rows 1 and nx-2
    dp2[2:nx - 2] = c2            # rows 2..nx-3 (i+2 <= nx-1 automatic)
    dm2[0:nx - 4] = c2            # rows 2..nx-3
    bands = np.zeros((5, nx))
    bands[0, 2:] = dp2 / dx ** 2
    bands[1, 1:] = dp1 / dx ** 2
    bands[2, :] = d0 / dx ** 2
    bands[3, :-1] = dm1 / dx ** 2
    bands[4, :-2] = dm2 / dx ** 2

    for j in range(len(times) - 1, 0, -1):
        t_hi, t_lo = times[j], times[j - 1]
        dt = t_hi - t_lo
        t_mid = 0.5 * (t_hi + t_lo)
        d = 0.5 * b2 * model.xi0_d2(t_mid)
        m = measure.mass_below(t_mid)

        ux = _grad4(u, dx)
        if np.max(np.abs(ux)) >= 1.0 + 1e-6:
            raise NumericalError(f"FD instability: |u_x| = {np.max(np.abs(ux)):.4f}")
        rhs = u + 0.5 * dt * d * _apply_banded(bands, u) + dt * d * m * ux * ux

        ab = -0.5 * dt * d * bands
        ab[2, :] += 1.0
        u = solve_banded((2, 2), ab, rhs)
        rows[j - 1] = u

    return FDGrid(x=x, t=times, u=rows)


def _apply_banded(bands, v):
    n = v.size
    out = bands[2] * v
    out[:-1] += bands[1, 1:] * v[1:]
    out[1:] += bands[3, :-1] * v[:-1]
    out[:-2] += bands[0, 2:] * v[2:]
    out[2:] += bands[4, :-2] * v[:-2]
    return out


def _grad4(u, dx):
    out = np.empty_like(u)
    out[2:-2] = (u[:-4] - 8.0 * u[1:-3] + 8.0 * u[3:-1] - u[4:]) / (12.0 * dx)
    out[1] = (u[2] - u[0]) / (2.0 * dx)
    out[-2] = (u[-1] - u[-3]) / (2.0 * dx)
    out[0] = (u[1] - u[0]) / dx
    out[-1] = (u[-1] - u[-2]) / dx
    return out


def pde_residual(sol: ParisiSolution, t, x, eps: float = 1e-5):
    """Residual of the backward equation at (t, x) using exact x-derivatives
    and a central finite difference in time.  Meaningful away from atom times."""
    t = float(t)
    up = sol.evaluate(t + eps, np.asarray(x, dtype=float))[0]
    um = sol.evaluate(t - eps, np.asarray(x, dtype=float))[0]
    ut = (np.asarray(up) - np.asarray(um)) / (2.0 * eps)
    _, ux, uxx, _ = sol.evaluate(t, np.asarray(x, dtype=float))
    b2 = sol.point.beta ** 2
    m = sol.measure.mass_below(t)
    return ut + 0.5 * b2 * sol.model.xi0_d2(t) * (np.asarray(uxx) + m * np.asarray(ux) ** 2)


# ---------------------------------------------------------------------------
# measure-continuity audit
# ---------------------------------------------------------------------------

@dataclass
class LipschitzReport:
    u_lhs: float
    u_rhs: float
    u_holds: bool
    ux_lhs: float
    ux_rhs: float
    ux_holds: bool
    distance: float


def lipschitz_audit(model: Model, point: SystemPoint, mu: DiscreteMeasure,
                    nu: DiscreteMeasure, cfg: QuadratureConfig = DEFAULT_CFG,
                    nt: int = 13, nx: int = 41) -> LipschitzReport:
    """Checks the measure-continuity bounds of the solution map on a test grid:
    sup|u - u~| against xi''(1) d(mu,nu) and sup|u_x - u_x~| against
    e^{xi'(1)} xi''(1) d(mu,nu)."""
    d = measure_distance(mu, nu)
    b2 = point.beta ** 2
    xipp1 = b2 * model.xi0_d2(1.0)
    xip1 = b2 * model.xi0_d1(1.0)
    sol_mu = ParisiSolution(model, point, mu, cfg)
    sol_nu = ParisiSolution(model, point, nu, cfg)
    ts = sorted(set(np.linspace(0.0, 1.0, nt)) | set(mu.atoms) | set(nu.atoms))
    X = point.h + 4.0 * math.sqrt(xip1) + 2.0
    xs = np.linspace(-X, X, nx)
    du, dux = 0.0, 0.0
    for t in ts:
        a = sol_mu.evaluate(t, xs)
        b = sol_nu.evaluate(t, xs)
        du = max(du, float(np.max(np.abs(a[0] - b[0]))))
        dux = max(dux, float(np.max(np.abs(a[1] - b[1]))))
    u_rhs = xipp1 * d
    ux_rhs = math.exp(xip1) * xipp1 * d
    slack = 1e-9
    return LipschitzReport(du, u_rhs, du <= u_rhs + slack,
                           dux, ux_rhs, dux <= ux_rhs + slack, d)
