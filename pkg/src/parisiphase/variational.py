"""The free-energy functional over atomic order-parameter measures: values,
first variation, stationarity certificates, and phase classification.

The functional is u(0, h) minus the exactly-integrable linear term
(1/2) int xi''(s) mu[0,s] s ds.  Optimality of a candidate measure is
certified through the first variation: the measure must charge only the
minimizers of G, and the two stationarity conditions must hold at every atom.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize

from .descent import (SDEConfig, em_curve, free_law, moment_curves_one_atom,
                      sde_moment)
from .gauss import (DEFAULT_CFG, Gaussian1, QuadratureConfig, expect1,
                    expect_logcosh)
from .model import Model, SystemPoint
from .pde import DiscreteMeasure, ParisiSolution, _e_logcosh_batch

__all__ = ["FunctionalValue", "FirstVariation", "CertificateReport",
           "PhaseReport", "MinimizeOptions", "ClassifyOptions",
           "parisi_value", "parisi_value_rs", "linear_term", "first_variation",
           "certify", "minimize_k", "classify"]


# ---------------------------------------------------------------------------
# functional values
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FunctionalValue:
    value: float
    u_part: float
    linear_part: float


def linear_term(model: Model, point: SystemPoint, measure: DiscreteMeasure) -> float:
    """(1/2) int_0^1 xi''(s) mu[0,s] s ds, exactly (antiderivative s xi' - xi)."""
    b2 = point.beta ** 2

    def anti(t):
        return t * model.xi0_d1(t) - model.xi0(t)

    total = 0.0
    ends = list(measure.atoms[1:]) + [1.0]
    for q, q_next, m in zip(measure.atoms, ends, measure.cdf):
        total += m * (anti(q_next) - anti(q))
    return 0.5 * b2 * total


def parisi_value(model: Model, point: SystemPoint, measure: DiscreteMeasure,
                 cfg: QuadratureConfig = DEFAULT_CFG,
                 solution: ParisiSolution = None) -> FunctionalValue:
    if measure.k == 1:
        u_part = _rs_u_part(model, point, measure.atoms[0], cfg)
    else:
        if solution is None:
            solution = ParisiSolution(model, point, measure, cfg)
        u_part = float(solution.u(0.0, point.h))
    lin = linear_term(model, point, measure)
    return FunctionalValue(u_part - lin, u_part, lin)


def _rs_u_part(model, point, q, cfg):
    b2 = point.beta ** 2
    std = math.sqrt(b2 * model.xi0_d1(q))
    return expect_logcosh(Gaussian1(point.h, std), cfg) \
        + 0.5 * b2 * (model.xi0_d1(1.0) - model.xi0_d1(q))


def parisi_value_rs(model: Model, point: SystemPoint, q: float,
                    cfg: QuadratureConfig = DEFAULT_CFG) -> float:
    """Closed form of the functional at a one-atom measure:
    E log cosh(h + sqrt(xi'(q)) Z) - xi'(q)(1-q)/2 + (xi(1)-xi(q))/2."""
    b2 = point.beta ** 2
    std = math.sqrt(b2 * model.xi0_d1(q))
    return expect_logcosh(Gaussian1(point.h, std), cfg) \
        - 0.5 * b2 * model.xi0_d1(q) * (1.0 - q) \
        + 0.5 * b2 * (model.xi0(1.0) - model.xi0(q))


def _rs_value_scan(model, point, qs, cfg):
    b2 = point.beta ** 2
    stds = np.sqrt(b2 * model.xi0_d1(qs))
    u = _e_logcosh_batch(np.full_like(qs, point.h), stds, cfg)
    return u - 0.5 * b2 * model.xi0_d1(qs) * (1.0 - qs) \
        + 0.5 * b2 * (model.xi0(1.0) - model.xi0(qs))


# ---------------------------------------------------------------------------
# first variation
# ---------------------------------------------------------------------------

@dataclass
class FirstVariation:
    t: np.ndarray          # requested grid
    G: np.ndarray
    G_prime: np.ndarray
    grid: np.ndarray       # refined evaluation grid
    G_grid: np.ndarray
    min_value: float
    argmin: np.ndarray
    E_ux2: dict            # s -> E u_x^2(s, X_s) on the refined grid
    stderr: float = 0.0    # aggregate MC uncertainty on G values
    E_uxx2: dict = None    # s -> E u_xx^2(s, X_s) at atoms (MC-backed runs)


def _ux2_values(model, point, measure, s_values, cfg, sde_cfg, solution,
                grid_n=8192, atoms_uxx2=False):
    """E u_x^2(s, X_s) at all s in s_values; returns (values, aggregate stderr,
    uxx2-at-atoms map).  One-atom measures use exact quadrature; larger
    supports use one Euler-Maruyama sweep recording every requested time."""
    s_values = np.asarray(s_values, dtype=float)
    if measure.k == 1:
        vals = moment_curves_one_atom(model, point, measure.atoms[0], ["ux2"],
                                      s_values, cfg, grid_n=grid_n)["ux2"]
        return vals, 0.0, None
    if solution is None:
        solution = ParisiSolution(model, point, measure, cfg)
    q1 = measure.atoms[0]
    vals = np.empty_like(s_values)
    below = s_values <= q1 + 1e-15
    for i in np.where(below)[0]:
        s = float(s_values[i])
        vals[i] = expect1(lambda x: solution.u_x(s, x) ** 2,
                          free_law(model, point, s), cfg)
    above = ~below
    se_max = 0.0
    uxx2_map = {}
    if above.any():
        if sde_cfg is None:
            sde_cfg = SDEConfig(n_paths=10000, dt=2e-3, seed=0)
        times = [float(s) for s in s_values[above]]
        fs = {"ux2": lambda s, x: solution.u_x(s, x) ** 2}
        if atoms_uxx2:
            fs["uxx2"] = lambda s, x: solution.u_xx(s, x) ** 2
        curve = em_curve(model, point, measure, fs, max(times), sde_cfg,
                         solution, cfg, record_times=times)
        for i in np.where(above)[0]:
            est, se = curve["ux2"][float(s_values[i])]
            vals[i] = est
            se_max = max(se_max, se)
        if atoms_uxx2:
            for q in measure.atoms:
                if float(q) in curve["uxx2"]:
                    uxx2_map[float(q)] = curve["uxx2"][float(q)]
    if atoms_uxx2:
        for i in np.where(below)[0]:
            s = float(s_values[i])
            if any(abs(s - q) < 1e-15 for q in measure.atoms):
                v = expect1(lambda x: solution.u_xx(s, x) ** 2,
                            free_law(model, point, s), cfg)
                uxx2_map[s] = (v, 0.0)
    return vals, se_max, uxx2_map


def first_variation(model: Model, point: SystemPoint, measure: DiscreteMeasure,
                    t_grid=None, cfg: QuadratureConfig = DEFAULT_CFG,
                    sde_cfg: SDEConfig = None, n_refine: int = 160,
                    solution: ParisiSolution = None,
                    grid_n: int = 8192) -> FirstVariation:
    """G(t) = int_t^1 (xi''(s)/2)(E u_x^2(s, X_s) - s) ds on a refined grid,
    by composite Simpson with midpoint evaluations, together with
    G'(y) = -(xi''(y)/2)(E u_x^2(y, X_y) - y)."""
    if t_grid is None:
        t_grid = np.linspace(0.0, 1.0, 41)
    t_grid = np.asarray(t_grid, dtype=float)
    base = np.unique(np.concatenate([t_grid, np.linspace(0.0, 1.0, n_refine + 1),
                                     np.asarray(measure.atoms)]))
    mids = 0.5 * (base[:-1] + base[1:])
    evals = np.unique(np.concatenate([base, mids]))
    vals, se, uxx2_map = _ux2_values(model, point, measure, evals, cfg, sde_cfg,
                                     solution, grid_n=grid_n,
                                     atoms_uxx2=(measure.k > 1))
    e_map = {float(s): float(v) for s, v in zip(evals, vals)}

    b2 = point.beta ** 2
    integrand = 0.5 * b2 * model.xi0_d2(evals) * (vals - evals)
    idx = {float(s): i for i, s in enumerate(evals)}
    # cumulative integral from the right over base panels (Simpson per panel)
    G_base = np.zeros(len(base))
    for j in range(len(base) - 2, -1, -1):
        a, b = base[j], base[j + 1]
        m = 0.5 * (a + b)
        panel = (b - a) / 6.0 * (integrand[idx[float(a)]]
                                 + 4.0 * integrand[idx[float(m)]]
                                 + integrand[idx[float(b)]])
        G_base[j] = G_base[j + 1] + panel
    g_map = {float(s): float(g) for s, g in zip(base, G_base)}
    G_t = np.array([g_map[float(t)] for t in t_grid])
    gp = -0.5 * b2 * model.xi0_d2(t_grid) * \
        (np.array([e_map[float(t)] for t in t_grid]) - t_grid)
    min_value = float(G_base.min())
    band = 1e-6 * max(1.0, abs(min_value))
    argmin = base[G_base <= min_value + band]
    # aggregate MC error on G: integral of the pointwise stderr bound
    g_se = se * 0.5 * b2 * model.xi0_d2(1.0) if se > 0.0 else 0.0
    return FirstVariation(t=t_grid, G=G_t, G_prime=gp, grid=base, G_grid=G_base,
                          min_value=min_value, argmin=argmin, E_ux2=e_map,
                          stderr=g_se, E_uxx2=uxx2_map)


# ---------------------------------------------------------------------------
# certification
# ---------------------------------------------------------------------------

@dataclass
class CertificateReport:
    status: str                    # PASS / FAIL / UNDECIDED
    residual: float                # max_atoms G(q_i) - min_grid G
    sc_gap: list                   # |E u_x^2(q_i) - q_i| per atom
    sc_stability: list             # xi''(q_i) E u_xx^2(q_i) - 1 per atom
    support_top_ok: bool           # no atom at 1
    support_bot: float             # u_x^2(0,h) - q_1
    stderr: float
    fv: FirstVariation = None

    @property
    def passed(self):
        return self.status == "PASS"


def certify(model: Model, point: SystemPoint, measure: DiscreteMeasure,
            tol: float = 1e-6, cfg: QuadratureConfig = DEFAULT_CFG,
            sde_cfg: SDEConfig = None, fv: FirstVariation = None) -> CertificateReport:
    """Stationarity certificate: the measure charges only minimizers of G
    (grid test), both stationarity conditions hold at every atom, and the
    support constraints hold."""
    if measure.atoms[-1] >= 1.0 - 1e-9:
        return CertificateReport("FAIL", math.inf, [], [], False, math.inf, 0.0)
    if fv is None:
        # Monte Carlo noise caps the attainable precision at k >= 2 anyway,
        # so a coarse variation grid is enough there
        fv = first_variation(model, point, measure, cfg=cfg, sde_cfg=sde_cfg,
                             n_refine=160 if measure.k == 1 else 24)
    g_at_atoms = [fv.G_grid[np.argmin(np.abs(fv.grid - q))] for q in measure.atoms]
    residual = max(g_at_atoms) - fv.min_value

    sc_gap, sc_stab = [], []
    se_total = fv.stderr
    b2 = point.beta ** 2
    for q in measure.atoms:
        e_ux2 = fv.E_ux2.get(float(q))
        if e_ux2 is None:
            v, se = sde_moment(model, point, measure, "ux2", q, cfg, sde_cfg)
            e_ux2 = v
            se_total = max(se_total, se)
        sc_gap.append(abs(e_ux2 - q))
        if fv.E_uxx2 and float(q) in fv.E_uxx2:
            v2, se2 = fv.E_uxx2[float(q)]
        else:
            v2, se2 = sde_moment(model, point, measure, "uxx2", q, cfg, sde_cfg)
        se_total = max(se_total, se2)
        sc_stab.append(b2 * model.xi0_d2(q) * v2 - 1.0)

    sol = ParisiSolution(model, point, measure, cfg)
    ux0 = float(sol.u_x(0.0, point.h))
    support_bot = ux0 ** 2 - measure.atoms[0]

    checks = [residual, max(sc_gap), max(sc_stab), support_bot]
    slack = tol + 3.0 * se_total
    if any(c > slack for c in checks):
        status = "FAIL"
    elif se_total > tol:
        status = "UNDECIDED"
    else:
        status = "PASS"
    return CertificateReport(status, residual, sc_gap, sc_stab, True,
                             support_bot, se_total, fv)


# ---------------------------------------------------------------------------
# minimization over k-atom measures
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MinimizeOptions:
    n_starts: int = 8
    seed: int = 0
    scan_points: int = 241
    nm_maxiter: int = 2500
    merge_tol: float = 1e-5


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def _params_to_measure(x, k):
    qs = np.sort(_sigmoid(np.asarray(x[:k])))
    qs = np.minimum(qs, 1.0 - 1e-9)
    for i in range(1, k):
        qs[i] = max(qs[i], qs[i - 1] + 1e-9)
    logits = np.concatenate([np.asarray(x[k:]), [0.0]])
    w = np.exp(logits - logits.max())
    w = w / w.sum()
    return DiscreteMeasure.from_weights(tuple(qs), tuple(w))


def _merge_atoms(measure: DiscreteMeasure, tol: float) -> DiscreteMeasure:
    atoms = list(measure.atoms)
    weights = list(measure.weights)
    out_a, out_w = [atoms[0]], [weights[0]]
    for q, w in zip(atoms[1:], weights[1:]):
        if q - out_a[-1] < tol:
            total = out_w[-1] + w
            out_a[-1] = (out_a[-1] * out_w[-1] + q * w) / total if total > 0 else q
            out_w[-1] = total
        else:
            out_a.append(q)
            out_w.append(w)
    return DiscreteMeasure.from_weights(tuple(out_a), tuple(out_w))


def minimize_k(model: Model, point: SystemPoint, k: int,
               opts: MinimizeOptions = MinimizeOptions(),
               cfg: QuadratureConfig = DEFAULT_CFG, prev: DiscreteMeasure = None,
               record=None):
    """Best k-atom measure by multi-start simplex search in an unconstrained
    parametrization (logistic atoms, softmax weights); k=1 reduces to a 1-d
    minimization over the atom location.  Deterministic for a fixed seed."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if k == 1:
        return _minimize_one_atom(model, point, opts, cfg, record)

    def objective(x):
        meas = _params_to_measure(x, k)
        return parisi_value(model, point, meas, cfg).value

    rng = np.random.default_rng(opts.seed)
    starts = []
    if prev is None and k > 1:
        prev, _ = minimize_k(model, point, k - 1, opts, cfg)
    if prev is not None:
        starts.append(_split_start(prev, k, rng))
    while len(starts) < opts.n_starts:
        starts.append(np.concatenate([rng.normal(0.0, 1.5, size=k),
                                      rng.normal(0.0, 0.7, size=k - 1)]))
    best = None
    for x0 in starts:
        res = minimize(objective, x0, method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-13,
                                "maxiter": opts.nm_maxiter,
                                "maxfev": opts.nm_maxiter, "adaptive": True})
        cand = (res.fun, tuple(res.x))
        if best is None or cand < best:
            best = cand
    meas = _merge_atoms(_params_to_measure(np.asarray(best[1]), k), opts.merge_tol)
    val = parisi_value(model, point, meas, cfg)
    return meas, val


def _split_start(prev: DiscreteMeasure, k: int, rng):
    atoms = list(prev.atoms)
    weights = list(prev.weights)
    while len(atoms) < k:
        i = int(np.argmax(weights))
        q, w = atoms[i], weights[i]
        lo = max(q - 0.08, 1e-4)
        hi = min(q + 0.08, 1.0 - 1e-4)
        atoms[i:i + 1] = [lo, hi]
        weights[i:i + 1] = [w / 2.0, w / 2.0]
    order = np.argsort(atoms)
    atoms = np.asarray(atoms)[order]
    weights = np.maximum(np.asarray(weights)[order], 1e-6)
    x_atoms = np.log(atoms / (1.0 - atoms))
    logits = np.log(weights / weights[-1])
    return np.concatenate([x_atoms, logits[:-1]])


def _minimize_one_atom(model, point, opts, cfg, record=None):
    # d/dq of the one-atom value is -(xi''(q)/2)(E tanh^2(h+sqrt(xi'(q))Z) - q),
    # so interior minima sit exactly on fixed-point roots; evaluate the closed
    # form at every root and take the best
    if record is None:
        from .atline import fixed_points
        record = fixed_points(model, point, cfg)
    best_q, best_v = None, math.inf
    for q in record.roots:
        qc = min(float(q), 1.0 - 1e-12)
        v = parisi_value_rs(model, point, qc, cfg)
        if v < best_v:
            best_q, best_v = qc, float(v)
    meas = DiscreteMeasure.dirac(best_q)
    return meas, parisi_value(model, point, meas, cfg)


# ---------------------------------------------------------------------------
# classification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClassifyOptions:
    max_k: int = 3
    tol: float = 1e-6
    minimize: MinimizeOptions = MinimizeOptions()
    sde: SDEConfig = SDEConfig(n_paths=10000, dt=2e-3, seed=0)


@dataclass
class PhaseReport:
    classification: str            # RS / kRSB / UNDECIDED
    measure: DiscreteMeasure
    value: float
    certificate_residual: float
    sc_gap: list
    sc_stability: list
    values_by_k: dict
    reason: str = ""


def classify(model: Model, point: SystemPoint,
             opts: ClassifyOptions = ClassifyOptions(),
             cfg: QuadratureConfig = DEFAULT_CFG) -> PhaseReport:
    """Minimize over k = 1, 2, ... and return the smallest k whose optimum
    passes the stationarity certificate; UNDECIDED when none does."""
    values_by_k = {}
    prev = None
    best = None
    for k in range(1, opts.max_k + 1):
        meas, val = minimize_k(model, point, k, opts.minimize, cfg, prev=prev)
        prev = meas
        values_by_k[k] = val.value
        rep = certify(model, point, meas, opts.tol, cfg,
                      sde_cfg=opts.sde if meas.k > 1 else None)
        if best is None or val.value < best[1].value - 1e-12:
            best = (meas, val, rep)
        if rep.passed:
            label = "RS" if meas.k == 1 else f"{meas.k}RSB"
            return PhaseReport(label, meas, val.value, rep.residual,
                               rep.sc_gap, rep.sc_stability, values_by_k)
    meas, val, rep = best
    decreasing = all(values_by_k[k + 1] <= values_by_k[k] + 1e-10
                     for k in range(1, opts.max_k))
    reason = "certificate failed at every k"
    if decreasing and opts.max_k >= 2 and \
            values_by_k[opts.max_k] < values_by_k[1] - 1e-8:
        reason += "; value still decreasing in k (possible deeper split)"
    return PhaseReport("UNDECIDED", meas, val.value, rep.residual, rep.sc_gap,
                       rep.sc_stability, values_by_k, reason)
