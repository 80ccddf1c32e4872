"""Phase-diagram grid scanner with deterministic, byte-stable CSV output.

Per grid point: fixed-point data and region flags always; the variational
classifier only where the stability functional allows a one-atom phase
(alpha <= 1) -- elsewhere the point is marked RSB_BY_AT without running the
optimizer.  Rows are emitted in row-major grid order regardless of the worker
schedule.
"""

from __future__ import annotations

import math
import multiprocessing as mp
import os
from dataclasses import dataclass, field, replace

import numpy as np

from . import atline
from .descent import SDEConfig
from .gauss import DEFAULT_CFG, QuadratureConfig
from .model import Model, SystemPoint, parse_model
from .variational import (ClassifyOptions, MinimizeOptions, certify, classify,
                          first_variation, minimize_k, parisi_value_rs)

__all__ = ["ScanSpec", "ScanRow", "scan", "write_csv", "CSV_HEADER",
           "format_float"]

CSV_HEADER = "T,beta,h,q_star,alpha,in_AT,two_thirds,beta_star_region,phase," \
             "certificate_residual,parisi_value"


@dataclass(frozen=True)
class ScanSpec:
    model: Model
    T_values: tuple = None        # temperature grid (excludes T=0)
    beta_values: tuple = None     # alternatively, an inverse-temperature grid
    h_values: tuple = ()
    max_k: int = 3
    tol: float = 1e-6
    seed: int = 0
    deep: bool = False
    workers: int = 0              # 0 = all available cores
    cfg: QuadratureConfig = DEFAULT_CFG

    def __post_init__(self):
        if (self.T_values is None) == (self.beta_values is None):
            raise ValueError("give exactly one of T_values / beta_values")
        grid = self.T_values if self.T_values is not None else self.beta_values
        if len(grid) < 2 or len(self.h_values) < 2:
            raise ValueError("grids need at least 2 points per axis")
        if self.T_values is not None and any(t <= 0.0 for t in self.T_values):
            raise ValueError("temperature grid must exclude T = 0")

    @property
    def betas(self):
        if self.beta_values is not None:
            return tuple(self.beta_values)
        return tuple(1.0 / t for t in self.T_values)


@dataclass
class ScanRow:
    T: float
    beta: float
    h: float
    q_star: float
    alpha: float
    in_AT: int
    two_thirds: int
    beta_star_region: int
    phase: str
    certificate_residual: float
    parisi_value: float
    deep_margin: float = None     # only with deep scans at alpha > 1


def format_float(x: float) -> str:
    if x != x:
        return "nan"
    return f"{x:.12g}"


def _row_to_csv(row: ScanRow) -> str:
    return ",".join([
        format_float(row.T), format_float(row.beta), format_float(row.h),
        format_float(row.q_star), format_float(row.alpha), str(row.in_AT),
        str(row.two_thirds), str(row.beta_star_region), row.phase,
        format_float(row.certificate_residual), format_float(row.parisi_value),
    ])


def scan_point(model: Model, beta: float, h: float, spec: ScanSpec,
               index: int = 0) -> ScanRow:
    cfg = spec.cfg
    point = SystemPoint(beta, h)
    try:
        rec = atline.fixed_points(model, point, cfg, scan_step=2e-3,
                                  scan_points=401)
        in_at = 1 if rec.alpha <= 1.0 + 1e-9 else 0
        tt = atline.two_thirds_boundary(model, point, cfg, record=rec)
        bstar = 1 if beta <= atline.beta_star(model) else 0
        deep_margin = None
        if not in_at:
            phase = "RSB_BY_AT"
            resid = rec.alpha - 1.0
            value = parisi_value_rs(model, point, rec.q_star, cfg)
            if spec.deep:
                opts = MinimizeOptions(seed=spec.seed + index)
                m1, v1 = minimize_k(model, point, 1, opts, cfg, record=rec)
                m2, v2 = minimize_k(model, point, 2, opts, cfg, prev=m1)
                deep_margin = v1.value - v2.value
                value = min(v1.value, v2.value)
        else:
            opts = ClassifyOptions(
                max_k=spec.max_k, tol=spec.tol,
                minimize=MinimizeOptions(seed=spec.seed + index),
                sde=SDEConfig(n_paths=4000, dt=2e-3, seed=spec.seed + index))
            rep = _classify_fast(model, point, opts, cfg, rec)
            phase = rep.classification
            resid = rep.certificate_residual
            value = rep.value
        return ScanRow(T=1.0 / beta, beta=beta, h=h, q_star=rec.q_star,
                       alpha=rec.alpha, in_AT=in_at,
                       two_thirds=1 if tt.in_region else 0,
                       beta_star_region=bstar, phase=phase,
                       certificate_residual=resid, parisi_value=value,
                       deep_margin=deep_margin)
    except Exception as exc:  # never abort the scan on a point failure
        return ScanRow(T=1.0 / beta, beta=beta, h=h, q_star=float("nan"),
                       alpha=float("nan"), in_AT=0, two_thirds=0,
                       beta_star_region=1 if beta <= atline.beta_star(model) else 0,
                       phase="UNDECIDED", certificate_residual=float("nan"),
                       parisi_value=float("nan"))


def _classify_fast(model, point, opts, cfg, record):
    """classify() with the precomputed fixed-point record reused at k=1 and a
    lighter first-variation grid, as used by the grid scanner."""
    from .variational import PhaseReport

    values_by_k = {}
    prev = None
    best = None
    for k in range(1, opts.max_k + 1):
        meas, val = minimize_k(model, point, k, opts.minimize, cfg, prev=prev,
                               record=record if k == 1 else None)
        prev = meas
        values_by_k[k] = val.value
        fv = first_variation(model, point, meas, cfg=cfg,
                             sde_cfg=opts.sde if meas.k > 1 else None,
                             n_refine=40, grid_n=4096)
        rep = certify(model, point, meas, opts.tol, cfg,
                      sde_cfg=opts.sde if meas.k > 1 else None, fv=fv)
        if best is None or val.value < best[1].value - 1e-12:
            best = (meas, val, rep)
        if rep.passed:
            label = "RS" if meas.k == 1 else f"{meas.k}RSB"
            return PhaseReport(label, meas, val.value, rep.residual,
                               rep.sc_gap, rep.sc_stability, values_by_k)
    meas, val, rep = best
    return PhaseReport("UNDECIDED", meas, val.value, rep.residual, rep.sc_gap,
                       rep.sc_stability, values_by_k,
                       "certificate failed at every k")


_worker_state = {}


def _init_worker(model_spec, spec):
    _worker_state["model"] = parse_model(model_spec)
    _worker_state["spec"] = spec


def _run_point(args):
    index, beta, h = args
    return _row_to_csv(scan_point(_worker_state["model"], beta, h,
                                  _worker_state["spec"], index))


def scan(spec: ScanSpec, progress=None):
    """Run the grid scan; yields CSV row strings in row-major grid order."""
    betas = spec.betas
    points = [(i * len(spec.h_values) + j, beta, h)
              for i, beta in enumerate(betas)
              for j, h in enumerate(spec.h_values)]
    workers = spec.workers if spec.workers > 0 else (os.cpu_count() or 1)
    if workers <= 1:
        _init_worker(spec.model.spec_string(), spec)
        for n, args in enumerate(points):
            yield _run_point(args)
            if progress:
                progress(n + 1, len(points))
        return
    ctx = mp.get_context("spawn")
    with ctx.Pool(workers, initializer=_init_worker,
                  initargs=(spec.model.spec_string(), spec)) as pool:
        for n, row in enumerate(pool.imap(_run_point, points, chunksize=8)):
            yield row
            if progress:
                progress(n + 1, len(points))


def write_csv(spec: ScanSpec, path: str, progress=None) -> int:
    """Stream the scan to a CSV file; returns the number of data rows."""
    n = 0
    with open(path, "w", newline="\n") as fh:
        fh.write(CSV_HEADER + "\n")
        for row in scan(spec, progress=progress):
            fh.write(row + "\n")
            n += 1
    return n
