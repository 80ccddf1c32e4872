"""Unified command-line surface.

Exit codes: 0 success, 1 usage error, 2 numerical failure,
3 verification-suite violation.
"""

from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from . import atline, dispersive
from .descent import SDEConfig, em_expect, girsanov_expect, sde_moment, SECH_BOX
from .gauss import NumericalError, QuadratureConfig, sech
from .model import Model, SystemPoint, parse_model
from .pde import DiscreteMeasure, ParisiSolution, solve_fd
from .scan import CSV_HEADER, ScanSpec, format_float, write_csv
from .variational import ClassifyOptions, MinimizeOptions, classify, minimize_k

_SUBCOMMANDS = ("pde-solve", "sde-expect", "classify", "minimize", "at-line",
                "level-set", "two-thirds", "verify-dispersive", "phase-scan")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _grid(text):
    """Parse 'a:b:n' into a linspace tuple."""
    parts = text.split(":")
    if len(parts) != 3:
        raise _UsageError(f"bad grid spec {text!r}, expected a:b:n")
    a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
    if n < 2 or not a < b:
        raise _UsageError(f"bad grid spec {text!r}: need min < max and count >= 2")
    return tuple(np.linspace(a, b, n))


def _add_common(p, model=True):
    if model:
        p.add_argument("--model", required=True,
                       help="mixture spec 'p:coeff[,p:coeff]...', e.g. 2:0.5")
    p.add_argument("--quad-nodes", type=int, default=101,
                   help="Gauss-Hermite nodes for the 1-d rule")
    p.add_argument("--quad-trunc", type=float, default=12.0,
                   help="integration truncation in standard deviations")


def _cfg(args) -> QuadratureConfig:
    return QuadratureConfig(nodes_1d=args.quad_nodes, truncation=args.quad_trunc)


def build_parser() -> _Parser:
    ap = _Parser(prog="parisiphase",
                 description="Phase-diagram toolkit for mixed p-spin mixtures")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pde-solve", help="solve the order-parameter PDE")
    _add_common(p)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--h", type=float, required=True)
    p.add_argument("--measure", required=True, help="q1:m1[,q2:m2...] cdf spec")
    p.add_argument("--fd", action="store_true", help="use the finite-difference solver")
    p.add_argument("--nx", type=int, default=2001)
    p.add_argument("--nt", type=int, default=4000)
    p.add_argument("--csv", help="write a (t,x,u,u_x,u_xx) table to this path")

    p = sub.add_parser("sde-expect", help="expectations along the diffusion")
    _add_common(p)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--h", type=float, required=True)
    p.add_argument("--measure", required=True)
    p.add_argument("--f", choices=("ux2", "uxx2", "psi"), required=True)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--mc", action="store_true", help="Euler-Maruyama Monte Carlo")
    p.add_argument("--paths", type=int, default=100000)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("classify", help="phase classification at a point")
    _add_common(p)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--h", type=float, required=True)
    p.add_argument("--max-k", type=int, default=3)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("minimize", help="best k-atom measure at a point")
    _add_common(p)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--h", type=float, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("at-line", help="trace the alpha = 1 level curve")
    _add_common(p)
    p.add_argument("--grid", required=True, help="beta=a:b:n")
    p.add_argument("--out", help="CSV output path (default stdout)")

    p = sub.add_parser("level-set", help="trace an alpha = const level curve")
    _add_common(p)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--beta-range", required=True, help="a:b:n")
    p.add_argument("--out")

    p = sub.add_parser("two-thirds", help="trace the 2/3 sufficient-region curve")
    _add_common(p)
    p.add_argument("--beta-range", default="0.8:6:30", help="a:b:n")
    p.add_argument("--out")

    p = sub.add_parser("verify-dispersive", help="run falsifiable estimate suites")
    _add_common(p)
    p.add_argument("--suite", default="1d,sign",
                   help="comma list from {1d,2d,spectral,sign,longtime,rs}")
    p.add_argument("--level-alpha", type=float, default=0.9)
    p.add_argument("--betas", default="10:40:3", help="a:b:n level-set betas")
    p.add_argument("--taus", default="0.1,0.5,1.0")
    p.add_argument("--points", default="0.9:0.0,1.4:0.8",
                   help="beta:h list for the rs suite")
    p.add_argument("--out", help="CSV of (scenario,lhs,rhs,slack)")

    p = sub.add_parser("phase-scan", help="grid scan to CSV")
    _add_common(p)
    p.add_argument("--T", help="temperature grid a:b:n")
    p.add_argument("--beta", help="inverse-temperature grid a:b:n")
    p.add_argument("--h", required=True, help="field grid a:b:n")
    p.add_argument("--out", required=True)
    p.add_argument("--max-k", type=int, default=3)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--deep", action="store_true",
                   help="also demonstrate two-atom improvements where alpha > 1")
    p.add_argument("--workers", type=int, default=0)
    p.add_argument("--quiet", action="store_true")
    return ap


# ---------------------------------------------------------------------------
# subcommand bodies
# ---------------------------------------------------------------------------

def _cmd_pde_solve(args) -> int:
    model = parse_model(args.model)
    point = SystemPoint(args.beta, args.h)
    measure = DiscreteMeasure.parse(args.measure)
    cfg = _cfg(args)
    if args.fd:
        grid = solve_fd(model, point, measure, nx=args.nx, nt=args.nt)
        u0h = grid.u0h(point.h)
    else:
        sol = ParisiSolution(model, point, measure, cfg)
        u0h = float(sol.u(0.0, point.h))
    print(f"u(0,h) = {format_float(u0h)}")
    if args.csv:
        sol = ParisiSolution(model, point, measure, cfg)
        xs = np.linspace(-6.0, 6.0, 41)
        ts = sorted(set(np.linspace(0.0, 1.0, 11)) | set(measure.atoms))
        with open(args.csv, "w") as fh:
            fh.write("t,x,u,u_x,u_xx\n")
            for t in ts:
                u, ux, uxx, _ = sol.evaluate(float(t), xs)
                for j, x in enumerate(xs):
                    fh.write(",".join(format_float(v) for v in
                                      (t, x, u[j], ux[j], uxx[j])) + "\n")
        print(f"wrote {args.csv}")
    return 0


def _cmd_sde_expect(args) -> int:
    model = parse_model(args.model)
    point = SystemPoint(args.beta, args.h)
    measure = DiscreteMeasure.parse(args.measure)
    cfg = _cfg(args)
    fmap = {
        "ux2": "ux2", "uxx2": "uxx2", "psi": "drive",
    }
    if args.mc:
        sde = SDEConfig(n_paths=args.paths, dt=args.dt, seed=args.seed)
        sol = ParisiSolution(model, point, measure, cfg)
        if args.f == "psi":
            f = lambda x: 4.0 * sech(x) ** 4 - 6.0 * sech(x) ** 6
        elif args.f == "ux2":
            f = lambda x: sol.u_x(args.t, x) ** 2
        else:
            f = lambda x: sol.u_xx(args.t, x) ** 2
        est, se = em_expect(model, point, measure, f, args.t, sde, sol, cfg)
        print(f"E = {format_float(est)} +- {format_float(se)} (MC stderr)")
    else:
        if measure.k != 1:
            raise NumericalError("closed quadrature requires a one-atom measure; "
                                 "use --mc for larger supports")
        est, _ = sde_moment(model, point, measure, fmap[args.f], args.t, cfg)
        print(f"E = {format_float(est)}")
    return 0


def _cmd_classify(args) -> int:
    model = parse_model(args.model)
    point = SystemPoint(args.beta, args.h)
    cfg = _cfg(args)
    opts = ClassifyOptions(max_k=args.max_k, tol=args.tol,
                           minimize=MinimizeOptions(seed=args.seed))
    rep = classify(model, point, opts, cfg)
    print(rep.classification)
    print(f"measure: {rep.measure.spec_string()}")
    print(f"value: {format_float(rep.value)}")
    print(f"certificate residual: {format_float(rep.certificate_residual)}")
    for k, v in sorted(rep.values_by_k.items()):
        print(f"  best {k}-atom value: {format_float(v)}")
    if rep.reason:
        print(f"note: {rep.reason}")
    return 0


def _cmd_minimize(args) -> int:
    model = parse_model(args.model)
    point = SystemPoint(args.beta, args.h)
    cfg = _cfg(args)
    meas, val = minimize_k(model, point, args.k, MinimizeOptions(seed=args.seed),
                           cfg)
    print(meas.spec_string())
    print(f"value: {format_float(val.value)}")
    return 0


def _cmd_at_line(args) -> int:
    model = parse_model(args.model)
    cfg = _cfg(args)
    if not args.grid.startswith("beta="):
        raise _UsageError("--grid must look like beta=a:b:n")
    betas = _grid(args.grid[len("beta="):])
    res = atline.level_set(model, 1.0, (betas[0], betas[-1]), len(betas), cfg)
    lines = ["beta,h,q_star,alpha"]
    for p in res.points:
        rec = atline.fixed_points(model, SystemPoint(p.beta, p.h), cfg)
        lines.append(",".join(format_float(v) for v in
                              (p.beta, p.h, rec.q_star, rec.alpha)))
    _emit(lines, args.out)
    for b in res.missing_betas:
        print(f"# no solution at beta={format_float(b)}", file=sys.stderr)
    return 0


def _cmd_level_set(args) -> int:
    model = parse_model(args.model)
    cfg = _cfg(args)
    betas = _grid(args.beta_range)
    res = atline.level_set(model, args.alpha, (betas[0], betas[-1]), len(betas), cfg)
    lines = ["beta,h,q_star"]
    for p in res.points:
        lines.append(",".join(format_float(v) for v in (p.beta, p.h, p.q_star)))
    _emit(lines, args.out)
    for b in res.missing_betas:
        print(f"# no solution at beta={format_float(b)}", file=sys.stderr)
    return 0


def _cmd_two_thirds(args) -> int:
    model = parse_model(args.model)
    cfg = _cfg(args)
    betas = _grid(args.beta_range)
    lines = ["T,beta,h,q_star,alpha,rhs"]
    for beta in betas:
        sol = _two_thirds_h(model, float(beta), cfg)
        if sol is None:
            print(f"# no boundary at beta={format_float(beta)}", file=sys.stderr)
            continue
        h, rec, rhs = sol
        lines.append(",".join(format_float(v) for v in
                              (1.0 / beta, beta, h, rec.q_star, rec.alpha, rhs)))
    _emit(lines, args.out)
    return 0


def _two_thirds_h(model, beta, cfg, h_max=8.0, n_scan=40):
    """Largest h at which alpha equals the 2/3 sufficient bound."""
    def gap(h):
        pt = SystemPoint(beta, max(h, 1e-9))
        rec = atline.fixed_points(model, pt, cfg, scan_step=2e-3, scan_points=401)
        tt = atline.two_thirds_boundary(model, pt, cfg, record=rec)
        return tt.lhs - tt.rhs, rec, tt.rhs
    hs = np.linspace(h_max, 1e-3, n_scan)
    prev = gap(float(hs[0]))
    for h_lo, h_hi in zip(hs[1:], hs[:-1]):
        cur = gap(float(h_lo))
        if prev[0] == 0.0 or prev[0] * cur[0] < 0.0:
            lo, hi = float(h_lo), float(h_hi)
            flo = cur[0]
            for _ in range(50):
                mid = 0.5 * (lo + hi)
                fm, rec, rhs = gap(mid)
                if flo * fm <= 0.0:
                    hi = mid
                else:
                    lo, flo = mid, fm
            mid = 0.5 * (lo + hi)
            fm, rec, rhs = gap(mid)
            return mid, rec, rhs
        prev = cur
    return None


def _emit(lines, out):
    if out:
        with open(out, "w", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
        print(f"wrote {out} ({len(lines) - 1} rows)")
    else:
        for ln in lines:
            print(ln)


def _cmd_verify(args) -> int:
    model = parse_model(args.model)
    cfg = _cfg(args)
    suites = [s.strip() for s in args.suite.split(",") if s.strip()]
    entries = []
    for s in suites:
        if s == "1d":
            entries += _suite_1d(cfg)
        elif s == "sign":
            entries += _suite_sign(cfg)
        elif s in ("spectral", "2d", "longtime"):
            entries += _suite_level(model, s, args, cfg)
        elif s == "rs":
            entries += _suite_rs(model, args, cfg)
        else:
            raise _UsageError(f"unknown suite {s!r}")
    fails = [e for e in entries if not e.holds]
    width = max(len(e.name) for e in entries)
    for e in entries:
        mark = "PASS" if e.holds else "FAIL"
        print(f"{mark} {e.name:<{width}} lhs={format_float(e.lhs)} "
              f"rhs={format_float(e.rhs)} {e.note}")
    if args.out:
        with open(args.out, "w", newline="\n") as fh:
            fh.write("scenario,lhs,rhs,slack\n")
            for e in entries:
                fh.write(f"{e.name.replace(',', ';')},{format_float(e.lhs)},"
                         f"{format_float(e.rhs)},{format_float(e.rhs - e.lhs)}\n")
        print(f"wrote {args.out}")
    print(f"{len(entries) - len(fails)}/{len(entries)} checks passed")
    return 3 if fails else 0


def _suite_1d(cfg):
    entries = []
    for f_id in ("sech2", "sech4", "sech6"):
        for sig in (1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0):
            for ratio in (0.0, 0.5, 1.0, 2.0):
                entries.append(dispersive.disp1d_check(f_id, sig, ratio * sig, cfg))
    for sig in (10.0, 50.0, 100.0):
        entries.append(dispersive.disp1d_ratio_check(sig, 0.5 * sig, cfg=cfg).entry)
    return entries


def _suite_sign(cfg):
    xs = np.concatenate([np.arange(-8.0, 8.0 + 1e-12, 0.01),
                         np.arange(-0.1, 0.1 + 1e-12, 0.001)])
    vals = dispersive.bracket_psi(xs)
    entries = [dispersive.CheckEntry("bracket sign max over grid",
                                     float(vals.max()), 0.0,
                                     bool(np.all(vals < 0.0)))]
    worst = 0.0
    for x in np.arange(-8.0, 8.001, 0.5):
        worst = max(worst, abs(dispersive.bracket_psi(float(x))
                               - dispersive.bracket_psi_quad(float(x), cfg)))
    entries.append(dispersive.CheckEntry("bracket closed form vs quadrature",
                                         worst, 1e-8, worst <= 1e-8))
    return entries


def _level_points(model, args, cfg):
    betas = _grid(args.betas)
    res = atline.level_set(model, args.level_alpha, (betas[0], betas[-1]),
                           len(betas), cfg)
    # keep the largest-h branch per beta: the branch along which the
    # big-variance asymptotics operate
    by_beta = {}
    for p in res.points:
        if p.beta not in by_beta or p.h > by_beta[p.beta].h:
            by_beta[p.beta] = p
    return [by_beta[b] for b in sorted(by_beta)]


def _suite_level(model, which, args, cfg):
    entries = []
    taus = [float(t) for t in args.taus.split(",")]
    pts = _level_points(model, args, cfg)
    if not pts:
        raise NumericalError("no level-set points found for the requested betas")
    for p in pts:
        point = SystemPoint(p.beta, p.h)
        rec = atline.fixed_points(model, point, cfg)
        for tau in taus:
            scn = dispersive.scenario(model, point, args.level_alpha, tau, cfg,
                                      record=rec)
            tag = f"[beta={p.beta:g} tau={tau:g}]"
            if which == "spectral":
                for e in dispersive.spectral_check(scn, cfg=cfg):
                    e.name = f"{tag} {e.name}"
                    entries.append(e)
            elif which == "2d":
                rep = dispersive.disp2d_check(scn, cfg=cfg)
                for e in rep.entries:
                    e.name = f"{tag} {e.name}"
                    entries.append(e)
        if which == "longtime":
            for t in (rec.q_star, 0.5 * (rec.q_star + 1.0), 1.0):
                lr = dispersive.longtime_negativity(model, point, t, rec.q_star, cfg)
                entries.append(dispersive.CheckEntry(
                    f"[beta={p.beta:g}] drive negativity at t={t:.4f}",
                    lr.value, 0.0, lr.negative,
                    note=f"xi''(q*)-scaled {lr.stability_scaled:.4f}"))
    return entries


def _suite_rs(model, args, cfg):
    entries = []
    for part in args.points.split(","):
        b_str, h_str = part.split(":")
        point = SystemPoint(float(b_str), float(h_str))
        rep = dispersive.rs_region_checks(model, point, cfg)
        for e in rep["entries"]:
            e.name = f"[beta={point.beta:g} h={point.h:g}] {e.name}"
            entries.append(e)
        if rep.get("sufficient"):
            entries.append(dispersive.CheckEntry(
                f"[beta={point.beta:g} h={point.h:g}] classifier agreement",
                1.0 if rep.get("agrees") else 0.0, 1.0,
                bool(rep.get("agrees")),
                note=f"classified {rep.get('classification')}"))
    return entries


def _cmd_phase_scan(args) -> int:
    model = parse_model(args.model)
    if (args.T is None) == (args.beta is None):
        raise _UsageError("give exactly one of --T / --beta")
    spec = ScanSpec(model=model,
                    T_values=_grid(args.T) if args.T else None,
                    beta_values=_grid(args.beta) if args.beta else None,
                    h_values=_grid(args.h), max_k=args.max_k, tol=args.tol,
                    seed=args.seed, deep=args.deep, workers=args.workers,
                    cfg=_cfg(args))
    progress = None
    if not args.quiet:
        def progress(done, total):
            if done % 200 == 0 or done == total:
                print(f"\r{done}/{total} points", end="", file=sys.stderr)
                if done == total:
                    print(file=sys.stderr)
    n = write_csv(spec, args.out, progress=progress)
    print(f"wrote {args.out} ({n} rows)")
    return 0


_DISPATCH = {
    "pde-solve": _cmd_pde_solve,
    "sde-expect": _cmd_sde_expect,
    "classify": _cmd_classify,
    "minimize": _cmd_minimize,
    "at-line": _cmd_at_line,
    "level-set": _cmd_level_set,
    "two-thirds": _cmd_two_thirds,
    "verify-dispersive": _cmd_verify,
    "phase-scan": _cmd_phase_scan,
}


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _DISPATCH[args.command](args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (NumericalError,) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
