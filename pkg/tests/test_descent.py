import math

import numpy as np
import pytest

from parisiphase.atline import fixed_points
from parisiphase.descent import (SECH_BOX, SDEConfig, em_expect, free_law,
                                 g_context, g_eval, g_eval_nested, g_prime,
                                 girsanov_expect, ito_audit,
                                 moment_curves_one_atom, sde_moment,
                                 _step_normals)
from parisiphase.gauss import Gaussian1, expect1, sech
from parisiphase.model import SystemPoint
from parisiphase.pde import DiscreteMeasure


# ---------------------------------------------------------------------------
# free law and change of measure
# ---------------------------------------------------------------------------

def test_free_law_values(sk, pure4):
    g = free_law(sk, SystemPoint(2.0, 0.7), 0.5)
    assert g.mean == 0.7 and abs(g.std - math.sqrt(2.0)) < 1e-15
    g0 = free_law(sk, SystemPoint(2.0, 0.7), 0.0)
    assert g0.std == 0.0
    g4 = free_law(pure4, SystemPoint(1.0, 0.0), 0.5)
    assert abs(g4.std - math.sqrt(0.125)) < 1e-15


def test_weight_normalization(sk, cfg):
    # the change-of-measure weight must average to 1
    pt = SystemPoint(1.5, 0.5)
    q = fixed_points(sk, pt, cfg).q_star
    for t in (q, 0.7, 0.9):
        v = girsanov_expect(sk, pt, q, lambda y: np.ones_like(y), t, cfg)
        assert abs(v - 1.0) < 1e-8


def test_girsanov_degenerate_tilt(sk, cfg):
    pt = SystemPoint(1.5, 0.5)
    q = 0.4
    a = girsanov_expect(sk, pt, q, lambda y: sech(y) ** 2, q, cfg,
                        support_box=SECH_BOX)
    b = expect1(lambda y: sech(y) ** 2, free_law(sk, pt, q), cfg,
                support=(-46, 46))
    assert abs(a - b) < 1e-12


def test_girsanov_rejects_bad_time(sk, cfg):
    with pytest.raises(ValueError):
        girsanov_expect(sk, SystemPoint(1.0, 0.0), 0.5, lambda y: y, 0.3, cfg)


def test_fixed_point_consistency(sk, cfg):
    # at a fixed point, E tanh^2(X_q) evaluated from above equals q
    pt = SystemPoint(1.5, 0.5)
    q = fixed_points(sk, pt, cfg).q_star
    v, _ = sde_moment(sk, pt, DiscreteMeasure.dirac(q), "ux2", q, cfg)
    assert abs(v - q) < 1e-10


# ---------------------------------------------------------------------------
# the g function
# ---------------------------------------------------------------------------

def test_g_at_fixed_point(sk, cfg):
    pt = SystemPoint(1.5, 0.5)
    rec = fixed_points(sk, pt, cfg)
    ctx = g_context(sk, pt, rec.q_star, cfg)
    assert abs(g_eval(ctx, rec.q_star)) < 1e-8
    assert abs(g_prime(ctx, rec.q_star) - (rec.alpha - 1.0)) < 1e-8


def test_g_prime_zero_at_critical_point(sk, cfg):
    ctx = g_context(sk, SystemPoint(1.0, 0.0), 0.0, cfg)
    assert abs(g_prime(ctx, 0.0)) < 1e-12


def test_g_nested_cross_check(sk, cfg):
    # the iterated-expectation form agrees with the quadrature route
    pt = SystemPoint(3.0, 1.0)
    rec = fixed_points(sk, pt, cfg)
    ctx = g_context(sk, pt, rec.q_star, cfg)
    for t in (rec.q_star, 0.9, 1.0):
        assert abs(g_eval(ctx, t) - g_eval_nested(ctx, t)) < 1e-8


def test_moment_curves_match_pointwise(sk, pure4, cfg):
    # spectral-convolution curves vs the independent quadrature route
    for model, pt in [(sk, SystemPoint(1.5, 0.5)), (pure4, SystemPoint(2.0, 0.8))]:
        q = fixed_points(model, pt, cfg).q_star
        meas = DiscreteMeasure.dirac(q)
        svals = np.array([0.05, 0.5 * q, q, 0.5 * (q + 1.0), 1.0])
        curves = moment_curves_one_atom(model, pt, q, ["ux2", "uxx2", "uxxx2"],
                                        svals, cfg)
        for kind in ("ux2", "uxx2", "uxxx2"):
            for i, s in enumerate(svals):
                slow, _ = sde_moment(model, pt, meas, kind, float(s), cfg)
                assert abs(curves[kind][i] - slow) < 1e-8, (kind, s)


def test_monotone_driven_moment(sk, cfg):
    # s -> E u_x^2(s, X_s) is nondecreasing
    pt = SystemPoint(1.5, 0.5)
    q = fixed_points(sk, pt, cfg).q_star
    ss = np.linspace(0.0, 1.0, 41)
    vals = moment_curves_one_atom(sk, pt, q, ["ux2"], ss, cfg)["ux2"]
    assert np.all(np.diff(vals) >= -1e-10)


# ---------------------------------------------------------------------------
# Euler-Maruyama
# ---------------------------------------------------------------------------

def test_counter_rng_determinism():
    a = _step_normals(13, 5, 1000)
    b = _step_normals(13, 5, 1000)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, _step_normals(13, 6, 1000))
    assert not np.array_equal(a, _step_normals(14, 5, 1000))
    # path values depend only on (seed, step, index)
    longer = _step_normals(13, 5, 2000)
    assert np.array_equal(a, longer[:1000])


def test_em_seeded_bit_identical(sk, cfg):
    pt = SystemPoint(1.5, 0.5)
    mu = DiscreteMeasure.dirac(0.4)
    sde = SDEConfig(n_paths=2000, dt=2e-3, seed=11)
    f = lambda x: np.tanh(x) ** 2
    a = em_expect(sk, pt, mu, f, 0.9, sde, cfg=cfg)
    b = em_expect(sk, pt, mu, f, 0.9, sde, cfg=cfg)
    assert a == b


def test_em_free_region(sk, cfg):
    # before the support the drift vanishes: EM matches the free law
    pt = SystemPoint(1.5, 0.5)
    mu = DiscreteMeasure.dirac(0.8)
    sde = SDEConfig(n_paths=40000, dt=1e-3, seed=3)
    f = lambda x: np.tanh(x) ** 2
    est, se = em_expect(sk, pt, mu, f, 0.5, sde, cfg=cfg)
    want = expect1(lambda y: np.tanh(y) ** 2, free_law(sk, pt, 0.5), cfg)
    assert abs(est - want) < 3 * se


def test_em_matches_girsanov(sk, cfg):
    pt = SystemPoint(1.5, 0.5)
    q = fixed_points(sk, pt, cfg).q_star
    sde = SDEConfig(n_paths=40000, dt=1e-3, seed=5)
    est, se = em_expect(sk, pt, DiscreteMeasure.dirac(q),
                        lambda x: np.tanh(x) ** 2, 0.9, sde, cfg=cfg)
    want, _ = sde_moment(sk, pt, DiscreteMeasure.dirac(q), "ux2", 0.9, cfg)
    assert abs(est - want) < 3 * se


def test_em_bounded_functional(sk, cfg):
    pt = SystemPoint(2.0, 0.3)
    q = fixed_points(sk, pt, cfg).q_star
    sde = SDEConfig(n_paths=5000, dt=2e-3, seed=1)
    est, se = em_expect(sk, pt, DiscreteMeasure.dirac(q),
                        lambda x: np.tanh(x) ** 2, 1.0, sde, cfg=cfg)
    assert est <= 1.0


# ---------------------------------------------------------------------------
# derivative identities along the diffusion
# ---------------------------------------------------------------------------

def test_ito_identities_above_support(sk, cfg):
    pt = SystemPoint(1.5, 0.5)
    q = fixed_points(sk, pt, cfg).q_star
    rep = ito_audit(sk, pt, DiscreteMeasure.dirac(q), q + 0.1, cfg)
    assert rep.residual_ux <= 1e-4
    assert rep.residual_uxx <= 1e-4


def test_ito_identities_before_support(sk, cfg):
    pt = SystemPoint(1.5, 0.5)
    q = fixed_points(sk, pt, cfg).q_star
    rep = ito_audit(sk, pt, DiscreteMeasure.dirac(q), 0.5 * q, cfg)
    assert rep.residual_ux <= 1e-4
    assert rep.residual_uxx <= 1e-4


def test_ito_at_atom_reports_both_sides(sk, cfg):
    pt = SystemPoint(1.5, 0.5)
    q = fixed_points(sk, pt, cfg).q_star
    rep = ito_audit(sk, pt, DiscreteMeasure.dirac(q), q, cfg)
    assert rep.at_atom
    assert "right" in rep.one_sided and "left" in rep.one_sided
    # drift turns on at the atom: at least one side must satisfy the identity
    assert min(rep.one_sided["right"][0], rep.one_sided["left"][0]) <= 1e-4


def test_sde_config_validation():
    with pytest.raises(ValueError):
        SDEConfig(n_paths=10)
    with pytest.raises(ValueError):
        SDEConfig(dt=0.5)
