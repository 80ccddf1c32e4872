import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import goldens
from parisiphase.gauss import (Gaussian1, Gaussian2, NumericalError,
                               QuadratureConfig, expect1, expect1_batch,
                               expect2, expect_abs, expect_logcosh,
                               gauss_hermite, logcosh, nested_expect, sech)

SQRT2PI = math.sqrt(2 * math.pi)


# ---------------------------------------------------------------------------
# node computation
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("n", [3, 7, 31, 101, 202])
def test_nodes_match_reference(n):
    x, w = gauss_hermite(n)
    xr, wr = np.polynomial.hermite_e.hermegauss(n)
    assert np.abs(x - xr).max() < 1e-12
    assert np.abs(w - wr / SQRT2PI).max() < 1e-14


def test_large_rule_sane():
    # the reference rule overflows here; ours must stay finite and normalized
    x, w = gauss_hermite(405)
    assert np.all(np.isfinite(x)) and np.all(np.isfinite(w))
    assert np.all(w >= 0.0)
    assert abs(w.sum() - 1.0) < 1e-13
    assert abs(float(np.dot(w, x ** 2)) - 1.0) < 1e-11


def test_polynomial_exactness(cfg):
    # the n-node rule integrates monomials up to degree 2n-1 exactly
    # (up to roundoff at the scale of the absolute moment)
    x, w = gauss_hermite(12)
    for deg in range(0, 24):
        got = float(np.dot(w, x ** deg))
        exact = 0.0 if deg % 2 else math.prod(range(1, deg, 2)) if deg else 1.0
        scale = float(np.dot(w, np.abs(x) ** deg))
        assert abs(got - exact) <= 1e-12 * max(1.0, scale)


# ---------------------------------------------------------------------------
# expect1
# ---------------------------------------------------------------------------

def test_second_moment(cfg):
    assert abs(expect1(lambda y: y * y, Gaussian1(0.0, 1.0), cfg) - 1.0) < 1e-12


def test_degenerate_exact(cfg):
    f = lambda y: np.tanh(y) ** 2
    v = expect1(f, Gaussian1(0.8, 0.0), cfg)
    assert v == float(f(0.8))


def test_odd_function_vanishes(cfg):
    for f in (np.sin, np.tanh, lambda y: y ** 3):
        assert abs(expect1(f, Gaussian1(0.0, 1.3), cfg)) < 1e-12


def test_large_std_limit(cfg):
    # sigma E sech^4(sigma Z) -> (4/3)/sqrt(2 pi), within the quantified bound
    sigma = 100.0
    v = sigma * expect1(lambda y: sech(y) ** 4, Gaussian1(0.0, sigma), cfg,
                        support=(-46, 46))
    limit = (4.0 / 3.0) / SQRT2PI
    bound = 0.5 / SQRT2PI / sigma ** 2 * (math.pi ** 2 - 6.0) / 9.0
    assert abs(v - limit) <= bound


def test_nonfinite_rejected(cfg):
    with pytest.raises(NumericalError):
        expect1(lambda y: np.where(y > 0, np.inf, 1.0), Gaussian1(0.0, 1.0), cfg)


def test_batch_matches_single(cfg):
    means = np.array([-1.0, 0.0, 0.7, 3.0])
    stds = np.array([0.0, 0.5, 2.0, 9.0])
    got = expect1_batch(lambda y: sech(y) ** 2, means, stds, cfg,
                        support=(-30, 30), points=8001)
    for m, s, g in zip(means, stds, got):
        want = expect1(lambda y: sech(y) ** 2, Gaussian1(m, s), cfg,
                       support=(-30, 30))
        assert abs(g - want) < 5e-11


def test_doubling_gate_paper_integrands(cfg):
    # doubling the node count moves the classic integrands by < 1e-10
    cfg2 = QuadratureConfig(nodes_1d=2 * cfg.nodes_1d)
    integrands = [lambda y: sech(y) ** 2, lambda y: sech(y) ** 4,
                  lambda y: 1.0 - sech(y) ** 2]
    for f in integrands:
        for mean, std in [(0.0, 0.5), (1.0, 1.0), (2.0, 5.0), (10.0, 40.0),
                          (3.0, 100.0)]:
            a = expect1(f, Gaussian1(mean, std), cfg, support=(-46, 46))
            b = expect1(f, Gaussian1(mean, std), cfg2, support=(-46, 46))
            assert abs(a - b) < 1e-10
    for mean, std in [(0.0, 0.5), (1.0, 1.0), (2.0, 5.0), (10.0, 40.0)]:
        a = expect_logcosh(Gaussian1(mean, std), cfg)
        b = expect_logcosh(Gaussian1(mean, std), cfg2)
        assert abs(a - b) < 1e-10


def test_logcosh_against_closed_pieces(cfg):
    # E|Y| has a closed form; remainder is uniformly small
    g = Gaussian1(1.3, 7.0)
    v = expect_logcosh(g, cfg)
    base = expect_abs(g) - math.log(2.0)
    assert base - 1e-15 <= v <= base + math.log(2.0)


# ---------------------------------------------------------------------------
# expect2
# ---------------------------------------------------------------------------

def test_covariance_identity(cfg):
    g = Gaussian2((0.0, 0.0), ((1.0, 0.3), (0.3, 1.0)))
    assert abs(expect2(lambda x, y: x * y, g, cfg) - 0.3) < 1e-10


def test_separable_product(cfg):
    g = Gaussian2((0.3, -0.2), ((0.49, 0.0), (0.0, 2.25)))
    a = expect2(lambda x, y: np.tanh(x) ** 2 * np.cos(y), g, cfg)
    b = expect1(lambda x: np.tanh(x) ** 2, Gaussian1(0.3, 0.7), cfg) * \
        expect1(np.cos, Gaussian1(-0.2, 1.5), cfg)
    assert abs(a - b) < 1e-10


def test_rank_deficient_reduces_to_1d(cfg):
    g = Gaussian2((0.5, 0.1), ((2.25, 0.0), (0.0, 0.0)))
    a = expect2(lambda x, y: np.tanh(x) ** 2 + 0.0 * y, g, cfg)
    b = expect1(lambda x: np.tanh(x) ** 2, Gaussian1(0.5, 1.5), cfg)
    assert abs(a - b) < 1e-12


def test_asymmetric_covariance_rejected():
    with pytest.raises(ValueError):
        Gaussian2((0.0, 0.0), ((1.0, 0.5), (0.2, 1.0)))


def test_negative_eigenvalue_rejected(cfg):
    g = Gaussian2((0.0, 0.0), ((1.0, 2.0), (2.0, 1.0)))
    with pytest.raises(ValueError):
        expect2(lambda x, y: x + y, g, cfg)


def test_monte_carlo_oracle_psi(cfg):
    # E Psi(m + sqrt(S) Z) against direct Monte Carlo
    def psi(x, y):
        sy = sech(y)
        return (4 * sy ** 3 - 6 * sy ** 5) * sech(x)

    mean = np.array([1.0, 1.0])
    cov = np.array([[1.0, 1.0], [1.0, 2.0]])
    g = Gaussian2(tuple(mean), tuple(map(tuple, cov)))
    quad = expect2(psi, g, cfg)
    rng = np.random.default_rng(20240817)
    L = np.linalg.cholesky(cov)
    z = rng.standard_normal((1_000_000, 2))
    pts = mean + z @ L.T
    vals = psi(pts[:, 0], pts[:, 1])
    mc = vals.mean()
    se = vals.std(ddof=1) / math.sqrt(len(vals))
    assert abs(quad - mc) < 3 * se


# ---------------------------------------------------------------------------
# nested expectations
# ---------------------------------------------------------------------------

def test_nested_degenerate_inner(cfg):
    # zero inner variance reduces to a plain outer expectation of tanh^2
    g_out = Gaussian1(0.5, 1.2)
    g_in = Gaussian1(0.0, 0.0)

    def kernel(yp):
        c = np.cosh(yp)
        return np.tanh(yp) ** 2 * c, c

    got = nested_expect(lambda a, b: a / b, kernel, g_out, g_in, cfg)
    want = expect1(lambda y: np.tanh(y) ** 2, g_out, cfg)
    assert abs(got - want) < 1e-12


def test_nested_fixed_point_identity(cfg, sk):
    # at a fixed point q of E tanh^2(sqrt(xi'(q))Z + h) = q the nested form
    # with zero increment returns q
    from parisiphase.atline import fixed_points
    from parisiphase.model import SystemPoint

    pt = SystemPoint(1.5, 0.5)
    q = fixed_points(sk, pt, cfg).q_star
    g_out = Gaussian1(pt.h, 1.5 * math.sqrt(q))
    g_in = Gaussian1(0.0, 0.0)

    def kernel(yp):
        c = np.cosh(yp)
        return np.tanh(yp) ** 2 * c, c

    got = nested_expect(lambda a, b: a / b, kernel, g_out, g_in, cfg)
    assert abs(got - q) < 1e-8


# ---------------------------------------------------------------------------
# misc invariants
# ---------------------------------------------------------------------------

@given(st.floats(-30.0, 30.0))
@settings(max_examples=80, deadline=None)
def test_logcosh_stable(y):
    assert abs(logcosh(y) - math.log(math.cosh(y))) < 1e-12


@given(st.floats(-700.0, 700.0))
@settings(max_examples=80, deadline=None)
def test_sech_stable(y):
    v = sech(y)
    assert 0.0 <= v <= 1.0
    if abs(y) < 300:
        assert abs(v - 1.0 / math.cosh(y)) < 1e-14


def test_config_validation():
    with pytest.raises(ValueError):
        QuadratureConfig(nodes_1d=2)
    with pytest.raises(ValueError):
        QuadratureConfig(truncation=3.0)
