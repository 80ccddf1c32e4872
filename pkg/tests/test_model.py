import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from parisiphase.model import Model, SystemPoint, parse_model, xi


def test_sk_values():
    m = parse_model("2:0.5")
    assert m.xi0(1.0) == 0.5
    assert m.xi0_d1(1.0) == 1.0
    assert m.xi0_d2(1.0) == 1.0
    assert m.xi0_d3(1.0) == 0.0


def test_pure4_values():
    m = parse_model("4:0.25")
    assert m.xi0(1.0) == 0.25
    assert m.xi0_d1(1.0) == 1.0
    assert m.xi0_d2(1.0) == 3.0
    assert m.xi0_d3(1.0) == 6.0


def test_temperature_scaling():
    m = parse_model("2:0.5")
    pt = SystemPoint(2.0, 0.0)
    assert xi(m, pt, 1.0)[2] == 4.0
    m4 = parse_model("4:0.25")
    pt4 = SystemPoint(1.5, 0.0)
    assert xi(m4, pt4, 0.5)[1] == pytest.approx(2.25 * 0.125, abs=0)


def test_beta_one_identity():
    m = parse_model("2:0.3,3:0.2,5:0.1")
    pt = SystemPoint(1.0, 0.0)
    for t in (0.0, 0.3, 0.9, 1.0):
        assert xi(m, pt, t)[0] == m.xi0(t)


def test_derivatives_vs_finite_difference():
    m = parse_model("2:0.3,4:0.5,7:0.05")
    t, d = 0.37, 1e-6
    fd1 = (m.xi0(t + d) - m.xi0(t - d)) / (2 * d)
    assert abs(fd1 - m.xi0_d1(t)) / abs(m.xi0_d1(t)) <= 1e-9
    fd2 = (m.xi0_d1(t + d) - m.xi0_d1(t - d)) / (2 * d)
    assert abs(fd2 - m.xi0_d2(t)) / abs(m.xi0_d2(t)) <= 1e-8
    fd3 = (m.xi0_d2(t + d) - m.xi0_d2(t - d)) / (2 * d)
    assert abs(fd3 - m.xi0_d3(t)) / abs(m.xi0_d3(t)) <= 1e-8


def test_parse_model_basic():
    assert dict(parse_model("2:0.5").coefficients) == {2: 0.5}
    assert dict(parse_model("2:0.25,4:0.25").coefficients) == {2: 0.25, 4: 0.25}


@pytest.mark.parametrize("spec", ["1:1", "", "2:0.5,2:0.1", "2:-1", "2.5:1",
                                  "abc", "2", "0:1"])
def test_parse_model_rejects(spec):
    with pytest.raises(ValueError):
        parse_model(spec)


def test_negative_t_rejected():
    with pytest.raises(ValueError):
        parse_model("2:0.5").xi0(-0.1)


def test_point_validation():
    with pytest.raises(ValueError):
        SystemPoint(0.0, 0.0)
    with pytest.raises(ValueError):
        SystemPoint(1.0, -0.5)


@st.composite
def models(draw):
    ps = draw(st.lists(st.integers(2, 8), min_size=1, max_size=4, unique=True))
    cs = [draw(st.floats(1e-3, 3.0)) for _ in ps]
    return Model(tuple(zip(ps, cs)))


@given(models(), st.floats(0.0, 1.0))
@settings(max_examples=60, deadline=None)
def test_derivatives_nonnegative_monotone(m, t):
    # all coefficients nonnegative: xi0 and derivatives nonneg, nondecreasing
    grid = np.linspace(0.0, 1.0, 21)
    for f in (m.xi0, m.xi0_d1, m.xi0_d2, m.xi0_d3):
        vals = f(grid)
        assert np.all(vals >= 0.0)
        assert np.all(np.diff(vals) >= -1e-14)
    assert m.xi0(t) >= 0.0


@given(models(), st.floats(0.05, 5.0), st.floats(0.0, 1.0))
@settings(max_examples=60, deadline=None)
def test_scaling_exact(m, beta, t):
    pt = SystemPoint(beta, 0.0)
    vals = xi(m, pt, t)
    assert vals[0] == beta ** 2 * m.xi0(t)
    assert vals[1] == beta ** 2 * m.xi0_d1(t)
