"""Mixed p-spin mixtures and system points.

A mixture is the polynomial xi0(t) = sum_p c_p t^p with integer exponents
p >= 2 and nonnegative coefficients c_p (the squared interaction strengths).
The temperature-scaled covariance function is xi(t) = beta^2 xi0(t).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["Model", "SystemPoint", "parse_model", "SK", "PURE4"]


@dataclass(frozen=True)
class Model:
    """Finite mixture xi0(t) = sum_p coefficients[p] * t^p, p >= 2."""

    coefficients: tuple  # ((p, c_p), ...) sorted by p

    def __post_init__(self):
        coeffs = tuple(sorted((int(p), float(c)) for p, c in dict(self.coefficients).items()))
        if not coeffs:
            raise ValueError("mixture needs at least one term")
        for p, c in coeffs:
            if p < 2:
                raise ValueError(f"exponent p={p} < 2 not allowed")
            if c < 0.0:
                raise ValueError(f"negative coefficient {c} at p={p}")
        if not any(c > 0.0 for _, c in coeffs):
            raise ValueError("mixture needs at least one positive coefficient")
        object.__setattr__(self, "coefficients", coeffs)

    # -- polynomial evaluation -------------------------------------------------

    def xi0(self, t):
        _check_t(t)
        t = np.asarray(t, dtype=float)
        out = sum(c * t ** p for p, c in self.coefficients)
        return float(out) if out.ndim == 0 else out

    def xi0_d1(self, t):
        _check_t(t)
        t = np.asarray(t, dtype=float)
        out = sum(c * p * t ** (p - 1) for p, c in self.coefficients)
        return float(out) if out.ndim == 0 else out

    def xi0_d2(self, t):
        _check_t(t)
        t = np.asarray(t, dtype=float)
        out = sum(c * p * (p - 1) * t ** (p - 2) for p, c in self.coefficients)
        return float(out) if out.ndim == 0 else out

    def xi0_d3(self, t):
        _check_t(t)
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for p, c in self.coefficients:
            if p >= 3:
                out = out + c * p * (p - 1) * (p - 2) * t ** (p - 3)
        return float(out) if out.ndim == 0 else out

    def spec_string(self) -> str:
        return ",".join(f"{p}:{c:g}" for p, c in self.coefficients)

    def __repr__(self):
        return f"Model({self.spec_string()!r})"


@dataclass(frozen=True)
class SystemPoint:
    """Inverse temperature and external field."""

    beta: float
    h: float = 0.0

    def __post_init__(self):
        if not self.beta > 0.0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.h < 0.0:
            raise ValueError(f"h must be nonnegative, got {self.h}")


def xi(model: Model, point: SystemPoint, t):
    """Temperature-scaled mixture: (xi, xi', xi'', xi''') at t."""
    b2 = point.beta ** 2
    return (b2 * model.xi0(t), b2 * model.xi0_d1(t),
            b2 * model.xi0_d2(t), b2 * model.xi0_d3(t))


def parse_model(spec: str) -> Model:
    """Parse a mixture spec string of the form 'p:coeff[,p:coeff]...'.

    Example: '2:0.5' (SK), '2:0.25,4:0.25' (mixed 2+4 spin).
    """
    if not spec or not spec.strip():
        raise ValueError("empty mixture spec")
    coeffs = {}
    for part in spec.split(","):
        part = part.strip()
        if ":" not in part:
            raise ValueError(f"malformed term {part!r}, expected 'p:coeff'")
        p_str, c_str = part.split(":", 1)
        try:
            p_float = float(p_str)
            c = float(c_str)
        except ValueError as exc:
            raise ValueError(f"malformed term {part!r}: {exc}") from None
        if p_float != int(p_float):
            raise ValueError(f"exponent {p_str!r} is not an integer")
        p = int(p_float)
        if p in coeffs:
            raise ValueError(f"duplicate exponent p={p}")
        coeffs[p] = c
    return Model(tuple(coeffs.items()))


def _check_t(t):
    if np.any(np.asarray(t) < 0.0):
        raise ValueError("t must be nonnegative")


SK = Model(((2, 0.5),))
PURE4 = Model(((4, 0.25),))
