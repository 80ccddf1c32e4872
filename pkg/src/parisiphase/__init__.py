"""Phase-diagram toolkit for mixed p-spin mixtures: exact layered solvers for
the order-parameter PDE, variational phase certificates, AT-line machinery,
and numerical verification of the dispersive Gaussian estimates."""

from .model import Model, SystemPoint, parse_model

__all__ = ["Model", "SystemPoint", "parse_model"]
__version__ = "0.1.0"
