"""Spectral fractional derivatives on the real line and a non-local
KdV-Burgers solver built on them."""

__version__ = "0.1.0"

from .estimators import FractionalDerivative, FrontEvolution  # noqa: E402
from .evolve import evolve, initial_field  # noqa: E402
from .fourier import FourierField, forward_transform, inverse_transform  # noqa: E402
from .fracderiv import FracOpMatrix, apply_operator, build_operator  # noqa: E402
from .grid import SpectralGrid, make_grid  # noqa: E402

__all__ = [
    "FractionalDerivative",
    "FrontEvolution",
    "FourierField",
    "FracOpMatrix",
    "SpectralGrid",
    "apply_operator",
    "build_operator",
    "evolve",
    "forward_transform",
    "initial_field",
    "inverse_transform",
    "make_grid",
]
