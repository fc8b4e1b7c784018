"""Planar X-ray, Doppler and transverse ray transforms of scalar fields and one-forms.

Submodules: ``fields`` (grids and grid calculus), ``geometry`` (lines,
line grids, regions), ``projector`` (transforms and adjoints), ``normal``
(normal operators and inversion), ``decomposition`` (Helmholtz splits),
``phantoms``, ``experiments``, ``fileio``, ``plotting`` and ``cli``.
"""

from .errors import ConfigError, FieldIOError, NumericalFailure, VtomoError
from .fields import CovectorField, Grid, MatrixField, ScalarField, curl2d, divergence, gradient, mollify
from .geometry import Disk, Line, LineGrid, Rect, partial_mask, reverse
from .normal import InversionConstants
from .projector import Sinogram

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "CovectorField",
    "Disk",
    "FieldIOError",
    "Grid",
    "InversionConstants",
    "Line",
    "LineGrid",
    "MatrixField",
    "NumericalFailure",
    "Rect",
    "ScalarField",
    "Sinogram",
    "VtomoError",
    "curl2d",
    "divergence",
    "gradient",
    "mollify",
    "partial_mask",
    "reverse",
]
