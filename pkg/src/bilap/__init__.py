"""Toolkit for fourth-order problems with sign-changing coefficients.

Submodules
----------
corner_spectrum
    Dispersion function, ill-posedness region, singular exponents and the
    angular interface system at a sign-changing boundary corner.
kernel1d
    Exact kernel detection for piecewise-constant 1D configurations.
grid / twostep
    Masked five-point grids, the two-step mixed-condition solver and the
    singular-function correction on reentrant-corner polygons.
cones
    Conical-tip exponents in dimension d >= 3, spherical-cap eigenvalues and
    the weighted-space solvability classification.
cli
    Command-line front end.
"""

from . import cones, corner_spectrum, errors, grid, kernel1d, twostep

__version__ = "0.1.0"

__all__ = ["cones", "corner_spectrum", "errors", "grid", "kernel1d", "twostep"]
