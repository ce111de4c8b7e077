"""andersonlab: spectral laboratory for Schrodinger evolution with
renormalized white-noise potentials on the 2d/3d torus."""

__version__ = "0.1.0"

from .fields import TorusField  # noqa: F401
