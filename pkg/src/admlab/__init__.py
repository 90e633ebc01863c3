"""Admissibility, weighted Volterra operators and boundary feedback on spectral models."""

__version__ = "0.1.0"

from .spectral import (BoundaryOperator, SpectralOperator, WeightParams, control,
                       neumann_laplacian, observation, scalar_operator)

__all__ = ["BoundaryOperator", "SpectralOperator", "WeightParams", "control",
           "neumann_laplacian", "observation", "scalar_operator", "__version__"]
