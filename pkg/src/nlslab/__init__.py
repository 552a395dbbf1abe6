"""Numerical laboratory for a two-dimensional NLS with a potential.

Modules:

* :mod:`nlslab.grid`: periodic grid, transforms, norms, weights, field I/O.
* :mod:`nlslab.potentials`: potential families, virial weight, hypothesis checks.
* :mod:`nlslab.operators`: ``-Delta + V``, resolvents, heat flow, fractional powers.
* :mod:`nlslab.commutators`: ``A(s)`` by two routes and the Galilei identities.
* :mod:`nlslab.estimates`: ratio surveys for the linear estimates, regular-point test.
* :mod:`nlslab.nls`: split-step solver, decay fit, scattering, Strichartz ratios.
* :mod:`nlslab.experiments` and :mod:`nlslab.cli`: configured runs and reports.
"""

from .errors import (
    CapabilityError,
    CapacityError,
    ConfigurationError,
    DomainError,
    NlsLabError,
    NumericError,
    PreconditionError,
)
from .grid import Grid2D, make_grid
from .operators import SpectralOperator, build_operator
from .potentials import PotentialSpec

__version__ = "0.1.0"

__all__ = [
    "CapabilityError",
    "CapacityError",
    "ConfigurationError",
    "DomainError",
    "Grid2D",
    "NlsLabError",
    "NumericError",
    "PotentialSpec",
    "PreconditionError",
    "SpectralOperator",
    "build_operator",
    "make_grid",
]
