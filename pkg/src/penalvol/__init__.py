"""Volume penalisation of boundary conditions for 1D hyperbolic systems.

The wall ``x = 0`` separates an obstacle (``x < 0``), where a stiff term
``(chi / eps) P v`` relaxes the penalised components, from the physical
domain (``x > 0``).  The package provides the models, a finite-volume solver
for the penalised and half-domain problems, the order-0 asymptotic profiles
and the experiments measuring the ``O(eps)`` error and the absence of a
boundary layer.
"""

from .errors import PenalvolError, RuntimeFailure, ValidationFailure
from .model import (
    BoundaryChart,
    Model,
    SystemSpec,
    ValidityReport,
    check_dissipativity,
    make_linear_model,
    make_plasma_model,
)
from .penalty import (
    PenaltyConfig,
    PenaltyMode,
    Projector,
    build_column_permutation,
    build_penalty_matrix_linear,
    build_projector,
    penalty_substep,
    penalty_term_original,
)
from .solver import (
    Grid1D,
    SolverConfig,
    StateField,
    Trajectory,
    hyperbolic_step,
    run_penalized,
    run_reference,
    rusanov_flux,
    strang_step,
)

__version__ = "0.1.0"
