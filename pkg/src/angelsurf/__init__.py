"""angelsurf: higher-genus Angel minimal surfaces, numerically.

Builds complete minimal surfaces of genus p >= 1 with one catenoidal and one
Enneper end by solving the Schwarz-Christoffel parameter problem for
partially symmetric polygon pairs, driving the orthodisk reflexivity residual
to zero, and integrating the Weierstrass-Enneper representation.
"""

from .errors import (
    AngelsurfError,
    BranchAmbiguity,
    DegenerateTarget,
    DivisorMismatch,
    DomainError,
    InteriorSingularity,
    MismatchedPolygons,
    NoConvergence,
    NonIntegrable,
    NonIntegrableVertex,
    ParityViolation,
    PeriodLeak,
)
from .quad import IntegrationPath, SingularFactorization, integrate_path, integrate_segment

__version__ = "0.1.0"
