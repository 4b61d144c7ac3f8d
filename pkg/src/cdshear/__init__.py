"""Canonical dual solutions of nonconvex anti-plane shear problems.

The pointwise dual equation is solved exactly at each grid node, every root
is classified by the sign of the dual variable and the local Hessian, and
displacement fields are reconstructed by path integration. A direct
multistart minimizer of the discrete potential serves as an independent
check.
"""
__version__ = "0.1.0"

from .errors import (  # noqa: E402
    BoxTooSmall,
    CDShearError,
    DegenerateBranch,
    DegenerateConjugate,
    DomainError,
    ForceImbalance,
    InvalidParameter,
    NoBranch,
    RangeError,
    SolverDivergence,
    SolverError,
    ValidationError,
)
from .materials import (  # noqa: E402
    Affine,
    CanonicalMaterial,
    ConjugatePair,
    NumericConvex,
    PolynomialConvex,
    Quadratic,
    QuadraticMeasure,
    double_well,
    eval_ddV,
    eval_dV,
    eval_V,
    legendre_conjugate,
    mooney_rivlin_reduce,
    principal_stretch_invariants,
)
from .dual import (  # noqa: E402
    DualBranch,
    Label,
    classify_branch,
    dual_energy,
    primal_energy_density,
    solve_dual_equation,
    solve_homogeneous_3d,
)
from .grid import EdgeBC, GridDomain  # noqa: E402
from .stress import Constant, HarmonicPoly, LogRadial, StressField, build_stress_analytic, build_stress_numeric  # noqa: E402
from .field import SolutionField, gap_functional, solve_field  # noqa: E402
from .oracle import OracleResult, discrete_gradient, discrete_potential, multistart_minimize  # noqa: E402
from .convexity import (  # noqa: E402
    check_g_ellipse,
    check_g_quasiconvex,
    check_knowles_constitutive,
    check_knowles_ellipticity,
)
