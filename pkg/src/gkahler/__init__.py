"""Generalized Kaehler geometry on flat tori: Clifford algebra, pure spinors,
generalized holomorphic bundles, Einstein-Hermitian metrics and stability."""

from .bundle import (
    GeneralizedConnection,
    GeneralizedHolomorphicStructure,
    HermitianBundle,
    canonical_connection,
    curvature,
    degree_slope,
    einstein_residual,
)
from .multivector import GeneralizedVector, Multivector, clifford_act, interior, spin_pair, wedge
from .solver import Problem, continuity_path
from .stability import SubbundleProjector, slope_inequality, subcurvature_identity
from .structures import PureSpinor, gk_pair, kaehler_pair
from .torus import Field, Grid

__version__ = "0.1.0"
