"""Slope of a subbundle and its second fundamental form.

On the extension with A01 = [[0, b], [0, 0]] dzbar the line e_1 is a
holomorphic subbundle. Its slope falls short of the bundle slope by the L^2
energy of the second fundamental form. On the flat trivial bundle, a line
spanned by theta functions has negative degree, as the key inequality
requires for an Einstein-Hermitian bundle.
"""

import numpy as np

from gkahler.bundle import GeneralizedHolomorphicStructure, HermitianBundle, canonical_connection
from gkahler.stability import slope_inequality, subcurvature_identity
from gkahler.structures import PureSpinor, standard_symplectic
from gkahler.suite import theta_subbundle, upper_triangular_family
from gkahler.torus import Grid

sp = PureSpinor(standard_symplectic(1))
g = Grid(1, 32)
hs, P = upper_triangular_family(g, np.random.default_rng(0), amplitude=0.5)
bundle = HermitianBundle.trivial(g, 2)
conn = canonical_connection(hs, bundle)
rep = slope_inequality(P, conn, sp, bundle)
print("extension:", ", ".join(f"{k} = {v:.6g}" for k, v in rep.rows()))
print("tr(pi K pi) = tr K^S + |H^S|^2 residual:", subcurvature_identity(P, conn, sp, bundle).sup)

g48 = Grid(1, 48)
flat = canonical_connection(GeneralizedHolomorphicStructure.zero(g48, 2), HermitianBundle.trivial(g48, 2))
rep = slope_inequality(theta_subbundle(g48), flat, sp, HermitianBundle.trivial(g48, 2))
print("theta line:", ", ".join(f"{k} = {v:.6g}" for k, v in rep.rows()))
