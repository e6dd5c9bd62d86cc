"""Pure spinors, generalized complex structures and a b-field.

Starts from psi = exp(-i omega) on R^2, builds the generalized complex
structure it induces, checks that ker psi is its -i eigenspace, then
applies a b-field and watches both the spinor and the structure move.
"""

import numpy as np

from gkahler.multivector import Multivector, wedge
from gkahler.structures import (
    PureSpinor,
    b_transform,
    gcs_from_complex_structure,
    gcs_from_pure_spinor,
    gk_pair,
    project_Uminus_n,
    standard_complex_structure,
    standard_symplectic,
    type_number,
)
from gkahler.suite import kernel_eigenspace_error

omega = standard_symplectic(1)
sp = PureSpinor(omega)
print("psi = exp(-i omega), type", type_number(sp))
Jpsi = gcs_from_pure_spinor(sp)
print("J_psi =\n", Jpsi.J)
print("J_psi^2 + 1 =", np.abs(Jpsi.J @ Jpsi.J + np.eye(4)).max())
print("ker psi vs -i eigenspace:", kernel_eigenspace_error(sp))

pair = gk_pair(gcs_from_complex_structure(standard_complex_structure(1)), sp)
print("generalized metric eigenvalues:", np.round(np.linalg.eigvalsh(pair.Ghat), 12))

c = project_Uminus_n(wedge(Multivector.two_form(omega), sp.psi), sp)
print("pi(omega ^ psi) / psi =", c, "(expected i/2)")

b = np.array([[0.0, 0.7], [-0.7, 0.0]])
spb = PureSpinor(omega, b)
print("\nafter b = 0.7 dx^dy:")
print("J_{e^b psi} =\n", np.round(gcs_from_pure_spinor(spb).J, 12))
print("matches e^b J e^-b:", np.allclose(gcs_from_pure_spinor(spb).J, b_transform(Jpsi, b).J))
