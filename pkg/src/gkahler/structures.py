"""Generalized complex structures, pure spinors and generalized Kaehler pairs.

Coordinates on T + T* are stacked as (v_1..v_{2n}, xi_1..xi_{2n}). A 2-form
is stored as an antisymmetric matrix W with form = sum_{i<j} W_ij theta^i theta^j,
so that i_v W = W^T v = -W v.
"""

from dataclasses import dataclass, field

import numpy as np

from .multivector import (
    EndValuedMultivector,
    GeneralizedVector,
    Multivector,
    algebra,
    popcount,
    spin_pair,
    wedge,
)

TOL = 1e-12


class NonCommutingError(ValueError):
    pass


class IndefiniteMetricError(ValueError):
    pass


def pairing_matrix(n):
    """Gram matrix P of <.,.> in stacked coordinates: <x, y> = x^T P y."""
    m = 2 * n
    P = np.zeros((2 * m, 2 * m))
    P[:m, m:] = 0.5 * np.eye(m)
    P[m:, :m] = 0.5 * np.eye(m)
    return P


def _as_antisym(mat, n, name):
    mat = np.asarray(mat, dtype=float)
    if mat.shape != (2 * n, 2 * n):
        raise ValueError(f"{name} must be {2 * n}x{2 * n}")
    if np.abs(mat + mat.T).max() > TOL * max(1.0, np.abs(mat).max()):
        raise ValueError(f"{name} must be antisymmetric")
    return 0.5 * (mat - mat.T)


@dataclass(frozen=True)
class GeneralizedComplexStructure:
    """4n x 4n real matrix with J^2 = -1 preserving the pairing."""

    n: int
    J: np.ndarray

    def __post_init__(self):
        J = np.asarray(self.J, dtype=float)
        if J.shape != (4 * self.n, 4 * self.n):
            raise ValueError("J has the wrong shape")
        object.__setattr__(self, "J", J)
        scale = max(1.0, np.linalg.norm(J))
        if np.linalg.norm(J @ J + np.eye(4 * self.n)) > TOL * scale ** 2:
            raise ValueError("J^2 != -1")
        P = pairing_matrix(self.n)
        if np.linalg.norm(J.T @ P @ J - P) > TOL * scale ** 2:
            raise ValueError("J does not preserve the pairing")

    def eigenspace(self, eig=-1j):
        """Orthonormal (Hermitian) basis of the eigenspace for +-i, as columns."""
        proj = 0.5 * (np.eye(4 * self.n) - eig * self.J)
        return _range_basis(proj, 2 * self.n)


def _range_basis(M, rank):
    u, s, _ = np.linalg.svd(M)
    return u[:, :rank]


def gcs_from_complex_structure(Jmat):
    """Generalized complex structure diag(J, -J^T) of an almost complex structure."""
    Jmat = np.asarray(Jmat, dtype=float)
    m = Jmat.shape[0]
    if Jmat.shape != (m, m) or m % 2:
        raise ValueError("J must be a square matrix of even size")
    if np.linalg.norm(Jmat @ Jmat + np.eye(m)) > TOL * max(1.0, np.linalg.norm(Jmat)) ** 2:
        raise ValueError("not an almost complex structure: J^2 != -1")
    out = np.zeros((2 * m, 2 * m))
    out[:m, :m] = Jmat
    out[m:, m:] = -Jmat.T
    return GeneralizedComplexStructure(m // 2, out)


def standard_complex_structure(n):
    """J with z_k = x_{2k-1} + i x_{2k}, i.e. J d/dx = d/dy."""
    J = np.zeros((2 * n, 2 * n))
    for k in range(n):
        J[2 * k + 1, 2 * k] = 1.0
        J[2 * k, 2 * k + 1] = -1.0
    return J


def standard_symplectic(n):
    """omega = sum_k dx_k ^ dy_k as an antisymmetric matrix."""
    W = np.zeros((2 * n, 2 * n))
    for k in range(n):
        W[2 * k, 2 * k + 1] = 1.0
        W[2 * k + 1, 2 * k] = -1.0
    return W


def _exp_form(n, two):
    """Truncated exponential of a 2-form multivector."""
    out = Multivector.scalar(n, 1.0)
    term = Multivector.scalar(n, 1.0)
    for k in range(1, n + 1):
        term = wedge(term, two) * (1.0 / k)
        out = out + term
    return out


class PureSpinor:
    """psi = exp(b - i omega) for constant real 2-forms b and omega.

    Parameters
    ----------
    b, omega : array_like
        Antisymmetric 2n x 2n matrices; omega must be nondegenerate.
    """

    def __init__(self, omega, b=None):
        omega = np.asarray(omega, dtype=float)
        n = omega.shape[0] // 2
        self.n = n
        self.omega = _as_antisym(omega, n, "omega")
        self.b = np.zeros_like(self.omega) if b is None else _as_antisym(b, n, "b")
        if abs(np.linalg.det(self.omega)) < 1e-12 * max(1.0, np.abs(self.omega).max()) ** (2 * n):
            raise ValueError("degenerate omega")
        self.psi = _exp_form(n, Multivector.two_form(self.b - 1j * self.omega))
        self.conj_psi = self.psi.conj()
        self.dense = self.psi.to_dense()
        self.conj_dense = self.conj_psi.to_dense()
        self.norm_pair = spin_pair(self.psi, self.conj_psi)
        vol = (1j ** n * self.norm_pair)
        if abs(vol) == 0 or abs(vol.imag) > 1e-12 * abs(vol):
            raise ValueError("degenerate pure spinor")
        if vol.real <= 0:
            raise ValueError("i^n <psi, conj psi> is not positive (orientation of omega)")
        self.volume_density = vol.real

    def kernel(self):
        """Basis (columns, stacked coordinates) of {e : e . psi = 0}."""
        alg = algebra(self.n)
        m = 2 * self.n
        cols = [alg.iota[k] @ self.dense for k in range(m)] + [alg.eps[k] @ self.dense for k in range(m)]
        M = np.stack(cols, axis=1)
        _, s, vh = np.linalg.svd(M)
        rank = int(np.sum(s > 1e-10 * s[0]))
        return vh[rank:].conj().T

    def __repr__(self):
        return f"PureSpinor(n={self.n}, b={self.b.tolist()}, omega={self.omega.tolist()})"


def b_matrix(b):
    """4n x 4n matrix of v + xi -> v + xi - i_v b (the action matching e^b on spinors)."""
    b = np.asarray(b, dtype=float)
    m = b.shape[0]
    E = np.eye(2 * m)
    E[m:, :m] = b
    return E


def gcs_from_pure_spinor(sp):
    """Generalized complex structure whose -i eigenspace is ker psi."""
    omega_hat = -sp.omega
    J0 = np.zeros((4 * sp.n, 4 * sp.n))
    m = 2 * sp.n
    J0[:m, m:] = -np.linalg.inv(omega_hat)
    J0[m:, :m] = omega_hat
    E = b_matrix(sp.b)
    return GeneralizedComplexStructure(sp.n, E @ J0 @ np.linalg.inv(E))


def b_transform(x, b):
    """Action of a closed real 2-form b on spinors, vectors and structures."""
    b = np.asarray(b, dtype=float)
    if isinstance(x, PureSpinor):
        return PureSpinor(x.omega, x.b + b)
    if isinstance(x, Multivector):
        return wedge(_exp_form(x.n, Multivector.two_form(b)), x)
    if isinstance(x, GeneralizedVector):
        return GeneralizedVector.from_stacked(b_matrix(b) @ x.stacked())
    if isinstance(x, GeneralizedComplexStructure):
        E = b_matrix(b)
        return GeneralizedComplexStructure(x.n, E @ x.J @ np.linalg.inv(E))
    raise TypeError(f"cannot b-transform {type(x).__name__}")


def type_number(x):
    """Minimal degree of a nonzero spinor."""
    if isinstance(x, PureSpinor):
        x = x.psi
    if not x.terms:
        raise ValueError("type of the zero multivector is undefined")
    return min(popcount(m) for m in x.terms)


def project_Uminus_n(x, sp):
    """Coefficient c with x = c psi + (higher U^k components)."""
    if isinstance(x, EndValuedMultivector):
        return np.array([[spin_pair(e, sp.conj_psi) for e in row] for row in x.entries]) / sp.norm_pair
    if isinstance(x, Multivector):
        return spin_pair(x, sp.conj_psi) / sp.norm_pair
    alg = algebra(sp.n)
    return alg.pair(np.asarray(x), sp.conj_dense) / sp.norm_pair


def _herm_pow(M, p):
    w, v = np.linalg.eigh(M)
    return (v * w ** p) @ v.conj().T


@dataclass
class GeneralizedKaehlerPair:
    """Commuting pair (J1, J_psi) with positive generalized metric.

    ``plus`` and ``minus`` hold frames of L_J1^+ and L_J1^- as columns in
    stacked coordinates normalized by <e_i, conj e_j> = +-delta_ij.
    """

    J1: GeneralizedComplexStructure
    J2: GeneralizedComplexStructure
    sp: PureSpinor
    Ghat: np.ndarray
    plus: np.ndarray = field(repr=False)
    minus: np.ndarray = field(repr=False)

    @property
    def n(self):
        return self.J1.n

    def frame_vectors(self, sign=+1):
        X = self.plus if sign > 0 else self.minus
        return [GeneralizedVector.from_stacked(X[:, i]) for i in range(X.shape[1])]

    def metric_matrix(self):
        """Symmetric matrix of G(e, e') = <Ghat e, e'>."""
        return self.Ghat.T @ pairing_matrix(self.n)


def gk_pair(J1, sp):
    """Build and verify a generalized Kaehler pair of symplectic type."""
    J2 = gcs_from_pure_spinor(sp)
    n = J1.n
    if n != sp.n:
        raise ValueError("dimension mismatch")
    scale = np.linalg.norm(J1.J) * np.linalg.norm(J2.J)
    comm = np.linalg.norm(J1.J @ J2.J - J2.J @ J1.J)
    if comm > TOL * scale:
        raise NonCommutingError(f"J1 and J2 do not commute (residual {comm:.3e})")
    Ghat = -J1.J @ J2.J
    G = Ghat.T @ pairing_matrix(n)
    if np.linalg.norm(G - G.T) > 1e-10 * np.linalg.norm(G):
        raise IndefiniteMetricError("G is not symmetric")
    w = np.linalg.eigvalsh(0.5 * (G + G.T))
    if w.min() <= 1e-10 * np.abs(w).max():
        raise IndefiniteMetricError(f"G is not positive definite (min eigenvalue {w.min():.3e})")
    I = np.eye(4 * n)
    Pm = 0.5 * (I + 1j * J1.J)
    P = pairing_matrix(n)
    frames = {}
    for sgn in (+1, -1):
        X = _range_basis(Pm @ (0.5 * (I + sgn * Ghat)), n)
        M = X.T @ P @ X.conj()
        M = 0.5 * (M + M.conj().T)
        frames[sgn] = X @ np.conj(_herm_pow(sgn * M, -0.5))
    plus, minus = frames[1], frames[-1]
    # match minus vectors to plus vectors by vector part when possible
    m = 2 * n
    coef, *_ = np.linalg.lstsq(minus[:m], plus[:m], rcond=None)
    matched = minus @ coef
    if np.linalg.norm(matched[:m] - plus[:m]) < 1e-10 * np.linalg.norm(plus[:m]):
        Mm = matched.T @ P @ matched.conj()
        if np.linalg.norm(Mm + np.eye(n)) < 1e-10:
            minus = matched
    return GeneralizedKaehlerPair(J1, J2, sp, Ghat, plus, minus)


def kaehler_pair(n=1, omega=None, b=None):
    """Standard pair (J_J, J_psi) on R^{2n}."""
    omega = standard_symplectic(n) if omega is None else omega
    return gk_pair(gcs_from_complex_structure(standard_complex_structure(n)), PureSpinor(omega, b))


def random_kaehler_data(n, rng, b_scale=1.0):
    """Random generalized Kaehler pair of symplectic type.

    A random frame change g (det g > 0) moves the standard compatible pair
    (J, omega) to (g J g^{-1}, g^{-T} omega g^{-1}); a random b then acts on
    both structures.
    """
    m = 2 * n
    while True:
        g = np.eye(m) + 0.4 * rng.normal(size=(m, m))
        if np.linalg.det(g) > 0.1:
            break
    ginv = np.linalg.inv(g)
    J = g @ standard_complex_structure(n) @ ginv
    omega = ginv.T @ standard_symplectic(n) @ ginv
    b = b_scale * rng.normal(size=(m, m))
    b = b - b.T
    J1 = b_transform(gcs_from_complex_structure(J), b)
    return gk_pair(J1, PureSpinor(omega, b))


def _clifford_matrix(x, n):
    """Dense spin action of a stacked (complex) generalized vector."""
    alg = algebra(n)
    m = 2 * n
    return np.tensordot(x[:m], alg.iota, axes=1) + np.tensordot(x[m:], alg.eps, axes=1)


def frame_identity_residuals(pair):
    """Max deviation in the frame identities for the L_J^+- frames.

    minus frame: <conj e_i . e_j . psi, conj psi> = -2 delta_ij <psi, conj psi>
    plus frame:  <e_i . conj e_j . psi, conj psi> = +2 delta_ij <psi, conj psi>
    Returns (minus residual, plus residual), relative to |<psi, conj psi>|.
    """
    sp = pair.sp
    alg = algebra(sp.n)
    out = []
    for X, sign in ((pair.minus, -1), (pair.plus, +1)):
        k = X.shape[1]
        G = np.zeros((k, k), dtype=complex)
        for i in range(k):
            for j in range(k):
                if sign < 0:
                    op = _clifford_matrix(X[:, i].conj(), sp.n) @ _clifford_matrix(X[:, j], sp.n)
                else:
                    op = _clifford_matrix(X[:, i], sp.n) @ _clifford_matrix(X[:, j].conj(), sp.n)
                G[i, j] = alg.pair(op @ sp.dense, sp.conj_dense)
        out.append(float(np.abs(G - 2 * sign * np.eye(k) * sp.norm_pair).max() / abs(sp.norm_pair)))
    return tuple(out)


def skew_top_residual(sp, theta, v):
    """|4 pi_{U^{-n}}(theta . v . psi) - 2 theta(v)| for real theta, v.

    The identity holds for psi = exp(-i omega); a b-field adds theta ^ i_v b terms.
    """
    alg = algebra(sp.n)
    op = np.tensordot(theta, alg.eps, axes=1) @ np.tensordot(v, alg.iota, axes=1)
    c = project_Uminus_n(op @ sp.dense, sp)
    return float(abs(4 * c - 2 * np.dot(theta, v)))


def skew_projection_residual(P, sp, theta, v):
    """|Herm part of pi_{U^{-n}}(P . theta . v . psi)| for a skew-Hermitian matrix P."""
    P = np.asarray(P, dtype=complex)
    alg = algebra(sp.n)
    op = np.tensordot(theta, alg.eps, axes=1) @ np.tensordot(v, alg.iota, axes=1)
    c = P * project_Uminus_n(op @ sp.dense, sp)
    return float(np.abs(0.5 * (c + c.conj().T)).max())
