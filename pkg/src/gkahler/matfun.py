"""Batched functions of Hermitian matrices over grid fields."""

import numpy as np


def dagger(X):
    return np.conj(np.swapaxes(X, -1, -2))


def herm(X):
    return 0.5 * (X + dagger(X))


def hfunc(H, fn):
    """fn applied to the eigenvalues of a batch of Hermitian matrices."""
    w, U = np.linalg.eigh(herm(H))
    return (U * fn(w)[..., None, :]) @ dagger(U)


def hexp(L):
    return hfunc(L, np.exp)


def hlog(H):
    w = np.linalg.eigvalsh(herm(H))
    if w.min() <= 0:
        raise ValueError("matrix field is not positive definite")
    return hfunc(H, np.log)


def hpow(H, p):
    return hfunc(H, lambda w: w ** p)


def phi(x):
    """(e^x - 1) / x with the removable singularity filled."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-8
    safe = np.where(small, 1.0, x)
    return np.where(small, 1.0 + 0.5 * x, np.expm1(safe) / safe)


def _eig_frame(L):
    w, U = np.linalg.eigh(herm(L))
    return w, U, w[..., None, :] - w[..., :, None]  # diff[i, j] = w_j - w_i


def dexp_left(L, dL):
    """e^{-L} d(e^L) for a Hermitian field L and its derivative dL."""
    w, U, diff = _eig_frame(L)
    t = dagger(U) @ dL @ U
    return U @ (t * phi(diff)) @ dagger(U)


def dlog(L, xi):
    """Derivative of log f along f^{-1} fdot = xi, at f = e^L."""
    w, U, diff = _eig_frame(L)
    t = dagger(U) @ xi @ U
    return U @ (t / phi(diff)) @ dagger(U)


def conj_exp(L, X, s=1.0):
    """e^{-sL} X e^{sL}."""
    w, U, diff = _eig_frame(L)
    t = dagger(U) @ X @ U
    return U @ (t * np.exp(s * diff)) @ dagger(U)


def frob(X):
    return np.sqrt(np.sum(np.abs(X) ** 2, axis=(-2, -1)))
