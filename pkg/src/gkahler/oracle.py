"""Dense brute-force oracle for the exterior/Clifford algebra.

Built independently of ``multivector`` from Kronecker products of 2x2
matrices (fermionic creation operators with a parity string). Limited to
n <= 4, i.e. at most 256 basis elements.
"""

from functools import lru_cache

import numpy as np

MAX_N = 4

_Z = np.diag([1.0, -1.0])
_UP = np.array([[0.0, 0.0], [1.0, 0.0]])  # |0> -> |1>
_I = np.eye(2)


@lru_cache(maxsize=None)
def creation_ops(n):
    """Creation matrices c_k (k = 0..2n-1) on C^{2^{2n}}.

    Index convention: basis index = bitmask with generator k on bit k. In
    a Kronecker product the last factor is the least significant bit, so
    the factor list is assembled from the highest generator down.
    """
    if not 1 <= n <= MAX_N:
        raise ValueError(f"dense oracle supports 1 <= n <= {MAX_N}")
    m = 2 * n
    ops = []
    for k in range(m):
        factors = []
        for q in reversed(range(m)):
            factors.append(_Z if q < k else (_UP if q == k else _I))
        op = np.array([[1.0]])
        for f in factors:
            op = np.kron(op, f)
        ops.append(op)
    return tuple(ops)


def _left_mult(n, a):
    c = creation_ops(n)
    D = 1 << (2 * n)
    out = np.zeros((D, D), dtype=complex)
    for mask in range(D):
        if a[mask] == 0:
            continue
        op = np.eye(D)
        for k in range(2 * n):
            if (mask >> k) & 1:
                op = op @ c[k]
        out += a[mask] * op
    return out


def structure_constants(n):
    """Table T[a, b] = (mask, sign) with theta^a theta^b = sign theta^mask."""
    D = 1 << (2 * n)
    T = np.zeros((D, D), dtype=int)
    S = np.zeros((D, D))
    for a in range(D):
        e = np.zeros(D)
        e[a] = 1
        L = _left_mult(n, e).real
        for b in range(D):
            col = L[:, b]
            nz = np.flatnonzero(col)
            if nz.size:
                T[a, b] = nz[0]
                S[a, b] = col[nz[0]]
    return T, S


def wedge(n, a, b):
    return _left_mult(n, np.asarray(a, dtype=complex)) @ np.asarray(b, dtype=complex)


def interior(n, v, a):
    c = creation_ops(n)
    out = np.zeros(1 << (2 * n), dtype=complex)
    for k in range(2 * n):
        out += v[k] * (c[k].T @ a)
    return out


def clifford_act(n, v, xi, a):
    c = creation_ops(n)
    op = sum(v[k] * c[k].T + xi[k] * c[k] for k in range(2 * n))
    return op @ a


def involution(n, a):
    D = 1 << (2 * n)
    deg = np.array([bin(x).count("1") for x in range(D)])
    sign = np.where(deg % 4 < 2, 1.0, -1.0)
    return sign * np.asarray(a)


def spin_pair(n, a, b):
    return wedge(n, a, involution(n, b))[-1]
