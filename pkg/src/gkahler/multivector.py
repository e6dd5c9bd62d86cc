"""Exterior and Clifford algebra on a 2n-dimensional real space.

Basis elements of the exterior algebra are bitmasks over the generators
theta^1 < ... < theta^{2n}; bit ``k`` (0-based) stands for theta^{k+1}.
Products are normalized by counting transpositions.

Besides the sparse ``Multivector`` type this module exposes dense operator
tables (``algebra(n)``) used by the field-level code, where a spinor field is
an array whose last axis has length 2^{2n}.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


def popcount(m):
    return bin(m).count("1")


def _check_dims(*objs):
    n = objs[0].n
    for o in objs[1:]:
        if o.n != n:
            raise ValueError(f"dimension mismatch: {n} vs {o.n}")
    return n


def wedge_sign(a, b):
    """Sign of theta^a wedge theta^b relative to theta^(a|b); 0 if they overlap."""
    if a & b:
        return 0
    swaps = 0
    bb = b
    while bb:
        low = bb & -bb
        j = low.bit_length() - 1
        swaps += popcount(a >> (j + 1))
        bb ^= low
    return -1 if swaps & 1 else 1


def sigma_sign(deg):
    return 1 if deg % 4 in (0, 1) else -1


class Multivector:
    """Sparse complex element of the exterior algebra on 2n generators.

    Parameters
    ----------
    n : int
        Half the real dimension.
    terms : dict, optional
        Map bitmask -> complex coefficient. Exact zeros are dropped.
    """

    __slots__ = ("n", "terms")

    def __init__(self, n, terms=None):
        if int(n) < 1:
            raise ValueError("n must be a positive integer")
        self.n = int(n)
        top = 1 << (2 * self.n)
        clean = {}
        for m, c in (terms or {}).items():
            m = int(m)
            if m < 0 or m >= top:
                raise ValueError(f"bitmask {m} out of range for n={self.n}")
            c = complex(c)
            if c != 0:
                clean[m] = clean.get(m, 0) + c
                if clean[m] == 0:
                    del clean[m]
        self.terms = clean

    @classmethod
    def scalar(cls, n, c=1.0):
        return cls(n, {0: c})

    @classmethod
    def basis(cls, n, indices, coeff=1.0):
        """theta^{i_1} ^ ... ^ theta^{i_p} with 0-based generator indices."""
        out = cls.scalar(n, coeff)
        for i in indices:
            out = wedge(out, cls(n, {1 << int(i): 1.0}))
        return out

    @classmethod
    def one_form(cls, coeffs):
        coeffs = np.asarray(coeffs)
        n = len(coeffs) // 2
        return cls(n, {1 << k: c for k, c in enumerate(coeffs)})

    @classmethod
    def two_form(cls, mat):
        """sum_{i<j} mat[i, j] theta^i theta^j for an antisymmetric matrix."""
        mat = np.asarray(mat)
        n = mat.shape[0] // 2
        return cls(n, {(1 << i) | (1 << j): mat[i, j]
                       for i in range(2 * n) for j in range(i + 1, 2 * n)})

    @classmethod
    def from_dense(cls, n, vec):
        vec = np.asarray(vec)
        return cls(n, {m: vec[m] for m in np.flatnonzero(vec)})

    def to_dense(self):
        out = np.zeros(1 << (2 * self.n), dtype=complex)
        for m, c in self.terms.items():
            out[m] = c
        return out

    def degrees(self):
        return sorted({popcount(m) for m in self.terms})

    def grade(self, k):
        return Multivector(self.n, {m: c for m, c in self.terms.items() if popcount(m) == k})

    def conj(self):
        return Multivector(self.n, {m: np.conj(c) for m, c in self.terms.items()})

    def norm(self):
        return float(np.sqrt(sum(abs(c) ** 2 for c in self.terms.values())))

    def __add__(self, other):
        _check_dims(self, other)
        t = dict(self.terms)
        for m, c in other.terms.items():
            t[m] = t.get(m, 0) + c
        return Multivector(self.n, t)

    def __neg__(self):
        return Multivector(self.n, {m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, c):
        return Multivector(self.n, {m: c * v for m, v in self.terms.items()})

    __rmul__ = __mul__

    def __repr__(self):
        body = " + ".join(f"({c:.6g})e{m:b}" for m, c in sorted(self.terms.items()))
        return f"Multivector(n={self.n}, {body or '0'})"


def wedge(a, b):
    """Exterior product of two multivectors."""
    n = _check_dims(a, b)
    out = {}
    for ma, ca in a.terms.items():
        for mb, cb in b.terms.items():
            s = wedge_sign(ma, mb)
            if s:
                m = ma | mb
                out[m] = out.get(m, 0) + s * ca * cb
    return Multivector(n, out)


def interior(v, a):
    """Interior product i_v a for a vector with 2n complex components."""
    v = np.asarray(v, dtype=complex)
    if v.shape != (2 * a.n,):
        raise ValueError(f"vector must have {2 * a.n} components")
    out = {}
    for m, c in a.terms.items():
        for k in range(2 * a.n):
            if v[k] != 0 and (m >> k) & 1:
                s = -1 if popcount(m & ((1 << k) - 1)) & 1 else 1
                mm = m ^ (1 << k)
                out[mm] = out.get(mm, 0) + s * v[k] * c
    return Multivector(a.n, out)


@dataclass(frozen=True)
class GeneralizedVector:
    """Element v + xi of the complexified T + T* at a point."""

    v: np.ndarray
    xi: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.v, dtype=complex)
        xi = np.asarray(self.xi, dtype=complex)
        if v.shape != xi.shape or v.ndim != 1 or v.shape[0] % 2:
            raise ValueError("v and xi must be vectors of the same even length")
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "xi", xi)

    @property
    def n(self):
        return self.v.shape[0] // 2

    @classmethod
    def from_stacked(cls, x):
        x = np.asarray(x)
        h = x.shape[0] // 2
        return cls(x[:h], x[h:])

    def stacked(self):
        return np.concatenate([self.v, self.xi])

    def conj(self):
        return GeneralizedVector(np.conj(self.v), np.conj(self.xi))

    def pair(self, other):
        """<v+xi, u+eta> = (xi(u) + eta(v)) / 2, complex bilinear."""
        return 0.5 * (self.xi @ other.v + other.xi @ self.v)


def clifford_act(e, a):
    """Spin action e . a = i_v a + xi ^ a."""
    if e.n != a.n:
        raise ValueError(f"dimension mismatch: {e.n} vs {a.n}")
    return interior(e.v, a) + wedge(Multivector.one_form(e.xi), a)


def clifford_involution(a):
    return Multivector(a.n, {m: sigma_sign(popcount(m)) * c for m, c in a.terms.items()})


def spin_pair(a, b):
    """Top-degree coefficient of a ^ sigma(b). No conjugation is applied."""
    n = _check_dims(a, b)
    top = (1 << (2 * n)) - 1
    total = 0j
    for ma, ca in a.terms.items():
        mb = top ^ ma
        cb = b.terms.get(mb)
        if cb is not None:
            total += wedge_sign(ma, mb) * sigma_sign(popcount(mb)) * ca * cb
    return total


class EndValuedMultivector:
    """r x r matrix of multivectors sharing the same n."""

    def __init__(self, entries):
        entries = [list(row) for row in entries]
        r = len(entries)
        if r == 0 or any(len(row) != r for row in entries):
            raise ValueError("entries must be a square r x r array")
        n = entries[0][0].n
        if any(e.n != n for row in entries for e in row):
            raise ValueError("all entries must share the same dimension n")
        self.r = r
        self.n = n
        self.entries = entries

    @classmethod
    def from_dense(cls, n, arr):
        arr = np.asarray(arr)
        return cls([[Multivector.from_dense(n, arr[i, j]) for j in range(arr.shape[1])]
                    for i in range(arr.shape[0])])

    def to_dense(self):
        return np.array([[e.to_dense() for e in row] for row in self.entries])

    @classmethod
    def tensor(cls, mat, a):
        """mat (x) a for a constant matrix and a multivector."""
        mat = np.asarray(mat)
        return cls([[a * mat[i, j] for j in range(mat.shape[1])] for i in range(mat.shape[0])])


# dense operator tables for field-level code


class Algebra:
    """Dense operator tables on the 2^{2n}-dimensional exterior algebra."""

    def __init__(self, n):
        self.n = n
        self.m = 2 * n
        self.dim = D = 1 << self.m
        self.top = D - 1
        masks = np.arange(D)
        self.degree = np.array([popcount(int(x)) for x in masks])
        self.sigma = np.array([sigma_sign(int(d)) for d in self.degree], dtype=float)
        self.eps = np.zeros((self.m, D, D))
        self.iota = np.zeros((self.m, D, D))
        for k in range(self.m):
            bit = 1 << k
            for x in range(D):
                if not x & bit:
                    self.eps[k, x | bit, x] = wedge_sign(bit, x)
                else:
                    s = -1.0 if popcount(x & (bit - 1)) & 1 else 1.0
                    self.iota[k, x ^ bit, x] = s
        self.comp = self.top ^ masks
        self.pair_sign = np.array([wedge_sign(int(x), int(self.top ^ x)) * sigma_sign(popcount(int(self.top ^ x)))
                                   for x in masks], dtype=float)

    def wedge_matrix(self, a):
        """Matrix of left multiplication by a multivector given as a dense vector."""
        a = np.asarray(a)
        out = np.zeros((self.dim, self.dim), dtype=complex)
        for mask in np.flatnonzero(a):
            op = np.eye(self.dim)
            for k in reversed([k for k in range(self.m) if (mask >> k) & 1]):
                op = self.eps[k] @ op
            out += a[mask] * op
        return out

    def two_form_matrix(self, mat):
        mat = np.asarray(mat)
        out = np.zeros((self.dim, self.dim), dtype=complex)
        for i in range(self.m):
            for j in range(i + 1, self.m):
                if mat[i, j] != 0:
                    out += mat[i, j] * (self.eps[i] @ self.eps[j])
        return out

    @property
    def wedge_tensor(self):
        """T[a, b, k]: coefficient of basis element k in e_a ^ e_b."""
        if not hasattr(self, "_wedge_tensor"):
            T = np.zeros((self.dim, self.dim, self.dim))
            for a in range(self.dim):
                e = np.zeros(self.dim)
                e[a] = 1.0
                T[a] = self.wedge_matrix(e).real.T
            self._wedge_tensor = T
        return self._wedge_tensor

    def pair(self, x, y):
        """Spin pairing over the last axis, broadcasting over leading axes."""
        return np.sum(x * y[..., self.comp] * self.pair_sign, axis=-1)


@lru_cache(maxsize=None)
def algebra(n):
    return Algebra(int(n))
