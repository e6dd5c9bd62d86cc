"""Fields on a flat torus T^{2n}: periodic grid, spectral derivatives, d and integration.

A field is stored as an array whose first 2n axes are the grid axes; any
trailing axes hold the pointwise value (scalar, matrix, or a multivector in
the dense 2^{2n} basis of ``multivector.algebra``).
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .multivector import algebra


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid with N points per axis on T^{2n}."""

    n: int
    N: int
    periods: tuple = field(default=None)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be positive")
        if self.N < 8 or self.N % 2:
            raise ValueError("N must be even and at least 8")
        p = (2 * np.pi,) * (2 * self.n) if self.periods is None else tuple(float(x) for x in self.periods)
        if len(p) != 2 * self.n or min(p) <= 0:
            raise ValueError("need 2n positive periods")
        object.__setattr__(self, "periods", p)

    @property
    def dim(self):
        return 2 * self.n

    @property
    def shape(self):
        return (self.N,) * self.dim

    @property
    def cell_volume(self):
        return float(np.prod([p / self.N for p in self.periods]))

    @property
    def volume(self):
        return float(np.prod(self.periods))

    def coords(self):
        """Coordinate arrays x_k = period_k * j / N, each of grid shape."""
        axes = [np.arange(self.N) * p / self.N for p in self.periods]
        return np.meshgrid(*axes, indexing="ij")

    def wavenumbers(self, axis):
        return 2 * np.pi * np.fft.fftfreq(self.N, d=1.0 / self.N) / self.periods[axis]

    def expand(self, arr, tail=0):
        """Broadcast a per-node array against ``tail`` trailing value axes."""
        return np.asarray(arr).reshape(np.shape(arr) + (1,) * tail)


def default_grid_size(n):
    return 32 if n == 1 else 12


@dataclass
class Field:
    """Values on a grid; the first 2n axes of ``values`` are grid axes."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.shape[: self.grid.dim] != self.grid.shape:
            raise ValueError("field values do not match the grid shape")

    @property
    def value_shape(self):
        return self.values.shape[self.grid.dim:]


def _unwrap(f, grid):
    if isinstance(f, Field):
        return f.values, f.grid, True
    if grid is None:
        raise ValueError("a grid is required for raw arrays")
    return np.asarray(f), grid, False


def spectral_partial(f, axis, grid=None, order=1):
    """Fourier derivative d/dx_axis of a field (Nyquist mode dropped for odd orders)."""
    vals, grid, wrapped = _unwrap(f, grid)
    if not 0 <= axis < grid.dim:
        raise ValueError("axis out of range")
    k = grid.wavenumbers(axis)
    mult = (1j * k) ** order
    if order % 2:
        mult[grid.N // 2] = 0.0
    shape = [1] * vals.ndim
    shape[axis] = grid.N
    out = np.fft.ifft(np.fft.fft(vals, axis=axis) * mult.reshape(shape), axis=axis)
    return Field(grid, out) if wrapped else out


def drop_nyquist(vals, grid):
    """Remove every Fourier mode with some index at N/2 (unresolved by odd derivatives)."""
    ax = tuple(range(grid.dim))
    spec = np.fft.fftn(vals, axes=ax)
    for a in ax:
        idx = [slice(None)] * vals.ndim
        idx[a] = grid.N // 2
        spec[tuple(idx)] = 0.0
    out = np.fft.ifftn(spec, axes=ax)
    return out if np.iscomplexobj(vals) else out.real


def gradient(vals, grid):
    """All first partials, stacked on a new leading axis."""
    return np.stack([spectral_partial(vals, k, grid) for k in range(grid.dim)])


def exterior_d(f, grid=None):
    """d of a multivector-valued field (last axis = dense exterior basis)."""
    vals, grid, wrapped = _unwrap(f, grid)
    alg = algebra(grid.n)
    if vals.shape[-1] != alg.dim:
        raise ValueError("last axis must be the exterior basis")
    out = np.zeros(vals.shape, dtype=complex)
    for k in range(grid.dim):
        out += spectral_partial(vals, k, grid) @ alg.eps[k].T
    return Field(grid, out) if wrapped else out


def integrate(vals, grid):
    """Riemann sum over the grid axes (exact for band-limited integrands)."""
    return np.sum(vals, axis=tuple(range(grid.dim))) * grid.cell_volume


def integrate_top(f, grid=None):
    """Integral of the top-degree coefficient of a multivector field."""
    vals, grid, _ = _unwrap(f, grid)
    out = integrate(vals[..., -1], grid)
    return complex(out) if np.ndim(out) == 0 else out


def fourier_field(grid, records, value_shape=()):
    """Evaluate finite Fourier series given as [mode vector, re, im] records.

    ``records`` is a list for a scalar field, or a nested list of lists
    matching ``value_shape`` for matrix fields.
    """
    x = grid.coords()
    twopi = 2 * np.pi

    def series(recs):
        out = np.zeros(grid.shape, dtype=complex)
        for rec in recs:
            mode, re, im = rec
            mode = np.asarray(mode, dtype=float)
            if mode.shape != (grid.dim,):
                raise ValueError(f"mode vector must have {grid.dim} entries")
            phase = sum(twopi * mode[k] * x[k] / grid.periods[k] for k in range(grid.dim))
            out += complex(re, im) * np.exp(1j * phase)
        return out

    if value_shape == ():
        return series(records)
    out = np.zeros(grid.shape + tuple(value_shape), dtype=complex)
    for idx in np.ndindex(*value_shape):
        recs = records
        for i in idx:
            recs = recs[i]
        out[(Ellipsis,) + idx] = series(recs)
    return out


def random_bandlimited(grid, rng, value_shape=(), kmax=2, amplitude=1.0, real=False):
    """Random trigonometric polynomial with modes |m_k| <= kmax."""
    shape = grid.shape + tuple(value_shape)
    spec = np.zeros(shape, dtype=complex)
    idx = [np.r_[0:kmax + 1, grid.N - kmax:grid.N] for _ in range(grid.dim)]
    sub = np.ix_(*idx)
    block = rng.normal(size=tuple(len(i) for i in idx) + tuple(value_shape)) \
        + 1j * rng.normal(size=tuple(len(i) for i in idx) + tuple(value_shape))
    spec[sub] = block
    out = np.fft.ifftn(spec, axes=tuple(range(grid.dim)))
    if real:
        out = out.real
    return out * (amplitude / np.sqrt(np.mean(np.abs(out) ** 2)))


def dump_field(f, path=None):
    """Serialize a field: axis sizes, value shape, row-major complex pairs."""
    vals = np.asarray(f.values, dtype=complex)
    doc = {
        "axis_sizes": list(f.grid.shape),
        "periods": list(f.grid.periods),
        "shape": list(f.value_shape),
        "data": [[float(z.real), float(z.imag)] for z in vals.ravel()],
    }
    text = json.dumps(doc)
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text


def load_field(text_or_path):
    text = text_or_path
    if not text.lstrip().startswith("{"):
        with open(text_or_path, encoding="utf-8") as fh:
            text = fh.read()
    doc = json.loads(text)
    sizes = doc["axis_sizes"]
    grid = Grid(len(sizes) // 2, sizes[0], tuple(doc["periods"]))
    data = np.array(doc["data"], dtype=float)
    vals = (data[:, 0] + 1j * data[:, 1]).reshape(tuple(sizes) + tuple(doc["shape"]))
    return Field(grid, vals)
