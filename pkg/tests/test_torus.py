import numpy as np
import pytest
from hypothesis import given, strategies as st

from gkahler.multivector import algebra
from gkahler.torus import (
    Field,
    Grid,
    drop_nyquist,
    dump_field,
    exterior_d,
    fourier_field,
    gradient,
    integrate,
    integrate_top,
    load_field,
    random_bandlimited,
    spectral_partial,
)

seeds = st.integers(0, 2**32 - 1)


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid(1, 7)
    with pytest.raises(ValueError):
        Grid(1, 4)
    with pytest.raises(ValueError):
        Grid(1, 16, (1.0,))
    g = Grid(1, 16, (2.0, 3.0))
    assert g.volume == pytest.approx(6.0)
    assert g.cell_volume == pytest.approx(6.0 / 256)


def test_derivative_of_trig():
    g = Grid(1, 16)
    x, y = g.coords()
    f = np.sin(2 * x) * np.cos(3 * y)
    np.testing.assert_allclose(spectral_partial(f, 0, g), 2 * np.cos(2 * x) * np.cos(3 * y), atol=1e-12)
    np.testing.assert_allclose(spectral_partial(f, 1, g, order=2), -9 * f, atol=1e-11)
    with pytest.raises(ValueError):
        spectral_partial(f, 2, g)


def test_periods_scale_derivatives():
    g = Grid(1, 16, (1.0, 2.0))
    x, y = g.coords()
    f = np.sin(2 * np.pi * x)
    np.testing.assert_allclose(spectral_partial(f, 0, g), 2 * np.pi * np.cos(2 * np.pi * x), atol=1e-11)


@given(seeds, st.sampled_from([1, 2]))
def test_d_squared_zero(seed, n):
    rng = np.random.default_rng(seed)
    g = Grid(n, 8)
    f = random_bandlimited(g, rng, (algebra(n).dim,), kmax=2)
    assert np.abs(exterior_d(exterior_d(f, g), g)).max() < 1e-10


@given(seeds)
def test_integral_of_derivative_vanishes(seed):
    g = Grid(1, 16)
    f = random_bandlimited(g, np.random.default_rng(seed), (), kmax=3)
    for k in range(2):
        assert abs(integrate(spectral_partial(f, k, g), g)) < 1e-10


def test_integrate_exact():
    g = Grid(1, 8)
    x, y = g.coords()
    assert integrate(np.cos(x) ** 2, g) == pytest.approx(2 * np.pi ** 2)
    top = np.zeros(g.shape + (4,))
    top[..., 3] = 1.0
    assert integrate_top(top, g) == pytest.approx(4 * np.pi ** 2)


def test_fourier_field_records():
    g = Grid(1, 16)
    x, y = g.coords()
    f = fourier_field(g, [[[1, 0], 0.5, 0.0], [[-1, 0], 0.5, 0.0], [[0, 2], 0.0, 1.0]])
    np.testing.assert_allclose(f, np.cos(x) + 1j * np.exp(2j * y), atol=1e-12)
    M = fourier_field(g, [[[[[0, 0], 1.0, 0.0]], []], [[], [[[1, 1], 2.0, 0.0]]]], (2, 2))
    assert M.shape == g.shape + (2, 2)
    np.testing.assert_allclose(M[..., 1, 1], 2 * np.exp(1j * (x + y)), atol=1e-12)
    with pytest.raises(ValueError):
        fourier_field(g, [[[1, 0, 0], 1.0, 0.0]])


def test_dump_load_roundtrip(tmp_path, rng):
    g = Grid(1, 8, (2 * np.pi, 3.0))
    vals = random_bandlimited(g, rng, (2, 2))
    f = Field(g, vals)
    text = dump_field(f, tmp_path / "f.json")
    back = load_field(str(tmp_path / "f.json"))
    np.testing.assert_array_equal(back.values, vals)
    assert back.grid == g
    np.testing.assert_array_equal(load_field(text).values, vals)


def test_drop_nyquist(rng):
    g = Grid(1, 8)
    x, y = g.coords()
    f = np.cos(4 * x) + np.cos(y)
    np.testing.assert_allclose(drop_nyquist(f, g), np.cos(y), atol=1e-12)
    assert np.isrealobj(drop_nyquist(f, g))


def test_field_shape_check():
    with pytest.raises(ValueError):
        Field(Grid(1, 8), np.zeros((8, 4)))
    g = Grid(1, 8)
    assert gradient(np.zeros(g.shape), g).shape == (2,) + g.shape
