"""JSON run configurations.

Matrix-valued fields are given either as a constant matrix or as finite
Fourier series::

    {"constant": [[1, 0], [0, 1]]}
    {"fourier": [[ [[[1, 0], 0.3, 0.0]], [] ], [ [], [] ]]}

Complex matrix entries may be numbers or [re, im] pairs. A Fourier entry is
a list of records [mode vector, re, im] (see ``torus.fourier_field``).
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .bundle import GeneralizedConnection, GeneralizedHolomorphicStructure, HermitianBundle
from .matfun import herm
from .structures import PureSpinor, gcs_from_complex_structure, gk_pair, standard_complex_structure
from .torus import Grid, default_grid_size, fourier_field


class ConfigError(ValueError):
    pass


class StructureError(ConfigError):
    """The config parses but describes an invalid geometric structure."""


SOLVER_DEFAULTS = {"tol": 1e-10, "eps0": 1.0, "ratio": 0.7, "eps_floor": 1e-4, "max_iter": 50,
                   "growth_factor": 10.0, "extra_slices": 2}


def _complex(x, where):
    if isinstance(x, (int, float)):
        return complex(x)
    if isinstance(x, list) and len(x) == 2 and all(isinstance(t, (int, float)) for t in x):
        return complex(x[0], x[1])
    raise ConfigError(f"{where}: expected a number or [re, im] pair")


def _matrix(x, shape, where, real=False):
    try:
        rows = [[_complex(v, f"{where}[{i}][{j}]") for j, v in enumerate(row)] for i, row in enumerate(x)]
        M = np.array(rows, dtype=complex)
    except TypeError as exc:
        raise ConfigError(f"{where}: not a matrix") from exc
    if M.shape != tuple(shape):
        raise ConfigError(f"{where}: expected shape {tuple(shape)}, got {M.shape}")
    if real:
        if np.abs(M.imag).max(initial=0.0) > 0:
            raise ConfigError(f"{where}: must be real")
        return M.real
    return M


def field_from_spec(spec, grid, r, where):
    """Evaluate a matrix field spec on the grid; None gives zero."""
    if spec is None:
        return np.zeros(grid.shape + (r, r), dtype=complex)
    if not isinstance(spec, dict) or len(spec) != 1 or next(iter(spec)) not in ("constant", "fourier"):
        raise ConfigError(f"{where}: field spec must be {{'constant': ...}} or {{'fourier': ...}}")
    kind, val = next(iter(spec.items()))
    if kind == "constant":
        M = _matrix(val, (r, r), f"{where}.constant")
        return np.broadcast_to(M, grid.shape + (r, r)).copy()
    if not isinstance(val, list) or len(val) != r or any(not isinstance(row, list) or len(row) != r for row in val):
        raise ConfigError(f"{where}.fourier: expected an {r}x{r} nested list of record lists")
    try:
        return fourier_field(grid, val, (r, r))
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{where}.fourier: {exc}") from exc


def _stack(spec, grid, r, count, where):
    if spec is None:
        return np.zeros((count,) + grid.shape + (r, r), dtype=complex)
    if not isinstance(spec, list) or len(spec) != count:
        raise ConfigError(f"{where}: expected a list of {count} field specs")
    return np.stack([field_from_spec(s, grid, r, f"{where}[{k}]") for k, s in enumerate(spec)])


@dataclass
class RunConfig:
    grid: Grid
    sp: PureSpinor
    J: np.ndarray
    rank: int
    log_h: np.ndarray
    hs: GeneralizedHolomorphicStructure
    conn: GeneralizedConnection = None
    k_offset: np.ndarray = None
    projector: np.ndarray = None
    projector_rank: int = None
    solver: dict = field(default_factory=dict)
    seed: int = 0
    raw: dict = field(default_factory=dict, repr=False)

    def bundle(self):
        return HermitianBundle.from_log(self.grid, self.log_h)

    def pair(self):
        return gk_pair(gcs_from_complex_structure(self.J), self.sp)


def _get(doc, key, where, default=None, required=False):
    if key not in doc:
        if required:
            raise ConfigError(f"{where}.{key}: missing")
        return default
    return doc[key]


def parse_config(doc, grid_override=None):
    """Build a RunConfig from a parsed JSON document."""
    if not isinstance(doc, dict):
        raise ConfigError("top level must be an object")
    geo = _get(doc, "geometry", "config", required=True)
    n = _get(geo, "n", "geometry", required=True)
    if not isinstance(n, int) or n < 1:
        raise ConfigError("geometry.n: must be a positive integer")
    N = grid_override or _get(geo, "N", "geometry", default_grid_size(n))
    try:
        grid = Grid(n, int(N), _get(geo, "periods", "geometry"))
    except ValueError as exc:
        raise ConfigError(f"geometry: {exc}") from exc
    m = 2 * n
    omega = _matrix(_get(geo, "omega", "geometry", required=True), (m, m), "geometry.omega", real=True)
    b = _get(geo, "b", "geometry")
    b = None if b is None else _matrix(b, (m, m), "geometry.b", real=True)
    try:
        sp = PureSpinor(omega, b)
    except ValueError as exc:
        raise StructureError(f"geometry.omega: {exc}") from exc
    Jspec = _get(geo, "J", "geometry", "standard")
    J = standard_complex_structure(n) if Jspec == "standard" else _matrix(Jspec, (m, m), "geometry.J", real=True)

    bun = _get(doc, "bundle", "config", {})
    r = _get(bun, "rank", "bundle", 1)
    if not isinstance(r, int) or r < 1:
        raise ConfigError("bundle.rank: must be a positive integer")
    log_h = herm(field_from_spec(_get(bun, "log_h", "bundle"), grid, r, "bundle.log_h"))
    hs = GeneralizedHolomorphicStructure(grid, _stack(_get(bun, "A01", "bundle"), grid, r, n, "bundle.A01"),
                                         _stack(_get(bun, "Phi", "bundle"), grid, r, n, "bundle.Phi"))
    conn = None
    if "A" in bun or "V" in bun:
        conn = GeneralizedConnection(grid, _stack(_get(bun, "A", "bundle"), grid, r, m, "bundle.A"),
                                     _stack(_get(bun, "V", "bundle"), grid, r, m, "bundle.V"))
    off = _get(bun, "k_offset", "bundle")
    off = None if off is None else _matrix(off, (r, r), "bundle.k_offset")

    proj = _get(doc, "projector", "config")
    P = prank = None
    if proj is not None:
        P = field_from_spec(_get(proj, "pi", "projector", required=True), grid, r, "projector.pi")
        prank = _get(proj, "rank", "projector")

    solver = dict(SOLVER_DEFAULTS)
    sdoc = _get(doc, "solver", "config", {})
    for key, val in sdoc.items():
        if key == "seed":
            continue
        if key not in SOLVER_DEFAULTS:
            raise ConfigError(f"solver.{key}: unknown option")
        if not isinstance(val, (int, float)):
            raise ConfigError(f"solver.{key}: must be a number")
        solver[key] = val
    seed = int(sdoc.get("seed", 0))
    return RunConfig(grid, sp, J, r, log_h, hs, conn, off, P, prank, solver, seed, doc)


def load_config(path, grid_override=None):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return parse_config(doc, grid_override)
