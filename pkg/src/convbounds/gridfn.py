"""Piecewise-constant lattice-valued functions on uniform grids.

Cells are half-open boxes of side ``h``; values are one LatticeVec per cell,
stored as a (ncells, total_dim) array with d=2 cells flattened in C order.
Functions are zero outside the grid.
"""

from __future__ import annotations

import csv
import io
import struct
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.signal import fftconvolve

from .kernels import Kernel
from .lattice import INF, Exponent, ExponentLike, LatticeSpec, LatticeVec, as_exponent, parse_spec

MEMORY_CAP_CELLS = 1 << 24
FFT_THRESHOLD = 4096


@dataclass(frozen=True)
class Grid:
    d: int
    origin: tuple
    h: float
    extent: tuple  # cells per axis

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValueError("only d=1 and d=2 grids are supported")
        origin = tuple(float(x) for x in np.atleast_1d(self.origin))
        extent = tuple(int(n) for n in np.atleast_1d(self.extent))
        if len(origin) != self.d or len(extent) != self.d:
            raise ValueError("origin/extent arity must match dimension d")
        if self.h <= 0:
            raise ValueError("grid step must be positive")
        if any(n < 1 for n in extent):
            raise ValueError("extent must be at least one cell per axis")
        ncells = int(np.prod(extent))
        if ncells > MEMORY_CAP_CELLS:
            raise ValueError(f"grid of {ncells} cells exceeds the memory cap")
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "extent", extent)

    @property
    def ncells(self) -> int:
        return int(np.prod(self.extent))

    @property
    def cell_volume(self) -> float:
        return self.h**self.d

    def axis_centers(self, axis: int = 0) -> np.ndarray:
        n = self.extent[axis]
        return self.origin[axis] + (np.arange(n) + 0.5) * self.h

    def centers(self) -> np.ndarray:
        """Cell centers, shape (ncells,) for d=1 and (ncells, 2) for d=2."""
        if self.d == 1:
            return self.axis_centers(0)
        cx, cy = np.meshgrid(self.axis_centers(0), self.axis_centers(1), indexing="ij")
        return np.stack([cx.ravel(), cy.ravel()], axis=-1)

    @classmethod
    def line(cls, origin: float, h: float, ncells: int) -> "Grid":
        return cls(1, (origin,), h, (ncells,))


@dataclass(frozen=True)
class GridFunction:
    grid: Grid
    spec: LatticeSpec
    values: np.ndarray  # (ncells, total_dim)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.ndim == 1:
            vals = vals[:, None]
        if vals.shape != (self.grid.ncells, self.spec.total_dim):
            raise ValueError(
                f"values shape {vals.shape} does not match "
                f"(ncells, dim) = ({self.grid.ncells}, {self.spec.total_dim})"
            )
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    def cell_norms(self) -> np.ndarray:
        return self.spec.norm_many(self.values)

    def value_at(self, cell: int) -> LatticeVec:
        return LatticeVec(self.spec, self.values[cell])

    def map_values(self, fn) -> "GridFunction":
        return GridFunction(self.grid, self.spec, fn(self.values))

    def __add__(self, other: "GridFunction") -> "GridFunction":
        self._check_compatible(other)
        return GridFunction(self.grid, self.spec, self.values + other.values)

    def __mul__(self, c: float) -> "GridFunction":
        return GridFunction(self.grid, self.spec, self.values * float(c))

    __rmul__ = __mul__

    def __abs__(self) -> "GridFunction":
        return GridFunction(self.grid, self.spec, np.abs(self.values))

    def _check_compatible(self, other: "GridFunction"):
        if other.grid != self.grid or other.spec != self.spec:
            raise ValueError("grid functions are not compatible")


def scalar_grid_function(grid: Grid, values: np.ndarray) -> GridFunction:
    return GridFunction(grid, LatticeSpec(((2, 1),)), np.asarray(values, dtype=float))


def indicator_function(grid: Grid, a: float, b: float) -> GridFunction:
    """Scalar 1_{[a,b)} sampled on cells (d=1)."""
    c = grid.centers()
    return scalar_grid_function(grid, ((c >= a) & (c < b)).astype(float))


def lp_norm(f: GridFunction, p: ExponentLike) -> float:
    """Norm in L^p(grid; X) under the piecewise-constant quadrature."""
    p = as_exponent(p)
    norms = f.cell_norms()
    if p is INF:
        return float(norms.max())
    pf = float(p)
    return float((norms**pf).sum() * f.grid.cell_volume) ** (1.0 / pf)


def convolve(k: Kernel, f: GridFunction, method: str = "auto") -> GridFunction:
    """Riemann-sum convolution (k*f)(t) = sum_s k(t-s) f(s) h^d on f's grid.

    The kernel must share the grid step; output is truncated to f's box with
    zero extension outside.  ``method`` is 'auto', 'direct', or 'fft'; both
    evaluation paths agree to within accumulation rounding.
    """
    if abs(k.h - f.grid.h) > 1e-12 * f.grid.h:
        raise ValueError("kernel and grid steps are incompatible")
    if k.d != f.grid.d:
        raise ValueError("kernel and grid dimensions differ")
    m = k.radius_cells
    if method == "auto":
        method = "fft" if max(f.grid.extent) > FFT_THRESHOLD else "direct"
    if f.grid.d == 1:
        n = f.grid.ncells
        if method == "direct":
            out = np.empty_like(f.values)
            for col in range(f.values.shape[1]):
                out[:, col] = np.convolve(f.values[:, col], k.samples)[m : m + n]
        else:
            out = fftconvolve(f.values, k.samples[:, None], axes=0)[m : m + n]
        return GridFunction(f.grid, f.spec, out * f.grid.cell_volume)
    nx, ny = f.grid.extent
    vol = f.grid.cell_volume
    cube = f.values.reshape(nx, ny, -1)
    if method == "direct":
        out = np.zeros_like(cube)
        for dx in range(-m, m + 1):
            for dy in range(-m, m + 1):
                w = k.samples[dx + m, dy + m]
                if w == 0.0:
                    continue
                xs = slice(max(dx, 0), nx + min(dx, 0))
                xs_src = slice(max(-dx, 0), nx + min(-dx, 0))
                ys = slice(max(dy, 0), ny + min(dy, 0))
                ys_src = slice(max(-dy, 0), ny + min(-dy, 0))
                out[xs, ys] += w * cube[xs_src, ys_src]
    else:
        out = fftconvolve(cube, k.samples[:, :, None], axes=(0, 1))[
            m : m + nx, m : m + ny
        ]
    return GridFunction(f.grid, f.spec, out.reshape(f.grid.ncells, -1) * vol)


def adjoint_kernel(k: Kernel) -> Kernel:
    """Reflection t -> k(-t); implements the L^2 grid adjoint of convolution."""
    return k.reflected()


def grid_pairing(f: GridFunction, g: GridFunction) -> float:
    """<f, g> = sum_cells h^d * sum_coords f*g (grids must match)."""
    if f.grid != g.grid or f.values.shape != g.values.shape:
        raise ValueError("pairing needs matching grids and dimensions")
    return float((f.values * g.values).sum() * f.grid.cell_volume)


# ---------------------------------------------------------------------------
# serialization

_MAGIC = b"CBGF1"


def to_csv(f: GridFunction, path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        coord_cols = [f"c{i}" for i in range(f.spec.total_dim)]
        if f.grid.d == 1:
            writer.writerow(["cell", "x"] + coord_cols)
            centers = f.grid.centers()
            for i in range(f.grid.ncells):
                writer.writerow(
                    [i, repr(float(centers[i]))] + [repr(float(v)) for v in f.values[i]]
                )
        else:
            writer.writerow(["cell", "x", "y"] + coord_cols)
            centers = f.grid.centers()
            for i in range(f.grid.ncells):
                writer.writerow(
                    [i, repr(float(centers[i, 0])), repr(float(centers[i, 1]))]
                    + [repr(float(v)) for v in f.values[i]]
                )


def from_csv(path: str, grid: Grid, spec: LatticeSpec) -> GridFunction:
    values = np.zeros((grid.ncells, spec.total_dim))
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)  # header
        skip = 1 + grid.d
        for row in reader:
            values[int(row[0])] = [float(v) for v in row[skip:]]
    return GridFunction(grid, spec, values)


def to_binary(f: GridFunction, path: str) -> None:
    """Compact binary form: magic, d, h, extent, origin, spec string, payload."""
    spec_bytes = f.spec.to_string().encode()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<Bd", f.grid.d, f.grid.h))
        fh.write(struct.pack(f"<{f.grid.d}I", *f.grid.extent))
        fh.write(struct.pack(f"<{f.grid.d}d", *f.grid.origin))
        fh.write(struct.pack("<H", len(spec_bytes)))
        fh.write(spec_bytes)
        fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())


def from_binary(path: str) -> GridFunction:
    with open(path, "rb") as fh:
        if fh.read(len(_MAGIC)) != _MAGIC:
            raise ValueError("not a grid-function binary file")
        d, h = struct.unpack("<Bd", fh.read(9))
        extent = struct.unpack(f"<{d}I", fh.read(4 * d))
        origin = struct.unpack(f"<{d}d", fh.read(8 * d))
        (spec_len,) = struct.unpack("<H", fh.read(2))
        spec = parse_spec(fh.read(spec_len).decode())
        grid = Grid(d, origin, h, extent)
        payload = fh.read()
    values = np.frombuffer(payload, dtype="<f8").reshape(grid.ncells, spec.total_dim)
    return GridFunction(grid, spec, values.copy())
