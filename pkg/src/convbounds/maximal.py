"""Truncated Hardy-Littlewood maximal operator and the failure construction.

d=1 ball averages use exact interval-overlap weights so dyadic radii hit the
lower bounds of the failure construction sharply; d=2 uses cell-center
inclusion.  The failure instance lives in l^inf_{2^N}(l^2_N) and is stored
sparsely (one support interval per coordinate), with a dense GridFunction
materialized only below a memory cap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from scipy.signal import fftconvolve

from .gridfn import Grid, GridFunction, lp_norm
from .lattice import INF, LatticeSpec, as_exponent

DENSE_CELL_LIMIT = 1 << 25  # cells * coordinates for dense materialization
COUNTEREXAMPLE_MAX_N = 12


@dataclass(frozen=True)
class RadiusSet:
    """Finite ascending set of ball radii; every radius must be >= grid h."""

    radii: tuple

    def __post_init__(self):
        radii = tuple(sorted(float(r) for r in self.radii))
        if not radii:
            raise ValueError("radius set must be nonempty")
        if radii[0] <= 0:
            raise ValueError("radii must be positive")
        object.__setattr__(self, "radii", radii)

    def validate_for(self, grid: Grid) -> None:
        if self.radii[0] < grid.h * (1 - 1e-12):
            raise ValueError(
                f"radius {self.radii[0]} is smaller than the grid step {grid.h}"
            )

    @classmethod
    def dyadic(cls, grid: Grid) -> "RadiusSet":
        """All powers of two representable on the grid: h <= 2^e <= box size."""
        size = max(n * grid.h for n in grid.extent)
        lo = math.ceil(math.log2(grid.h * (1 - 1e-12)))
        hi = math.floor(math.log2(size * (1 + 1e-12)))
        radii = [2.0**e for e in range(lo, hi + 1) if 2.0**e >= grid.h * (1 - 1e-12)]
        return cls(tuple(radii))

    @classmethod
    def all_grid_radii(cls, grid: Grid, include_half: bool = True) -> "RadiusSet":
        """Radii m*h (and optionally (m+1/2)h) up to the box size."""
        nmax = max(grid.extent)
        radii = [m * grid.h for m in range(1, nmax + 1)]
        if include_half:
            radii += [(m + 0.5) * grid.h for m in range(1, nmax + 1)]
        return cls(tuple(radii))


def _cumulative(f_abs: np.ndarray, h: float) -> np.ndarray:
    """F at cell boundaries: F[i] = integral of |f| over the first i cells."""
    return np.concatenate([np.zeros((1,) + f_abs.shape[1:]), np.cumsum(f_abs, axis=0)]) * h


def _interp_rows(F: np.ndarray, boundaries: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Evaluate the piecewise-linear F (per column) at pts, clamped at the ends."""
    h = boundaries[1] - boundaries[0]
    pos = (pts - boundaries[0]) / h
    idx = np.clip(np.floor(pos).astype(int), 0, F.shape[0] - 2)
    frac = np.clip(pos - idx, 0.0, 1.0)
    return F[idx] * (1.0 - frac)[:, None] + F[idx + 1] * frac[:, None]


def maximal(f: GridFunction, J: RadiusSet) -> GridFunction:
    """Coordinatewise truncated maximal function sup_{r in J} Avg_{B(.,r)}|f|."""
    J.validate_for(f.grid)
    if f.grid.d == 1:
        h = f.grid.h
        boundaries = f.grid.origin[0] + np.arange(f.grid.ncells + 1) * h
        F = _cumulative(np.abs(f.values), h)
        centers = f.grid.centers()
        out = np.zeros_like(f.values)
        for r in J.radii:
            lo = _interp_rows(F, boundaries, centers - r)
            hi = _interp_rows(F, boundaries, centers + r)
            np.maximum(out, (hi - lo) / (2.0 * r), out=out)
        return GridFunction(f.grid, f.spec, out)
    nx, ny = f.grid.extent
    cube = np.abs(f.values).reshape(nx, ny, -1)
    out = np.zeros_like(cube)
    for r in J.radii:
        m = int(math.floor(r / f.grid.h + 1e-12))
        ax = np.arange(-m, m + 1)
        mask = (ax[:, None] ** 2 + ax[None, :] ** 2) <= (r / f.grid.h) ** 2 + 1e-12
        mask = mask.astype(float)
        avg = fftconvolve(cube, mask[:, :, None], axes=(0, 1), mode="same") / mask.sum()
        np.maximum(out, avg, out=out)
    out = np.clip(out, 0.0, None)
    return GridFunction(f.grid, f.spec, out.reshape(f.grid.ncells, -1))


def hl_operator_ratio(f: GridFunction, J: RadiusSet, p) -> float:
    """||M_J f||_p / ||f||_p: a certified lower bound on the HL constant."""
    den = lp_norm(f, p)
    if den == 0.0:
        raise ValueError("hl_operator_ratio needs a nonzero input")
    return lp_norm(maximal(f, J), p) / den


# ---------------------------------------------------------------------------
# the l^inf(l^2) failure construction


@dataclass(frozen=True)
class CounterexampleInstance:
    """Finite instance of the maximal-function failure in l^inf_{2^N}(l^2_N).

    Coordinates (k, j) carry the indicator of one dyadic interval; supports
    are stored as cell ranges (k, j, c0, c1) and the dense GridFunction is
    only materialized when small enough.
    """

    N: int
    grid: Grid
    spec: LatticeSpec
    supports: np.ndarray  # rows (k, j, c0, c1), c1 exclusive

    @property
    def radii(self) -> RadiusSet:
        """Dyadic default; contains the construction's radii 2^{-j+1}."""
        return RadiusSet.dyadic(self.grid)

    @cached_property
    def f(self) -> GridFunction:
        return self.materialize()

    def materialize(self) -> GridFunction:
        n_coords = (1 << self.N) * self.N
        if self.grid.ncells * n_coords > DENSE_CELL_LIMIT:
            raise MemoryError(
                f"dense materialization of N={self.N} needs "
                f"{self.grid.ncells * n_coords} cells x coords; use the sparse path"
            )
        values = np.zeros((self.grid.ncells, n_coords))
        for k, j, c0, c1 in self.supports:
            values[c0:c1, k * self.N + (j - 1)] = 1.0
        return GridFunction(self.grid, self.spec, values)

    def row_supports(self, k: int) -> np.ndarray:
        rows = self.supports[self.supports[:, 0] == k]
        return rows[:, 1:]


def build_counterexample(N: int) -> CounterexampleInstance:
    """The unit-norm failure witness at scale N on a grid over (0, 2].

    The l^inf index k shifts the dyadic rings by (k-1) 2^{-N}; including the
    shift -2^{-N} makes the rows cover all of (0, 1], so the L^2 norm is
    exactly one at grid resolution h = 2^{-N-2}.
    """
    if not 2 <= N <= COUNTEREXAMPLE_MAX_N:
        raise ValueError(f"N must lie in [2, {COUNTEREXAMPLE_MAX_N}]")
    h = 2.0 ** (-N - 2)
    ncells = 1 << (N + 3)  # covers (0, 2]
    grid = Grid.line(0.0, h, ncells)
    spec = LatticeSpec(((INF, 1 << N), (2, N)))
    unit_cells = 1 << (N + 2)  # cells of (0, 1]
    rows = []
    for k in range(1 << N):
        shift = (k - 1) * 4  # (k-1) 2^{-N} in cells
        for j in range(1, N + 1):
            c0 = shift + (1 << (N + 2 - j))
            c1 = shift + (1 << (N + 3 - j))
            c0, c1 = max(c0, 0), min(c1, unit_cells)
            if c1 > c0:
                rows.append((k, j, c0, c1))
    return CounterexampleInstance(N, grid, spec, np.array(rows, dtype=np.int64))


def _overlap_profiles(lengths: Iterable[int], radii: Sequence[float], h: float,
                      ncells: int) -> dict:
    """best(L)[rel] = max_r (captured mass of a length-L support)/(2r), squared.

    Captured mass depends only on the offset between evaluation point and
    support start, so one profile per support length serves every shift.
    """
    rel = (np.arange(-ncells, ncells + 1) + 0.5) * h  # center minus support start
    profiles = {}
    for L in set(int(L) for L in lengths):
        b = L * h
        best = np.zeros_like(rel)
        for r in radii:
            captured = np.minimum(rel + r, b) - np.maximum(rel - r, 0.0)
            np.maximum(best, np.clip(captured, 0.0, None) / (2.0 * r), out=best)
        profiles[L] = best * best
    return profiles


def counterexample_stats(inst: CounterexampleInstance, J: RadiusSet | None = None) -> dict:
    """Ratio and pointwise data for the failure witness, via the sparse path.

    Returns the squared row-sup S(t) = sup_k sum_j (M f_{k,j}(t))^2 per cell,
    the L^2 ratio, and the minimum of S over the guaranteed window
    (2^{-N} + 2h, 1 - 2h).
    """
    if J is None:
        J = inst.radii
    J.validate_for(inst.grid)
    grid = inst.grid
    h, ncells = grid.h, grid.ncells
    lengths = inst.supports[:, 3] - inst.supports[:, 2]
    profiles = _overlap_profiles(lengths, J.radii, h, ncells)
    S = np.zeros(ncells)
    base = ncells  # profile index of rel offset 0
    for k in range(1 << inst.N):
        rows = inst.row_supports(k)
        if rows.size == 0:
            continue
        R = np.zeros(ncells)
        for j, c0, c1 in rows:
            prof = profiles[int(c1 - c0)]
            R += prof[base - c0 : base - c0 + ncells]
        np.maximum(S, R, out=S)
    # ||f||_2 = 1 exactly: each cell of (0,1] is covered by exactly one ring
    # per covering row, all values in {0, 1}
    norm_m = math.sqrt(float(S.sum()) * h)
    centers = grid.centers()
    lo, hi = 2.0**-inst.N + 2 * h, 1.0 - 2 * h
    window = (centers > lo) & (centers < hi)
    return {
        "N": inst.N,
        "ratio": norm_m,  # ||f||_2 == 1
        "paper_lower_bound": math.sqrt(inst.N) / 4.0 * math.sqrt(1.0 - 2.0**-inst.N),
        "pointwise_min": float(S[window].min()) if window.any() else float("nan"),
        "pointwise_required": inst.N / 16.0,
        "squared_sup": S,
    }
