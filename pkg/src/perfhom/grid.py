"""Uniform lattices, scalar fields on them, and the discrete L2 geometry.

Everything downstream (masks, kernels, operators) lives on these grids.
Integrals are midpoint sums: a field value is the sample at a cell center and
carries the cell volume ``spacing**dim`` in every inner product.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np


class GridMismatchError(ValueError):
    """Two fields do not live on the same grid."""


@dataclass(frozen=True)
class Grid:
    """Uniform N-dimensional lattice of cell-centered nodes.

    Node ``k`` (a multi-index) sits at ``origin + (k + 1/2) * spacing``.
    Cell-centered nodes keep lattice points off geometry boundaries unless a
    caller deliberately aligns them (see :func:`make_grid` with
    ``align="faces"``).
    """

    dim: int
    origin: tuple[float, ...]
    spacing: float
    extents: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "origin", tuple(float(c) for c in self.origin))
        object.__setattr__(self, "extents", tuple(int(n) for n in self.extents))
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        if len(self.origin) != self.dim:
            raise ValueError("origin must have one coordinate per axis")
        if len(self.extents) != self.dim:
            raise ValueError("extents must have one entry per axis")
        if not (float(self.spacing) > 0.0):
            raise ValueError(f"spacing must be positive, got {self.spacing}")
        if any(n < 2 for n in self.extents):
            raise ValueError(f"every axis needs >= 2 nodes, got {self.extents}")

    @property
    def shape(self) -> tuple[int, ...]:
        return self.extents

    @property
    def num_nodes(self) -> int:
        return int(np.prod(self.extents))

    @property
    def cell_volume(self) -> float:
        return float(self.spacing) ** self.dim

    def axis_coords(self, axis: int) -> np.ndarray:
        """Node-center coordinates along one axis."""
        n = self.extents[axis]
        return self.origin[axis] + (np.arange(n) + 0.5) * self.spacing

    def coordinates(self) -> list[np.ndarray]:
        """Meshgrid (indexing='ij') of node-center coordinates, one array per axis."""
        return list(np.meshgrid(*[self.axis_coords(a) for a in range(self.dim)], indexing="ij"))


def make_grid(
    lo: Sequence[float],
    hi: Sequence[float],
    spacing: float,
    margin: float = 0.0,
    align: str = "centers",
) -> Grid:
    """Build a grid whose box covers ``[lo, hi]`` plus ``margin`` on every side.

    align="centers"
        Node centers at ``lo + (j + 1/2) * spacing``; no node lands on a box
        face when ``spacing`` divides the box. This is the default for masks
        and nonlocal operators.
    align="faces"
        Node centers at ``lo + j * spacing`` including both endpoints. Used by
        the local finite-difference solvers, where Dirichlet values imposed at
        nodes must sit exactly on the boundary for second-order accuracy.
    """
    lo = tuple(float(c) for c in lo)
    hi = tuple(float(c) for c in hi)
    if len(lo) != len(hi):
        raise ValueError("lo and hi must have the same length")
    if any(b <= a for a, b in zip(lo, hi)):
        raise ValueError("box must have positive side lengths")
    h = float(spacing)
    if h <= 0:
        raise ValueError("spacing must be positive")
    if margin < 0:
        raise ValueError("margin must be nonnegative")
    m = int(math.ceil(margin / h - 1e-12))
    origin = []
    extents = []
    for a, b in zip(lo, hi):
        n_box = int(math.ceil((b - a) / h - 1e-9))
        if align == "centers":
            origin.append(a - m * h)
            extents.append(n_box + 2 * m)
        elif align == "faces":
            origin.append(a - (m + 0.5) * h)
            extents.append(n_box + 1 + 2 * m)
        else:
            raise ValueError(f"unknown align {align!r}")
    return Grid(dim=len(lo), origin=tuple(origin), spacing=h, extents=tuple(extents))


@dataclass(frozen=True)
class ScalarField:
    """Node values over a grid's full bounding box.

    Values are stored everywhere, including outside any domain of interest;
    extension by zero is then a masking operation, not a reshape.
    """

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise GridMismatchError(
                f"values shape {v.shape} does not match grid extents {self.grid.shape}"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains non-finite values")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def with_values(self, values: np.ndarray) -> "ScalarField":
        return ScalarField(self.grid, values)


def zeros(grid: Grid) -> ScalarField:
    return ScalarField(grid, np.zeros(grid.shape))


def field_from_function(grid: Grid, fn: Callable[..., np.ndarray]) -> ScalarField:
    """Sample ``fn(*coords)`` at the node centers."""
    vals = np.asarray(fn(*grid.coordinates()), dtype=float)
    vals = np.broadcast_to(vals, grid.shape)
    return ScalarField(grid, np.array(vals))


def _check_same_grid(a: ScalarField, b: ScalarField) -> None:
    if a.grid != b.grid:
        raise GridMismatchError("fields live on different grids")


def inner_product(a: ScalarField, b: ScalarField) -> float:
    """Midpoint-rule L2 pairing: ``spacing**dim * sum(a*b)``."""
    _check_same_grid(a, b)
    return float(a.grid.cell_volume * np.sum(a.values * b.values))


def l2_norm(a: ScalarField) -> float:
    return math.sqrt(max(inner_product(a, a), 0.0))


def restrict(a: ScalarField, mask) -> ScalarField:
    """Extension-by-zero restriction: zero out nodes where ``mask`` is False.

    ``mask`` is a boolean array over the grid or a predicate evaluated on the
    node-center coordinate arrays.
    """
    if callable(mask):
        keep = np.asarray(mask(*a.grid.coordinates()), dtype=bool)
    else:
        keep = np.asarray(mask, dtype=bool)
    if keep.shape != a.grid.shape:
        raise GridMismatchError(
            f"mask shape {keep.shape} does not match grid extents {a.grid.shape}"
        )
    return ScalarField(a.grid, np.where(keep, a.values, 0.0))


def field_to_text(field: ScalarField) -> str:
    """Plain-text dump: header lines, then node values row by row (last axis
    varies within a line), round-trip exact via repr."""
    g = field.grid
    lines = [
        "perfhom-field v1",
        f"dim {g.dim}",
        "extents " + " ".join(str(n) for n in g.extents),
        f"spacing {g.spacing!r}",
        "origin " + " ".join(repr(c) for c in g.origin),
    ]
    rows = field.values.reshape(-1, g.extents[-1])
    for row in rows:
        lines.append(" ".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def field_from_text(text: str) -> ScalarField:
    lines = text.splitlines()
    if not lines or lines[0].strip() != "perfhom-field v1":
        raise ValueError("not a perfhom field dump")
    dim = int(lines[1].split()[1])
    extents = tuple(int(t) for t in lines[2].split()[1:])
    spacing = float(lines[3].split()[1])
    origin = tuple(float(t) for t in lines[4].split()[1:])
    grid = Grid(dim=dim, origin=origin, spacing=spacing, extents=extents)
    data = [float(t) for line in lines[5:] for t in line.split()]
    values = np.array(data).reshape(extents)
    return ScalarField(grid, values)
