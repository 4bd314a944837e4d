"""Local (second-order PDE) reference solvers and cell problems.

These are the classical counterparts the nonlocal solutions are compared
against: constant-coefficient diffusion ``sum_ij q_ij d_i d_j v - c v = f``
with Dirichlet outer boundary, holes treated as Dirichlet (v = 0) or Neumann
(zero flux, by mirror ghost values), and the periodic cell problems whose
energies produce the homogenized tensor q.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .geometry import DomainMask, GeometryError, Label
from .grid import Grid, ScalarField
from .solvers import SolverError, conjugate_gradient, default_max_iterations


class HoleBC(str, Enum):
    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"


@dataclass(frozen=True)
class LocalProblem:
    """Diffusion problem on the material nodes of a mask.

    The outer boundary (EXTERIOR nodes) always carries v = 0; ``bc_holes``
    selects the behavior at HOLE nodes. ``q`` is the constant diffusion
    tensor (identity when None) and ``c >= 0`` a constant absorption.
    """

    mask: DomainMask
    bc_holes: HoleBC = HoleBC.DIRICHLET
    c: float = 0.0
    q: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "bc_holes", HoleBC(self.bc_holes))
        if self.c < 0:
            raise ValueError(f"absorption must be nonnegative, got {self.c}")
        if self.q is not None:
            q = np.asarray(self.q, dtype=float)
            n = self.mask.grid.dim
            if q.shape != (n, n):
                raise ValueError(f"q must be {n}x{n}")
            if not np.allclose(q, q.T, atol=1e-12):
                raise ValueError("q must be symmetric")
            if np.linalg.eigvalsh(q).min() <= 0:
                raise ValueError("q must be positive definite")
            q = q.copy()
            q.setflags(write=False)
            object.__setattr__(self, "q", q)


@dataclass
class LocalSolution:
    v: ScalarField
    iterations: int
    residual: float


def _neighbor_tables(mask: DomainMask, bc_holes: HoleBC):
    """Per axis and direction: which unknown nodes have an unknown neighbor,
    and which arms are dropped (Neumann mirror at holes)."""
    labels = mask.labels
    unknown = labels == int(Label.OMEGA_EPS)
    dim = mask.grid.dim
    for axis in range(dim):
        first = np.take(unknown, [0, -1], axis=axis)
        if np.any(first):
            raise GeometryError("material nodes touch the grid box edge; enlarge the box")
    tables = []
    for axis in range(dim):
        for shift in (+1, -1):
            nb_labels = np.roll(labels, -shift, axis=axis)
            nb_unknown = unknown & (nb_labels == int(Label.OMEGA_EPS))
            nb_hole = unknown & (nb_labels == int(Label.HOLE))
            # Dirichlet arms (neighbor value 0) at exterior always, and at
            # holes unless they mirror
            if bc_holes == HoleBC.NEUMANN:
                active = unknown & ~nb_hole
            else:
                active = unknown
            tables.append((axis, shift, nb_unknown, active))
    return unknown, tables


def _apply_diffusion(values, unknown, tables, q_diag, q_off, h, dim):
    """sum_ij q_ij d_i d_j v on the unknown set (zero elsewhere)."""
    v = np.where(unknown, values, 0.0)
    out = np.zeros_like(v)
    inv_h2 = 1.0 / (h * h)
    for axis, shift, nb_unknown, active in tables:
        nb_vals = np.where(nb_unknown, np.roll(v, -shift, axis=axis), 0.0)
        arm = np.where(active, nb_vals - v, 0.0)
        out += q_diag[axis] * arm * inv_h2
    if q_off is not None:
        for (i, j), qij in q_off.items():
            # centered cross difference; out-of-domain diagonal neighbors read 0
            vpp = np.roll(np.roll(v, -1, axis=i), -1, axis=j)
            vpm = np.roll(np.roll(v, -1, axis=i), +1, axis=j)
            vmp = np.roll(np.roll(v, +1, axis=i), -1, axis=j)
            vmm = np.roll(np.roll(v, +1, axis=i), +1, axis=j)
            out += 2.0 * qij * (vpp - vpm - vmp + vmm) / (4.0 * h * h)
    return np.where(unknown, out, 0.0)


def solve_local(
    problem: LocalProblem,
    f: ScalarField,
    tol: float = 1e-10,
    max_iterations: int | None = None,
) -> LocalSolution:
    """Second-order centered finite differences for the local problem.

    Per-axis arms: an OMEGA_EPS neighbor contributes ``v_nb - v``, an
    EXTERIOR neighbor (and a HOLE neighbor under Dirichlet) contributes
    ``0 - v``, and a HOLE neighbor under Neumann contributes nothing (the
    ghost value mirrors ``v``, so the flux through the face vanishes). The
    resulting operator is symmetric, and -L + c is positive definite.
    """
    grid = problem.mask.grid
    if f.grid != grid:
        raise ValueError("field grid does not match problem grid")
    dim = grid.dim
    q = problem.q if problem.q is not None else np.eye(dim)
    q_diag = np.diag(q).copy()
    q_off = {}
    for i in range(dim):
        for j in range(i + 1, dim):
            if q[i, j] != 0.0:
                q_off[(i, j)] = q[i, j]
    if not q_off:
        q_off = None

    unknown, tables = _neighbor_tables(problem.mask, problem.bc_holes)
    n = int(np.sum(unknown))
    if n == 0:
        raise SolverError("no unknowns: the material set is empty")
    h = grid.spacing
    c = problem.c

    def apply_a(x: np.ndarray) -> np.ndarray:
        full = np.zeros(grid.shape)
        full[unknown] = x
        lv = _apply_diffusion(full, unknown, tables, q_diag, q_off, h, dim)
        return (-lv + c * full)[unknown]

    b = f.values[unknown]
    if max_iterations is None:
        max_iterations = default_max_iterations(n)
    # solve (-L + c) v = -f so that L v - c v = f
    res = conjugate_gradient(apply_a, -b, tol=tol, max_iterations=max_iterations)
    if not res.converged:
        raise SolverError(
            f"local solve stalled at relative residual {res.relative_residual:.3e}",
            residual=res.relative_residual,
            iterations=res.iterations,
        )
    full = np.zeros(grid.shape)
    full[unknown] = res.x
    return LocalSolution(ScalarField(grid, full), res.iterations, res.relative_residual)


def mu_constant(dim: int, c0: float) -> float:
    """Capacity-type absorption constant for critically scaled spherical holes.

    mu = S_N (N - 2) / 2^N * C0^(N-2) with S_N the unit-sphere surface area;
    defined for N >= 3 only (the planar case needs a logarithmic scaling).
    """
    if dim < 3:
        raise ValueError("the critical absorption constant needs dimension >= 3")
    if c0 <= 0:
        raise ValueError("hole radius factor must be positive")
    s_n = 2.0 * math.pi ** (dim / 2.0) / math.gamma(dim / 2.0)
    return s_n * (dim - 2) / 2.0**dim * c0 ** (dim - 2)


@dataclass(frozen=True)
class CellGeometry:
    """Reference cell (0, l_1) x ... x (0, l_N) with an optional centered ball hole."""

    lengths: tuple[float, ...]
    hole_radius: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "lengths", tuple(float(c) for c in self.lengths))
        if any(l <= 0 for l in self.lengths):
            raise GeometryError("cell lengths must be positive")
        if self.hole_radius < 0:
            raise GeometryError("hole radius must be nonnegative")
        if self.hole_radius >= min(self.lengths) / 2.0:
            raise GeometryError("hole touches the cell boundary")

    @property
    def dim(self) -> int:
        return len(self.lengths)

    def volume(self) -> float:
        return math.prod(self.lengths)


@dataclass
class CellSolution:
    """Correctors and homogenized tensor of the periodic cell problem."""

    grid: Grid
    material: np.ndarray
    correctors: list[ScalarField]
    q: np.ndarray
    iterations: tuple[int, ...]
    material_fraction: float


def homogenized_coefficients(
    cell: CellGeometry, spacing: float, tol: float = 1e-10
) -> CellSolution:
    """Solve the periodic cell problems and assemble the homogenized tensor.

    Weak form: find periodic X^i with zero mean over the material such that
    ``int_{Q\\B} grad X^i . grad phi = int_{Q\\B} d_i phi`` for all periodic
    phi; the hole's zero-flux condition is natural and needs no boundary
    data. Then ``q_ij = (|Q\\B| delta_ij - int d_j X^i) / |Q|``, which is
    exactly the identity when there is no hole, and symmetric because the
    correction term is the energy pairing of two correctors.
    """
    h = float(spacing)
    if h <= 0:
        raise ValueError("spacing must be positive")
    dim = cell.dim
    extents = tuple(int(round(l / h)) for l in cell.lengths)
    if any(abs(n * h - l) > 1e-9 * l for n, l in zip(extents, cell.lengths)):
        raise ValueError("spacing must divide the cell lengths")
    if any(n < 4 for n in extents):
        raise ValueError("cell grid too coarse")
    grid = Grid(dim=dim, origin=(0.0,) * dim, spacing=h, extents=extents)

    if cell.hole_radius > 0.0:
        coords = grid.coordinates()
        center = [l / 2.0 for l in cell.lengths]
        r2 = sum((x - c) ** 2 for x, c in zip(coords, center))
        material = r2 > cell.hole_radius**2
    else:
        material = np.ones(extents, dtype=bool)
    n_mat = int(np.sum(material))
    if n_mat == 0:
        raise GeometryError("the hole fills the whole cell")

    mat = material.astype(float)
    # faces between material cell k and k+1 along each axis, with periodic wrap
    face = [mat * np.roll(mat, -1, axis=a) for a in range(dim)]
    cell_vol = grid.cell_volume
    face_area = h ** (dim - 1)
    volume = cell.volume()

    def apply_a(x: np.ndarray) -> np.ndarray:
        full = np.zeros(extents)
        full[material] = x
        out = np.zeros(extents)
        for a in range(dim):
            d = (full - np.roll(full, -1, axis=a)) * face[a]
            out += d - np.roll(d, 1, axis=a)
        out *= h ** (dim - 2)
        res = out[material]
        # project out the constant gauge so CG stays on the mean-zero subspace
        return res - res.mean()

    correctors = []
    iterations = []
    q = np.zeros((dim, dim))
    grad_int = np.zeros((dim, dim))
    for i in range(dim):
        b_full = np.zeros(extents)
        w = face[i] * face_area
        b_full += np.roll(w, 1, axis=i)
        b_full -= w
        b = b_full[material]
        b = b - b.mean()
        res = conjugate_gradient(
            apply_a, b, tol=tol, max_iterations=default_max_iterations(n_mat) * 2
        )
        if not res.converged:
            raise SolverError(
                f"cell problem {i} stalled at relative residual {res.relative_residual:.3e}",
                residual=res.relative_residual,
                iterations=res.iterations,
            )
        x = res.x - res.x.mean()
        full = np.zeros(extents)
        full[material] = x
        correctors.append(ScalarField(grid, full))
        iterations.append(res.iterations)
        for j in range(dim):
            d = (np.roll(full, -1, axis=j) - full) * face[j]
            grad_int[i, j] = float(np.sum(d)) * face_area

    mat_volume = n_mat * cell_vol
    for i in range(dim):
        for j in range(dim):
            q[i, j] = (mat_volume * (1.0 if i == j else 0.0) - grad_int[i, j]) / volume

    return CellSolution(
        grid=grid,
        material=material,
        correctors=correctors,
        q=q,
        iterations=tuple(iterations),
        material_fraction=mat_volume / volume,
    )
