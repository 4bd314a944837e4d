"""Brute-force reference implementations used as independent cross-checks.

Everything here deliberately avoids the package's convolution plumbing:
matrices are assembled by direct summation over kernel offsets, so agreement
with the operators validates the FFT path, the mass term, and the index-set
bookkeeping all at once.
"""

from __future__ import annotations

import numpy as np

from perfhom.geometry import DomainMask, Label
from perfhom.kernels import SampledKernel
from perfhom.nonlocal_op import BoundaryCondition


def integration_indicator(mask: DomainMask, bc) -> np.ndarray:
    """Nodes feeding the mass term: everywhere for absorbing holes,
    everything but the holes for excluded ones."""
    if BoundaryCondition(bc) == BoundaryCondition.DIRICHLET_HOLES:
        return np.ones(mask.grid.shape, dtype=bool)
    return mask.labels != int(Label.HOLE)


def dense_nonlocal_matrix(mask: DomainMask, kern: SampledKernel, bc):
    """L restricted to the unknown nodes, assembled entry by entry.

    Returns ``(a, unknown_idx)`` with ``a[i, j] = J(x_i - x_j) h^N`` off the
    diagonal and the mass sum subtracted on it. Offsets leaving the grid box
    are skipped; the operators require a margin wide enough that this never
    happens for material nodes, which is asserted here.
    """
    grid = mask.grid
    integration = integration_indicator(mask, bc)
    unknown_idx = np.argwhere(mask.labels == int(Label.OMEGA_EPS))
    pos = {tuple(ix): a for a, ix in enumerate(unknown_idx)}
    n = len(unknown_idx)
    a_mat = np.zeros((n, n))
    cell = grid.cell_volume
    for a, ix in enumerate(unknown_idx):
        mass = 0.0
        for off, w in zip(kern.offsets, kern.weights):
            jx = tuple(int(c) for c in ix + off)
            assert all(0 <= j < e for j, e in zip(jx, grid.extents)), "margin too small"
            if integration[jx]:
                mass += w * cell
            b = pos.get(jx)
            if b is not None:
                a_mat[a, b] += w * cell
        a_mat[a, a] -= mass
    return a_mat, unknown_idx


def dense_limit_matrix(grid, active: np.ndarray, kern: SampledKernel, c: np.ndarray):
    """The coefficient-divided limit operator ``u*conv(J,1) - conv(J,u) + c*u``
    on the active nodes, assembled by direct summation (integration runs over
    the whole grid box)."""
    active_idx = np.argwhere(active)
    pos = {tuple(ix): a for a, ix in enumerate(active_idx)}
    n = len(active_idx)
    a_mat = np.zeros((n, n))
    cell = grid.cell_volume
    for a, ix in enumerate(active_idx):
        mass = 0.0
        for off, w in zip(kern.offsets, kern.weights):
            jx = tuple(int(c2) for c2 in ix + off)
            assert all(0 <= j < e for j, e in zip(jx, grid.extents)), "margin too small"
            mass += w * cell
            b = pos.get(jx)
            if b is not None:
                a_mat[a, b] -= w * cell
        a_mat[a, a] += mass + float(c[tuple(ix)])
    return a_mat, active_idx


def apply_to_basis(apply_fn, n: int) -> np.ndarray:
    """Column-by-column matrix of a linear map given as a callable."""
    cols = []
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        cols.append(apply_fn(e))
    return np.stack(cols, axis=1)
