"""Matrix-free conjugate gradients and a smallest-eigenvalue iteration.

All operators in this package are symmetric positive semidefinite on their
unknown sets, so plain CG is the workhorse. The eigenvalue routine is inverse
iteration driven by CG; a CG breakdown direction (curvature numerically zero)
is exactly a near-null vector, which inverse iteration wants anyway, so
breakdowns are harvested rather than treated as errors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np


class SolverError(RuntimeError):
    """Iteration failed to reach the requested tolerance."""

    def __init__(self, message: str, residual: float | None = None, iterations: int | None = None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


def default_max_iterations(n_unknowns: int) -> int:
    return int(20 * math.sqrt(max(n_unknowns, 1))) + 200


@dataclass
class CGResult:
    x: np.ndarray
    iterations: int
    relative_residual: float
    converged: bool
    breakdown_direction: np.ndarray | None = None


def conjugate_gradient(
    apply_a: Callable[[np.ndarray], np.ndarray],
    b: np.ndarray,
    tol: float = 1e-8,
    max_iterations: int | None = None,
    x0: np.ndarray | None = None,
) -> CGResult:
    """CG for SPD systems, matrix-free. Stops at ||b - A x|| <= tol * ||b||."""
    n = b.shape[0]
    if max_iterations is None:
        max_iterations = default_max_iterations(n)
    x = np.zeros_like(b) if x0 is None else x0.copy()
    r = b - apply_a(x) if x0 is not None else b.copy()
    norm_b = float(np.linalg.norm(b))
    if norm_b == 0.0:
        return CGResult(np.zeros_like(b), 0, 0.0, True)
    rr = float(r @ r)
    if math.sqrt(rr) <= tol * norm_b:
        return CGResult(x, 0, math.sqrt(rr) / norm_b, True)
    p = r.copy()
    tiny = np.finfo(float).eps
    for it in range(1, max_iterations + 1):
        ap = apply_a(p)
        pap = float(p @ ap)
        if pap <= tiny * float(p @ p):
            # zero curvature: p is (numerically) a null direction of A
            return CGResult(x, it, math.sqrt(rr) / norm_b, False, breakdown_direction=p)
        alpha = rr / pap
        x += alpha * p
        r -= alpha * ap
        rr_new = float(r @ r)
        if math.sqrt(rr_new) <= tol * norm_b:
            return CGResult(x, it, math.sqrt(rr_new) / norm_b, True)
        p = r + (rr_new / rr) * p
        rr = rr_new
    return CGResult(x, max_iterations, math.sqrt(rr) / norm_b, False)


@dataclass
class EigenResult:
    eigenvalue: float
    eigenvector: np.ndarray
    residual: float
    iterations: int
    converged: bool
    seed: int


def smallest_eigenpair(
    apply_a: Callable[[np.ndarray], np.ndarray],
    n: int,
    tol: float = 1e-8,
    seed: int = 1234,
    max_outer: int = 200,
    inner_tol: float = 1e-3,
    inner_max_iterations: int | None = None,
) -> EigenResult:
    """Smallest eigenpair of an SPD-or-PSD operator by inverse iteration.

    The residual reported is ||A v - lambda v|| for the unit vector v. A
    singular operator is a legitimate outcome (eigenvalue ~ 0), reached either
    through CG breakdown directions or through the blow-up of the inverse
    iterates along the null space.
    """
    if n < 1:
        raise SolverError("operator has no unknowns")
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    lam = float("nan")
    resid = float("inf")
    if inner_max_iterations is None:
        inner_max_iterations = default_max_iterations(n)
    for it in range(1, max_outer + 1):
        av = apply_a(v)
        lam = float(v @ av)
        resid = float(np.linalg.norm(av - lam * v))
        if resid <= tol:
            return EigenResult(lam, v, resid, it, True, seed)
        # Inexact inverse iteration: the inner solves must tighten with the
        # eigen-residual, or their error floor stalls the outer loop.
        tol_inner = max(1e-13, min(inner_tol, 0.05 * resid))
        x0 = v / lam if lam > tol else None
        sol = conjugate_gradient(
            apply_a, v, tol=tol_inner, max_iterations=inner_max_iterations, x0=x0
        )
        if sol.breakdown_direction is not None:
            w = sol.breakdown_direction
        else:
            w = sol.x
        norm_w = float(np.linalg.norm(w))
        if not np.isfinite(norm_w) or norm_w == 0.0:
            break
        v = w / norm_w
    av = apply_a(v)
    lam = float(v @ av)
    resid = float(np.linalg.norm(av - lam * v))
    return EigenResult(lam, v, resid, max_outer, resid <= tol, seed)
