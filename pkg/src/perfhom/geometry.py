"""Perforated-domain geometry: node labels, hole generators, weak-star limits.

A mask labels every node of a grid as EXTERIOR (outside the working domain),
OMEGA_EPS (material), or HOLE (removed from the material). Membership is
decided by the node center; no partial-volume weighting. Generators cover
periodic translated holes, the oscillating-boundary example, and the annulus
example with a disconnecting hole.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum, IntEnum

import numpy as np

from .grid import Grid, GridMismatchError, ScalarField
from .kernels import unit_ball_volume


class GeometryError(ValueError):
    """Inconsistent or unresolvable perforation geometry."""


class Label(IntEnum):
    EXTERIOR = 0
    OMEGA_EPS = 1
    HOLE = 2


_LABEL_CHARS = {Label.EXTERIOR: ".", Label.OMEGA_EPS: "o", Label.HOLE: "#"}
_CHAR_LABELS = {c: l for l, c in _LABEL_CHARS.items()}


@dataclass(frozen=True)
class DomainMask:
    """Node labels over a grid, plus generator warnings (e.g. unresolved holes)."""

    grid: Grid
    labels: np.ndarray
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        lab = np.asarray(self.labels)
        if lab.shape != self.grid.shape:
            raise GridMismatchError(
                f"labels shape {lab.shape} does not match grid extents {self.grid.shape}"
            )
        if not np.all(np.isin(lab, (int(Label.EXTERIOR), int(Label.OMEGA_EPS), int(Label.HOLE)))):
            raise GeometryError("labels must be EXTERIOR, OMEGA_EPS, or HOLE")
        lab = lab.astype(np.uint8)
        lab.setflags(write=False)
        object.__setattr__(self, "labels", lab)

    def indicator(self, label: Label) -> ScalarField:
        return ScalarField(self.grid, (self.labels == int(label)).astype(float))

    def chi(self) -> ScalarField:
        """Indicator of the material set (the perforated domain)."""
        return self.indicator(Label.OMEGA_EPS)

    def omega_indicator(self) -> ScalarField:
        return ScalarField(self.grid, (self.labels != int(Label.EXTERIOR)).astype(float))

    def count(self, label: Label) -> int:
        return int(np.sum(self.labels == int(label)))

    def material_volume(self) -> float:
        return self.count(Label.OMEGA_EPS) * self.grid.cell_volume

    def omega_volume(self) -> float:
        return (self.count(Label.OMEGA_EPS) + self.count(Label.HOLE)) * self.grid.cell_volume


class HoleShape(str, Enum):
    NONE = "none"
    BALL = "ball"
    BOX = "box"


@dataclass(frozen=True)
class PerforationSpec:
    """Periodic perforation of a box domain.

    The reference cell is ``Q = (0, l_1) x ... x (0, l_N)``; hole images are
    the translates ``eps * (k*l + eps**(gamma-1) * A)`` over integer vectors k,
    intersected with the open box ``(omega_lo, omega_hi)``. BALL holes have
    radius ``radius_factor * eps**gamma`` centered on the lattice
    ``eps * k * l`` (anchoring cells at the origin); BOX holes translate the
    sub-box ``[box_lo, box_hi] <= Q``.

    ``interior_holes_only`` removes only hole images strictly contained in the
    box, the convention for lattices of balls near a critical radius.
    """

    omega_lo: tuple[float, ...]
    omega_hi: tuple[float, ...]
    cell_lengths: tuple[float, ...]
    hole_shape: HoleShape
    epsilon: float
    gamma: float = 1.0
    radius_factor: float = 0.0
    box_lo: tuple[float, ...] | None = None
    box_hi: tuple[float, ...] | None = None
    interior_holes_only: bool = False

    def __post_init__(self):
        object.__setattr__(self, "hole_shape", HoleShape(self.hole_shape))
        object.__setattr__(self, "omega_lo", tuple(float(c) for c in self.omega_lo))
        object.__setattr__(self, "omega_hi", tuple(float(c) for c in self.omega_hi))
        object.__setattr__(self, "cell_lengths", tuple(float(c) for c in self.cell_lengths))
        dim = len(self.omega_lo)
        if len(self.omega_hi) != dim or len(self.cell_lengths) != dim:
            raise GeometryError("omega_lo, omega_hi, cell_lengths must share a length")
        if any(b <= a for a, b in zip(self.omega_lo, self.omega_hi)):
            raise GeometryError("omega box must have positive side lengths")
        if any(l <= 0 for l in self.cell_lengths):
            raise GeometryError("cell lengths must be positive")
        if not (0.0 < self.epsilon <= 1.0):
            raise GeometryError(f"epsilon must lie in (0, 1], got {self.epsilon}")
        if self.gamma <= 0:
            raise GeometryError(f"gamma must be positive, got {self.gamma}")
        if self.hole_shape == HoleShape.BALL:
            if self.radius_factor <= 0:
                raise GeometryError("BALL holes need a positive radius factor")
            if self.gamma == 1.0 and self.radius_factor >= min(self.cell_lengths) / 2.0:
                raise GeometryError(
                    "hole radius reaches half the cell: neighboring holes would merge"
                )
        if self.hole_shape == HoleShape.BOX:
            if self.box_lo is None or self.box_hi is None:
                raise GeometryError("BOX holes need box_lo and box_hi")
            object.__setattr__(self, "box_lo", tuple(float(c) for c in self.box_lo))
            object.__setattr__(self, "box_hi", tuple(float(c) for c in self.box_hi))
            if len(self.box_lo) != dim or len(self.box_hi) != dim:
                raise GeometryError("box_lo/box_hi must have one entry per axis")
            for a, b, l in zip(self.box_lo, self.box_hi, self.cell_lengths):
                if not (0.0 <= a < b <= l):
                    raise GeometryError("hole box must be a nonempty sub-box of the cell")

    @property
    def dim(self) -> int:
        return len(self.omega_lo)

    def hole_volume_fraction(self) -> float:
        """|A| / |Q| of the unscaled hole within its cell."""
        cell = math.prod(self.cell_lengths)
        if self.hole_shape == HoleShape.NONE:
            return 0.0
        if self.hole_shape == HoleShape.BALL:
            return unit_ball_volume(self.dim) * self.radius_factor**self.dim / cell
        return math.prod(b - a for a, b in zip(self.box_lo, self.box_hi)) / cell


def _omega_box_membership(spec_lo, spec_hi, coords):
    # Strict interior test with a rounding guard: faces-aligned grids place
    # nodes on the box faces only up to accumulated ulps, and a face node must
    # never be labeled material.
    inside = np.ones(coords[0].shape, dtype=bool)
    for x, a, b in zip(coords, spec_lo, spec_hi):
        tol = 1e-12 * max(1.0, abs(a), abs(b))
        inside &= (x > a + tol) & (x < b - tol)
    return inside


def build_periodic_mask(spec: PerforationSpec, grid: Grid) -> DomainMask:
    """Label grid nodes for a periodic perforation.

    Nodes outside the open box are EXTERIOR; box nodes inside a hole image are
    HOLE; the rest are OMEGA_EPS. Holes narrower than two grid cells are
    reported in the mask warnings rather than rejected: an unresolved mask is
    still a valid (if useless) discrete geometry.
    """
    if grid.dim != spec.dim:
        raise GeometryError(f"grid dim {grid.dim} != spec dim {spec.dim}")
    coords = grid.coordinates()
    eps = spec.epsilon
    in_omega = _omega_box_membership(spec.omega_lo, spec.omega_hi, coords)

    warnings = []
    in_hole = np.zeros(grid.shape, dtype=bool)
    if spec.hole_shape == HoleShape.BALL:
        radius = spec.radius_factor * eps**spec.gamma
        if radius < grid.spacing:
            warnings.append(
                f"hole diameter {2 * radius:g} below two grid cells (h={grid.spacing:g}); "
                "holes are unresolved"
            )
        # product lattice: the nearest hole center rounds each axis separately
        centers = []
        dist2 = np.zeros(grid.shape)
        for x, l in zip(coords, spec.cell_lengths):
            period = eps * l
            nearest = period * np.round(x / period)
            centers.append(nearest)
            dist2 += (x - nearest) ** 2
        in_hole = dist2 <= radius**2
        if spec.interior_holes_only:
            contained = np.ones(grid.shape, dtype=bool)
            for c, a, b in zip(centers, spec.omega_lo, spec.omega_hi):
                contained &= (c - radius > a) & (c + radius < b)
            in_hole &= contained
    elif spec.hole_shape == HoleShape.BOX:
        scale = eps**spec.gamma
        widths = [scale * (b - a) for a, b in zip(spec.box_lo, spec.box_hi)]
        if min(widths) < 2 * grid.spacing:
            warnings.append(
                f"hole width {min(widths):g} below two grid cells (h={grid.spacing:g}); "
                "holes are unresolved"
            )
        in_hole = np.ones(grid.shape, dtype=bool)
        ks = []
        for x, l, a, b in zip(coords, spec.cell_lengths, spec.box_lo, spec.box_hi):
            period = eps * l
            upper = np.floor((x - scale * a) / period + 1e-12)
            lower = np.ceil((x - scale * b) / period - 1e-12)
            in_hole &= upper >= lower
            ks.append(upper)
        if spec.interior_holes_only:
            contained = np.ones(grid.shape, dtype=bool)
            for k, l, a, b, lo, hi in zip(
                ks, spec.cell_lengths, spec.box_lo, spec.box_hi, spec.omega_lo, spec.omega_hi
            ):
                inst_lo = eps * l * k + scale * a
                inst_hi = eps * l * k + scale * b
                contained &= (inst_lo > lo) & (inst_hi < hi)
            in_hole &= contained

    labels = np.full(grid.shape, int(Label.EXTERIOR), dtype=np.uint8)
    labels[in_omega & ~in_hole] = int(Label.OMEGA_EPS)
    labels[in_omega & in_hole] = int(Label.HOLE)
    return DomainMask(grid, labels, tuple(warnings))


# The oscillating-boundary example lives on this fixed box.
OSCILLATING_OMEGA_LO = (0.0, -1.0)
OSCILLATING_OMEGA_HI = (1.0, 1.0)


def build_oscillating_mask(epsilon: float, grid: Grid) -> DomainMask:
    """Domain below the oscillating profile y = (1 + sin(x/eps))/2 in (0,1) x (-1,1).

    The removed set is the part of the box above the profile; it oscillates
    faster as eps shrinks and its indicator converges only weakly.
    """
    if grid.dim != 2:
        raise GeometryError("oscillating example is two-dimensional")
    if epsilon <= 0:
        raise GeometryError("epsilon must be positive")
    x, y = grid.coordinates()
    in_omega = _omega_box_membership(OSCILLATING_OMEGA_LO, OSCILLATING_OMEGA_HI, (x, y))
    below = y < 0.5 * (1.0 + np.sin(x / epsilon))
    labels = np.full(grid.shape, int(Label.EXTERIOR), dtype=np.uint8)
    labels[in_omega & below] = int(Label.OMEGA_EPS)
    labels[in_omega & ~below] = int(Label.HOLE)
    return DomainMask(grid, labels)


def build_annulus_mask(grid: Grid, r_inner: float = 3.0, r_outer: float = 6.0) -> DomainMask:
    """Ball domain of radius ``r_outer`` with the annulus beyond ``r_inner`` removed.

    The material is the inner ball; when the annulus is wider than the kernel
    support, no material node can reach the exterior and the Neumann
    eigenvalue degenerates to zero.
    """
    if not (0 < r_inner < r_outer):
        raise GeometryError("need 0 < r_inner < r_outer")
    coords = grid.coordinates()
    r2 = sum(x**2 for x in coords)
    labels = np.full(grid.shape, int(Label.EXTERIOR), dtype=np.uint8)
    labels[r2 < r_outer**2] = int(Label.HOLE)
    labels[r2 < r_inner**2] = int(Label.OMEGA_EPS)
    return DomainMask(grid, labels)


def example2_strips_spec(epsilon: float) -> PerforationSpec:
    """Periodic horizontal strips of thickness eps/3 in (-1,1)^2 (material fraction 2/3)."""
    return PerforationSpec(
        omega_lo=(-1.0, -1.0),
        omega_hi=(1.0, 1.0),
        cell_lengths=(1.0, 1.0),
        hole_shape=HoleShape.BOX,
        epsilon=epsilon,
        gamma=1.0,
        box_lo=(0.0, 1.0 / 3.0),
        box_hi=(1.0, 2.0 / 3.0),
    )


class Regime(str, Enum):
    FULL = "full"           # holes vanish: limit indicator is chi_Omega
    FRACTION = "fraction"   # constant material fraction on Omega
    VANISHING = "vanishing"  # holes fill Omega: limit is zero
    CUSTOM = "custom"       # spatially varying limit


@dataclass(frozen=True)
class WeakLimit:
    """Weak-star limit of the material indicators chi_eps.

    ``field`` holds the limit values on the grid (zero outside Omega);
    ``constant`` is set for the FRACTION regime.
    """

    field: ScalarField
    regime: Regime
    constant: float | None = None


def analytic_weak_limit(source, grid: Grid) -> WeakLimit:
    """Closed-form weak-star limit for supported geometries.

    Periodic perforations: gamma > 1 gives the full indicator of Omega,
    gamma = 1 the constant material fraction 1 - |A|/|Q| on Omega, gamma < 1
    the zero field. The oscillating example (pass ``"oscillating"``) has the
    explicit layer-fraction profile in y.
    """
    if isinstance(source, PerforationSpec):
        coords = grid.coordinates()
        in_omega = _omega_box_membership(source.omega_lo, source.omega_hi, coords)
        if source.gamma > 1.0 or source.hole_shape == HoleShape.NONE:
            return WeakLimit(ScalarField(grid, in_omega.astype(float)), Regime.FULL, 1.0)
        if source.gamma < 1.0:
            return WeakLimit(ScalarField(grid, np.zeros(grid.shape)), Regime.VANISHING, 0.0)
        fraction = 1.0 - source.hole_volume_fraction()
        return WeakLimit(
            ScalarField(grid, np.where(in_omega, fraction, 0.0)), Regime.FRACTION, fraction
        )
    if source == "oscillating":
        if grid.dim != 2:
            raise GeometryError("oscillating example is two-dimensional")
        x, y = grid.coordinates()
        in_omega = _omega_box_membership(OSCILLATING_OMEGA_LO, OSCILLATING_OMEGA_HI, (x, y))
        # fraction of the fast variable with (1 + sin s)/2 above height y
        t = np.clip(2.0 * y - 1.0, -1.0, 1.0)
        frac = (np.pi - 2.0 * np.arcsin(t)) / (2.0 * np.pi)
        vals = np.where(y <= 0.0, 1.0, np.where(y >= 1.0, 0.0, frac))
        return WeakLimit(ScalarField(grid, np.where(in_omega, vals, 0.0)), Regime.CUSTOM, None)
    raise GeometryError(f"no analytic weak limit for source {source!r}")


def weak_pairing_error(mask: DomainMask, limit: WeakLimit, tests) -> list[float]:
    """|<chi_eps - X, phi>| in the grid inner product, one value per test field."""
    from .grid import inner_product

    chi = mask.chi()
    diff = ScalarField(mask.grid, chi.values - limit.field.values)
    errs = []
    for phi in tests:
        errs.append(abs(inner_product(diff, phi)))
    return errs


def mask_to_text(mask: DomainMask) -> str:
    """Plain-text dump: header lines, then one label character per node, row-major."""
    g = mask.grid
    lines = [
        "perfhom-mask v1",
        f"dim {g.dim}",
        "extents " + " ".join(str(n) for n in g.extents),
        f"spacing {g.spacing!r}",
        "origin " + " ".join(repr(c) for c in g.origin),
    ]
    chars = np.array([".", "o", "#"])
    flat = chars[mask.labels.reshape(-1, g.extents[-1])]
    lines.extend("".join(row) for row in flat)
    return "\n".join(lines) + "\n"


def mask_from_text(text: str) -> DomainMask:
    lines = text.splitlines()
    if not lines or lines[0].strip() != "perfhom-mask v1":
        raise GeometryError("not a perfhom mask dump")
    dim = int(lines[1].split()[1])
    extents = tuple(int(t) for t in lines[2].split()[1:])
    spacing = float(lines[3].split()[1])
    origin = tuple(float(t) for t in lines[4].split()[1:])
    grid = Grid(dim=dim, origin=origin, spacing=spacing, extents=extents)
    rows = lines[5 : 5 + int(np.prod(extents[:-1]))]
    flat = np.array([[_CHAR_LABELS[c] for c in row] for row in rows], dtype=np.uint8)
    return DomainMask(grid, flat.reshape(extents))
