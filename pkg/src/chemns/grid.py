"""Structured box grid, field containers, and discrete differential operators.

Layout: scalars are cell-centered, velocities/fluxes live on cell faces
(MAC staggering).  Scalar boundary conditions are homogeneous Neumann via
ghost reflection; face fields carry exact zeros on boundary faces (no-slip /
no-flux).  With these conventions gradient_faces and divergence_faces are
exact negative adjoints of each other, so laplacian_neumann = div o grad
conserves the cell sum to roundoff.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Refuse grids that would not fit a desk-scale memory budget.
MAX_CELLS = 2 ** 27


def _sl(ndim, axis, s):
    """Index tuple selecting slice `s` along `axis`, full slices elsewhere."""
    idx = [slice(None)] * ndim
    idx[axis] = s
    return tuple(idx)


@dataclass(frozen=True)
class Grid:
    """Uniform box grid: `cells[a]` cells of size `spacing[a]` along axis a."""

    lengths: tuple
    cells: tuple

    def __post_init__(self):
        lengths = tuple(float(L) for L in self.lengths)
        cells = tuple(int(n) for n in self.cells)
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "cells", cells)
        if len(lengths) not in (2, 3) or len(cells) != len(lengths):
            raise ValueError("grid must be 2D or 3D with matching lengths/cells")
        if any(L <= 0 for L in lengths):
            raise ValueError("domain lengths must be positive")
        if any(n < 4 for n in cells):
            raise ValueError("need at least 4 cells per axis")
        total = int(np.prod(cells))
        if total > MAX_CELLS:
            raise ValueError(f"grid has {total} cells, exceeds budget {MAX_CELLS}")

    @property
    def dim(self):
        return len(self.cells)

    @property
    def spacing(self):
        return tuple(L / n for L, n in zip(self.lengths, self.cells))

    @property
    def cell_volume(self):
        return float(np.prod(self.spacing))

    @property
    def volume(self):
        return float(np.prod(self.lengths))

    def cell_centers(self, axis):
        """1D coordinates of cell centers along `axis`."""
        h = self.spacing[axis]
        return (np.arange(self.cells[axis]) + 0.5) * h

    def face_coords(self, axis):
        """1D coordinates of faces normal to `axis` (0 .. length)."""
        return np.arange(self.cells[axis] + 1) * self.spacing[axis]

    def center_mesh(self):
        """Meshgrid (indexing='ij') of cell-center coordinates."""
        return np.meshgrid(*[self.cell_centers(a) for a in range(self.dim)],
                           indexing="ij")

    def face_mesh(self, axis):
        """Meshgrid of coordinates of faces normal to `axis`."""
        coords = [self.face_coords(a) if a == axis else self.cell_centers(a)
                  for a in range(self.dim)]
        return np.meshgrid(*coords, indexing="ij")

    def face_shape(self, axis):
        return tuple(n + 1 if a == axis else n
                     for a, n in enumerate(self.cells))


@dataclass
class ScalarField:
    """Cell-centered scalar samples on a Grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != self.grid.cells:
            raise ValueError(f"scalar values shape {self.values.shape} does not "
                             f"match grid cells {self.grid.cells}")

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.cells))

    @classmethod
    def full(cls, grid, value):
        return cls(grid, np.full(grid.cells, float(value)))

    def copy(self):
        return ScalarField(self.grid, self.values.copy())

    def check_finite(self, name="scalar field"):
        if not np.all(np.isfinite(self.values)):
            raise FloatingPointError(f"{name} contains non-finite values")
        return self

    def min(self):
        return float(self.values.min())

    def max(self):
        return float(self.values.max())


@dataclass
class FaceField:
    """One array per axis, sampled at faces normal to that axis."""

    grid: Grid
    components: list = field(default_factory=list)

    def __post_init__(self):
        comps = [np.asarray(c, dtype=np.float64) for c in self.components]
        for a, c in enumerate(comps):
            if c.shape != self.grid.face_shape(a):
                raise ValueError(f"face component {a} has shape {c.shape}, "
                                 f"expected {self.grid.face_shape(a)}")
        self.components = comps

    @classmethod
    def zeros(cls, grid):
        return cls(grid, [np.zeros(grid.face_shape(a)) for a in range(grid.dim)])

    def copy(self):
        return FaceField(self.grid, [c.copy() for c in self.components])

    def zero_boundary(self):
        """Pin the boundary faces of every component to exactly 0."""
        nd = self.grid.dim
        for a, c in enumerate(self.components):
            c[_sl(nd, a, 0)] = 0.0
            c[_sl(nd, a, -1)] = 0.0
        return self

    def boundary_is_zero(self):
        nd = self.grid.dim
        return all(np.all(c[_sl(nd, a, 0)] == 0.0)
                   and np.all(c[_sl(nd, a, -1)] == 0.0)
                   for a, c in enumerate(self.components))

    def check_finite(self, name="face field"):
        for c in self.components:
            if not np.all(np.isfinite(c)):
                raise FloatingPointError(f"{name} contains non-finite values")
        return self

    def max_abs(self):
        return max(float(np.abs(c).max()) for c in self.components)


class VelocityField(FaceField):
    """MAC velocity: a FaceField whose boundary faces are no-slip zeros."""

    def __post_init__(self):
        super().__post_init__()
        self.zero_boundary()

    @classmethod
    def zeros(cls, grid):
        return cls(grid, [np.zeros(grid.face_shape(a)) for a in range(grid.dim)])

    def copy(self):
        return VelocityField(self.grid, [c.copy() for c in self.components])


def gradient_faces(f: ScalarField) -> FaceField:
    """Two-point gradient of a scalar at interior faces; boundary faces 0."""
    g = f.grid
    nd = g.dim
    comps = []
    for a in range(nd):
        out = np.zeros(g.face_shape(a))
        h = g.spacing[a]
        out[_sl(nd, a, slice(1, -1))] = np.diff(f.values, axis=a) / h
        comps.append(out)
    return FaceField(g, comps)


def divergence_faces(G: FaceField) -> ScalarField:
    """Per-cell net face flux divided by cell volume."""
    g = G.grid
    out = np.zeros(g.cells)
    for a, c in enumerate(G.components):
        out += np.diff(c, axis=a) / g.spacing[a]
    return ScalarField(g, out)


def laplacian_neumann(f: ScalarField) -> ScalarField:
    """Homogeneous-Neumann Laplacian (ghost reflection): div(grad f)."""
    return divergence_faces(gradient_faces(f))


def upwind_face_values(f: np.ndarray, speed: np.ndarray, axis: int) -> np.ndarray:
    """Donor-cell value of `f` at interior faces along `axis`.

    `speed` is given at interior faces (shape of f minus nothing: len n-1
    along axis); positive speed takes the lower cell.
    """
    nd = f.ndim
    lo = f[_sl(nd, axis, slice(None, -1))]
    hi = f[_sl(nd, axis, slice(1, None))]
    return np.where(speed >= 0.0, lo, hi)


def advect_upwind(f: ScalarField, u) -> ScalarField:
    """Conservative donor-cell divergence of (u f); cell-sum is 0 exactly."""
    g = f.grid
    nd = g.dim
    if not u.boundary_is_zero():
        raise ValueError("advecting velocity must have zero boundary faces")
    flux = []
    for a in range(nd):
        c = np.zeros(g.face_shape(a))
        speed = u.components[a][_sl(nd, a, slice(1, -1))]
        c[_sl(nd, a, slice(1, -1))] = speed * upwind_face_values(f.values, speed, a)
        flux.append(c)
    return divergence_faces(FaceField(g, flux))


def integrate(f: ScalarField) -> float:
    """Midpoint-rule integral over the box: cell sum times cell volume."""
    return float(f.values.sum() * f.grid.cell_volume)


def integrate_faces_sq(G: FaceField) -> float:
    """Quadrature of sum_a G_a^2 treating each face sample as one cell volume."""
    vol = G.grid.cell_volume
    return float(sum((c ** 2).sum() for c in G.components) * vol)


def dot_faces(A: FaceField, B: FaceField) -> float:
    """Volume-weighted inner product of two face fields."""
    vol = A.grid.cell_volume
    return float(sum((a * b).sum() for a, b in zip(A.components, B.components)) * vol)


def face_average_to_cells(G: FaceField) -> np.ndarray:
    """Sum over axes of the squared face values averaged to cell centers.

    Returns the cell-centered approximation of |G|^2.
    """
    g = G.grid
    nd = g.dim
    out = np.zeros(g.cells)
    for a, c in enumerate(G.components):
        sq = c ** 2
        out += 0.5 * (sq[_sl(nd, a, slice(None, -1))] + sq[_sl(nd, a, slice(1, None))])
    return out


def interpolate_to_faces(f: ScalarField) -> FaceField:
    """Arithmetic average of a scalar to interior faces; boundary faces 0."""
    g = f.grid
    nd = g.dim
    comps = []
    for a in range(nd):
        out = np.zeros(g.face_shape(a))
        lo = f.values[_sl(nd, a, slice(None, -1))]
        hi = f.values[_sl(nd, a, slice(1, None))]
        out[_sl(nd, a, slice(1, -1))] = 0.5 * (lo + hi)
        comps.append(out)
    return FaceField(g, comps)
