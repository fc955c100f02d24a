"""Uniform slab and radially symmetric grids with vertex-centred control volumes.

Node ``i`` owns the cell ``[x_{i-1/2}, x_{i+1/2}]`` clipped to the domain. The
quadrature weight of a node is the measure of its cell, which is the
trapezoid rule on a slab and the exact shell volume ``w_d/d (r_+^d - r_-^d)``
in radial geometry. Flux operators use the face areas between neighbouring
cells, so every divergence sums to zero against the weights.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BoundaryConditionError, GridError


class Geometry(str, enum.Enum):
    SLAB = "slab"
    RADIAL = "radial"


class BC(str, enum.Enum):
    NEUMANN = "neumann"
    DIRICHLET = "dirichlet"
    NONE = "none"


def sphere_area(d: int) -> float:
    """Surface area of the unit sphere in R^d (2 for d = 1)."""
    return 2.0 * math.pi ** (d / 2) / math.gamma(d / 2)


@dataclass(frozen=True, eq=False)
class Grid:
    d: int
    geometry: Geometry
    N: int
    L: float
    nodes: np.ndarray
    h: float
    quad_weights: np.ndarray
    face_areas: np.ndarray
    # neighbour coefficients of the zero-flux Laplacian
    cl: np.ndarray = field(repr=False)
    cr: np.ndarray = field(repr=False)
    dirichlet: np.ndarray = field(repr=False)

    @property
    def volume(self) -> float:
        if self.geometry is Geometry.SLAB:
            return self.L
        return sphere_area(self.d) * self.L ** self.d / self.d

    @property
    def coord_name(self) -> str:
        return "x" if self.geometry is Geometry.SLAB else "r"

    @property
    def face_g(self) -> np.ndarray:
        return self.face_areas / self.h

    def same_as(self, other: "Grid") -> bool:
        return other is self or (
            self.d == other.d and self.geometry is other.geometry
            and self.N == other.N and self.L == other.L
        )


def build_grid(d: int, geometry, N: int, L: float = 1.0) -> Grid:
    """Build a uniform grid.

    Parameters
    ----------
    d : int
        Spatial dimension; 1 for a slab, 2 or 3 for a ball.
    geometry : Geometry or str
    N : int
        Number of nodes including both ends (``N >= 3``).
    L : float
        Slab length or ball radius.
    """
    geometry = Geometry(geometry)
    if N < 3:
        raise GridError(f"need at least 3 nodes, got N={N}")
    if not L > 0:
        raise GridError(f"domain extent must be positive, got L={L}")
    if geometry is Geometry.SLAB and d != 1:
        raise GridError(f"slab geometry requires d=1, got d={d}")
    if geometry is Geometry.RADIAL and d not in (2, 3):
        raise GridError(f"radial geometry requires d in (2, 3), got d={d}")

    h = L / (N - 1)
    nodes = np.linspace(0.0, L, N)
    edges = np.concatenate(([0.0], 0.5 * (nodes[:-1] + nodes[1:]), [L]))
    if geometry is Geometry.SLAB:
        weights = np.diff(edges)
        faces = np.ones(N - 1)
        dirichlet = np.zeros(N, dtype=bool)
        dirichlet[[0, -1]] = True
    else:
        omega = sphere_area(d)
        weights = omega / d * np.diff(edges ** d)
        faces = omega * edges[1:-1] ** (d - 1)
        dirichlet = np.zeros(N, dtype=bool)
        dirichlet[-1] = True

    cl = np.zeros(N)
    cr = np.zeros(N)
    cl[1:] = faces / (h * weights[1:])
    cr[:-1] = faces / (h * weights[:-1])
    for arr in (nodes, weights, faces, cl, cr, dirichlet):
        arr.setflags(write=False)
    return Grid(d=d, geometry=geometry, N=N, L=float(L), nodes=nodes, h=h,
                quad_weights=weights, face_areas=faces, cl=cl, cr=cr,
                dirichlet=dirichlet)


@dataclass(eq=False)
class ScalarField:
    grid: Grid
    values: np.ndarray
    bc: BC = BC.NONE

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.bc = BC(self.bc)
        if self.values.shape != (self.grid.N,):
            raise GridError(
                f"field has shape {self.values.shape}, grid has {self.grid.N} nodes")

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    def __neg__(self) -> "ScalarField":
        return ScalarField(self.grid, -self.values, self.bc)


@dataclass(eq=False)
class DensityState:
    """Square-root density ``rho`` with ``n = rho**2``."""

    rho: ScalarField

    @classmethod
    def from_density(cls, grid: Grid, n, normalize: bool = True) -> "DensityState":
        n = np.asarray(n, dtype=float)
        if np.any(n < 0):
            raise ValueError("density must be nonnegative")
        if normalize:
            n = n / integrate(grid, n)
        return cls(ScalarField(grid, np.sqrt(n), BC.NEUMANN))

    @property
    def grid(self) -> Grid:
        return self.rho.grid

    @property
    def n(self) -> np.ndarray:
        return self.rho.values ** 2

    def mass(self) -> float:
        return integrate(self.grid, self.n)


def _values(grid: Grid, field) -> np.ndarray:
    if isinstance(field, ScalarField):
        if not field.grid.same_as(grid):
            raise GridError("field lives on a different grid")
        return field.values
    vals = np.asarray(field, dtype=float)
    if vals.shape != (grid.N,):
        raise GridError(f"expected {grid.N} nodal values, got shape {vals.shape}")
    return vals


def integrate(grid: Grid, field) -> float:
    """Quadrature of nodal values against the cell measures."""
    return float(np.dot(grid.quad_weights, _values(grid, field)))


def mean(grid: Grid, field) -> float:
    return integrate(grid, field) / grid.volume


def neumann_laplacian(grid: Grid, u: np.ndarray) -> np.ndarray:
    """Flux-form Laplacian with zero flux through the outer boundary."""
    lap = -(grid.cl + grid.cr) * u
    lap[1:] += grid.cl[1:] * u[:-1]
    lap[:-1] += grid.cr[:-1] * u[1:]
    return lap


def laplacian(grid: Grid, field: ScalarField) -> ScalarField:
    """Second-order Laplacian of a field carrying a Neumann or Dirichlet tag.

    Neumann fields use the zero-flux stencil (ghost reflection on a slab,
    symmetric limit ``d * u''(0)`` at the centre of a ball). For Dirichlet
    fields the stencil is applied at free nodes and linearly extrapolated to
    the constrained boundary nodes.
    """
    if field.bc is BC.NONE:
        raise BoundaryConditionError("laplacian needs a Neumann or Dirichlet field")
    u = _values(grid, field)
    lap = neumann_laplacian(grid, u)
    if field.bc is BC.DIRICHLET:
        if grid.geometry is Geometry.SLAB:
            lap[0] = 2 * lap[1] - lap[2]
        lap[-1] = 2 * lap[-2] - lap[-3]
        return ScalarField(grid, lap, BC.NONE)
    return ScalarField(grid, lap, BC.NONE)


def derivative(grid: Grid, u: np.ndarray, bc=BC.NONE) -> np.ndarray:
    """Centred first derivative; boundary rows follow the boundary condition."""
    bc = BC(bc)
    h = grid.h
    du = np.empty_like(u)
    du[1:-1] = (u[2:] - u[:-2]) / (2 * h)
    if grid.geometry is Geometry.RADIAL:
        du[0] = 0.0
    elif bc is BC.NEUMANN:
        du[0] = 0.0
    else:
        du[0] = (-3 * u[0] + 4 * u[1] - u[2]) / (2 * h)
    if bc is BC.NEUMANN:
        du[-1] = 0.0
    else:
        du[-1] = (3 * u[-1] - 4 * u[-2] + u[-3]) / (2 * h)
    return du


def gradient_sq(grid: Grid, field) -> ScalarField:
    """Pointwise ``|grad u|^2`` from centred differences."""
    bc = field.bc if isinstance(field, ScalarField) else BC.NONE
    u = _values(grid, field)
    du = derivative(grid, u, bc)
    return ScalarField(grid, du * du, BC.NONE)


def hessian_parts(grid: Grid, u: np.ndarray, bc=BC.NEUMANN):
    """Principal values ``(u_rr, u_r / r)`` of the Hessian of a radial field.

    On a slab the second entry is zero. At ``r = 0`` both equal ``u''(0)``.
    Neumann ends use ghost reflection; otherwise one-sided stencils.
    """
    bc = BC(bc)
    h = grid.h
    upp = np.empty_like(u)
    upp[1:-1] = (u[2:] - 2 * u[1:-1] + u[:-2]) / h**2
    if grid.geometry is Geometry.RADIAL or bc is BC.NEUMANN:
        upp[0] = 2 * (u[1] - u[0]) / h**2
    else:
        upp[0] = (2 * u[0] - 5 * u[1] + 4 * u[2] - u[3]) / h**2
    if bc is BC.NEUMANN:
        upp[-1] = 2 * (u[-2] - u[-1]) / h**2
    else:
        upp[-1] = (2 * u[-1] - 5 * u[-2] + 4 * u[-3] - u[-4]) / h**2

    if grid.geometry is Geometry.SLAB:
        return upp, np.zeros_like(u)
    du = derivative(grid, u, bc)
    ur = np.empty_like(u)
    ur[1:] = du[1:] / grid.nodes[1:]
    ur[0] = upp[0]
    return upp, ur


def hessian_sq(grid: Grid, u: np.ndarray, bc=BC.NEUMANN) -> np.ndarray:
    """Pointwise squared Frobenius norm of the Hessian of a radial field."""
    upp, ur = hessian_parts(grid, u, bc)
    return upp**2 + (grid.d - 1) * ur**2


def write_field_csv(path, grid: Grid, values) -> None:
    vals = _values(grid, values)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([grid.coord_name, "value"])
        for x, v in zip(grid.nodes, vals):
            writer.writerow([f"{x:.17g}", f"{v:.17g}"])


def read_field_csv(path):
    """Return ``(coords, values)`` from a field snapshot file."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if len(header) != 2 or header[1] != "value" or header[0] not in ("x", "r"):
            raise ValueError(f"unexpected snapshot header {header}")
        rows = [(float(a), float(b)) for a, b in reader]
    arr = np.array(rows)
    return arr[:, 0], arr[:, 1]
