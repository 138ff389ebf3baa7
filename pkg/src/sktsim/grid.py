"""Cell-centered grids, boundary-aware stencils, and discrete norms.

The grid is cell-centered with ghost cells: homogeneous Neumann mirrors the
first interior value across the wall, homogeneous Dirichlet negates it (zero
boundary trace halfway between ghost and interior).  This makes the standard
2d+1-point Laplacian second-order accurate for both boundary conditions
without one-sided stencils.

The weak (dual) norm |w|_w = sup <w,v>/||v||_H1 is evaluated exactly in the
discrete setting as sqrt(<w, (I - Lap)^-1 w>) per component: the supremum
over discrete fields is attained at v = (I - Lap)^-1 w because the discrete
H1 product is <(I - Lap) . , .>.  One sparse solve replaces the sup.
"""

from __future__ import annotations

import enum
import functools
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = [
    "BoundaryCondition",
    "FieldPair",
    "Grid",
    "NormReport",
    "gradient_sq",
    "inner",
    "laplacian",
    "lp_norm",
    "norms",
    "read_field",
    "shifted_solve",
    "spacetime_norm",
    "write_field",
]


class BoundaryCondition(enum.Enum):
    """Homogeneous boundary condition applied to both species and adjoint fields."""

    NEUMANN = "neumann"
    DIRICHLET = "dirichlet"


@dataclass(frozen=True)
class Grid:
    """Uniform cell-centered grid on a d-cube (0, length)^d with n cells per axis."""

    dim: int
    length: float
    n: int

    def __post_init__(self) -> None:
        if self.dim not in (1, 2):
            raise ValueError(f"grid dimension must be 1 or 2, got {self.dim}")
        if not self.length > 0.0:
            raise ValueError("domain length must be positive")
        if self.n < 3:
            raise ValueError("need at least 3 cells per axis")

    @property
    def h(self) -> float:
        return self.length / self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def node_count(self) -> int:
        return self.n ** self.dim

    @property
    def cell_volume(self) -> float:
        return self.h ** self.dim

    def centers(self) -> np.ndarray:
        """Cell-center coordinates along one axis."""
        return (np.arange(self.n) + 0.5) * self.h

    def meshgrid(self) -> tuple[np.ndarray, ...]:
        axes = (self.centers(),) * self.dim
        return np.meshgrid(*axes, indexing="ij")


@dataclass
class FieldPair:
    """Two species fields sampled at the cell centers of a shared grid."""

    grid: Grid
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self) -> None:
        self.u = np.asarray(self.u, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        if self.u.shape != self.grid.shape or self.v.shape != self.grid.shape:
            raise ValueError(f"field shape {self.u.shape}/{self.v.shape} does not "
                             f"match grid shape {self.grid.shape}")
        if not (np.all(np.isfinite(self.u)) and np.all(np.isfinite(self.v))):
            raise ValueError("field values must be finite")

    @classmethod
    def zeros(cls, grid: Grid) -> "FieldPair":
        return cls(grid, np.zeros(grid.shape), np.zeros(grid.shape))

    @classmethod
    def constant(cls, grid: Grid, cu: float, cv: float) -> "FieldPair":
        return cls(grid, np.full(grid.shape, float(cu)), np.full(grid.shape, float(cv)))

    def copy(self) -> "FieldPair":
        return FieldPair(self.grid, self.u.copy(), self.v.copy())

    def __add__(self, other: "FieldPair") -> "FieldPair":
        return FieldPair(self.grid, self.u + other.u, self.v + other.v)

    def __sub__(self, other: "FieldPair") -> "FieldPair":
        return FieldPair(self.grid, self.u - other.u, self.v - other.v)

    def __mul__(self, scalar: float) -> "FieldPair":
        return FieldPair(self.grid, scalar * self.u, scalar * self.v)

    __rmul__ = __mul__


@dataclass(frozen=True)
class NormReport:
    """Discrete norms of a field pair (components summed in quadrature)."""

    l2: float
    h1: float
    l4: float
    linf: float
    weak: float


def _extend(arr: np.ndarray, bc: BoundaryCondition) -> np.ndarray:
    """Pad with one ghost layer per side following the boundary rule."""
    ext = np.pad(arr, 1, mode="edge")
    if bc is BoundaryCondition.DIRICHLET:
        if arr.ndim == 1:
            ext[0] = -arr[0]
            ext[-1] = -arr[-1]
        else:
            ext[0, 1:-1] = -arr[0, :]
            ext[-1, 1:-1] = -arr[-1, :]
            ext[1:-1, 0] = -arr[:, 0]
            ext[1:-1, -1] = -arr[:, -1]
    return ext


def _laplacian_array(arr: np.ndarray, grid: Grid, bc: BoundaryCondition) -> np.ndarray:
    ext = _extend(arr, bc)
    inv_h2 = 1.0 / grid.h ** 2
    if grid.dim == 1:
        return (ext[:-2] - 2.0 * arr + ext[2:]) * inv_h2
    core = ext[1:-1, 1:-1]
    return ((ext[:-2, 1:-1] + ext[2:, 1:-1] + ext[1:-1, :-2] + ext[1:-1, 2:]
             - 2.0 * grid.dim * core) * inv_h2)


def laplacian(f: FieldPair, bc: BoundaryCondition) -> FieldPair:
    """Second-order 2d+1-point Laplacian of both components."""
    return FieldPair(f.grid,
                     _laplacian_array(f.u, f.grid, bc),
                     _laplacian_array(f.v, f.grid, bc))


def _gradient_components(arr: np.ndarray, grid: Grid, bc: BoundaryCondition) -> list[np.ndarray]:
    """Centered differences per axis, ghost-based at the boundary cells."""
    ext = _extend(arr, bc)
    inv_2h = 0.5 / grid.h
    if grid.dim == 1:
        return [(ext[2:] - ext[:-2]) * inv_2h]
    return [(ext[2:, 1:-1] - ext[:-2, 1:-1]) * inv_2h,
            (ext[1:-1, 2:] - ext[1:-1, :-2]) * inv_2h]


def _grad_sq_array(arr: np.ndarray, grid: Grid, bc: BoundaryCondition) -> np.ndarray:
    out = np.zeros(grid.shape)
    for g in _gradient_components(arr, grid, bc):
        out += g * g
    return out


def gradient_sq(f: FieldPair, bc: BoundaryCondition) -> np.ndarray:
    """Per-node |grad u|^2 + |grad v|^2 from centered differences."""
    return (_grad_sq_array(f.u, f.grid, bc) + _grad_sq_array(f.v, f.grid, bc))


@functools.lru_cache(maxsize=32)
def laplacian_matrix(grid: Grid, bc: BoundaryCondition) -> sp.csr_matrix:
    """Sparse matrix of the ghost-cell Laplacian on one component (symmetric)."""
    n = grid.n
    inv_h2 = 1.0 / grid.h ** 2
    main = np.full(n, -2.0)
    if bc is BoundaryCondition.NEUMANN:
        main[0] = main[-1] = -1.0
    else:
        main[0] = main[-1] = -3.0
    off = np.ones(n - 1)
    lap1 = sp.diags([off, main, off], [-1, 0, 1], format="csr") * inv_h2
    if grid.dim == 1:
        return lap1.tocsr()
    eye = sp.identity(n, format="csr")
    return (sp.kron(lap1, eye) + sp.kron(eye, lap1)).tocsr()


def shifted_solve(arr: np.ndarray, grid: Grid, bc: BoundaryCondition) -> np.ndarray:
    """Solve (I - Lap) z = arr: banded direct in 1d, CG (rtol 1e-10) in 2d."""
    if grid.dim == 1:
        n = grid.n
        inv_h2 = 1.0 / grid.h ** 2
        diag = np.full(n, 1.0 + 2.0 * inv_h2)
        if bc is BoundaryCondition.NEUMANN:
            diag[0] = diag[-1] = 1.0 + inv_h2
        else:
            diag[0] = diag[-1] = 1.0 + 3.0 * inv_h2
        ab = np.zeros((2, n))
        ab[0, 1:] = -inv_h2
        ab[1] = diag
        return scipy.linalg.solveh_banded(ab, arr)
    A = (sp.identity(grid.node_count, format="csr") - laplacian_matrix(grid, bc)).tocsr()
    z, info = spla.cg(A, arr.ravel(), rtol=1e-10, atol=0.0)
    if info != 0:
        raise RuntimeError(f"CG for the shifted solve did not converge (info={info})")
    return z.reshape(grid.shape)


def inner(f: FieldPair, g: FieldPair) -> float:
    """Discrete L2 pairing of two field pairs: h^d (sum u_f u_g + sum v_f v_g)."""
    if f.grid != g.grid:
        raise ValueError("fields live on different grids")
    return f.grid.cell_volume * (float(np.sum(f.u * g.u)) + float(np.sum(f.v * g.v)))


def lp_norm(f: FieldPair, p: float) -> float:
    """(h^d sum(|u|^p + |v|^p))^(1/p); a quasi-norm when p < 1."""
    vol = f.grid.cell_volume
    total = vol * (float(np.sum(np.abs(f.u) ** p)) + float(np.sum(np.abs(f.v) ** p)))
    return total ** (1.0 / p)


def weak_norm(f: FieldPair, bc: BoundaryCondition) -> float:
    zu = shifted_solve(f.u, f.grid, bc)
    zv = shifted_solve(f.v, f.grid, bc)
    val = f.grid.cell_volume * (float(np.sum(f.u * zu)) + float(np.sum(f.v * zv)))
    return float(np.sqrt(max(val, 0.0)))


def norms(f: FieldPair, bc: BoundaryCondition) -> NormReport:
    """L2, H1, L4, Linf and the dual weak norm of a field pair."""
    vol = f.grid.cell_volume
    l2_sq = vol * (float(np.sum(f.u ** 2)) + float(np.sum(f.v ** 2)))
    grad_sq = vol * float(np.sum(gradient_sq(f, bc)))
    l4 = lp_norm(f, 4.0)
    linf = max(float(np.max(np.abs(f.u))), float(np.max(np.abs(f.v))))
    return NormReport(l2=float(np.sqrt(l2_sq)),
                      h1=float(np.sqrt(l2_sq + grad_sq)),
                      l4=l4,
                      linf=linf,
                      weak=weak_norm(f, bc))


def component_l2(arr: np.ndarray, grid: Grid) -> float:
    return float(np.sqrt(grid.cell_volume * np.sum(arr ** 2)))


def component_h1(arr: np.ndarray, grid: Grid, bc: BoundaryCondition) -> float:
    vol = grid.cell_volume
    return float(np.sqrt(vol * np.sum(arr ** 2) + vol * np.sum(_grad_sq_array(arr, grid, bc))))


def spacetime_norm(times: np.ndarray, fields: list[FieldPair], p: float) -> float:
    """Space-time L^p norm over stored levels via the left-endpoint rule in time.

    Each interval [t_k, t_{k+1}) contributes its width times the spatial
    quadrature of the level at t_k; the final level carries no weight.
    """
    times = np.asarray(times, dtype=float)
    if len(times) != len(fields):
        raise ValueError("times and fields must have matching length")
    total = 0.0
    for k in range(len(fields) - 1):
        w = times[k + 1] - times[k]
        f = fields[k]
        total += w * f.grid.cell_volume * (float(np.sum(np.abs(f.u) ** p))
                                           + float(np.sum(np.abs(f.v) ** p)))
    return total ** (1.0 / p)


_FIELD_HEADER = "skt-field v1"


def write_field(path: str | Path, f: FieldPair) -> None:
    """Write a field snapshot: header, then u block, then v block, row-major.

    Values are printed with 17 significant digits, which round-trips
    float64 exactly.
    """
    grid = f.grid
    lines = [f"{_FIELD_HEADER}, d={grid.dim}, N={grid.n}, h={grid.h:.17g}"]
    for block in (f.u, f.v):
        rows = block.reshape(grid.n, -1)
        for row in rows:
            lines.append(" ".join(f"{val:.17g}" for val in row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_field(path: str | Path) -> FieldPair:
    """Read a snapshot written by :func:`write_field` (bit-exact round trip)."""
    text = Path(path).read_text().strip().split("\n")
    header = text[0]
    if not header.startswith(_FIELD_HEADER):
        raise ValueError(f"not a field snapshot: header {header!r}")
    fields = dict(item.strip().split("=") for item in header.split(",")[1:])
    dim, n, h = int(fields["d"]), int(fields["N"]), float(fields["h"])
    grid = Grid(dim=dim, length=h * n, n=n)
    values = np.array(" ".join(text[1:]).split(), dtype=float)
    count = grid.node_count
    if values.size != 2 * count:
        raise ValueError(f"expected {2 * count} values, found {values.size}")
    return FieldPair(grid, values[:count].reshape(grid.shape),
                     values[count:].reshape(grid.shape))
