"""Structured discretization of the bulk domain and its boundary.

Two geometries are supported: an interval, whose boundary is the pair of
endpoints with counting measure, and an axis-aligned rectangle, whose
boundary is a closed perimeter polyline.  Bulk operators use piecewise
linear elements (bilinear on rectangle cells); the boundary operator is
the periodic piecewise linear stiffness along the perimeter, with
arc-length weights.  Every boundary node is a bulk node, so traces are
index lookups, never interpolation.  Mass forms are lumped (row sums),
which keeps them diagonal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

__all__ = [
    "Domain",
    "CoupledField",
    "DiscreteSystem",
    "build_domain",
    "assemble",
    "inner_H",
    "norm_H",
    "normal_flux",
]


@dataclass(frozen=True)
class Domain:
    """Node layout of the mesh with an ordered boundary traversal."""

    kind: str                      # "interval" or "rectangle"
    sizes: tuple[float, ...]       # (Lx,) or (Lx, Ly)
    resolution: tuple[int, ...]    # (nx,) or (nx, ny)
    coords: np.ndarray             # (n_nodes, dim)
    boundary_idx: np.ndarray       # ordered traversal of the boundary

    @property
    def n_nodes(self) -> int:
        return self.coords.shape[0]

    @property
    def n_boundary(self) -> int:
        return self.boundary_idx.size


@dataclass
class CoupledField:
    """A bulk field paired with a boundary field.

    ``trace_consistent`` records whether ``bnd`` was built as the trace
    of ``bulk``; consumers that require consistency re-verify it against
    the actual values.
    """

    bulk: np.ndarray
    bnd: np.ndarray
    trace_consistent: bool = False

    def copy(self) -> "CoupledField":
        return CoupledField(self.bulk.copy(), self.bnd.copy(), self.trace_consistent)

    def __add__(self, other: "CoupledField") -> "CoupledField":
        return CoupledField(
            self.bulk + other.bulk,
            self.bnd + other.bnd,
            self.trace_consistent and other.trace_consistent,
        )

    def __sub__(self, other: "CoupledField") -> "CoupledField":
        return CoupledField(
            self.bulk - other.bulk,
            self.bnd - other.bnd,
            self.trace_consistent and other.trace_consistent,
        )

    def __mul__(self, a: float) -> "CoupledField":
        return CoupledField(a * self.bulk, a * self.bnd, self.trace_consistent)

    __rmul__ = __mul__


@dataclass(frozen=True)
class DiscreteSystem:
    """Assembled operators of the coupled bulk/boundary weak form."""

    domain: Domain
    A_bulk: sp.csr_matrix          # bulk stiffness, symmetric PSD
    M_bulk: np.ndarray             # lumped bulk mass (diagonal)
    A_bnd: sp.csr_matrix           # boundary stiffness along the perimeter
    M_bnd: np.ndarray              # lumped boundary mass (diagonal)

    @property
    def bidx(self) -> np.ndarray:
        return self.domain.boundary_idx

    @property
    def n_bulk(self) -> int:
        return self.domain.n_nodes

    @property
    def n_bnd(self) -> int:
        return self.domain.n_boundary

    def field_from_bulk(self, bulk: np.ndarray) -> CoupledField:
        """Trace-consistent field whose boundary part is the trace."""
        bulk = np.asarray(bulk, dtype=float)
        return CoupledField(bulk, bulk[self.bidx].copy(), trace_consistent=True)

    def field(self, bulk, bnd) -> CoupledField:
        bulk = np.asarray(bulk, dtype=float)
        bnd = np.asarray(bnd, dtype=float)
        consistent = bool(np.array_equal(bulk[self.bidx], bnd))
        return CoupledField(bulk, bnd, trace_consistent=consistent)

    def constant_field(self, value: float) -> CoupledField:
        return self.field_from_bulk(np.full(self.n_bulk, float(value)))

    def check_trace(self, u: CoupledField) -> bool:
        return bool(np.array_equal(u.bulk[self.bidx], u.bnd))


def build_domain(kind: str, sizes, resolution) -> Domain:
    """Create an interval or rectangle mesh with ordered boundary nodes."""
    kind = kind.lower()
    if kind == "interval":
        (lx,) = (float(s) for s in sizes)
        (nx,) = (int(r) for r in resolution)
        if nx < 2:
            raise ValueError("interval needs nx >= 2")
        coords = np.linspace(0.0, lx, nx + 1).reshape(-1, 1)
        boundary = np.array([0, nx], dtype=int)
        return Domain("interval", (lx,), (nx,), coords, boundary)
    if kind == "rectangle":
        lx, ly = (float(s) for s in sizes)
        nx, ny = (int(r) for r in resolution)
        if nx < 2 or ny < 2:
            raise ValueError("rectangle needs nx >= 2 and ny >= 2")
        xs = np.linspace(0.0, lx, nx + 1)
        ys = np.linspace(0.0, ly, ny + 1)
        xx, yy = np.meshgrid(xs, ys)            # row-major: node = iy*(nx+1)+ix
        coords = np.column_stack([xx.ravel(), yy.ravel()])
        boundary = _perimeter_loop(nx, ny)
        return Domain("rectangle", (lx, ly), (nx, ny), coords, boundary)
    raise ValueError(f"unknown domain kind {kind!r}")


def _perimeter_loop(nx: int, ny: int) -> np.ndarray:
    """Closed counterclockwise traversal of the rectangle perimeter."""

    def node(ix: int, iy: int) -> int:
        return iy * (nx + 1) + ix

    loop = []
    loop.extend(node(ix, 0) for ix in range(nx + 1))
    loop.extend(node(nx, iy) for iy in range(1, ny + 1))
    loop.extend(node(ix, ny) for ix in range(nx - 1, -1, -1))
    loop.extend(node(0, iy) for iy in range(ny - 1, 0, -1))
    return np.array(loop, dtype=int)


def _stiffness_1d(n_cells: int, h: float) -> sp.csr_matrix:
    main = np.full(n_cells + 1, 2.0 / h)
    main[0] = main[-1] = 1.0 / h
    off = np.full(n_cells, -1.0 / h)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr")


def _mass_1d_consistent(n_cells: int, h: float) -> sp.csr_matrix:
    main = np.full(n_cells + 1, 2.0 * h / 3.0)
    main[0] = main[-1] = h / 3.0
    off = np.full(n_cells, h / 6.0)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr")


def _mass_1d_lumped(n_cells: int, h: float) -> np.ndarray:
    m = np.full(n_cells + 1, h)
    m[0] = m[-1] = h / 2.0
    return m


def assemble(domain: Domain) -> DiscreteSystem:
    """Assemble stiffness and lumped mass operators for a domain.

    The rectangle stiffness is the exact bilinear-element operator,
    written as a sum of Kronecker products of 1d stiffness and
    consistent 1d mass.  The boundary stiffness of the rectangle is the
    periodic piecewise linear stiffness along the perimeter polyline;
    the interval boundary carries no stiffness and unit point weights.
    """
    if domain.kind == "interval":
        (lx,) = domain.sizes
        (nx,) = domain.resolution
        h = lx / nx
        A_bulk = _stiffness_1d(nx, h)
        M_bulk = _mass_1d_lumped(nx, h)
        A_bnd = sp.csr_matrix((2, 2))
        M_bnd = np.ones(2)
        return DiscreteSystem(domain, A_bulk, M_bulk, A_bnd, M_bnd)

    lx, ly = domain.sizes
    nx, ny = domain.resolution
    hx, hy = lx / nx, ly / ny
    Ax = _stiffness_1d(nx, hx)
    Ay = _stiffness_1d(ny, hy)
    Mx = _mass_1d_consistent(nx, hx)
    My = _mass_1d_consistent(ny, hy)
    A_bulk = (sp.kron(My, Ax) + sp.kron(Ay, Mx)).tocsr()
    M_bulk = np.kron(_mass_1d_lumped(ny, hy), _mass_1d_lumped(nx, hx))

    loop = domain.boundary_idx
    nb = loop.size
    # arc length of the edge leaving each boundary node along the loop
    pts = domain.coords[loop]
    nxt = np.roll(np.arange(nb), -1)
    edge_len = np.linalg.norm(pts[nxt] - pts, axis=1)
    rows, cols, vals = [], [], []
    for i in range(nb):
        j = (i + 1) % nb
        w = 1.0 / edge_len[i]
        rows += [i, j, i, j]
        cols += [i, j, j, i]
        vals += [w, w, -w, -w]
    A_bnd = sp.csr_matrix((vals, (rows, cols)), shape=(nb, nb))
    M_bnd = 0.5 * (edge_len + np.roll(edge_len, 1))
    return DiscreteSystem(domain, A_bulk, M_bulk, A_bnd, M_bnd)


def inner_H(sys: DiscreteSystem, a: CoupledField, b: CoupledField) -> float:
    """Weighted inner product: bulk mass pairing plus boundary mass pairing."""
    if a.bulk.shape != (sys.n_bulk,) or b.bulk.shape != (sys.n_bulk,):
        raise ValueError("bulk field size does not match the system")
    if a.bnd.shape != (sys.n_bnd,) or b.bnd.shape != (sys.n_bnd,):
        raise ValueError("boundary field size does not match the system")
    return float(
        np.dot(a.bulk * sys.M_bulk, b.bulk) + np.dot(a.bnd * sys.M_bnd, b.bnd)
    )


def norm_H(sys: DiscreteSystem, a: CoupledField) -> float:
    return float(np.sqrt(max(inner_H(sys, a, a), 0.0)))


def normal_flux(sys: DiscreteSystem, u: CoupledField) -> np.ndarray:
    """Variational recovery of the outward normal derivative on the boundary.

    The boundary rows of the bulk stiffness applied to ``u`` carry the
    flux pairing against boundary test functions; dividing by the
    boundary weights gives the nodal flux.  Interior rows belong to the
    interior equations and do not enter.
    """
    if not sys.check_trace(u):
        raise ValueError("normal flux needs a trace-consistent field")
    au = sys.A_bulk @ u.bulk
    return au[sys.bidx] / sys.M_bnd
