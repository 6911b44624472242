"""Staggered (MAC) grid on a rectangle, periodic in x with walls at y = 0, L_y.

Layout, with ``i`` the x index and ``j`` the y index:

* cells ``(nx, ny)``: phi, mu, p, omega at ``((i+1/2)dx, (j+1/2)dy)``
* x-faces ``(nx, ny)``: u_x at ``(i dx, (j+1/2)dy)`` (left face of cell i)
* y-faces ``(nx, ny+1)``: u_y at ``((i+1/2)dx, j dy)``; rows 0 and ny are
  the walls, where u_y is held at zero
* nodes ``(nx, ny+1)``: cell corners at ``(i dx, j dy)``; shear lives here
* walls ``(2, nx)``: row 0 is the bottom wall, row 1 the top; wall traces
  (psi, L, omega) sit at the cell-center x positions, the tangential wall
  velocity at the x-face positions

Velocity-like unknowns carry explicit wall values (tangential velocity and
micro-rotation on Gamma).  Wall-normal derivatives use a half-cell one-sided
difference between the wall value and the first interior row, which is the
same closure as a ghost value ``g = 2*wall - interior``.

All operators are sparse matrices built once per grid; the functional
wrappers below reshape between arrays and flat vectors (C order).
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import MissingTrace, SizeMismatch

BOTTOM, TOP = 0, 1


class WallBC(str, Enum):
    GHOST_FROM_TRACE = "ghost_from_trace"
    NEUMANN = "neumann"


def _csr(rows, cols, vals, shape):
    m = sp.coo_matrix((np.ravel(vals), (np.ravel(rows), np.ravel(cols))), shape=shape).tocsr()
    m.sum_duplicates()
    m.eliminate_zeros()
    m.sort_indices()
    return m


@dataclass(frozen=True)
class VelocityField:
    """Face velocities plus the tangential velocity on both walls."""

    x: np.ndarray
    y: np.ndarray
    wall: np.ndarray

    def copy(self):
        return VelocityField(self.x.copy(), self.y.copy(), self.wall.copy())

    def scaled(self, a):
        return VelocityField(a * self.x, a * self.y, a * self.wall)


@dataclass(frozen=True)
class Grid:
    lx: float
    ly: float
    nx: int
    ny: int

    def __post_init__(self):
        if self.nx < 4 or self.ny < 4:
            raise ValueError("grid needs at least 4 cells in each direction")
        if self.lx <= 0 or self.ly <= 0:
            raise ValueError("grid lengths must be positive")

    # ------------------------------------------------------------------ sizes
    @property
    def dx(self):
        return self.lx / self.nx

    @property
    def dy(self):
        return self.ly / self.ny

    @property
    def dv(self):
        return self.dx * self.dy

    @property
    def area(self):
        return self.lx * self.ly

    @property
    def wall_length(self):
        """Total length of both walls."""
        return 2.0 * self.lx

    @property
    def n_cells(self):
        return self.nx * self.ny

    @property
    def n_yint(self):
        return self.nx * (self.ny - 1)

    @property
    def n_wall(self):
        return 2 * self.nx

    @property
    def n_nodes(self):
        return self.nx * (self.ny + 1)

    @property
    def n_velocity(self):
        """Length of the packed velocity vector ``[u_x, interior u_y, wall]``."""
        return self.n_cells + self.n_yint + self.n_wall

    @property
    def cell_shape(self):
        return (self.nx, self.ny)

    @property
    def yface_shape(self):
        return (self.nx, self.ny + 1)

    @property
    def wall_shape(self):
        return (2, self.nx)

    # ------------------------------------------------------------ coordinates
    def cell_centers(self):
        x = (np.arange(self.nx) + 0.5) * self.dx
        y = (np.arange(self.ny) + 0.5) * self.dy
        return np.meshgrid(x, y, indexing="ij")

    def xface_coords(self):
        x = np.arange(self.nx) * self.dx
        y = (np.arange(self.ny) + 0.5) * self.dy
        return np.meshgrid(x, y, indexing="ij")

    def yface_coords(self):
        x = (np.arange(self.nx) + 0.5) * self.dx
        y = np.arange(self.ny + 1) * self.dy
        return np.meshgrid(x, y, indexing="ij")

    def wall_x(self):
        """x positions of wall trace nodes (cell-center columns)."""
        return (np.arange(self.nx) + 0.5) * self.dx

    def wall_face_x(self):
        """x positions of tangential wall velocities (x-face columns)."""
        return np.arange(self.nx) * self.dx

    # ----------------------------------------------------------- field checks
    def check_cell(self, f, name="field"):
        f = np.asarray(f, dtype=float)
        if f.shape != self.cell_shape:
            raise SizeMismatch(f"{name} has shape {f.shape}, expected {self.cell_shape}")
        return f

    def check_yface(self, f, name="field"):
        f = np.asarray(f, dtype=float)
        if f.shape != self.yface_shape:
            raise SizeMismatch(f"{name} has shape {f.shape}, expected {self.yface_shape}")
        return f

    def check_wall(self, f, name="field"):
        f = np.asarray(f, dtype=float)
        if f.shape != self.wall_shape:
            raise SizeMismatch(f"{name} has shape {f.shape}, expected {self.wall_shape}")
        return f

    def check_velocity(self, u: VelocityField):
        self.check_cell(u.x, "u.x")
        self.check_yface(u.y, "u.y")
        self.check_wall(u.wall, "u.wall")
        return u

    # --------------------------------------------------------- packing helpers
    def zero_velocity(self):
        return VelocityField(np.zeros(self.cell_shape), np.zeros(self.yface_shape),
                             np.zeros(self.wall_shape))

    def pack_velocity(self, u: VelocityField):
        self.check_velocity(u)
        return np.concatenate([u.x.ravel(), u.y[:, 1:-1].ravel(), u.wall.ravel()])

    def unpack_velocity(self, z):
        z = np.asarray(z, dtype=float)
        if z.shape != (self.n_velocity,):
            raise SizeMismatch("packed velocity has wrong length")
        n, m = self.n_cells, self.n_yint
        y = np.zeros(self.yface_shape)
        y[:, 1:-1] = z[n:n + m].reshape(self.nx, self.ny - 1)
        return VelocityField(z[:n].reshape(self.cell_shape).copy(), y,
                             z[n + m:].reshape(self.wall_shape).copy())

    def velocity_weights(self):
        """Quadrature weights of the packed velocity inner product."""
        return np.concatenate([np.full(self.n_cells, self.dv), np.full(self.n_yint, self.dv),
                               np.full(self.n_wall, self.dx)])

    # ----------------------------------------------------------- index arrays
    @cached_property
    def _ij(self):
        return np.meshgrid(np.arange(self.nx), np.arange(self.ny), indexing="ij")

    def _cell(self, i, j):
        return (i % self.nx) * self.ny + j

    def _yint(self, i, j):
        # interior y-face (i, j) with 1 <= j <= ny-1
        return (i % self.nx) * (self.ny - 1) + (j - 1)

    def _node(self, i, j):
        return (i % self.nx) * (self.ny + 1) + j

    def _wall(self, w, i):
        return w * self.nx + (i % self.nx)

    # ---------------------------------------------------- difference matrices
    @cached_property
    def DX(self):
        """cells <- x-faces: ``(u[i+1,j] - u[i,j]) / dx``."""
        I, J = self._ij
        r = self._cell(I, J)
        rows = np.concatenate([r.ravel(), r.ravel()])
        cols = np.concatenate([self._cell(I + 1, J).ravel(), self._cell(I, J).ravel()])
        vals = np.concatenate([np.full(r.size, 1.0 / self.dx), np.full(r.size, -1.0 / self.dx)])
        return _csr(rows, cols, vals, (self.n_cells, self.n_cells))

    @cached_property
    def DY(self):
        """cells <- interior y-faces: ``(v[i,j+1] - v[i,j]) / dy`` with zero wall faces."""
        I, J = self._ij
        rows, cols, vals = [], [], []
        top = J + 1 <= self.ny - 1
        rows.append(self._cell(I, J)[top]); cols.append(self._yint(I, J + 1)[top])
        vals.append(np.full(top.sum(), 1.0 / self.dy))
        bot = J >= 1
        rows.append(self._cell(I, J)[bot]); cols.append(self._yint(I, J)[bot])
        vals.append(np.full(bot.sum(), -1.0 / self.dy))
        return _csr(np.concatenate(rows), np.concatenate(cols), np.concatenate(vals),
                    (self.n_cells, self.n_yint))

    @cached_property
    def GX(self):
        """x-faces <- cells: ``(p[i,j] - p[i-1,j]) / dx``."""
        return (-self.DX.T).tocsr()

    @cached_property
    def GY(self):
        """interior y-faces <- cells: ``(p[i,j] - p[i,j-1]) / dy``."""
        return (-self.DY.T).tocsr()

    @cached_property
    def DIV(self):
        """cells <- packed velocity."""
        return sp.hstack([self.DX, self.DY, sp.csr_matrix((self.n_cells, self.n_wall))]).tocsr()

    @cached_property
    def GW(self):
        """Wall half-face gradient d/dy, as ``(GW_cell, GW_wall)`` acting on (cells, walls).

        Bottom: ``(f[i,0] - w[i]) / (dy/2)``; top: ``(w[i] - f[i,ny-1]) / (dy/2)``.
        """
        i = np.arange(self.nx)
        k = 2.0 / self.dy
        rows = np.concatenate([self._wall(BOTTOM, i), self._wall(TOP, i)])
        cc = np.concatenate([self._cell(i, 0), self._cell(i, self.ny - 1)])
        gc = _csr(rows, cc, np.concatenate([np.full(self.nx, k), np.full(self.nx, -k)]),
                  (self.n_wall, self.n_cells))
        gw = _csr(rows, rows, np.concatenate([np.full(self.nx, -k), np.full(self.nx, k)]),
                  (self.n_wall, self.n_wall))
        return gc, gw

    @property
    def wall_halfface_weight(self):
        return 0.5 * self.dv

    @cached_property
    def wall_sign(self):
        """Outward normal y-component per wall entry: -1 bottom, +1 top."""
        return np.concatenate([-np.ones(self.nx), np.ones(self.nx)])

    @cached_property
    def DG(self):
        """walls <- walls: surface gradient ``(f[i] - f[i-1]) / dx`` at x-face positions."""
        w, i = np.meshgrid([0, 1], np.arange(self.nx), indexing="ij")
        r = self._wall(w, i).ravel()
        rows = np.concatenate([r, r])
        cols = np.concatenate([r, self._wall(w, i - 1).ravel()])
        vals = np.concatenate([np.full(r.size, 1.0 / self.dx), np.full(r.size, -1.0 / self.dx)])
        return _csr(rows, cols, vals, (self.n_wall, self.n_wall))

    @cached_property
    def LAP_GAMMA(self):
        return (-(self.DG.T @ self.DG)).tocsr()

    @cached_property
    def dirichlet_blocks(self):
        """Blocks of ``-Laplacian`` for a cell field coupled to wall values.

        Returns ``(Kcc, Kcw, Kwc, Kww)`` with the discrete Dirichlet form
        ``a((f,w),(g,v)) = dv*[g.Kcc f + g.Kcw w] + dx*[v.Kwc f + v.Kww w]``,
        so ``-lap f = Kcc f + Kcw w`` and ``d_nu f = Kwc f + Kww w``.
        """
        gc, gw = self.GW
        half = 0.5 * self.dy  # weight dx*dy/2 divided by the cell volume dv, times dy
        Kcc = self.GX.T @ self.GX + self.GY.T @ self.GY + 0.5 * (gc.T @ gc)
        Kcw = 0.5 * (gc.T @ gw)
        Kwc = half * (gw.T @ gc)
        Kww = half * (gw.T @ gw)
        return tuple(m.tocsr() for m in (Kcc, Kcw, Kwc, Kww))

    @cached_property
    def LAP_NEUMANN(self):
        return (-(self.GX.T @ self.GX + self.GY.T @ self.GY)).tocsr()

    # node operators for the shear and curl
    @cached_property
    def SY(self):
        """nodes <- packed velocity: d u_x / dy at nodes (one-sided to wall values)."""
        nx, ny = self.nx, self.ny
        N = self.n_cells
        off_w = self.n_cells + self.n_yint
        I, Jn = np.meshgrid(np.arange(nx), np.arange(1, ny), indexing="ij")
        rows = [self._node(I, Jn).ravel()] * 2
        cols = [self._cell(I, Jn).ravel(), self._cell(I, Jn - 1).ravel()]
        vals = [np.full(I.size, 1.0 / self.dy), np.full(I.size, -1.0 / self.dy)]
        i = np.arange(nx)
        k = 2.0 / self.dy
        rows += [self._node(i, 0), self._node(i, 0), self._node(i, ny), self._node(i, ny)]
        cols += [self._cell(i, 0), off_w + self._wall(BOTTOM, i),
                 off_w + self._wall(TOP, i), self._cell(i, ny - 1)]
        vals += [np.full(nx, k), np.full(nx, -k), np.full(nx, k), np.full(nx, -k)]
        return _csr(np.concatenate(rows), np.concatenate(cols), np.concatenate(vals),
                    (self.n_nodes, self.n_velocity))

    @cached_property
    def SX(self):
        """nodes <- packed velocity: d u_y / dx at interior nodes (zero on walls)."""
        I, Jn = np.meshgrid(np.arange(self.nx), np.arange(1, self.ny), indexing="ij")
        off = self.n_cells
        r = self._node(I, Jn).ravel()
        rows = np.concatenate([r, r])
        cols = np.concatenate([off + self._yint(I, Jn).ravel(), off + self._yint(I - 1, Jn).ravel()])
        vals = np.concatenate([np.full(r.size, 1.0 / self.dx), np.full(r.size, -1.0 / self.dx)])
        return _csr(rows, cols, vals, (self.n_nodes, self.n_velocity))

    @cached_property
    def node_weights(self):
        w = np.full((self.nx, self.ny + 1), self.dv)
        w[:, 0] *= 0.5
        w[:, -1] *= 0.5
        return w.ravel()

    @cached_property
    def NODE_TO_CELL(self):
        """cells <- nodes: mean of the four corners."""
        I, J = self._ij
        r = self._cell(I, J).ravel()
        rows = np.concatenate([r] * 4)
        cols = np.concatenate([self._node(I, J).ravel(), self._node(I + 1, J).ravel(),
                               self._node(I, J + 1).ravel(), self._node(I + 1, J + 1).ravel()])
        return _csr(rows, cols, np.full(rows.size, 0.25), (self.n_cells, self.n_nodes))

    @cached_property
    def CURL(self):
        """cells <- packed velocity: node curl ``d_x u_y - d_y u_x`` averaged to cells."""
        return (self.NODE_TO_CELL @ (self.SX - self.SY)).tocsr()

    @cached_property
    def DXX(self):
        """cells <- packed velocity: ``d_x u_x``."""
        return sp.hstack([self.DX, sp.csr_matrix((self.n_cells, self.n_yint + self.n_wall))]).tocsr()

    @cached_property
    def DYY(self):
        """cells <- packed velocity: ``d_y u_y``."""
        return sp.hstack([sp.csr_matrix((self.n_cells, self.n_cells)), self.DY,
                          sp.csr_matrix((self.n_cells, self.n_wall))]).tocsr()

    # averaging of cell coefficients
    @cached_property
    def AX(self):
        """x-faces <- cells: mean of the two neighbours."""
        I, J = self._ij
        r = self._cell(I, J).ravel()
        return _csr(np.concatenate([r, r]),
                    np.concatenate([r, self._cell(I - 1, J).ravel()]),
                    np.full(2 * r.size, 0.5), (self.n_cells, self.n_cells))

    @cached_property
    def AY(self):
        """interior y-faces <- cells: mean of the two neighbours."""
        I, Jn = np.meshgrid(np.arange(self.nx), np.arange(1, self.ny), indexing="ij")
        r = self._yint(I, Jn).ravel()
        return _csr(np.concatenate([r, r]),
                    np.concatenate([self._cell(I, Jn).ravel(), self._cell(I, Jn - 1).ravel()]),
                    np.full(2 * r.size, 0.5), (self.n_yint, self.n_cells))

    @cached_property
    def AN(self):
        """nodes <- cells: mean of the adjacent cells (two on walls, four inside)."""
        I, Jn = np.meshgrid(np.arange(self.nx), np.arange(1, self.ny), indexing="ij")
        r = self._node(I, Jn).ravel()
        rows = [r] * 4
        cols = [self._cell(I, Jn).ravel(), self._cell(I - 1, Jn).ravel(),
                self._cell(I, Jn - 1).ravel(), self._cell(I - 1, Jn - 1).ravel()]
        vals = [np.full(r.size, 0.25)] * 4
        i = np.arange(self.nx)
        for jn, jc in ((0, 0), (self.ny, self.ny - 1)):
            rows += [self._node(i, jn)] * 2
            cols += [self._cell(i, jc), self._cell(i - 1, jc)]
            vals += [np.full(self.nx, 0.5)] * 2
        return _csr(np.concatenate(rows), np.concatenate(cols), np.concatenate(vals),
                    (self.n_nodes, self.n_cells))

    @cached_property
    def AW(self):
        """walls <- cells: value of the adjacent first/last row cell."""
        i = np.arange(self.nx)
        rows = np.concatenate([self._wall(BOTTOM, i), self._wall(TOP, i)])
        cols = np.concatenate([self._cell(i, 0), self._cell(i, self.ny - 1)])
        return _csr(rows, cols, np.ones(rows.size), (self.n_wall, self.n_cells))

    @cached_property
    def CELL_TO_VEL(self):
        """Cell-centered velocity components from the packed velocity: ``(Ux, Uy)``."""
        I, J = self._ij
        r = self._cell(I, J).ravel()
        ux = _csr(np.concatenate([r, r]), np.concatenate([r, self._cell(I + 1, J).ravel()]),
                  np.full(2 * r.size, 0.5), (self.n_cells, self.n_velocity))
        rows, cols = [], []
        top = J + 1 <= self.ny - 1
        rows.append(r[top.ravel()]); cols.append(self.n_cells + self._yint(I, J + 1)[top])
        bot = J >= 1
        rows.append(r[bot.ravel()]); cols.append(self.n_cells + self._yint(I, J)[bot])
        rows = np.concatenate(rows)
        uy = _csr(rows, np.concatenate(cols), np.full(rows.size, 0.5),
                  (self.n_cells, self.n_velocity))
        return ux, uy

    # ------------------------------------------------------ functional forms
    def divergence(self, u: VelocityField):
        """Cell divergence of a face velocity (wall normals are taken as given)."""
        self.check_velocity(u)
        return (np.roll(u.x, -1, axis=0) - u.x) / self.dx + (u.y[:, 1:] - u.y[:, :-1]) / self.dy

    def gradient(self, p):
        """Face gradient of a cell field; zero on the wall-normal faces."""
        p = self.check_cell(p, "p")
        gx = (p - np.roll(p, 1, axis=0)) / self.dx
        gy = np.zeros(self.yface_shape)
        gy[:, 1:-1] = (p[:, 1:] - p[:, :-1]) / self.dy
        return VelocityField(gx, gy, np.zeros(self.wall_shape))

    def curl_of_vector(self, u: VelocityField):
        """Scalar curl ``d_x u_y - d_y u_x`` at cell centers."""
        return (self.CURL @ self.pack_velocity(u)).reshape(self.cell_shape)

    def curl_of_scalar(self, omega):
        """Adjoint of :meth:`curl_of_vector` under the face/wall quadrature.

        Returns a VelocityField whose face parts approximate
        ``(d_y omega, -d_x omega)`` and whose wall part carries the boundary
        term of the integration by parts.
        """
        omega = self.check_cell(omega, "omega")
        z = (self.CURL.T @ (self.dv * omega.ravel())) / self.velocity_weights()
        return self.unpack_velocity(z)

    def sym_grad(self, u: VelocityField):
        """Entries of Du: ``(d11, d22)`` at cells and ``d12`` at nodes."""
        z = self.pack_velocity(u)
        d11 = (self.DXX @ z).reshape(self.cell_shape)
        d22 = (self.DYY @ z).reshape(self.cell_shape)
        d12 = (0.5 * ((self.SX + self.SY) @ z)).reshape(self.yface_shape)
        return d11, d22, d12

    def skew_grad(self, u: VelocityField):
        """The entry ``w12 = (d_1 u_2 - d_2 u_1) / 2`` of Wu at cells."""
        return 0.5 * self.curl_of_vector(u)

    def laplacian_cell(self, f, wall_bc=WallBC.NEUMANN, psi=None):
        """Five-point Laplacian with a ghost closure on the walls."""
        f = self.check_cell(f, "f")
        wall_bc = WallBC(wall_bc)
        if wall_bc is WallBC.NEUMANN:
            return (self.LAP_NEUMANN @ f.ravel()).reshape(self.cell_shape)
        if psi is None:
            raise MissingTrace("GhostFromTrace closure needs wall values")
        psi = self.check_wall(psi, "psi")
        Kcc, Kcw, _, _ = self.dirichlet_blocks
        return -(Kcc @ f.ravel() + Kcw @ psi.ravel()).reshape(self.cell_shape)

    def surface_grad(self, psi):
        """``(psi[i] - psi[i-1]) / dx``, centered at the x-face positions."""
        psi = self.check_wall(psi, "psi")
        return (psi - np.roll(psi, 1, axis=1)) / self.dx

    def surface_laplacian(self, psi):
        psi = self.check_wall(psi, "psi")
        return (np.roll(psi, -1, axis=1) - 2.0 * psi + np.roll(psi, 1, axis=1)) / self.dx ** 2

    def normal_derivative(self, phi, psi, wall=None):
        """Outward normal derivative ``(psi - phi_first) / (dy/2)`` on each wall."""
        phi = self.check_cell(phi, "phi")
        psi = self.check_wall(psi, "psi")
        first = np.stack([phi[:, 0], phi[:, -1]])
        dn = (psi - first) / (0.5 * self.dy)
        return dn if wall is None else dn[wall]

    def cell_velocity(self, u: VelocityField):
        """Face velocities averaged to cell centers."""
        self.check_velocity(u)
        return 0.5 * (u.x + np.roll(u.x, -1, axis=0)), 0.5 * (u.y[:, 1:] + u.y[:, :-1])

    # -------------------------------------------------------- inner products
    def cell_inner(self, a, b):
        return float(np.sum(a * b) * self.dv)

    def velocity_inner(self, u: VelocityField, v: VelocityField, include_wall=False):
        s = np.sum(u.x * v.x) * self.dv + np.sum(u.y[:, 1:-1] * v.y[:, 1:-1]) * self.dv
        if include_wall:
            s += np.sum(u.wall * v.wall) * self.dx
        return float(s)

    def wall_inner(self, a, b):
        return float(np.sum(a * b) * self.dx)
