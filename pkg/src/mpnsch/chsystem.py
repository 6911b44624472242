"""Cahn-Hilliard / dynamic-boundary system for one time step.

Unknowns are ``phi`` (cells), ``mu`` (cells) and ``psi`` (walls).  With
mobility, transport gradients and concave forces taken at the old level,
the residuals are

    R1 = (phi - phi_k)/h + div(phi_k u) - div(m grad mu)
    R2 = mu + lap_psi(phi) - F0'(phi) - F1'(phi_k) - s (phi - phi_k) - xi
    R3 = (psi - psi_k)/h + u_wall . grad_G psi_k + d_nu phi + zeta psi
         + G0'(psi) + G1'(psi_k) - lap_G psi + xi_wall

with ``s = sigma/h`` and the wall chemical potential
``L = -(psi - psi_k)/h - u_wall . grad_G psi_k``.  ``xi`` terms are only
present for the obstacle potential.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .grid import Grid, VelocityField
from .state import MixtureState, PhysParams, interpolate_coeff


def transport_terms(grid: Grid, phi_k, psi_k, u: VelocityField):
    """Bulk transport ``div(phi_k u)`` and wall transport ``u_wall d_x psi_k``.

    The bulk term is conservative with face-averaged ``phi_k``.  The wall
    term multiplies the tangential wall velocity and the surface gradient
    where both live (x-face positions) and averages to the trace nodes.
    """
    ax = grid.AX @ phi_k.ravel()
    ay = grid.AY @ phi_k.ravel()
    T = grid.DX @ (ax * u.x.ravel()) + grid.DY @ (ay * u.y[:, 1:-1].ravel())
    g = grid.surface_grad(psi_k)
    prod = u.wall * g
    S = 0.5 * (prod + np.roll(prod, -1, axis=1))
    return T.reshape(grid.cell_shape), S


def young_force(grid: Grid, psi_k, L):
    """Wall load dual to the wall transport: ``dx * (L[i] + L[i-1])/2 * d_x psi_k[i]``."""
    g = grid.surface_grad(psi_k)
    return grid.dx * 0.5 * (L + np.roll(L, 1, axis=1)) * g


def mobility_operator(grid: Grid, phi_k, params: PhysParams):
    """``div(m grad .)`` with face-averaged mobility and no flux through the walls."""
    m = interpolate_coeff(phi_k, params.mobility).ravel()
    mx = grid.AX @ m
    my = grid.AY @ m
    return (-(grid.GX.T @ sp.diags(mx) @ grid.GX + grid.GY.T @ sp.diags(my) @ grid.GY)).tocsr()


class CHSystem:
    """Residual and Jacobian of the CH subsystem around a fixed old state."""

    def __init__(self, state_k: MixtureState, u_iter: VelocityField, params: PhysParams,
                 sigma_on=False, freeze_boundary=False):
        g = self.grid = state_k.grid
        self.params = params
        self.h = params.h
        self.phi_k = state_k.phi.ravel().copy()
        self.psi_k = state_k.psi.ravel().copy()
        self.freeze_boundary = freeze_boundary
        self.s = params.sigma / params.h if sigma_on else 0.0
        T, S = transport_terms(g, state_k.phi, state_k.psi, u_iter)
        self.T = T.ravel()
        self.S = S.ravel()
        if freeze_boundary:
            self.S = np.zeros_like(self.S)
        self.divm = mobility_operator(g, state_k.phi, params)
        self.Kcc, self.Kcw, self.Kwc, self.Kww = g.dirichlet_blocks
        pot, bp = params.potential, params.boundary
        self.f1_k = pot.concave(self.phi_k)[1]
        self.g1_k = bp.concave(self.psi_k)[1]
        self.zeta = bp.zeta
        self.N, self.Nw = g.n_cells, g.n_wall

    # --- nonlinear convex forces
    def bulk_force(self, phi):
        pot = self.params.potential
        if pot.is_obstacle:
            z = np.zeros_like(phi)
            return z, z
        _, d, c = pot.convex(phi)
        return d, c

    def wall_force(self, psi):
        _, d, c = self.params.boundary.convex(psi)
        return d, c

    # --- residuals
    def split(self, x):
        N = self.N
        phi, mu = x[:N], x[N:2 * N]
        psi = self.psi_k if self.freeze_boundary else x[2 * N:2 * N + self.Nw]
        return phi, mu, psi

    def residual(self, x, xi=0.0, xi_wall=0.0):
        phi, mu, psi = self.split(x)
        h = self.h
        f0, _ = self.bulk_force(phi)
        r1 = (phi - self.phi_k) / h + self.T - self.divm @ mu
        r2 = mu - (self.Kcc @ phi + self.Kcw @ psi) - f0 - self.f1_k - self.s * (phi - self.phi_k) - xi
        if self.freeze_boundary:
            return np.concatenate([r1, r2])
        g0, _ = self.wall_force(psi)
        r3 = ((psi - self.psi_k) / h + self.S + self.Kwc @ phi + self.Kww @ psi + self.zeta * psi
              + g0 + self.g1_k - self.grid.LAP_GAMMA @ psi + xi_wall)
        return np.concatenate([r1, r2, r3])

    def jacobian(self, x):
        phi, _, psi = self.split(x)
        N, Nw, h = self.N, self.Nw, self.h
        I = sp.identity(N, format="csr")
        _, c0 = self.bulk_force(phi)
        j11 = I / h
        j12 = -self.divm
        j21 = -self.Kcc - sp.diags(c0 + self.s)
        j22 = I
        if self.freeze_boundary:
            return sp.bmat([[j11, j12], [j21, j22]], format="csc")
        _, gc = self.wall_force(psi)
        j23 = -self.Kcw
        j31 = self.Kwc
        j33 = (sp.diags((1.0 / h + self.zeta) + gc) + self.Kww - self.grid.LAP_GAMMA)
        return sp.bmat([[j11, j12, None], [j21, j22, j23], [j31, None, j33]], format="csc")

    def wall_potential(self, psi):
        """``L = -(psi - psi_k)/h - u_wall . grad_G psi_k``."""
        if self.freeze_boundary:
            return np.zeros(self.Nw)
        return -(psi - self.psi_k) / self.h - self.S

    def initial_guess(self, state_k: MixtureState):
        parts = [state_k.phi.ravel(), state_k.mu.ravel()]
        if not self.freeze_boundary:
            parts.append(state_k.psi.ravel())
        return np.concatenate(parts).astype(float)
