"""Energy, dissipation and the per-step energy ledger.

Quadrature is the midpoint rule on the same locations the stencils use
(cells, faces, nodes, wall nodes, and half-faces next to the walls), so the
ledger of the scheme closes algebraically up to solver tolerances.  The
quantities are evaluated from the fields with array operations, not from the
assembled system matrices.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

from .errors import InfeasibleState
from .grid import Grid
from .state import MixtureState, PhysParams, density, interpolate_coeff

FEASIBILITY_TOL = 1e-10


@dataclass
class EnergyBreakdown:
    kinetic: float
    micro_rotational: float
    bulk_gradient: float
    bulk_potential: float
    surface_gradient: float
    surface_potential: float

    @property
    def total(self):
        return (self.kinetic + self.micro_rotational + self.bulk_gradient + self.bulk_potential
                + self.surface_gradient + self.surface_potential)

    def as_dict(self):
        d = asdict(self)
        d["total"] = self.total
        return d


@dataclass
class DissipationBreakdown:
    """Dissipation rates plus the non-rate increment term.

    Rates are multiplied by the step size in the ledger; ``increment_extra``
    is already an energy.  ``external_work`` is the body-force power, which
    enters the ledger with the opposite sign.
    """

    chemical: float
    shear: float
    exchange: float
    micro_div: float
    micro_sym: float
    micro_skew: float
    wall_slip: float
    wall_spin: float
    wall_ac: float
    sigma_extra: float
    eps_extra: float
    increment_extra: float
    external_work: float = 0.0

    RATE_FIELDS = ("chemical", "shear", "exchange", "micro_div", "micro_sym", "micro_skew",
                   "wall_slip", "wall_spin", "wall_ac", "sigma_extra", "eps_extra")

    @property
    def rate(self):
        return sum(getattr(self, k) for k in self.RATE_FIELDS)

    def nonnegative_fields(self):
        return {f.name: getattr(self, f.name) for f in fields(self) if f.name != "external_work"}

    def as_dict(self):
        return asdict(self)


# ---------------------------------------------------------------- helpers
def _face_avg_x(c):
    return 0.5 * (c + np.roll(c, 1, axis=0))


def _face_avg_y(c):
    return 0.5 * (c[:, 1:] + c[:, :-1])


def _node_avg(c):
    nx, ny = c.shape
    out = np.empty((nx, ny + 1))
    cm = np.roll(c, 1, axis=0)
    out[:, 1:-1] = 0.25 * (c[:, 1:] + c[:, :-1] + cm[:, 1:] + cm[:, :-1])
    out[:, 0] = 0.5 * (c[:, 0] + cm[:, 0])
    out[:, -1] = 0.5 * (c[:, -1] + cm[:, -1])
    return out


def _wall_rows(c):
    return np.stack([c[:, 0], c[:, -1]])


def _grad_parts(grid: Grid, f, trace):
    """x-face, interior y-face and wall half-face gradients of a cell field with wall values."""
    gx = (f - np.roll(f, 1, axis=0)) / grid.dx
    gy = (f[:, 1:] - f[:, :-1]) / grid.dy
    gw = np.stack([(f[:, 0] - trace[0]), (trace[1] - f[:, -1])]) / (0.5 * grid.dy)
    return gx, gy, gw


def dirichlet_energy(grid: Grid, f, trace, coeff=None):
    """``sum c |grad f|^2`` with wall half-faces; ``coeff`` is a cell field (default 1)."""
    gx, gy, gw = _grad_parts(grid, f, trace)
    if coeff is None:
        return float((np.sum(gx ** 2) + np.sum(gy ** 2)) * grid.dv + np.sum(gw ** 2) * 0.5 * grid.dv)
    cx, cy, cw = _face_avg_x(coeff), _face_avg_y(coeff), _wall_rows(coeff)
    return float((np.sum(cx * gx ** 2) + np.sum(cy * gy ** 2)) * grid.dv
                 + np.sum(cw * gw ** 2) * 0.5 * grid.dv)


def _kinetic(grid: Grid, rho_c, u):
    rx, ry = _face_avg_x(rho_c), _face_avg_y(rho_c)
    return 0.5 * grid.dv * float(np.sum(rx * u.x ** 2) + np.sum(ry * u.y[:, 1:-1] ** 2))


def _bulk_potential(state: MixtureState, params: PhysParams):
    pot = params.potential
    phi = state.phi
    if pot.is_obstacle:
        worst = max(np.abs(phi).max(), np.abs(state.psi).max())
        if worst > 1.0 + FEASIBILITY_TOL:
            raise InfeasibleState(f"obstacle state has |phi| or |psi| = {worst:.3e} > 1")
    return float(np.sum(pot.energy(phi)) * state.grid.dv)


def total_energy(state: MixtureState, params: PhysParams) -> EnergyBreakdown:
    g = state.grid
    rho, _ = density(state.phi, params)
    gpsi = g.surface_grad(state.psi)
    return EnergyBreakdown(
        kinetic=_kinetic(g, rho, state.u),
        micro_rotational=0.5 * g.dv * float(np.sum(rho * state.omega ** 2)),
        bulk_gradient=0.5 * dirichlet_energy(g, state.phi, state.psi),
        bulk_potential=_bulk_potential(state, params),
        surface_gradient=0.5 * g.dx * float(np.sum(gpsi ** 2)),
        surface_potential=g.dx * float(np.sum(params.boundary.energy(state.psi))),
    )


def q_regulariser_rate(grid: Grid, u, eps, q, u_coef=None):
    """Power of the lagged q-Laplacian velocity terms at ``u``, coefficients from ``u_coef``.

    Coefficients are ``eps |grad v|^(q-2)`` and ``eps |v|^(q-2)`` at cells,
    averaged to faces and nodes; with ``u_coef = u`` this is a discrete
    ``eps * (||grad u||_q^q + ||u||_q^q)``.
    """
    if eps == 0.0:
        return 0.0
    c = velocity_q_coefficients(grid, u if u_coef is None else u_coef, eps, q)
    z = grid.pack_velocity(u)
    d11 = (grid.DXX @ z).reshape(grid.cell_shape)
    d22 = (grid.DYY @ z).reshape(grid.cell_shape)
    sy = (grid.SY @ z).reshape(grid.yface_shape)
    sx = (grid.SX @ z).reshape(grid.yface_shape)
    rate = grid.dv * float(np.sum(c["cell"] * (d11 ** 2 + d22 ** 2)))
    rate += float(np.sum(c["node"] * (sy ** 2 + sx ** 2) * grid.node_weights.reshape(grid.yface_shape)))
    rate += grid.dv * float(np.sum(c["xface"] * u.x ** 2) + np.sum(c["yface"] * u.y[:, 1:-1] ** 2))
    return rate


def velocity_q_coefficients(grid: Grid, u, eps, q):
    z = grid.pack_velocity(u)
    d11 = grid.DXX @ z
    d22 = grid.DYY @ z
    sy = grid.SY @ z
    sx = grid.SX @ z
    grad2 = d11 ** 2 + d22 ** 2 + grid.NODE_TO_CELL @ (sy ** 2 + sx ** 2)
    cell = eps * grad2 ** (0.5 * (q - 2.0))
    ux, uy = grid.CELL_TO_VEL
    mag2 = (ux @ z) ** 2 + (uy @ z) ** 2
    zero = eps * mag2 ** (0.5 * (q - 2.0))
    return {
        "cell": cell.reshape(grid.cell_shape),
        "node": (grid.AN @ cell).reshape(grid.yface_shape),
        "xface": (grid.AX @ zero).reshape(grid.cell_shape),
        "yface": (grid.AY @ zero).reshape(grid.nx, grid.ny - 1),
    }


def omega_q_coefficients(grid: Grid, omega, omega_wall, eps, q):
    gx, gy, gw = _grad_parts(grid, omega, omega_wall)
    g2 = 0.5 * (gx ** 2 + np.roll(gx, -1, axis=0) ** 2)
    g2[:, :-1] += 0.5 * gy ** 2
    g2[:, 1:] += 0.5 * gy ** 2
    g2[:, 0] += 0.5 * gw[0] ** 2
    g2[:, -1] += 0.5 * gw[1] ** 2
    cell = eps * g2 ** (0.5 * (q - 2.0))
    return cell, eps * np.abs(omega) ** (q - 2.0)


def omega_q_rate(grid: Grid, omega, omega_wall, eps, q, coef_from=None):
    if eps == 0.0:
        return 0.0
    src = (omega, omega_wall) if coef_from is None else coef_from
    cell, zero = omega_q_coefficients(grid, src[0], src[1], eps, q)
    return dirichlet_energy(grid, omega, omega_wall, cell) + grid.dv * float(np.sum(zero * omega ** 2))


def dissipation(state_k: MixtureState, state_new: MixtureState, params: PhysParams, h) -> DissipationBreakdown:
    g = state_k.grid
    phi_k = state_k.phi
    u, w, ww = state_new.u, state_new.omega, state_new.omega_wall
    m = interpolate_coeff(phi_k, params.mobility)
    gx, gy = (state_new.mu - np.roll(state_new.mu, 1, axis=0)) / g.dx, np.diff(state_new.mu, axis=1) / g.dy
    chemical = g.dv * float(np.sum(_face_avg_x(m) * gx ** 2) + np.sum(_face_avg_y(m) * gy ** 2))

    eta = interpolate_coeff(phi_k, params.eta)
    d11, d22, d12 = g.sym_grad(u)
    shear = g.dv * float(np.sum(2.0 * eta * (d11 ** 2 + d22 ** 2)))
    shear += float(np.sum(4.0 * _node_avg(eta) * d12 ** 2 * g.node_weights.reshape(g.yface_shape)))

    eta_r = interpolate_coeff(phi_k, params.eta_r)
    exchange = g.dv * float(np.sum(4.0 * eta_r * (g.skew_grad(u) - w) ** 2))

    cd = interpolate_coeff(phi_k, params.cd)
    ca = interpolate_coeff(phi_k, params.ca)
    micro_sym = dirichlet_energy(g, w, ww, cd)
    micro_skew = dirichlet_energy(g, w, ww, ca)

    sigma_extra = params.sigma * g.dv * float(np.sum(((state_new.phi - phi_k) / h) ** 2))
    eps_extra = 0.0
    if params.eps > 0:
        eps_extra = (q_regulariser_rate(g, u, params.eps, params.q)
                     + omega_q_rate(g, w, ww, params.eps, params.q))

    rho_k, _ = density(phi_k, params)
    du = u.x - state_k.u.x, u.y - state_k.u.y
    inc = 0.5 * g.dv * float(np.sum(_face_avg_x(rho_k) * du[0] ** 2)
                             + np.sum(_face_avg_y(rho_k) * du[1][:, 1:-1] ** 2))
    inc += 0.5 * g.dv * float(np.sum(rho_k * (w - state_k.omega) ** 2))
    inc += 0.5 * dirichlet_energy(g, state_new.phi - phi_k, state_new.psi - state_k.psi)
    dpsi = state_new.psi - state_k.psi
    inc += 0.5 * g.dx * float(np.sum(params.boundary.zeta * dpsi ** 2 + g.surface_grad(dpsi) ** 2))

    fx, fy = params.body_force
    work = g.dv * float(fx * np.sum(u.x) + fy * np.sum(u.y[:, 1:-1]))

    return DissipationBreakdown(
        chemical=chemical, shear=shear, exchange=exchange, micro_div=0.0,
        micro_sym=micro_sym, micro_skew=micro_skew,
        wall_slip=g.dx * float(np.sum(u.wall ** 2)),
        wall_spin=g.dx * float(np.sum(ww ** 2)),
        wall_ac=g.dx * float(np.sum(state_new.L ** 2)),
        sigma_extra=sigma_extra, eps_extra=eps_extra, increment_extra=inc, external_work=work,
    )


def step_ledger(state_k: MixtureState, state_new: MixtureState, params: PhysParams, h):
    """Dissipation breakdown and the slack ``E_old - E_new - (dissipated) + work``.

    A nonnegative slack (up to tolerance) certifies the discrete energy
    inequality for the step.
    """
    e_old = total_energy(state_k, params).total
    e_new = total_energy(state_new, params).total
    d = dissipation(state_k, state_new, params, h)
    slack = e_old - e_new - d.increment_extra - h * d.rate + h * d.external_work
    return d, slack


def slack_tolerance(energy):
    return 1e-8 * (1.0 + abs(energy))


@dataclass
class ConservationReport:
    mass: float
    mass_drift: float
    phi_min: float
    phi_max: float
    psi_min: float
    psi_max: float
    div_norm: float
    wall_normal: float


def mass(state: MixtureState):
    return float(np.sum(state.phi) * state.grid.dv)


def conservation_and_bounds(state: MixtureState, state0: MixtureState, params: PhysParams | None = None):
    g = state.grid
    mval = mass(state)
    return ConservationReport(
        mass=mval, mass_drift=mval - mass(state0),
        phi_min=float(state.phi.min()), phi_max=float(state.phi.max()),
        psi_min=float(state.psi.min()), psi_max=float(state.psi.max()),
        div_norm=float(np.abs(g.divergence(state.u)).max()),
        wall_normal=float(max(np.abs(state.u.y[:, 0]).max(), np.abs(state.u.y[:, -1]).max())),
    )
