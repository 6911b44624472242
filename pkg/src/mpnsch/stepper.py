"""Implicit time step: Picard iteration between the Cahn-Hilliard substep and
the coupled momentum / micro-rotation saddle-point solve.

The momentum system is assembled in integrated (weak) form on the packed
unknown ``[u_x, interior u_y, u_wall, omega, omega_wall]``.  Convection and
the relative-flux transport are the skew-symmetric part of the conservative
operator ``div(G q)`` with mass flux ``G = rho_k u_iter + J``; together with
the ``-(rho - rho_k)/(2h)`` term this reproduces the stabilised form of the
scheme and makes the kinetic-energy balance exact for any ``u_iter``.
Wall friction and the Young stress act on the tangential wall unknowns, so
the Navier slip condition is the natural boundary condition of the form.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from . import diagnostics
from .chsystem import CHSystem, transport_terms, young_force
from .errors import (Breakdown, LinearSolveFailed, MaxIterExceeded, NewtonDiverged,
                     PicardDiverged, DomainError)
from .grid import Grid, VelocityField
from .linsolve import SolveOptions, solve, solve_saddle
from .potentials import PotentialKind
from .state import MixtureState, PhysParams, density, interpolate_coeff


@dataclass(frozen=True)
class StepConfig:
    picard_tol: float = 1e-8
    picard_max: int = 50
    newton_tol: float = 1e-10
    newton_max: int = 30
    under_relaxation: float = 1.0
    enable_q_regulariser: bool = False
    enable_sigma_regulariser: bool = False
    solve_micro: bool = True
    freeze_boundary: bool = False
    max_halvings: int = 3

    def __post_init__(self):
        if self.picard_tol <= 0 or self.newton_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.picard_max < 1 or self.newton_max < 1:
            raise ValueError("iteration limits must be at least 1")
        if not 0 < self.under_relaxation <= 1:
            raise ValueError("under_relaxation must lie in (0, 1]")


def effective_params(params: PhysParams, cfg: StepConfig) -> PhysParams:
    """Parameters with the switched-off regularisers zeroed."""
    kw = {}
    if not cfg.enable_sigma_regulariser:
        kw["sigma"] = 0.0
    if not cfg.enable_q_regulariser:
        kw["eps"] = 0.0
    return replace(params, **kw) if kw else params


@dataclass
class CHResult:
    phi: np.ndarray
    mu: np.ndarray
    psi: np.ndarray
    L: np.ndarray
    xi: np.ndarray
    xi_wall: np.ndarray
    newton_iters: int = 0
    residual: float = 0.0
    active: object = None
    pdas_iters: int = 0


@dataclass
class FluxFields:
    Jx: np.ndarray
    Jy: np.ndarray
    R: np.ndarray


@dataclass
class MomentumResult:
    u: VelocityField
    omega: np.ndarray
    omega_wall: np.ndarray
    p: np.ndarray
    residual: float


@dataclass
class StepReport:
    t: float
    h: float
    energy_old: diagnostics.EnergyBreakdown
    energy_new: diagnostics.EnergyBreakdown
    dissipation: diagnostics.DissipationBreakdown
    slack: float
    tol_slack: float
    mass: float
    mass_change: float
    phi_min: float
    phi_max: float
    psi_min: float
    psi_max: float
    div_norm: float
    picard_iters: int
    newton_iters: int
    pdas_iters: int
    linear_residual: float
    ch_residual: float
    picard_update: float
    halvings: int = 0
    history: list = field(default_factory=list)

    @property
    def passed(self):
        return self.slack >= -self.tol_slack


# ------------------------------------------------------------ CH substep
def _newton(system: CHSystem, x0, cfg: StepConfig, log_domain: bool):
    x = x0.copy()
    N = system.N
    r = system.residual(x)
    rn = np.abs(r).max()
    history = [rn]
    for it in range(1, cfg.newton_max + 1):
        if rn <= cfg.newton_tol:
            return x, it - 1, rn
        J = system.jacobian(x)
        try:
            dx, _ = solve(J, -r)
        except (Breakdown, MaxIterExceeded) as exc:
            raise LinearSolveFailed(f"CH Jacobian solve failed: {exc}", x=x, residual=rn) from exc
        alpha = 1.0
        if log_domain:
            phi, dphi = x[:N], dx[:N]
            room = np.where(dphi > 0, (1.0 - phi) / np.maximum(dphi, 1e-300),
                            np.where(dphi < 0, (1.0 + phi) / np.maximum(-dphi, 1e-300), np.inf))
            alpha = min(1.0, 0.99 * float(room.min()))
        accepted = False
        for _ in range(40):
            xt = x + alpha * dx
            try:
                rt = system.residual(xt)
            except DomainError:
                alpha *= 0.5
                continue
            rtn = np.abs(rt).max()
            if rtn <= (1.0 - 1e-4 * alpha) * rn or rtn <= cfg.newton_tol:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            raise NewtonDiverged("line search failed in the CH Newton iteration", x=x,
                                 residual=rn, history=history)
        x, r, rn = xt, rt, rtn
        history.append(rn)
        if np.abs(alpha * dx).max() <= 1e-15 * (1.0 + np.abs(x).max()):
            return x, it, rn
    if rn <= cfg.newton_tol:
        return x, cfg.newton_max, rn
    raise NewtonDiverged(f"CH Newton did not reach {cfg.newton_tol:g} (residual {rn:.3e})",
                         x=x, residual=rn, history=history)


def ch_substep(state_k: MixtureState, u_iter: VelocityField, params: PhysParams,
               cfg: StepConfig = StepConfig()) -> CHResult:
    """Solve the CH / dynamic-boundary subsystem for (phi, mu, psi) and L.

    Newton with backtracking on the max-norm residual; for the logarithmic
    potential each step is also shortened to stay inside (-1, 1).
    """
    pot = params.potential
    if pot.is_obstacle:
        from .obstacle import pdas_ch_substep
        return pdas_ch_substep(state_k, u_iter, params, cfg)
    g = state_k.grid
    system = CHSystem(state_k, u_iter, params, sigma_on=params.sigma > 0,
                      freeze_boundary=cfg.freeze_boundary)
    x0 = system.initial_guess(state_k)
    x, iters, res = _newton(system, x0, cfg, pot.kind is PotentialKind.LOGARITHMIC)
    phi, mu, psi = system.split(x)
    L = system.wall_potential(psi)
    return CHResult(phi.reshape(g.cell_shape).copy(), mu.reshape(g.cell_shape).copy(),
                    np.asarray(psi).reshape(g.wall_shape).copy(), L.reshape(g.wall_shape),
                    np.zeros(g.cell_shape), np.zeros(g.wall_shape), iters, res)


# ------------------------------------------------------------ fluxes
def flux_fields(grid: Grid, phi_k, mu_new, params: PhysParams, phi_new=None, u=None) -> FluxFields:
    """Relative flux J on faces and the density residual R in cells.

    ``J = -avg(rho'(phi_k)) avg(m(phi_k)) grad mu``.  R follows the discrete
    mass identity ``(rho(phi) - rho(phi_k))/h + div(rho_k u + J)`` when the
    new phase field and velocity are given; otherwise the pointwise form
    ``-m grad mu . grad rho'(phi_k)`` averaged to cells is returned.
    """
    _, drho = density(phi_k, params)
    m = interpolate_coeff(phi_k, params.mobility)
    gx = (mu_new - np.roll(mu_new, 1, axis=0)) / grid.dx
    gy = np.zeros(grid.yface_shape)
    gy[:, 1:-1] = np.diff(mu_new, axis=1) / grid.dy
    cx = 0.5 * (drho + np.roll(drho, 1, axis=0)) * 0.5 * (m + np.roll(m, 1, axis=0))
    cy = np.zeros(grid.yface_shape)
    cy[:, 1:-1] = 0.25 * (drho[:, 1:] + drho[:, :-1]) * (m[:, 1:] + m[:, :-1])
    Jx, Jy = -cx * gx, -cy * gy
    if phi_new is not None and u is not None:
        rho_k, _ = density(phi_k, params)
        rho_new, _ = density(phi_new, params)
        rx = 0.5 * (rho_k + np.roll(rho_k, 1, axis=0))
        ry = np.zeros(grid.yface_shape)
        ry[:, 1:-1] = 0.5 * (rho_k[:, 1:] + rho_k[:, :-1])
        G = VelocityField(rx * u.x + Jx, ry * u.y + Jy, np.zeros(grid.wall_shape))
        R = (rho_new - rho_k) / params.h + grid.divergence(G)
    else:
        dx_r = (drho - np.roll(drho, 1, axis=0)) / grid.dx
        dy_r = np.zeros(grid.yface_shape)
        dy_r[:, 1:-1] = np.diff(drho, axis=1) / grid.dy
        px = -0.5 * (m + np.roll(m, 1, axis=0)) * gx * dx_r
        py = -0.25 * (m[:, 1:] + m[:, :-1]) * gy[:, 1:-1] * dy_r[:, 1:-1]
        R = 0.5 * (px + np.roll(px, -1, axis=0))
        R[:, :-1] += 0.5 * py
        R[:, 1:] += 0.5 * py
    return FluxFields(Jx, Jy, R)


# ------------------------------------------------------------ momentum
def _skew_transport(grid: Grid, Gx, Gy):
    """Skew parts of the conservative transport for the velocity and omega unknowns.

    Entry ``(a, b) = F_ab / 2`` where ``F_ab`` is the integrated mass flux
    from control volume ``a`` into neighbour ``b``; neighbours that are
    Dirichlet zeros (wall-normal velocity) drop out.
    """
    nx, ny, dx, dy = grid.nx, grid.ny, grid.dx, grid.dy
    I, J = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    rows, cols, vals = [], [], []

    def add(a, b, F):
        rows.extend([a.ravel(), b.ravel()])
        cols.extend([b.ravel(), a.ravel()])
        vals.extend([0.5 * F.ravel(), -0.5 * F.ravel()])

    # x-momentum control volumes at x-faces
    cell = grid._cell
    add(cell(I, J), cell(I + 1, J), 0.5 * (Gx + np.roll(Gx, -1, axis=0)) * dy)
    In, Jn = np.meshgrid(np.arange(nx), np.arange(ny - 1), indexing="ij")
    Fn = 0.5 * (np.roll(Gy, 1, axis=0)[:, 1:-1] + Gy[:, 1:-1]) * dx
    add(cell(In, Jn), cell(In, Jn + 1), Fn)
    # y-momentum control volumes at interior y-faces
    off = grid.n_cells
    yint = grid._yint
    if ny >= 3:
        Iy, Jy = np.meshgrid(np.arange(nx), np.arange(1, ny - 1), indexing="ij")
        Fc = 0.5 * (Gy[:, 1:-2] + Gy[:, 2:-1]) * dx
        add(off + yint(Iy, Jy), off + yint(Iy, Jy + 1), Fc)
    Ie, Je = np.meshgrid(np.arange(nx), np.arange(1, ny), indexing="ij")
    Gxe = np.roll(Gx, -1, axis=0)
    Fe = 0.5 * (Gxe[:, :-1] + Gxe[:, 1:]) * dy
    add(off + yint(Ie, Je), off + yint(Ie + 1, Je), Fe)
    r = np.concatenate(rows); c = np.concatenate(cols); v = np.concatenate(vals)
    Ku = sp.coo_matrix((v, (r, c)), shape=(grid.n_velocity, grid.n_velocity)).tocsr()

    rows, cols, vals = [], [], []
    add(cell(I, J), cell(I + 1, J), np.roll(Gx, -1, axis=0) * dy)
    add(cell(In, Jn), cell(In, Jn + 1), Gy[:, 1:-1] * dx)
    r = np.concatenate(rows); c = np.concatenate(cols); v = np.concatenate(vals)
    Kw = sp.coo_matrix((v, (r, c)), shape=(grid.n_cells, grid.n_cells)).tocsr()
    return Ku, Kw


def _omega_dirichlet(grid: Grid, coeff_c):
    """Integrated form ``sum c grad w . grad z`` on ``[omega, omega_wall]`` with wall half-faces."""
    c = coeff_c.ravel()
    gc, gw = grid.GW
    cx, cy, cw = grid.AX @ c, grid.AY @ c, grid.AW @ c
    Gfull = sp.hstack([gc, gw]).tocsr()
    GX = sp.hstack([grid.GX, sp.csr_matrix((grid.n_cells, grid.n_wall))]).tocsr()
    GY = sp.hstack([grid.GY, sp.csr_matrix((grid.n_yint, grid.n_wall))]).tocsr()
    return grid.dv * (GX.T @ sp.diags(cx) @ GX + GY.T @ sp.diags(cy) @ GY
                      + 0.5 * (Gfull.T @ sp.diags(cw) @ Gfull))


def assemble_momentum(state_k: MixtureState, phi_new, mu_new, psi_new, L_new,
                      u_iter: VelocityField, omega_iter, params: PhysParams, cfg: StepConfig):
    """Return ``(A, B, f)`` of the saddle system on ``[u, omega, omega_wall]``."""
    g = state_k.grid
    h = params.h
    N, Nw, nv = g.n_cells, g.n_wall, g.n_velocity
    dv = g.dv
    phi_k = state_k.phi
    eta = interpolate_coeff(phi_k, params.eta).ravel()
    eta_r = interpolate_coeff(phi_k, params.eta_r).ravel()
    cdca = (interpolate_coeff(phi_k, params.cd) + interpolate_coeff(phi_k, params.ca)).ravel()
    rho_new, _ = density(phi_new, params)
    rho_k, _ = density(phi_k, params)
    rho_new, rho_k = rho_new.ravel(), rho_k.ravel()

    def faces(c):
        return np.concatenate([g.AX @ c, g.AY @ c, np.zeros(Nw)])

    wts = g.velocity_weights()
    mass_u = 0.5 * (faces(rho_new) + faces(rho_k)) / h * wts
    mass_w = 0.5 * (rho_new + rho_k) / h * dv

    # mass flux through control volume faces
    fl = flux_fields(g, phi_k, mu_new, params)
    rkx = 0.5 * (rho_k.reshape(g.cell_shape) + np.roll(rho_k.reshape(g.cell_shape), 1, axis=0))
    rky = np.zeros(g.yface_shape)
    rky[:, 1:-1] = (g.AY @ rho_k).reshape(g.nx, g.ny - 1)
    Gx = rkx * u_iter.x + fl.Jx
    Gy = rky * u_iter.y + fl.Jy
    Ku, Kw = _skew_transport(g, Gx, Gy)

    # viscous stress 2 eta Du : Dv
    shear_op = (g.SX + g.SY).tocsr()
    eta_n = g.AN @ eta
    A_visc = (g.DXX.T @ sp.diags(2.0 * eta * dv) @ g.DXX + g.DYY.T @ sp.diags(2.0 * eta * dv) @ g.DYY
              + shear_op.T @ sp.diags(eta_n * g.node_weights) @ shear_op)
    slip = np.concatenate([np.zeros(N + g.n_yint), np.full(Nw, g.dx)])
    A_uu = sp.diags(mass_u + slip) + Ku + A_visc

    A_ww = sp.bmat([[sp.diags(mass_w) + Kw, None], [None, sp.csr_matrix((Nw, Nw))]], format="csr")
    A_ww = A_ww + _omega_dirichlet(g, cdca) + sp.diags(np.concatenate([np.zeros(N), np.full(Nw, g.dx)]))

    # rotational exchange eta_r (curl u - 2 omega)(curl v - 2 z)
    E = sp.hstack([g.CURL, -2.0 * sp.identity(N), sp.csr_matrix((N, Nw))]).tocsr()
    A_ex = E.T @ sp.diags(eta_r * dv) @ E

    f_u = faces(rho_k) / h * wts * g.pack_velocity(state_k.u)
    ax = g.AX @ phi_k.ravel()
    ay = g.AY @ phi_k.ravel()
    cap = -dv * np.concatenate([ax * (g.GX @ mu_new.ravel()), ay * (g.GY @ mu_new.ravel()), np.zeros(Nw)])
    f_u = f_u + cap
    if not cfg.freeze_boundary:
        f_u[N + g.n_yint:] += young_force(g, state_k.psi, L_new).ravel()
    fx, fy = params.body_force
    f_u[:N] += dv * fx
    f_u[N:N + g.n_yint] += dv * fy
    f_w = np.concatenate([rho_k / h * dv * state_k.omega.ravel(), np.zeros(Nw)])

    if params.eps > 0:
        c = diagnostics.velocity_q_coefficients(g, u_iter, params.eps, params.q)
        A_uu = A_uu + (g.DXX.T @ sp.diags(c["cell"].ravel() * dv) @ g.DXX
                       + g.DYY.T @ sp.diags(c["cell"].ravel() * dv) @ g.DYY
                       + g.SY.T @ sp.diags(c["node"].ravel() * g.node_weights) @ g.SY
                       + g.SX.T @ sp.diags(c["node"].ravel() * g.node_weights) @ g.SX
                       + sp.diags(np.concatenate([c["xface"].ravel(), c["yface"].ravel(), np.zeros(Nw)]) * wts))
        cc, cz = diagnostics.omega_q_coefficients(g, omega_iter[0], omega_iter[1], params.eps, params.q)
        A_ww = A_ww + _omega_dirichlet(g, cc) + sp.diags(np.concatenate([cz.ravel() * dv, np.zeros(Nw)]))

    A = sp.bmat([[A_uu, None], [None, A_ww]], format="csr") + A_ex
    B = sp.hstack([-dv * g.DIV, sp.csr_matrix((N, N + Nw))]).tocsr()
    f = np.concatenate([f_u, f_w])
    return A.tocsr(), B, f


def momentum_substep(state_k: MixtureState, phi_new, mu_new, psi_new, L_new,
                     u_iter: VelocityField, omega_iter, params: PhysParams,
                     cfg: StepConfig = StepConfig()) -> MomentumResult:
    """One linear saddle solve for (u, omega, p) with lagged coefficients."""
    g = state_k.grid
    N, Nw, nv = g.n_cells, g.n_wall, g.n_velocity
    A, B, f = assemble_momentum(state_k, phi_new, mu_new, psi_new, L_new, u_iter, omega_iter, params, cfg)
    if not cfg.solve_micro:
        A, B, f = A[:nv, :nv], B[:, :nv], f[:nv]
    try:
        z, p, stats = solve_saddle(A, B, f)
    except (Breakdown, MaxIterExceeded) as exc:
        raise LinearSolveFailed(f"momentum saddle solve failed: {exc}", x=exc.x) from exc
    u = g.unpack_velocity(z[:nv])
    if cfg.solve_micro:
        omega = z[nv:nv + N].reshape(g.cell_shape)
        omega_wall = z[nv + N:].reshape(g.wall_shape)
    else:
        omega, omega_wall = np.zeros(g.cell_shape), np.zeros(g.wall_shape)
    return MomentumResult(u, omega, omega_wall, p.reshape(g.cell_shape), stats.residual)


# ------------------------------------------------------------ outer loop
class _Stalled(Exception):
    def __init__(self, reason, history):
        super().__init__(reason)
        self.history = history


def _iterate_vector(g: Grid, u, omega, phi, mu, psi):
    return np.concatenate([g.pack_velocity(u), omega.ravel(), phi.ravel(), mu.ravel(), psi.ravel()])


def _picard(state_k: MixtureState, params: PhysParams, cfg: StepConfig):
    g = state_k.grid
    u_it, w_it = state_k.u.copy(), (state_k.omega.copy(), state_k.omega_wall.copy())
    prev = _iterate_vector(g, state_k.u, state_k.omega, state_k.phi, state_k.mu, state_k.psi)
    history = []
    newton_total = pdas_total = 0
    lin_res = ch_res = 0.0
    a = cfg.under_relaxation
    slow = 0
    for it in range(1, cfg.picard_max + 1):
        ch = ch_substep(state_k, u_it, params, cfg)
        newton_total += ch.newton_iters
        pdas_total += ch.pdas_iters
        ch_res = max(ch_res, ch.residual)
        mom = momentum_substep(state_k, ch.phi, ch.mu, ch.psi, ch.L, u_it, w_it, params, cfg)
        lin_res = max(lin_res, mom.residual)
        cur = _iterate_vector(g, mom.u, mom.omega, ch.phi, ch.mu, ch.psi)
        if not np.all(np.isfinite(cur)):
            raise _Stalled("non-finite Picard iterate", history)
        upd = np.linalg.norm(cur - prev) / max(np.linalg.norm(cur), 1e-300)
        history.append(float(upd))
        if upd < cfg.picard_tol:
            return ch, mom, it, newton_total, pdas_total, lin_res, ch_res, upd, history
        if len(history) >= 2 and history[-1] > 0.9 * history[-2]:
            slow += 1
            if slow >= 5:
                raise _Stalled("Picard update ratio above 0.9 for 5 iterations", history)
        else:
            slow = 0
        prev = cur
        if a == 1.0:
            u_it, w_it = mom.u, (mom.omega, mom.omega_wall)
        else:
            u_it = VelocityField((1 - a) * u_it.x + a * mom.u.x, (1 - a) * u_it.y + a * mom.u.y,
                                 (1 - a) * u_it.wall + a * mom.u.wall)
            w_it = ((1 - a) * w_it[0] + a * mom.omega, (1 - a) * w_it[1] + a * mom.omega_wall)
    raise _Stalled(f"Picard did not converge in {cfg.picard_max} iterations", history)


def step(state_k: MixtureState, params: PhysParams, cfg: StepConfig = StepConfig()):
    """Advance one step.  Returns ``(new_state, StepReport)``.

    If the Picard loop stalls the step is retried with half the step size,
    at most ``cfg.max_halvings`` times; the report records the size used.
    """
    eff = effective_params(params, cfg)
    h = eff.h
    last = None
    for halvings in range(cfg.max_halvings + 1):
        trial = replace(eff, h=h)
        try:
            out = _picard(state_k, trial, cfg)
        except _Stalled as exc:
            last = exc
            h *= 0.5
            continue
        return _finish(state_k, trial, out, halvings)
    raise PicardDiverged(f"{last} (after {cfg.max_halvings} step halvings)",
                         report={"history": last.history, "h": h * 2})


def _finish(state_k, params, out, halvings):
    ch, mom, it, newton_total, pdas_total, lin_res, ch_res, upd, history = out
    g = state_k.grid
    new = MixtureState(g, state_k.t + params.h, mom.u, mom.p, mom.omega, mom.omega_wall,
                       ch.phi, ch.mu, ch.psi, ch.L, ch.xi, ch.xi_wall)
    e_old = diagnostics.total_energy(state_k, params)
    e_new = diagnostics.total_energy(new, params)
    diss, slack = diagnostics.step_ledger(state_k, new, params, params.h)
    m_new = diagnostics.mass(new)
    report = StepReport(
        t=new.t, h=params.h, energy_old=e_old, energy_new=e_new, dissipation=diss, slack=slack,
        tol_slack=diagnostics.slack_tolerance(e_old.total), mass=m_new,
        mass_change=m_new - diagnostics.mass(state_k),
        phi_min=float(new.phi.min()), phi_max=float(new.phi.max()),
        psi_min=float(new.psi.min()), psi_max=float(new.psi.max()),
        div_norm=float(np.abs(g.divergence(new.u)).max()),
        picard_iters=it, newton_iters=newton_total, pdas_iters=pdas_total,
        linear_residual=lin_res, ch_residual=ch_res, picard_update=upd, halvings=halvings,
        history=history,
    )
    return new, report
