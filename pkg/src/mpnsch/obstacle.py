"""Double-obstacle branch: primal-dual active set solve, complementarity
checks, the variational-inequality residual and the deep-quench sweep."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .chsystem import CHSystem
from .errors import Breakdown, ConfigError, LinearSolveFailed, MaxIterExceeded, PdasCycled
from .linsolve import solve
from .potentials import PotentialKind, SplitPotential
from .state import MixtureState, PhysParams


@dataclass
class ActiveSets:
    upper: np.ndarray
    lower: np.ndarray
    upper_wall: np.ndarray
    lower_wall: np.ndarray

    def key(self):
        return b"".join(np.packbits(a).tobytes() for a in
                        (self.upper, self.lower, self.upper_wall, self.lower_wall))

    @property
    def n_active(self):
        return int(self.upper.sum() + self.lower.sum() + self.upper_wall.sum() + self.lower_wall.sum())


# Indicator values within this margin of zero count as inactive; without it
# roundoff toggles cells where strict complementarity fails (phi = 1, xi = 0)
# and the sets never repeat.
SET_MARGIN = 1e-11


def _sets(phi, xi, psi, xi_wall, c):
    m = SET_MARGIN
    return ActiveSets(xi + c * (phi - 1.0) > m, xi + c * (phi + 1.0) < -m,
                      xi_wall + c * (psi - 1.0) > m, xi_wall + c * (psi + 1.0) < -m)


def pdas_ch_substep(state_k: MixtureState, u_iter, params: PhysParams, cfg=None, c=1.0, horizon=100):
    """Obstacle CH substep by primal-dual active sets.

    Each iteration solves the linear CH system with ``phi = +-1`` on the
    active cells (``psi = +-1`` on active wall nodes) and zero multiplier
    elsewhere, then rebuilds the sets from ``xi + c (phi -+ 1)``.  Stops when
    the sets repeat; raises PdasCycled after ``horizon`` iterations.
    """
    from .stepper import CHResult, StepConfig

    cfg = cfg or StepConfig()
    if not params.potential.is_obstacle:
        raise ValueError("pdas_ch_substep needs the obstacle potential")
    g = state_k.grid
    N, Nw = g.n_cells, g.n_wall
    fb = cfg.freeze_boundary
    system = CHSystem(state_k, u_iter, params, sigma_on=params.sigma > 0, freeze_boundary=fb)
    nx_ = 2 * N + (0 if fb else Nw)
    J = system.jacobian(np.zeros(nx_)).tocsr()
    r0 = system.residual(np.zeros(nx_))
    # multiplier columns: -xi in the mu equation, +xi_wall in the wall equation
    cxi = sp.vstack([sp.csr_matrix((N, N)), -sp.identity(N), sp.csr_matrix((0 if fb else Nw, N))])
    blocks = [J, cxi]
    if not fb:
        cxw = sp.vstack([sp.csr_matrix((2 * N, Nw)), sp.identity(Nw)])
        blocks.append(cxw)
    top = sp.hstack(blocks).tocsr()
    n_tot = top.shape[1]

    phi = state_k.phi.ravel().copy()
    psi = state_k.psi.ravel().copy()
    xi = state_k.xi.ravel().copy()
    xi_w = state_k.xi_wall.ravel().copy()
    sets = _sets(phi, xi, psi, xi_w, c)
    if fb:
        sets.upper_wall[:] = False
        sets.lower_wall[:] = False
    seen = {}
    for it in range(1, horizon + 1):
        active = sets.upper | sets.lower
        rows, cols, vals, rhs = [], [], [], []
        k = 0
        idx = np.arange(N)
        # constrained phi on active cells, zero xi on inactive cells
        rows.append(np.arange(N)); cols.append(np.where(active, idx, 2 * N + (0 if fb else Nw) + idx))
        vals.append(np.ones(N)); rhs.append(np.where(sets.upper, 1.0, np.where(sets.lower, -1.0, 0.0)))
        k = N
        if not fb:
            active_w = sets.upper_wall | sets.lower_wall
            iw = np.arange(Nw)
            rows.append(k + iw); cols.append(np.where(active_w, 2 * N + iw, 3 * N + Nw + iw))
            vals.append(np.ones(Nw))
            rhs.append(np.where(sets.upper_wall, 1.0, np.where(sets.lower_wall, -1.0, 0.0)))
            k += Nw
        bottom = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                               shape=(k, n_tot))
        K = sp.vstack([top, bottom]).tocsc()
        b = np.concatenate([-r0, np.concatenate(rhs)])
        try:
            y, _ = solve(K, b)
        except (Breakdown, MaxIterExceeded) as exc:
            raise LinearSolveFailed(f"PDAS linear solve failed: {exc}", x=exc.x) from exc
        phi = y[:N]
        mu = y[N:2 * N]
        if fb:
            psi = system.psi_k.copy()
            xi = y[2 * N:3 * N]
            xi_w = np.zeros(Nw)
        else:
            psi = y[2 * N:2 * N + Nw]
            xi = y[2 * N + Nw:3 * N + Nw]
            xi_w = y[3 * N + Nw:]
        new = _sets(phi, xi, psi, xi_w, c)
        if fb:
            new.upper_wall[:] = False
            new.lower_wall[:] = False
        if new.key() == sets.key():
            x = np.concatenate([phi, mu] + ([] if fb else [psi]))
            res = float(np.abs(system.residual(x, xi, 0.0 if fb else xi_w)).max())
            L = system.wall_potential(psi)
            # remove roundoff outside the box on active entries
            phi = np.where(sets.upper, 1.0, np.where(sets.lower, -1.0, phi))
            psi = np.where(sets.upper_wall, 1.0, np.where(sets.lower_wall, -1.0, psi))
            shp = g.cell_shape
            return CHResult(phi.reshape(shp), mu.reshape(shp), psi.reshape(g.wall_shape),
                            L.reshape(g.wall_shape), xi.reshape(shp), xi_w.reshape(g.wall_shape),
                            newton_iters=0, residual=res, active=sets, pdas_iters=it)
        key = new.key()
        if key in seen:
            raise PdasCycled(f"active sets cycle (period {it - seen[key]}) after {it} iterations",
                             x=np.concatenate([phi, mu]))
        seen[sets.key()] = it
        sets = new
    raise PdasCycled(f"no set repetition within {horizon} iterations", x=np.concatenate([phi, mu]))


@dataclass
class ComplementarityReport:
    passed: bool
    violations: list = field(default_factory=list)


def complementarity_check(phi, xi, tol=1e-8):
    """Check ``xi`` in the subdifferential of the indicator of [-1, 1] at ``phi``.

    Violations are ``(index, description)`` with ``index`` a tuple into the arrays.
    """
    phi = np.asarray(phi, dtype=float)
    xi = np.asarray(xi, dtype=float)
    bad = []
    checks = (
        (np.abs(phi) > 1.0 + tol, "|phi| exceeds 1"),
        ((phi >= 1.0 - tol) & (xi < -tol), "xi < 0 on the upper contact set"),
        ((phi <= -1.0 + tol) & (xi > tol), "xi > 0 on the lower contact set"),
        ((np.abs(phi) < 1.0 - tol) & (np.abs(xi) > tol), "xi nonzero where the bound is inactive"),
    )
    for mask, what in checks:
        for idx in zip(*np.nonzero(mask)):
            bad.append((tuple(int(i) for i in idx), what))
    return ComplementarityReport(not bad, bad)


def vi_residual(state_k: MixtureState, state_new: MixtureState, params: PhysParams, eta, zeta_w):
    """Evaluate the discrete variational inequality at admissible test data.

    Returns ``(value, scale)`` where ``value`` is

        (grad phi, grad(eta - phi)) + (F1'(phi_k) + s(phi - phi_k) - mu, eta - phi)
        + (d_x psi, d_x(zeta - psi))_G + (zeta_c psi + G0'(psi) + G1'(psi_k) - L, zeta - psi)_G

    with the gradient pairing including the wall half-faces, and ``scale``
    the sum of the magnitudes of the individual terms.  For a solution of the
    obstacle substep the value is ``-(xi, eta - phi) - (xi_wall, zeta - psi)_G >= 0``.
    """
    g = state_k.grid
    phi, psi, mu, L = state_new.phi, state_new.psi, state_new.mu, state_new.L
    dphi, dpsi = eta - phi, zeta_w - psi
    Kcc, Kcw, Kwc, Kww = g.dirichlet_blocks
    grad_term = g.dv * float(dphi.ravel() @ (Kcc @ phi.ravel() + Kcw @ psi.ravel()))
    grad_term += g.dx * float(dpsi.ravel() @ (Kwc @ phi.ravel() + Kww @ psi.ravel()))
    s = params.sigma / params.h
    bulk = g.dv * float(np.sum((params.potential.concave(state_k.phi)[1] + s * (phi - state_k.phi) - mu) * dphi))
    surf_grad = g.dx * float(np.sum(g.surface_grad(psi) * g.surface_grad(dpsi)))
    bp = params.boundary
    wall = g.dx * float(np.sum((bp.zeta * psi + bp.convex(psi)[1] + bp.concave(state_k.psi)[1] - L) * dpsi))
    terms = (grad_term, bulk, surf_grad, wall)
    return sum(terms), sum(abs(t) for t in terms)


@dataclass
class DeepQuenchTable:
    thetas: list
    errors: list
    obstacle_state: MixtureState
    states: list

    @property
    def monotone(self):
        return all(b < a for a, b in zip(self.errors, self.errors[1:]))

    def rows(self):
        return list(zip(self.thetas, self.errors))


def validate_thetas(thetas):
    thetas = [float(t) for t in thetas]
    if not thetas:
        raise ConfigError("theta list is empty")
    for a, b in zip(thetas, thetas[1:]):
        if a == b:
            raise ConfigError(f"theta list repeats the value {a}")
        if b > a:
            raise ConfigError("theta list must be strictly decreasing")
    if thetas[-1] <= 0:
        raise ConfigError("theta values must be positive")
    return thetas


def deep_quench_sweep(state0: MixtureState, params: PhysParams, thetas, n_steps, cfg=None):
    """Run the logarithmic solver for each theta and the obstacle solver once.

    Errors are ``||phi_theta - phi_obstacle||_L2`` after ``n_steps`` steps
    from the same initial state.
    """
    from .stepper import StepConfig, step

    cfg = cfg or StepConfig()
    thetas = validate_thetas(thetas)
    theta_c = params.potential.theta_c
    obs_params = replace(params, potential=SplitPotential(PotentialKind.OBSTACLE, theta_c=theta_c))

    def run(p):
        s = state0.copy()
        for _ in range(n_steps):
            s, _ = step(s, p, cfg)
        return s

    obs = run(obs_params)
    errors, states = [], []
    g = state0.grid
    for th in thetas:
        p = replace(params, potential=SplitPotential(PotentialKind.LOGARITHMIC, theta=th, theta_c=theta_c))
        s = run(p)
        states.append(s)
        errors.append(float(np.sqrt(np.sum((s.phi - obs.phi) ** 2) * g.dv)))
    return DeepQuenchTable(thetas, errors, obs, states)
