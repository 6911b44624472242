"""Material closure (density, coefficient interpolation, Eringen checks) and the state container."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ValidationError
from .grid import Grid, VelocityField
from .potentials import BoundaryPotential, SplitPotential


def eringen_check(c0, cd, ca):
    """Return the violated micropolar admissibility conditions (empty if valid)."""
    violations = []
    if not cd >= 0:
        violations.append("c_d >= 0")
    if not ca + cd >= 0:
        violations.append("c_a + c_d >= 0")
    if not 3 * c0 + 2 * cd >= 0:
        violations.append("3 c_0 + 2 c_d >= 0")
    if not abs(cd - ca) <= cd + ca:
        violations.append("|c_d - c_a| <= c_d + c_a")
    return violations


def smoothstep(x):
    """``t^2 (3 - 2t)`` with ``t = (clip(x) + 1)/2``: 0 at -1, 1 at +1, flat at both ends."""
    t = 0.5 * (np.clip(np.asarray(x, dtype=float), -1.0, 1.0) + 1.0)
    return t * t * (3.0 - 2.0 * t)


def interpolate_coeff(phi, endpoints):
    """Coefficient equal to ``endpoints[0]`` in fluid 1 (phi=1) and ``endpoints[1]`` in fluid 2."""
    a1, a2 = endpoints
    return a2 + (a1 - a2) * smoothstep(phi)


@dataclass(frozen=True)
class PhysParams:
    """Material and model parameters.

    Endpoint pairs are ``(value in fluid 1, value in fluid 2)``.  ``eta_r``
    may be zero (the decoupled limit); ``c0`` only enters through the
    admissibility check since ``div omega`` vanishes for the 2D axial field.
    """

    rho1: float = 1.0
    rho2: float = 1.0
    eta: tuple = (1.0, 1.0)
    eta_r: tuple = (0.5, 0.5)
    c0: tuple = (0.0, 0.0)
    cd: tuple = (0.5, 0.5)
    ca: tuple = (0.5, 0.5)
    mobility: tuple = (1.0, 1.0)
    boundary: BoundaryPotential = field(default_factory=BoundaryPotential)
    potential: SplitPotential = field(default_factory=SplitPotential)
    sigma: float = 0.0
    eps: float = 0.0
    q: float = 6.0
    h: float = 1e-3
    delta_rho: float = 0.25
    body_force: tuple = (0.0, 0.0)
    k0: float = 1e-8
    k1: float = 1e8

    def validate(self):
        """Raise ValidationError for the first violated constraint."""
        if not (self.rho1 > 0 and self.rho2 > 0):
            raise ValidationError("physics.rho", "densities must be positive")
        for name in ("eta", "mobility"):
            for v in getattr(self, name):
                if not self.k0 <= v <= self.k1:
                    raise ValidationError(f"physics.{name}", f"endpoints must lie in [{self.k0}, {self.k1}]")
        for v in self.eta_r:
            if not 0 <= v <= self.k1:
                raise ValidationError("physics.eta_r", f"endpoints must lie in [0, {self.k1}]")
        for v in (*self.c0, *self.cd, *self.ca):
            if abs(v) > self.k1:
                raise ValidationError("physics.c", f"angular viscosities must be bounded by {self.k1}")
        for k, (c0, cd, ca) in enumerate(zip(self.c0, self.cd, self.ca), start=1):
            bad = eringen_check(c0, cd, ca)
            if bad:
                raise ValidationError(f"physics.c (fluid {k})", "Eringen condition violated: " + "; ".join(bad))
            if cd + ca <= 0:
                raise ValidationError(f"physics.c (fluid {k})", "c_d + c_a must be positive")
        if not 0 <= self.sigma <= 1:
            raise ValidationError("physics.sigma", "must lie in [0, 1]")
        if not 0 <= self.eps <= 1:
            raise ValidationError("physics.eps", "must lie in [0, 1]")
        if not self.q > 4:
            raise ValidationError("physics.q", "must exceed 4")
        if not self.h > 0:
            raise ValidationError("stepping.h", "must be positive")
        if not 0 < self.delta_rho <= 0.5:
            raise ValidationError("physics.delta_rho", "must lie in (0, 0.5]")
        pot = self.potential
        if not pot.is_obstacle and not pot.theta < pot.theta_c:
            raise ValidationError("potential.theta", "must be smaller than theta_c")
        return self

    @property
    def rho_min(self):
        return 0.5 * min(self.rho1, self.rho2)

    def with_(self, **kw):
        return replace(self, **kw)


def _density_parts(phi, p: PhysParams):
    """rho, rho', rho'' for the affine density with C^2 quartic continuation.

    Outside [-1, 1] the slope decays to zero with the cubic Hermite profile
    ``1 - 3t^2 + 2t^3`` over the blend width, so rho itself is a quartic in
    ``t`` and rho'' vanishes at both ends of the blend.  The blend width is
    shortened where necessary so the plateau stays above ``rho_min``.
    """
    phi = np.asarray(phi, dtype=float)
    a = 0.5 * (p.rho1 - p.rho2)
    rho = 0.5 * p.rho1 * (1.0 + phi) + 0.5 * p.rho2 * (1.0 - phi)
    d1 = np.full_like(phi, a)
    d2 = np.zeros_like(phi)
    if a == 0.0:
        return rho, d1, d2
    for side, end_value in ((1.0, p.rho1), (-1.0, p.rho2)):
        slope_out = a * side  # d rho / d |phi| leaving [-1,1] on this side
        width = p.delta_rho
        if slope_out < 0:
            width = min(width, 2.0 * (end_value - p.rho_min) / (-slope_out))
        t = np.clip((side * phi - 1.0) / width, 0.0, 1.0)
        mask = side * phi > 1.0
        if not np.any(mask):
            continue
        tm = t[mask]
        rho[mask] = end_value + slope_out * width * (tm - tm ** 3 + 0.5 * tm ** 4)
        d1[mask] = a * (1.0 - 3.0 * tm ** 2 + 2.0 * tm ** 3)
        d2[mask] = side * a * (-6.0 * tm + 6.0 * tm ** 2) / width
    return rho, d1, d2


def density(phi, params: PhysParams):
    """Mixture density and its derivative."""
    rho, d1, _ = _density_parts(phi, params)
    return rho, d1


def density_curvature(phi, params: PhysParams):
    return _density_parts(phi, params)[2]


@dataclass
class MixtureState:
    """One time slice of the simulation.

    Wall arrays have shape ``(2, nx)`` with row 0 the bottom wall.
    ``omega_wall`` is the micro-rotation trace and ``xi_wall`` the obstacle
    multiplier of the wall constraint.
    """

    grid: Grid
    t: float
    u: VelocityField
    p: np.ndarray
    omega: np.ndarray
    omega_wall: np.ndarray
    phi: np.ndarray
    mu: np.ndarray
    psi: np.ndarray
    L: np.ndarray
    xi: np.ndarray
    xi_wall: np.ndarray

    @classmethod
    def zeros(cls, grid: Grid):
        c = np.zeros(grid.cell_shape)
        w = np.zeros(grid.wall_shape)
        return cls(grid, 0.0, grid.zero_velocity(), c.copy(), c.copy(), w.copy(), c.copy(),
                   c.copy(), w.copy(), w.copy(), c.copy(), w.copy())

    @property
    def psi_bottom(self):
        return self.psi[0]

    @property
    def psi_top(self):
        return self.psi[1]

    def copy(self):
        return MixtureState(self.grid, self.t, self.u.copy(), self.p.copy(), self.omega.copy(),
                            self.omega_wall.copy(), self.phi.copy(), self.mu.copy(),
                            self.psi.copy(), self.L.copy(), self.xi.copy(), self.xi_wall.copy())

    def check(self):
        g = self.grid
        g.check_velocity(self.u)
        for name in ("p", "omega", "phi", "mu", "xi"):
            g.check_cell(getattr(self, name), name)
        for name in ("omega_wall", "psi", "L", "xi_wall"):
            g.check_wall(getattr(self, name), name)
        return self
