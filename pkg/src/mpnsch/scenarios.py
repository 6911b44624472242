"""Shipped scenarios and initial-state construction."""
from __future__ import annotations

import numpy as np

from .config import RunConfig, with_overrides
from .errors import ConfigError, DomainError
from .grid import Grid, VelocityField
from .state import MixtureState


def _phase_profile(cfg: RunConfig, x, y):
    ini, g = cfg.init, cfg.grid
    if ini.name == "uniform":
        return np.full(np.shape(x), ini.mean)
    if ini.name == "stripe":
        return ini.amplitude * np.tanh((y - 0.5 * g.ly) / ini.width)
    if ini.name == "droplet":
        r = np.hypot(x - 0.5 * g.lx, y)
        return ini.amplitude * np.tanh((ini.radius - r) / ini.width)
    raise ConfigError(f"no analytic profile for init {ini.name!r}")


def initial_state(cfg: RunConfig) -> MixtureState:
    """Initial state from the ``init`` section.

    The wall trace is the analytic profile on the wall where there is one,
    otherwise the adjacent cell values.  The micro-rotation starts at
    ``curl(u0)/2``, including its wall trace.
    """
    g = cfg.build_grid()
    st = MixtureState.zeros(g)
    ini = cfg.init
    xc, yc = g.cell_centers()
    if ini.name == "random":
        rng = np.random.default_rng(ini.seed)
        st.phi = ini.mean + ini.amplitude * rng.uniform(-1.0, 1.0, g.cell_shape)
        st.psi = np.stack([st.phi[:, 0], st.phi[:, -1]])
    else:
        st.phi = _phase_profile(cfg, xc, yc)
        xw = g.wall_x()
        st.psi = np.stack([_phase_profile(cfg, xw, np.zeros(g.nx)),
                           _phase_profile(cfg, xw, np.full(g.nx, g.ly))])
    if ini.flow != 0.0:
        _, yf = g.xface_coords()
        ux = ini.flow * np.sin(2.0 * np.pi * yf / g.ly)
        st.u = VelocityField(ux, np.zeros(g.yface_shape), np.zeros(g.wall_shape))
    w = 0.5 * g.curl_of_vector(st.u)
    st.omega = w
    st.omega_wall = np.stack([w[:, 0], w[:, -1]])
    pot = cfg.build_potential()
    if not pot.is_obstacle:
        try:
            st.mu = pot.derivative(st.phi)
        except DomainError:
            st.mu = np.zeros(g.cell_shape)
    return st


# ------------------------------------------------------------ library
def _equilibrium():
    cfg = RunConfig()
    cfg.potential.kind = "kappa"
    m = cfg.build_potential().minimiser()
    cfg.init.name = "uniform"
    cfg.init.mean = float(m)
    cfg.boundary.kind = "affine"
    cfg.boundary.gamma1 = cfg.boundary.gamma2 = 1.0
    cfg.io.output = "out/equilibrium"
    return cfg


def _spinodal():
    cfg = RunConfig()
    cfg.grid.lx, cfg.grid.ly = 32.0, 16.0
    cfg.physics.rho1, cfg.physics.rho2 = 3.0, 1.0
    cfg.physics.eta_r = (0.5, 0.25)
    cfg.potential.kind = "logarithmic"
    cfg.potential.theta, cfg.potential.theta_c = 0.3, 1.0
    cfg.boundary.zeta = 0.5
    cfg.boundary.kind = "sine"
    cfg.boundary.gamma1, cfg.boundary.gamma2 = 0.5, -0.3
    cfg.init.name = "random"
    cfg.init.mean, cfg.init.amplitude, cfg.init.seed = 0.0, 0.05, 7
    cfg.io.output = "out/spinodal"
    return cfg


def _droplet_wall():
    cfg = RunConfig()
    cfg.grid.lx, cfg.grid.ly = 32.0, 16.0
    cfg.physics.rho1, cfg.physics.rho2 = 2.0, 1.0
    cfg.potential.kind = "kappa"
    cfg.potential.kappa = 0.05
    m = cfg.build_potential().minimiser()
    cfg.boundary.zeta = 0.5
    cfg.boundary.kind = "sine"
    cfg.boundary.gamma1, cfg.boundary.gamma2 = 0.8, 0.4
    cfg.init.name = "droplet"
    cfg.init.amplitude = float(m)
    cfg.init.radius = 6.0
    cfg.io.output = "out/droplet_wall"
    return cfg


def _micropolar_channel():
    cfg = RunConfig()
    cfg.grid.lx, cfg.grid.ly, cfg.grid.nx, cfg.grid.ny = 2.0, 1.0, 32, 16
    cfg.physics.eta_r = (1.0, 1.0)
    cfg.physics.body_force = (1.0, 0.0)
    cfg.potential.kind = "kappa"
    cfg.boundary.zeta = 0.0
    cfg.boundary.kind = "affine"
    cfg.boundary.gamma1 = cfg.boundary.gamma2 = 1.0
    cfg.stepping.h = 1e-2
    cfg.stepping.n_steps = 20
    cfg.init.name = "uniform"
    cfg.init.mean = 1.0
    cfg.io.output = "out/micropolar_channel"
    return cfg


def _deep_quench():
    cfg = RunConfig()
    cfg.potential.kind = "obstacle"
    cfg.potential.theta_c = 1.0
    cfg.stepping.h = 1e-2
    cfg.stepping.n_steps = 5
    cfg.init.name = "stripe"
    cfg.init.amplitude = 0.9
    cfg.io.output = "out/deep_quench"
    return cfg


SCENARIOS = {
    "equilibrium": (_equilibrium, "uniform minimiser of the bulk potential; nothing should move"),
    "spinodal": (_spinodal, "random quench with the logarithmic potential, unequal densities"),
    "droplet_wall": (_droplet_wall, "semicircular droplet (90 degree contact) relaxing on the bottom wall"),
    "micropolar_channel": (_micropolar_channel, "single fluid driven by a body force; micro-rotation coupling"),
    "deep_quench": (_deep_quench, "stripe profile; logarithmic solves at decreasing theta against the obstacle limit"),
}


def scenario(name: str) -> RunConfig:
    try:
        make, _ = SCENARIOS[name]
    except KeyError:
        raise ConfigError(f"unknown scenario {name!r}; available: {', '.join(SCENARIOS)}") from None
    return make()


def describe(name: str) -> str:
    scenario(name)
    return SCENARIOS[name][1]


def scaled(cfg: RunConfig, nx=None, ny=None, n_steps=None) -> RunConfig:
    """Same scenario on another grid or run length (used by fast tests)."""
    grid = {k: v for k, v in (("nx", nx), ("ny", ny)) if v is not None}
    stepping = {"n_steps": n_steps} if n_steps is not None else {}
    return with_overrides(cfg, grid=grid, stepping=stepping)
