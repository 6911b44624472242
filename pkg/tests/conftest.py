import numpy as np
import pytest
from hypothesis import settings

from mpnsch import (BoundaryKind, BoundaryPotential, Grid, MixtureState, PhysParams, PotentialKind,
                    SplitPotential, VelocityField)

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


def random_velocity(g: Grid, rng, scale=1.0, wall=True):
    uy = np.zeros(g.yface_shape)
    uy[:, 1:-1] = scale * rng.standard_normal((g.nx, g.ny - 1))
    uw = scale * rng.standard_normal(g.wall_shape) if wall else np.zeros(g.wall_shape)
    return VelocityField(scale * rng.standard_normal(g.cell_shape), uy, uw)


def random_state(g: Grid, rng, amp=0.3, flow=0.1):
    st = MixtureState.zeros(g)
    st.phi = amp * rng.uniform(-1, 1, g.cell_shape)
    st.psi = amp * rng.uniform(-1, 1, g.wall_shape)
    st.u = random_velocity(g, rng, flow)
    st.omega = flow * rng.standard_normal(g.cell_shape)
    st.omega_wall = flow * rng.standard_normal(g.wall_shape)
    return st


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_grid():
    return Grid(4.0, 3.0, 8, 6)


@pytest.fixture
def mixed_params():
    """Unequal densities and viscosities, sine wall energy, all micro terms on."""
    return PhysParams(
        rho1=3.0, rho2=1.0, eta=(1.5, 0.7), eta_r=(0.6, 0.2), cd=(0.4, 0.3), ca=(0.2, 0.5),
        mobility=(1.2, 0.8),
        potential=SplitPotential(PotentialKind.LOGARITHMIC, theta=0.3, theta_c=1.0),
        boundary=BoundaryPotential(zeta=0.5, kind=BoundaryKind.SINE, gamma1=0.5, gamma2=-0.3),
        h=1e-2,
    )
