import numpy as np
import pytest
from hypothesis import given, strategies as st

from mpnsch import (BoundaryKind, BoundaryPotential, Grid, MixtureState, PhysParams, PotentialKind,
                    SplitPotential, step)
from mpnsch.errors import ConfigError, PdasCycled
from mpnsch.obstacle import (complementarity_check, deep_quench_sweep, pdas_ch_substep,
                             validate_thetas, vi_residual)

OBSTACLE = SplitPotential(PotentialKind.OBSTACLE, theta_c=1.0)


def obstacle_params(**kw):
    base = dict(potential=OBSTACLE, h=1e-2,
                boundary=BoundaryPotential(zeta=0.5, kind=BoundaryKind.SINE, gamma1=0.3, gamma2=-0.2))
    base.update(kw)
    return PhysParams(**base)


def saturated_stripe(n=16, amp=1.3):
    """Stripe profile clipped to the box, so both bounds are touched."""
    g = Grid(8.0, 8.0, n, n)
    x, y = g.cell_centers()
    s = MixtureState.zeros(g)
    s.phi = np.clip(amp * np.tanh((y - 4.0) / 1.5) + 0.1 * np.sin(2 * np.pi * x / 8.0), -1.0, 1.0)
    s.psi = np.stack([s.phi[:, 0], s.phi[:, -1]])
    return s


def random_admissible(rng, shape):
    """Test data in [-1, 1] that hits the bounds often."""
    return np.clip(rng.uniform(-1.4, 1.4, shape), -1.0, 1.0)


@pytest.fixture(scope="module")
def obstacle_run():
    st0 = saturated_stripe()
    p = obstacle_params()
    states = [st0]
    for _ in range(3):
        new, rep = step(states[-1], p)
        assert rep.passed
        states.append(new)
    return p, states


def test_complementarity_examples():
    # [TRIVIAL] interior values with zero multiplier pass; a wrong sign at the upper bound is located
    phi = np.array([[0.2, -0.5], [0.9, 0.0]])
    assert complementarity_check(phi, np.zeros_like(phi)).passed
    phi[1, 0] = 1.0
    xi = np.zeros_like(phi)
    xi[1, 0] = -0.1
    rep = complementarity_check(phi, xi)
    assert not rep.passed
    assert rep.violations == [((1, 0), "xi < 0 on the upper contact set")]
    rep = complementarity_check(np.array([1.5]), np.array([0.0]))
    assert rep.violations[0][1] == "|phi| exceeds 1"
    assert not complementarity_check(np.array([-1.0]), np.array([0.3])).passed
    assert not complementarity_check(np.array([0.0]), np.array([1e-6])).passed


def test_pdas_output_is_complementary(obstacle_run):
    p, states = obstacle_run
    for s in states[1:]:
        assert np.abs(s.phi).max() <= 1.0 + 1e-10
        assert np.abs(s.psi).max() <= 1.0 + 1e-10
        assert complementarity_check(s.phi, s.xi).passed
        assert complementarity_check(s.psi, s.xi_wall).passed
        assert np.any(np.abs(s.phi) == 1.0)


def test_pdas_conserves_mass(obstacle_run):
    _, states = obstacle_run
    m0 = states[0].phi.sum()
    for s in states[1:]:
        assert abs(s.phi.sum() - m0) * s.grid.dv <= 1e-10 * 64.0


def test_vi_holds_for_random_admissible_pairs(obstacle_run, rng):
    # [DERIVED] direct evaluation of the bilinear forms for 100 test pairs per state
    p, states = obstacle_run
    for k, new in zip(states, states[1:]):
        g = new.grid
        for _ in range(100):
            eta = random_admissible(rng, g.cell_shape)
            zeta = random_admissible(rng, g.wall_shape)
            value, scale = vi_residual(k, new, p, eta, zeta)
            assert value >= -1e-9 * scale
            # second route: the multiplier pairing
            mult = -g.dv * np.sum(new.xi * (eta - new.phi)) - g.dx * np.sum(new.xi_wall * (zeta - new.psi))
            assert value == pytest.approx(mult, abs=1e-9 * scale)


def test_fully_active_pure_phase():
    # [TRIVIAL] phi = psi = 1 with no flow stays put with a nonnegative uniform multiplier
    g = Grid(4.0, 4.0, 8, 8)
    p = obstacle_params(boundary=BoundaryPotential(kind=BoundaryKind.AFFINE, gamma1=0.0, gamma2=0.0))
    s = MixtureState.zeros(g)
    s.phi[:] = 1.0
    s.psi[:] = 1.0
    res = pdas_ch_substep(s, g.zero_velocity(), p)
    assert np.abs(res.phi - 1.0).max() <= 1e-12
    assert np.all(res.xi >= 0)
    assert np.allclose(res.xi, res.mu - p.potential.concave(np.ones(1))[1][0], atol=1e-12)
    assert np.ptp(res.xi) < 1e-12


def test_interior_state_has_empty_active_sets():
    g = Grid(8.0, 8.0, 16, 16)
    x, y = g.cell_centers()
    s = MixtureState.zeros(g)
    s.phi = 0.3 * np.cos(2 * np.pi * x / 8.0)
    s.psi = np.stack([s.phi[:, 0], s.phi[:, -1]])
    res = pdas_ch_substep(s, g.zero_velocity(), obstacle_params(h=1e-3))
    assert res.active.n_active == 0
    assert np.all(res.xi == 0.0)


def test_pdas_horizon_is_reported():
    s = saturated_stripe(amp=3.0)
    s.phi = -s.phi  # start far from the solution so one iteration cannot settle the sets
    with pytest.raises(PdasCycled):
        pdas_ch_substep(s, s.grid.zero_velocity(), obstacle_params(h=1.0), horizon=1)


def test_pdas_rejects_smooth_potentials():
    s = saturated_stripe()
    with pytest.raises(ValueError):
        pdas_ch_substep(s, s.grid.zero_velocity(), PhysParams())


def test_theta_list_validation():
    assert validate_thetas([0.3, 0.1]) == [0.3, 0.1]
    for bad in ([], [0.3, 0.3], [0.1, 0.3], [0.3, 0.0]):
        with pytest.raises(ConfigError):
            validate_thetas(bad)


@given(st.lists(st.floats(0.01, 1.0), min_size=2, max_size=5))
def test_theta_validation_accepts_only_strictly_decreasing(thetas):
    ok = all(b < a for a, b in zip(thetas, thetas[1:]))
    if ok:
        assert validate_thetas(thetas) == thetas
    else:
        with pytest.raises(ConfigError):
            validate_thetas(thetas)


def test_trivial_state_sweep():
    # [TRIVIAL] phi = 0 is feasible and stationary for every potential
    g = Grid(4.0, 4.0, 8, 8)
    s = MixtureState.zeros(g)
    p = PhysParams(boundary=BoundaryPotential(kind=BoundaryKind.AFFINE, gamma1=0.0, gamma2=0.0),
                   potential=SplitPotential(PotentialKind.LOGARITHMIC, theta=0.3, theta_c=1.0))
    table = deep_quench_sweep(s, p, [0.3, 0.1], n_steps=2)
    assert max(table.errors) < 1e-12


def test_small_sweep_is_monotone():
    g = Grid(16.0, 8.0, 16, 8)
    x, y = g.cell_centers()
    s = MixtureState.zeros(g)
    s.phi = 0.9 * np.tanh((y - 4.0) / np.sqrt(2.0))
    s.psi = np.stack([np.full(16, -0.9), np.full(16, 0.9)])
    p = PhysParams(boundary=BoundaryPotential(kind=BoundaryKind.AFFINE, gamma1=0.0, gamma2=0.0),
                   potential=SplitPotential(PotentialKind.LOGARITHMIC, theta=0.3, theta_c=1.0), h=1e-2)
    table = deep_quench_sweep(s, p, [0.3, 0.1, 0.03], n_steps=2)
    assert table.monotone, table.errors
    assert complementarity_check(table.obstacle_state.phi, table.obstacle_state.xi).passed
