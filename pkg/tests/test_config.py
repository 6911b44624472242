import pytest
from hypothesis import given, strategies as st

from mpnsch.config import RunConfig, parse_config, render_config, validate_config, with_overrides
from mpnsch.errors import ConfigError, ParseError, ValidationError
from mpnsch.scenarios import SCENARIOS, describe, initial_state, scaled, scenario


@pytest.mark.parametrize("name", list(SCENARIOS))
def test_scenarios_round_trip(name):
    cfg = scenario(name)
    text = render_config(cfg)
    again = parse_config(text)
    assert again == cfg
    assert render_config(again) == text


@given(st.floats(1e-4, 1.0), st.integers(4, 64), st.floats(0.0, 0.8))
def test_round_trip_preserves_floats(h, nx, zeta):
    cfg = with_overrides(RunConfig(), stepping={"h": h}, grid={"nx": nx}, boundary={"zeta": zeta})
    assert parse_config(render_config(cfg), validate=False) == cfg


def test_comments_and_pair_broadcast():
    cfg = parse_config("# header\nphysics.eta = 2.5   # both fluids\nphysics.rho1 = 3\n\n")
    assert cfg.physics.eta == (2.5, 2.5)
    assert cfg.physics.rho1 == 3.0


@pytest.mark.parametrize("text, fragment", [
    ("grid.nx = 8\ngrid.nx = 16\n", "duplicate key 'grid.nx'"),
    ("grid.colour = 3\n", "unknown key"),
    ("mesh.nx = 3\n", "unknown section"),
    ("nx = 3\n", "has no section"),
    ("grid.nx 3\n", "expected 'section.key = value'"),
    ("grid.nx =\n", "has no value"),
    ("grid.nx = eight\n", "grid.nx"),
    ("physics.eta = 1, 2, 3\n", "one or two values"),
    ("stepping.solve_micro = maybe\n", "true or false"),
])
def test_parse_errors(text, fragment):
    with pytest.raises(ParseError) as info:
        parse_config(text)
    assert fragment in str(info.value)
    assert str(info.value).startswith("line ")


def test_eringen_violation_rejected():
    with pytest.raises(ValidationError) as info:
        parse_config("physics.c_a = -2\nphysics.c_d = 1\n")
    assert "Eringen condition violated" in str(info.value)


@pytest.mark.parametrize("text", [
    "grid.nx = 2\n",
    "potential.kind = quartic\n",
    "boundary.kind = cosine\n",
    "potential.kind = kappa\npotential.kappa = 0\n",
    "boundary.zeta = -1\n",
    "stepping.h = 0\n",
    "stepping.under_relaxation = 1.5\n",
    "io.csv_stride = 0\n",
    "init.name = vortex\n",
    "sweep.thetas = 0.1, 0.3\n",
    "potential.kind = logarithmic\ninit.name = uniform\ninit.mean = 1.0\n",
    "init.name = uniform\ninit.mean = 1.5\n",
    "potential.kind = obstacle\ninit.name = stripe\ninit.amplitude = 1.2\n",
])
def test_validation_errors(text):
    with pytest.raises(ValidationError):
        parse_config(text)


def test_pure_phase_uniform_start_is_allowed():
    cfg = parse_config("init.name = uniform\ninit.mean = 1.0\n")
    assert initial_state(cfg).phi.min() == 1.0


def test_unknown_scenario_lists_names():
    with pytest.raises(ConfigError) as info:
        scenario("vortex_street")
    for name in SCENARIOS:
        assert name in str(info.value)
    assert describe("spinodal")


def test_scaled_copy_leaves_original():
    cfg = scenario("spinodal")
    small = scaled(cfg, nx=8, ny=4, n_steps=2)
    assert (small.grid.nx, small.grid.ny, small.stepping.n_steps) == (8, 4, 2)
    assert cfg.grid.nx != 8
    validate_config(small)


def test_initial_states_are_consistent():
    for name in SCENARIOS:
        cfg = scaled(scenario(name), nx=8, ny=4)
        s = initial_state(cfg).check()
        assert s.phi.shape == (8, 4)
