"""Logarithmic runs approach the obstacle run as the temperature drops.

A cheap 32x16 version of the deep-quench scenario.  The full-size sweep is
available as ``mpnsch sweep`` on the emitted scenario config.
"""
from mpnsch.obstacle import deep_quench_sweep
from mpnsch.scenarios import initial_state, scaled, scenario

cfg = scaled(scenario("deep_quench"), nx=32, ny=16)
table = deep_quench_sweep(initial_state(cfg), cfg.build_params(), cfg.sweep.thetas,
                          cfg.stepping.n_steps, cfg.build_step_config())
for theta, err in table.rows():
    print(f"theta = {theta:<6g} ||phi_theta - phi_obstacle|| = {err:.4e}")
print("strictly decreasing" if table.monotone else "NOT monotone")
