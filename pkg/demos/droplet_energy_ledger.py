"""Droplet on a wetting wall, reduced to 32x16, with the energy ledger per step.

Each row shows the total energy, how much of the drop was dissipated by
each mechanism, and the slack left over.  The slack should never be
meaningfully negative; it is the part of the energy lost to the convex
splitting of the potentials rather than to a physical mechanism.

    python3 demos/droplet_energy_ledger.py
"""
from mpnsch import step
from mpnsch.scenarios import initial_state, scaled, scenario

cfg = scaled(scenario("droplet_wall"), nx=32, ny=16, n_steps=10)
params, scfg = cfg.build_params(), cfg.build_step_config()
state = initial_state(cfg)

print(f"{'step':>4} {'energy':>14} {'chemical':>10} {'shear':>10} {'wall':>10} {'slack':>10} picard")
for k in range(1, cfg.stepping.n_steps + 1):
    state, rep = step(state, params, scfg)
    d = rep.dissipation
    wall = d.wall_slip + d.wall_spin + d.wall_ac
    print(f"{k:4d} {rep.energy_new.total:14.8f} {rep.h * d.chemical:10.3e} {rep.h * d.shear:10.3e} "
          f"{rep.h * wall:10.3e} {rep.slack:10.3e} {rep.picard_iters:6d}")
