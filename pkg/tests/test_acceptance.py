"""Acceptance criteria 1-9, one PASS/FAIL line each.

The heavy scenario runs (64x32, shipped step counts) are shared through
module fixtures; expect several minutes on one core.
"""
import time

import numpy as np
import pytest
import scipy.sparse as sp

from conftest import random_velocity
from mpnsch import Grid, StepConfig, step
from mpnsch.chsystem import CHSystem
from mpnsch.config import with_overrides
from mpnsch.linsolve import Method, SolveOptions, solve, solve_saddle
from mpnsch.obstacle import complementarity_check, deep_quench_sweep, vi_residual
from mpnsch.potentials import f0_kappa, f0_log
from mpnsch.scenarios import initial_state, scaled, scenario
from mpnsch.stepper import assemble_momentum

from test_obstacle import obstacle_params, saturated_stripe
from test_stepper import modelh_errors

BUDGET_SECONDS = 300.0


@pytest.fixture
def verdict(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
        assert ok, detail
    return emit


def run_scenario(name, cfg=None, keep_states=False):
    cfg = cfg or scenario(name)
    params, scfg = cfg.build_params(), cfg.build_step_config()
    st = initial_state(cfg)
    g = st.grid
    out = {"cfg": cfg, "params": params, "state0": st, "reports": [], "mass": [st.phi.sum() * g.dv],
           "phi_abs": [], "states": [st] if keep_states else None}
    t0 = time.perf_counter()
    for _ in range(cfg.stepping.n_steps):
        st, rep = step(st, params, scfg)
        out["reports"].append(rep)
        out["mass"].append(st.phi.sum() * g.dv)
        out["phi_abs"].append(float(np.abs(st.phi).max()))
        if keep_states:
            out["states"].append(st)
    out["seconds"] = time.perf_counter() - t0
    out["final"] = st
    out["area"] = g.lx * g.ly
    return out


@pytest.fixture(scope="module")
def runs():
    names = ["equilibrium", "spinodal", "droplet_wall", "micropolar_channel"]
    out = {n: run_scenario(n) for n in names}
    out["deep_quench"] = run_scenario("deep_quench", keep_states=True)
    return out


@pytest.fixture(scope="module")
def saturated_run():
    """Obstacle run whose contact sets are nonempty at every step.

    The deep-quench scenario stays strictly inside the bounds (so that the
    logarithmic comparison runs remain representable), hence this extra run.
    """
    params = obstacle_params()
    states = [saturated_stripe()]
    for _ in range(3):
        states.append(step(states[-1], params)[0])
    return params, states


# ------------------------------------------------------------------ 1
def test_criterion_1_energy_inequality(runs, verdict):
    worst_slack, worst_diss, slowest, n_steps = np.inf, np.inf, 0.0, 0
    for name in ("equilibrium", "spinodal", "droplet_wall"):
        r = runs[name]
        assert (r["cfg"].grid.nx, r["cfg"].grid.ny, r["cfg"].stepping.h, r["cfg"].stepping.n_steps) == (64, 32, 1e-3, 50)
        slowest = max(slowest, r["seconds"])
        for rep in r["reports"]:
            n_steps += 1
            worst_slack = min(worst_slack, rep.slack / (1 + abs(rep.energy_old.total)))
            scale = 1 + abs(rep.energy_old.total)
            worst_diss = min(worst_diss, min(rep.dissipation.nonnegative_fields().values()) / scale)
    ok = worst_slack >= -1e-8 and worst_diss >= -1e-14 and slowest <= BUDGET_SECONDS
    verdict(1, ok, f"{n_steps} steps; min slack/(1+|E|) = {worst_slack:.3e}, "
                   f"min dissipation/(1+|E|) = {worst_diss:.3e}, slowest run {slowest:.0f} s "
                   f"(budget {BUDGET_SECONDS:.0f} s)")


# ------------------------------------------------------------------ 2
def test_criterion_2_mass_conservation(runs, verdict):
    worst = 0.0
    for r in runs.values():
        m = np.array(r["mass"])
        worst = max(worst, np.abs(m - m[0]).max() / r["area"])
    verdict(2, worst <= 1e-10, f"max |int phi_k - int phi_0| / |Omega| = {worst:.3e} over {len(runs)} scenarios")


# ------------------------------------------------------------------ 3
def test_criterion_3_bounds(runs, saturated_run, verdict):
    obs = runs["deep_quench"]
    assert obs["params"].potential.is_obstacle
    obs_max, comp_ok, n_contact = 0.0, True, 0
    for s in obs["states"][1:] + saturated_run[1][1:]:
        n_contact += int(np.sum(np.abs(s.phi) == 1.0))
        obs_max = max(obs_max, float(np.abs(s.phi).max()), float(np.abs(s.psi).max()))
        comp_ok &= complementarity_check(s.phi, s.xi, 1e-8).passed
        comp_ok &= complementarity_check(s.psi, s.xi_wall, 1e-8).passed
    log_max = max(runs["spinodal"]["phi_abs"])
    assert runs["spinodal"]["params"].potential.kind.value == "logarithmic"
    ok = obs_max <= 1 + 1e-10 and comp_ok and log_max < 1.0
    verdict(3, ok, f"obstacle max |phi|,|psi| = {obs_max!r}, complementarity {'ok' if comp_ok else 'violated'} "
                   f"({n_contact} contact cells); "
                   f"logarithmic max |phi| = {log_max:.6f}")


# ------------------------------------------------------------------ 4
def test_criterion_4_potential_regularisation(verdict):
    worst_bound, worst_fd = -np.inf, 0.0
    rng = np.random.default_rng(2024)
    for kappa in (0.3, 0.1, 0.01):
        s = rng.uniform(-1.0, 1.0, 10_000)
        s = s[np.abs(s) < 1.0]
        vk, dk, _ = f0_kappa(s, kappa)
        v, d, _ = f0_log(s)
        worst_bound = max(worst_bound, (np.abs(dk) - np.abs(d)).max(), (np.abs(vk) - np.abs(v)).max())
        for a in (1.0 - kappa, kappa - 1.0):
            t = 1e-5 * kappa
            left = f0_kappa(np.array([a - t, a]), kappa)
            right = f0_kappa(np.array([a, a + t]), kappa)
            for k in (0, 1):
                dl = (left[k][1] - left[k][0]) / t
                dr = (right[k][1] - right[k][0]) / t
                worst_fd = max(worst_fd, abs(dl - dr) / max(1.0, abs(dl)))
    ok = worst_bound <= 1e-12 and worst_fd <= 1e-4
    verdict(4, ok, f"max(|F0k'|-|F0'|, |F0k|-|F0|) = {worst_bound:.2e} over 3x10^4 samples; "
                   f"C2 matching mismatch {worst_fd:.2e}")


# ------------------------------------------------------------------ 5
def test_criterion_5_micropolar_limits(verdict):
    cfg = with_overrides(scaled(scenario("spinodal"), nx=16, ny=8, n_steps=10),
                         physics={"eta_r": (0.0, 0.0)}, init={"flow": 0.5})
    params = cfg.build_params()
    a = b = initial_state(cfg)
    g = a.grid
    diff = 0.0
    for _ in range(cfg.stepping.n_steps):
        a, _ = step(a, params, StepConfig(solve_micro=True, picard_tol=1e-12))
        b, _ = step(b, params, StepConfig(solve_micro=False, picard_tol=1e-12))
        diff = max(diff, np.abs(g.pack_velocity(a.u) - g.pack_velocity(b.u)).max())
    assert np.abs(a.omega).max() > 0  # the micro-rotation is live, only decoupled
    gaps = []
    for eta_r in (1.0, 10.0, 100.0):
        r = run_scenario("micropolar_channel", with_overrides(scenario("micropolar_channel"),
                                                              physics={"eta_r": (eta_r, eta_r)}))
        s = r["final"]
        gaps.append(float(np.sqrt(np.sum((s.omega - 0.5 * s.grid.curl_of_vector(s.u)) ** 2) * s.grid.dv)))
    trend = gaps[0] > gaps[1] > gaps[2]
    ok = diff <= 1e-10 and trend
    verdict(5, ok, f"(a) eta_r=0 velocity difference {diff:.2e} over 10 steps; "
                   f"(b) ||omega - curl u/2|| = {', '.join(f'{x:.3e}' for x in gaps)} for eta_r = 1, 10, 100")


# ------------------------------------------------------------------ 6
def test_criterion_6_modelh_reduction(verdict):
    worst = modelh_errors(n_steps=5)
    m = max(worst.values())
    verdict(6, m <= 1e-6, f"max relative difference to the reduced stepper over 5 steps = {m:.2e} "
                          f"({', '.join(f'{k} {v:.1e}' for k, v in worst.items())})")


# ------------------------------------------------------------------ 7
def test_criterion_7_deep_quench(runs, verdict):
    cfg = scenario("deep_quench")
    assert (cfg.grid.nx, cfg.grid.ny, cfg.init.name) == (64, 32, "stripe")
    table = deep_quench_sweep(initial_state(cfg), cfg.build_params(), cfg.sweep.thetas,
                              cfg.stepping.n_steps, cfg.build_step_config())
    # the sweep's obstacle run must reproduce the scenario run
    same = np.array_equal(table.obstacle_state.phi, runs["deep_quench"]["final"].phi)
    rows = ", ".join(f"{th:g}: {e:.3e}" for th, e in table.rows())
    verdict(7, table.monotone and same, f"L2 errors {rows}; strictly decreasing: {table.monotone}")


# ------------------------------------------------------------------ 8
def test_criterion_8_operator_calculus(verdict):
    rng = np.random.default_rng(8)
    worst = 0.0

    def rel(a, b):
        return abs(a - b) / max(1.0, abs(a), abs(b))

    for _ in range(20):
        g = Grid(rng.uniform(0.5, 5), rng.uniform(0.5, 5), int(rng.integers(4, 12)), int(rng.integers(4, 12)))
        p = rng.standard_normal(g.cell_shape)
        u = random_velocity(g, rng)
        un = random_velocity(g, rng, wall=False)
        a, b = rng.standard_normal(g.wall_shape), rng.standard_normal(g.wall_shape)
        worst = max(worst,
                    rel(g.cell_inner(p, g.divergence(un)), -g.velocity_inner(g.gradient(p), un)),
                    rel(g.cell_inner(p, g.curl_of_vector(u)),
                        g.velocity_inner(g.curl_of_scalar(p), u, include_wall=True)),
                    rel(g.wall_inner(g.surface_grad(a), g.surface_grad(b)),
                        -g.wall_inner(a, g.surface_laplacian(b))),
                    rel(float(np.sum(g.curl_of_vector(u) ** 2)), float(np.sum(4.0 * g.skew_grad(u) ** 2))))

    # sparse solves of the actual systems against dense numpy solves
    solve_err = 0.0
    g = Grid(8.0, 8.0, 16, 16)
    cfg = scaled(scenario("droplet_wall"), nx=16, ny=16)
    params = cfg.build_params()
    st = initial_state(cfg)
    u = random_velocity(g, rng, 0.1)
    J = CHSystem(st, u, params).jacobian(np.concatenate([st.phi.ravel(), st.mu.ravel(), st.psi.ravel()]))
    rhs = rng.standard_normal(J.shape[0])
    x, _ = solve(J, rhs)
    ref = np.linalg.solve(J.toarray(), rhs)
    solve_err = max(solve_err, np.linalg.norm(x - ref) / np.linalg.norm(ref))
    A, B, f = assemble_momentum(st, st.phi, st.mu, st.psi, st.L, u, (st.omega, st.omega_wall),
                                params, StepConfig())
    z, pr, _ = solve_saddle(A, B, f)
    n = A.shape[0]
    K = sp.bmat([[A, B.T, None], [B, None, np.ones((B.shape[0], 1))],
                 [None, np.ones((1, B.shape[0])), None]]).toarray()
    assert K.shape[0] <= 5000
    ref = np.linalg.solve(K, np.concatenate([f, np.zeros(B.shape[0] + 1)]))
    solve_err = max(solve_err, np.linalg.norm(np.concatenate([z, pr]) - ref[:-1]) / np.linalg.norm(ref))
    M = (-g.LAP_NEUMANN + sp.identity(g.n_cells)).tocsr()
    b = rng.standard_normal(g.n_cells)
    ref = np.linalg.solve(M.toarray(), b)
    for method in Method:
        x, _ = solve(M, b, SolveOptions(method, rel_tol=1e-12))
        solve_err = max(solve_err, np.linalg.norm(x - ref) / np.linalg.norm(ref))
    ok = worst <= 1e-12 and solve_err <= 1e-8
    verdict(8, ok, f"max adjointness/identity defect {worst:.2e} on 20 random grids; "
                   f"max relative error of sparse vs dense solves {solve_err:.2e}")


# ------------------------------------------------------------------ 9
def test_criterion_9_vi_certification(runs, saturated_run, verdict):
    rng = np.random.default_rng(9)
    worst, count, n_states = np.inf, 0, 0
    pairs = [(runs["deep_quench"]["params"], runs["deep_quench"]["states"]), saturated_run]
    for params, states in pairs:
        for k, new in zip(states, states[1:]):
            n_states += 1
            for _ in range(100):
                eta = np.clip(rng.uniform(-1.3, 1.3, new.grid.cell_shape), -1, 1)
                zeta = np.clip(rng.uniform(-1.3, 1.3, new.grid.wall_shape), -1, 1)
                value, scale = vi_residual(k, new, params, eta, zeta)
                worst = min(worst, value / scale)
                count += 1
    verdict(9, worst >= -1e-9, f"{count} test pairs on {n_states} PDAS states; "
                               f"min VI value / scale = {worst:.3e}")
