"""Run configuration: a line-based ``section.key = value`` format.

Blank lines and ``#`` comments are ignored.  Keys are case sensitive and
every key must belong to a known section; unknown or repeated keys are
errors.  Two-fluid coefficients take one value (shared) or two values
separated by a comma.  ``render_config`` writes the canonical form, which
parses back to an identical configuration.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

import numpy as np

from .errors import ParseError, ValidationError
from .grid import Grid
from .potentials import BoundaryKind, BoundaryPotential, PotentialKind, SplitPotential
from .state import PhysParams, eringen_check
from .stepper import StepConfig

INIT_KINDS = ("uniform", "random", "droplet", "stripe")


@dataclass
class GridSection:
    lx: float = 16.0
    ly: float = 8.0
    nx: int = 64
    ny: int = 32


@dataclass
class PhysicsSection:
    rho1: float = 1.0
    rho2: float = 1.0
    eta: tuple = (1.0, 1.0)
    eta_r: tuple = (0.5, 0.5)
    c_0: tuple = (0.0, 0.0)
    c_d: tuple = (0.5, 0.5)
    c_a: tuple = (0.5, 0.5)
    mobility: tuple = (1.0, 1.0)
    sigma: float = 0.0
    eps: float = 0.0
    q: float = 6.0
    delta_rho: float = 0.25
    body_force: tuple = (0.0, 0.0)
    k0: float = 1e-8
    k1: float = 1e8


@dataclass
class PotentialSection:
    kind: str = "kappa"
    theta: float = 0.3
    theta_c: float = 1.0
    kappa: float = 0.1


@dataclass
class BoundarySection:
    zeta: float = 0.0
    kind: str = "affine"
    gamma1: float = 1.0
    gamma2: float = 1.0


@dataclass
class SteppingSection:
    h: float = 1e-3
    n_steps: int = 50
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


@dataclass
class IoSection:
    output: str = "out"
    snapshot_stride: int = 10
    csv_stride: int = 1


@dataclass
class InitSection:
    """Initial phase field and flow.

    ``uniform``: phi = mean.  ``random``: mean plus uniform noise of the
    given amplitude (seeded).  ``droplet``: tanh profile of a disc of
    ``radius`` centred on the bottom wall at mid-length, plateau values
    ``+-amplitude``.  ``stripe``: ``amplitude * tanh((y - ly/2)/width)``.
    ``flow`` is the peak of an initial shear profile
    ``u_x = flow * sin(2 pi y / ly)``; the micro-rotation starts at half
    its curl.
    """

    name: str = "uniform"
    mean: float = 0.0
    amplitude: float = 0.05
    seed: int = 0
    radius: float = 6.0
    width: float = 1.4142135623730951
    flow: float = 0.0


@dataclass
class SweepSection:
    thetas: tuple = (0.3, 0.1, 0.03, 0.01)


@dataclass
class RunConfig:
    grid: GridSection = field(default_factory=GridSection)
    physics: PhysicsSection = field(default_factory=PhysicsSection)
    potential: PotentialSection = field(default_factory=PotentialSection)
    boundary: BoundarySection = field(default_factory=BoundarySection)
    stepping: SteppingSection = field(default_factory=SteppingSection)
    io: IoSection = field(default_factory=IoSection)
    init: InitSection = field(default_factory=InitSection)
    sweep: SweepSection = field(default_factory=SweepSection)

    # ------------------------------------------------------------ builders
    def build_grid(self) -> Grid:
        g = self.grid
        return Grid(g.lx, g.ly, g.nx, g.ny)

    def build_potential(self) -> SplitPotential:
        p = self.potential
        return SplitPotential(PotentialKind(p.kind), p.theta, p.theta_c, p.kappa)

    def build_boundary(self) -> BoundaryPotential:
        b = self.boundary
        return BoundaryPotential(b.zeta, BoundaryKind(b.kind), b.gamma1, b.gamma2)

    def build_params(self) -> PhysParams:
        ph = self.physics
        return PhysParams(
            rho1=ph.rho1, rho2=ph.rho2, eta=ph.eta, eta_r=ph.eta_r, c0=ph.c_0, cd=ph.c_d,
            ca=ph.c_a, mobility=ph.mobility, boundary=self.build_boundary(),
            potential=self.build_potential(), sigma=ph.sigma, eps=ph.eps, q=ph.q,
            h=self.stepping.h, delta_rho=ph.delta_rho, body_force=ph.body_force,
            k0=ph.k0, k1=ph.k1)

    def build_step_config(self) -> StepConfig:
        s = self.stepping
        kw = {f.name: getattr(s, f.name) for f in fields(StepConfig)}
        return StepConfig(**kw)


SECTIONS = {f.name: f.default_factory for f in fields(RunConfig)}


# ------------------------------------------------------------ values
def _format(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(repr(float(v)) for v in value)
    return str(value)


def _convert(text, default, lineno, key):
    try:
        if isinstance(default, bool):
            low = text.lower()
            if low not in ("true", "false"):
                raise ValueError("expected true or false")
            return low == "true"
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, tuple):
            vals = tuple(float(v) for v in text.split(","))
            if len(default) == 2:
                if len(vals) == 1:
                    vals = vals * 2
                if len(vals) != 2:
                    raise ValueError("expected one or two values")
            elif not vals:
                raise ValueError("expected a list of numbers")
            return vals
        return text
    except ValueError as exc:
        raise ParseError(lineno, f"{key}: {exc}") from None


def parse_config(text: str, validate=True) -> RunConfig:
    """Parse and (by default) validate a configuration text."""
    cfg = RunConfig()
    seen = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(lineno, f"expected 'section.key = value', got {raw.strip()!r}")
        lhs, rhs = (part.strip() for part in line.split("=", 1))
        if "." not in lhs:
            raise ParseError(lineno, f"key {lhs!r} has no section")
        section, key = lhs.split(".", 1)
        if section not in SECTIONS:
            raise ParseError(lineno, f"unknown section {section!r}")
        block = getattr(cfg, section)
        names = {f.name for f in fields(block)}
        if key not in names:
            raise ParseError(lineno, f"unknown key {lhs!r}")
        if lhs in seen:
            raise ParseError(lineno, f"duplicate key {lhs!r} (first set on line {seen[lhs]})")
        seen[lhs] = lineno
        if not rhs:
            raise ParseError(lineno, f"{lhs} has no value")
        setattr(block, key, _convert(rhs, getattr(block, key), lineno, lhs))
    if validate:
        validate_config(cfg)
    return cfg


def render_config(cfg: RunConfig) -> str:
    lines = []
    for section in SECTIONS:
        block = getattr(cfg, section)
        for f in fields(block):
            lines.append(f"{section}.{f.name} = {_format(getattr(block, f.name))}")
        lines.append("")
    return "\n".join(lines)


# ------------------------------------------------------------ validation
def validate_config(cfg: RunConfig) -> RunConfig:
    g = cfg.grid
    if g.nx < 4 or g.ny < 4:
        raise ValidationError("grid.nx/ny", "need at least 4 cells per direction")
    if not (g.lx > 0 and g.ly > 0):
        raise ValidationError("grid.lx/ly", "lengths must be positive")
    try:
        PotentialKind(cfg.potential.kind)
    except ValueError:
        raise ValidationError("potential.kind", "one of " + ", ".join(k.value for k in PotentialKind)) from None
    try:
        BoundaryKind(cfg.boundary.kind)
    except ValueError:
        raise ValidationError("boundary.kind", "one of " + ", ".join(k.value for k in BoundaryKind)) from None
    pot = cfg.potential
    if pot.theta_c <= 0:
        raise ValidationError("potential.theta_c", "must be positive")
    if pot.kind != "obstacle" and pot.theta <= 0:
        raise ValidationError("potential.theta", "must be positive")
    if pot.kind == "kappa" and not 0 < pot.kappa <= 1:
        raise ValidationError("potential.kappa", "must lie in (0, 1]")
    if cfg.boundary.zeta < 0:
        raise ValidationError("boundary.zeta", "must be nonnegative")
    ph = cfg.physics
    for k, (c0, cd, ca) in enumerate(zip(ph.c_0, ph.c_d, ph.c_a), start=1):
        bad = eringen_check(c0, cd, ca)
        if bad:
            raise ValidationError(f"physics.c_0/c_d/c_a (fluid {k})",
                                  "Eringen condition violated: " + "; ".join(bad))
    cfg.build_params().validate()
    try:
        cfg.build_step_config()
    except ValueError as exc:
        raise ValidationError("stepping", str(exc)) from None
    s = cfg.stepping
    if s.n_steps < 0:
        raise ValidationError("stepping.n_steps", "must be nonnegative")
    if s.max_halvings < 0:
        raise ValidationError("stepping.max_halvings", "must be nonnegative")
    io = cfg.io
    if io.snapshot_stride < 0 or io.csv_stride < 1:
        raise ValidationError("io", "csv_stride >= 1 and snapshot_stride >= 0 (0 disables snapshots)")
    ini = cfg.init
    if ini.name not in INIT_KINDS:
        raise ValidationError("init.name", "one of " + ", ".join(INIT_KINDS))
    if ini.width <= 0 or ini.radius <= 0:
        raise ValidationError("init.width/radius", "must be positive")
    th = cfg.sweep.thetas
    if any(b >= a for a, b in zip(th, th[1:])) or min(th) <= 0:
        raise ValidationError("sweep.thetas", "must be positive and strictly decreasing")
    # mean of the initial phase field strictly inside (-1, 1)
    from .scenarios import initial_state
    st = initial_state(cfg)
    m = float(st.phi.mean())
    pure_phase = bool(np.all(st.phi == st.phi.flat[0])) and abs(st.phi.flat[0]) == 1.0
    if not (-1.0 < m < 1.0 or pure_phase):
        raise ValidationError("init", f"mean of the initial phase field is {m:g}, must lie in (-1, 1)")
    if pot.kind == "logarithmic" and np.abs(st.phi).max() >= 1.0:
        raise ValidationError("init", "logarithmic potential needs |phi0| < 1")
    if pot.kind == "obstacle" and max(np.abs(st.phi).max(), np.abs(st.psi).max()) > 1.0:
        raise ValidationError("init", "obstacle potential needs |phi0|, |psi0| <= 1")
    return cfg


def with_overrides(cfg: RunConfig, **sections) -> RunConfig:
    """Copy of ``cfg`` with per-section keyword overrides, e.g. ``grid={'nx': 16}``."""
    out = RunConfig(**{name: replace(getattr(cfg, name)) for name in SECTIONS})
    for name, kw in sections.items():
        setattr(out, name, replace(getattr(out, name), **kw))
    return out
