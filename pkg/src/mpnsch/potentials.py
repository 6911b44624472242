"""Bulk and boundary free-energy densities with convex/concave splits.

Bulk potentials have the form ``F(s) = theta * F0(s) + F1(s)`` where
``F0(s) = (1+s)ln(1+s) + (1-s)ln(1-s)`` is the convex logarithmic part and
``F1(s) = -theta_c/2 s^2`` the concave part.  The kappa-regularised variant
replaces ``F0`` by a C^2 function that agrees with it on ``[-1+kappa, 1-kappa]``
and continues quadratically outside.  The obstacle variant replaces
``theta * F0`` by the indicator of ``[-1, 1]``.

All evaluators are vectorised over numpy arrays.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import DomainError, UnsupportedPotential


class PotentialKind(str, Enum):
    LOGARITHMIC = "logarithmic"
    KAPPA = "kappa"
    OBSTACLE = "obstacle"


class BoundaryKind(str, Enum):
    AFFINE = "affine"
    SINE = "sine"


def f0_log(s):
    """Convex logarithmic part and its first two derivatives.

    Raises DomainError if any ``|s| >= 1``.
    """
    s = np.asarray(s, dtype=float)
    if np.any(np.abs(s) >= 1.0) or np.any(~np.isfinite(s)):
        raise DomainError("logarithmic potential evaluated at |s| >= 1")
    value = (1.0 + s) * np.log1p(s) + (1.0 - s) * np.log1p(-s)
    d1 = np.log1p(s) - np.log1p(-s)
    d2 = 2.0 / ((1.0 - s) * (1.0 + s))
    return value, d1, d2


def kappa_coefficients(kappa):
    """Coefficients ``(c0, c1, c2)`` of the quadratic outer branch.

    For ``|s| >= 1 - kappa`` the regularised function is
    ``c0 + c1*|s| + c2*s^2``: the second-order Taylor polynomial of ``F0``
    at ``a = 1 - kappa``.  The branch for negative ``s`` follows by evenness,
    so the six coefficients of the two branches are ``(c0, +-c1, c2)``.
    """
    if not 0.0 < kappa <= 1.0:
        raise ValueError("kappa must lie in (0, 1]")
    a = 1.0 - kappa
    v, d, c = (float(x) for x in f0_log(a))
    return v - d * a + 0.5 * c * a * a, d - c * a, 0.5 * c


def f0_kappa(s, kappa):
    """C^2 regularisation of ``f0_log``, defined on the whole real line."""
    s = np.asarray(s, dtype=float)
    a = 1.0 - kappa
    c0, c1, c2 = kappa_coefficients(kappa)
    r = np.abs(s)
    inner = r < a
    # evaluate the log branch only where it is used
    si = np.where(inner, s, 0.0)
    v_in, d_in, c_in = f0_log(si)
    sign = np.sign(s)
    v_out = c0 + c1 * r + c2 * r * r
    d_out = sign * (c1 + 2.0 * c2 * r)
    c_out = np.full_like(s, 2.0 * c2)
    return (np.where(inner, v_in, v_out),
            np.where(inner, d_in, d_out),
            np.where(inner, c_in, c_out))


def eval_log(s, theta=0.3, theta_c=1.0):
    """``theta*F0 + F1`` and its first two derivatives."""
    v, d, c = f0_log(s)
    s = np.asarray(s, dtype=float)
    return (theta * v - 0.5 * theta_c * s * s,
            theta * d - theta_c * s,
            theta * c - theta_c)


def eval_kappa(s, kappa=0.1, theta=0.3, theta_c=1.0):
    """``theta*F0_kappa + F1`` and its first two derivatives."""
    v, d, c = f0_kappa(s, kappa)
    s = np.asarray(s, dtype=float)
    return (theta * v - 0.5 * theta_c * s * s,
            theta * d - theta_c * s,
            theta * c - theta_c)


@dataclass(frozen=True)
class SplitPotential:
    """Bulk potential with its convex/concave split.

    ``kind`` selects the convex part; ``theta`` and ``kappa`` are ignored
    where they do not apply (``theta`` for the obstacle, ``kappa`` for the
    pure logarithm).
    """

    kind: PotentialKind = PotentialKind.KAPPA
    theta: float = 0.3
    theta_c: float = 1.0
    kappa: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "kind", PotentialKind(self.kind))
        if self.theta_c <= 0:
            raise ValueError("theta_c must be positive")
        if self.kind is not PotentialKind.OBSTACLE and self.theta <= 0:
            raise ValueError("theta must be positive")
        if self.kind is PotentialKind.KAPPA and not 0.0 < self.kappa <= 1.0:
            raise ValueError("kappa must lie in (0, 1]")

    @property
    def is_obstacle(self):
        return self.kind is PotentialKind.OBSTACLE

    def convex(self, s):
        """Convex part (scaled by theta) with first and second derivative."""
        if self.kind is PotentialKind.LOGARITHMIC:
            v, d, c = f0_log(s)
        elif self.kind is PotentialKind.KAPPA:
            v, d, c = f0_kappa(s, self.kappa)
        else:
            raise UnsupportedPotential("the obstacle convex part is an indicator")
        return self.theta * v, self.theta * d, self.theta * c

    def concave(self, s):
        s = np.asarray(s, dtype=float)
        return -0.5 * self.theta_c * s * s, -self.theta_c * s, np.full_like(s, -self.theta_c)

    def energy(self, s):
        """Energy density; the obstacle indicator is taken as 0 (callers check feasibility)."""
        f1 = self.concave(s)[0]
        if self.is_obstacle:
            return f1
        return self.convex(s)[0] + f1

    def derivative(self, s):
        if self.is_obstacle:
            raise UnsupportedPotential("obstacle potential has no classical derivative")
        return self.convex(s)[1] + self.concave(s)[1]

    def minimiser(self):
        """Positive well of the double-well (1.0 for the obstacle)."""
        if self.is_obstacle:
            return 1.0
        if self.theta * 2.0 >= self.theta_c:
            return 0.0
        s = 0.999 if self.kind is PotentialKind.LOGARITHMIC else 1.0
        lo, hi = 1e-12, s
        # bisection on F'(s) = 0 over (0, hi); F' < 0 near 0+ in the double-well regime
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if self.derivative(mid) < 0:
                lo = mid
            else:
                hi = mid
        if self.kind is PotentialKind.KAPPA and self.derivative(hi) < 0:
            # the well sits on the quadratic branch beyond 1
            lo, hi = hi, 10.0
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                if self.derivative(mid) < 0:
                    lo = mid
                else:
                    hi = mid
        return 0.5 * (lo + hi)


def chemical_force_split(phi_new, phi_old, pot: SplitPotential):
    """Implicit convex plus explicit concave force ``theta*F0'(new) + F1'(old)``."""
    if pot.is_obstacle:
        raise UnsupportedPotential("obstacle forces are handled by the active-set solver")
    return pot.convex(phi_new)[1] + pot.concave(phi_old)[1]


@dataclass(frozen=True)
class BoundaryPotential:
    """Wall energy ``G_hat`` interpolating gamma2 at s=-1 and gamma1 at s=+1.

    ``G_hat = zeta/2 s^2 + G`` with ``G = G0 + G1``.  For the affine
    interpolant ``G0 = 0``; for the sine interpolant ``G0 = c s^2`` with
    ``c = pi^2/8 |gamma1 - gamma2|`` which makes ``G1`` concave.
    """

    zeta: float = 0.0
    kind: BoundaryKind = BoundaryKind.AFFINE
    gamma1: float = 1.0
    gamma2: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", BoundaryKind(self.kind))
        if self.zeta < 0:
            raise ValueError("zeta must be nonnegative")

    @property
    def convex_coefficient(self):
        if self.kind is BoundaryKind.SINE:
            return np.pi ** 2 / 8.0 * abs(self.gamma1 - self.gamma2)
        return 0.0

    def hat(self, s):
        """``G_hat`` and its first two derivatives."""
        s = np.asarray(s, dtype=float)
        half_diff = 0.5 * (self.gamma1 - self.gamma2)
        mean = 0.5 * (self.gamma1 + self.gamma2)
        if self.kind is BoundaryKind.AFFINE:
            return half_diff * s + mean, np.full_like(s, half_diff), np.zeros_like(s)
        w = 0.5 * np.pi
        return (half_diff * np.sin(w * s) + mean,
                half_diff * w * np.cos(w * s),
                -half_diff * w * w * np.sin(w * s))

    def convex(self, s):
        """``G0`` with first and second derivative."""
        s = np.asarray(s, dtype=float)
        c = self.convex_coefficient
        return c * s * s, 2.0 * c * s, np.full_like(s, 2.0 * c)

    def concave(self, s):
        """``G1 = G_hat - zeta/2 s^2 - G0`` with its first derivative."""
        s = np.asarray(s, dtype=float)
        g, dg, _ = self.hat(s)
        g0, dg0, _ = self.convex(s)
        return g - 0.5 * self.zeta * s * s - g0, dg - self.zeta * s - dg0

    def energy(self, s):
        """Wall energy density ``zeta/2 s^2 + G(s)``, i.e. ``G_hat``."""
        return self.hat(s)[0]


def boundary_force_split(psi_new, psi_old, bp: BoundaryPotential):
    """``zeta*psi_new + G0'(psi_new) + G1'(psi_old)``."""
    psi_new = np.asarray(psi_new, dtype=float)
    return bp.zeta * psi_new + bp.convex(psi_new)[1] + bp.concave(psi_old)[1]
