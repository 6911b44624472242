"""Sparse linear solves: direct LU and scipy's Krylov methods behind one interface."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import Breakdown, MaxIterExceeded


class Method(str, Enum):
    DIRECT_LU = "direct_lu"
    CG = "cg"
    BICGSTAB = "bicgstab"
    GMRES = "gmres"


@dataclass(frozen=True)
class SolveOptions:
    method: Method = Method.DIRECT_LU
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_iter: int = 1000
    restart: int = 50

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be positive")


@dataclass
class SolveStats:
    method: Method
    iterations: int
    residual: float


def as_sparse(A):
    """CSR copy with duplicates summed, explicit zeros dropped and column indices sorted."""
    A = sp.csr_matrix(A, dtype=float, copy=True)
    A.sum_duplicates()
    A.eliminate_zeros()
    A.sort_indices()
    return A


def is_symmetric(A, tol=0.0):
    A = sp.csr_matrix(A)
    d = A - A.T
    return d.nnz == 0 or abs(d).max() <= tol


def solve(A, b, opts: SolveOptions = SolveOptions()):
    """Solve ``A x = b``.

    Raises Breakdown when the method fails structurally (singular factor,
    Krylov breakdown) and MaxIterExceeded when the residual target is not
    met; both carry the best iterate available.
    """
    A = sp.csr_matrix(A)
    b = np.asarray(b, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n) or b.shape != (n,):
        raise ValueError("A must be square and b must match")
    bnorm = np.linalg.norm(b)
    target = max(opts.abs_tol, opts.rel_tol * bnorm)
    if opts.method is Method.DIRECT_LU:
        try:
            lu = spla.splu(A.tocsc())
        except RuntimeError as exc:
            raise Breakdown(f"LU factorisation failed: {exc}", x=np.zeros(n)) from exc
        x = lu.solve(b)
        iterations = 1
        if not np.all(np.isfinite(x)):
            raise Breakdown("LU produced non-finite values", x=np.zeros(n))
    else:
        count = [0]

        def cb(_):
            count[0] += 1

        rtol = target / bnorm if bnorm > 0 else opts.rel_tol
        kw = dict(rtol=rtol, atol=0.0, maxiter=opts.max_iter)
        if opts.method is Method.CG:
            x, info = spla.cg(A, b, callback=cb, **kw)
        elif opts.method is Method.BICGSTAB:
            x, info = spla.bicgstab(A, b, callback=cb, **kw)
        else:
            x, info = spla.gmres(A, b, restart=opts.restart, callback=cb,
                                 callback_type="legacy", **kw)
        iterations = count[0]
        if info < 0:
            raise Breakdown(f"{opts.method.value} broke down", x=x,
                            residual=float(np.linalg.norm(b - A @ x)))
    residual = float(np.linalg.norm(b - A @ x))
    if opts.method is Method.DIRECT_LU:
        # normwise backward error; LU is accepted up to roundoff
        denom = abs(A).max() * np.abs(x).max() * np.sqrt(n) + bnorm
        if denom > 0 and residual > 1e-8 * denom:
            raise Breakdown(f"LU residual {residual:.3e} indicates a singular system", x=x,
                            residual=residual)
    elif residual > target * (1.0 + 1e-6):
        raise MaxIterExceeded(f"residual {residual:.3e} above target {target:.3e}", x=x,
                              residual=residual)
    return x, SolveStats(opts.method, iterations, residual)


def saddle_matrix(A, B):
    """``[[A, B^T, 0], [B, 0, e], [0, e^T, 0]]`` with the pressure mean pinned by ``e``."""
    n_p = B.shape[0]
    e = sp.csr_matrix(np.ones((n_p, 1)))
    return sp.bmat([[A, B.T, None], [B, None, e], [None, e.T, None]], format="csr")


def solve_saddle(A, B, f, opts: SolveOptions = SolveOptions(), g=None):
    """Solve ``A u + B^T p = f``, ``B u = g`` (default 0) with mean-zero pressure.

    When the constraint rows sum to zero (the discrete divergence of a
    periodic / no-penetration field) and ``g`` is compatible, the direct path
    pins the first pressure and drops its redundant row instead of adding the
    dense mean row, which would fill the LU factors; the pressure is shifted
    to zero mean afterwards.
    """
    n_u, n_p = A.shape[0], B.shape[0]
    f = np.asarray(f, dtype=float)
    g = np.zeros(n_p) if g is None else np.asarray(g, dtype=float)
    B = sp.csr_matrix(B)
    col_sums = np.abs(np.asarray(B.sum(axis=0))).max() if B.nnz else 0.0
    scale = abs(B).max() if B.nnz else 1.0
    if (opts.method is Method.DIRECT_LU and col_sums <= 1e-12 * scale
            and abs(g.sum()) <= 1e-12 * (1.0 + np.abs(g).sum())):
        Br = B[1:]
        K = sp.bmat([[A, Br.T], [Br, None]], format="csr")
        x, stats = solve(K, np.concatenate([f, g[1:]]), opts)
        u = x[:n_u]
        p = np.concatenate([[0.0], x[n_u:]])
        p -= p.mean()
        return u, p, stats
    rhs = np.concatenate([f, g, [0.0]])
    K = saddle_matrix(A, B)
    x, stats = solve(K, rhs, opts)
    return x[:n_u], x[n_u:n_u + n_p], stats
