"""Geometric multigrid V-cycles for the SPD systems on a mesh hierarchy.

Coarse operators are Galerkin projections P^T A P of the top-level matrix,
smoothing is Gauss-Seidel (forward sweeps before the coarse correction,
backward sweeps after it, so the cycle is symmetric in the A inner product),
and the coarsest level is solved by a dense Cholesky factorization.

Work is counted in dof-weighted operator applications: one smoothing sweep
or residual evaluation on a level with N rows adds N to ``matvec_count``.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve_triangular

from .exceptions import NoConvergence, NonSPDError

__all__ = ["MgHierarchy", "SolveStats", "setup_mg", "vcycle", "solve", "mg_tolerance"]


@dataclass
class SolveStats:
    v_cycles: int = 0
    final_relative_residual: float = 0.0
    matvec_count: int = 0


@dataclass(eq=False)
class MgHierarchy:
    matrices: list  # index 0 = coarsest
    prolongations: list  # prolongations[k] : level k-1 -> level k, entry 0 unused
    lower: list
    upper: list
    coarse_factor: tuple
    nu1: int = 2
    nu2: int = 2

    @property
    def top(self):
        return len(self.matrices) - 1

    @property
    def A(self):
        return self.matrices[-1]

    def dims(self):
        return [A.shape[0] for A in self.matrices]


def mg_tolerance(h):
    """Relative residual target for the auxiliary solves on a level of size h."""
    return min(1e-10, 0.01 * h**2)


def setup_mg(hier, top_matrix, top_level, extra_term=None, nu1=2, nu2=2):
    """Build the V-cycle data for ``top_matrix`` (+ ``extra_term``) on ``top_level``.

    ``extra_term`` is added before projection; it carries the f_u mass-like
    term of the Newton correction.  Raises NonSPDError when a diagonal entry
    is non-positive or the coarsest factorization fails.
    """
    A = sp.csr_matrix(top_matrix, dtype=float)
    if extra_term is not None:
        A = (A + extra_term).tocsr()
    n_top = hier[top_level].n_dofs
    if A.shape != (n_top, n_top):
        raise ValueError(f"matrix shape {A.shape} does not match level {top_level} with {n_top} dofs")

    matrices = [A]
    for k in range(top_level, 0, -1):
        P = hier.prolongations[k]
        matrices.append((P.T @ matrices[-1] @ P).tocsr())
    matrices.reverse()

    for k, Ak in enumerate(matrices):
        if Ak.shape[0] and np.any(Ak.diagonal() <= 0):
            raise NonSPDError(f"non-positive diagonal entry on multigrid level {k}")
    try:
        coarse_factor = sla.cho_factor(matrices[0].toarray(), lower=True)
    except np.linalg.LinAlgError as exc:
        raise NonSPDError(f"coarsest-level Cholesky factorization failed: {exc}") from None

    return MgHierarchy(
        matrices=matrices,
        prolongations=[None] + [hier.prolongations[k] for k in range(1, top_level + 1)],
        lower=[sp.tril(Ak, format="csr") for Ak in matrices],
        upper=[sp.triu(Ak, format="csr") for Ak in matrices],
        coarse_factor=coarse_factor,
        nu1=nu1,
        nu2=nu2,
    )


class _Work:
    __slots__ = ("count",)

    def __init__(self):
        self.count = 0


def _cycle(mg, level, b, x, work):
    A = mg.matrices[level]
    n = A.shape[0]
    if level == 0:
        work.count += n
        return sla.cho_solve(mg.coarse_factor, b)
    for _ in range(mg.nu1):
        x = x + spsolve_triangular(mg.lower[level], b - A @ x, lower=True)
    r = b - A @ x
    P = mg.prolongations[level]
    x = x + P @ _cycle(mg, level - 1, P.T @ r, np.zeros(P.shape[1]), work)
    for _ in range(mg.nu2):
        x = x + spsolve_triangular(mg.upper[level], b - A @ x, lower=False)
    work.count += (mg.nu1 + mg.nu2 + 1) * n
    return x


def vcycle(mg, rhs, x, work=None):
    """Apply one V(nu1, nu2)-cycle to the iterate ``x``; returns the new iterate."""
    rhs = np.asarray(rhs, dtype=float)
    x = np.array(x, dtype=float)
    return _cycle(mg, mg.top, rhs, x, work if work is not None else _Work())


def solve(mg, rhs, rel_tol, max_cycles=50, x0=None):
    """V-cycle iteration until ||rhs - A x||_2 <= rel_tol ||rhs||_2.

    Raises NoConvergence (with the residual history attached) when
    ``max_cycles`` cycles do not suffice.
    """
    if not rel_tol > 0:
        raise ValueError("rel_tol must be positive")
    rhs = np.asarray(rhs, dtype=float)
    A = mg.A
    n = A.shape[0]
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    stats = SolveStats()
    bnorm = np.linalg.norm(rhs)
    if bnorm == 0.0:
        return np.zeros(n), stats

    work = _Work()
    res = np.linalg.norm(rhs - A @ x) / bnorm
    work.count += n
    history = [res]
    while res > rel_tol:
        if stats.v_cycles >= max_cycles:
            stats.matvec_count = work.count
            raise NoConvergence(
                f"multigrid did not reach relative residual {rel_tol:g} in {max_cycles} cycles "
                f"(last {res:.3e})",
                history,
            )
        x = _cycle(mg, mg.top, rhs, x, work)
        stats.v_cycles += 1
        res = np.linalg.norm(rhs - A @ x) / bnorm
        work.count += n
        history.append(res)
    stats.final_relative_residual = float(res)
    stats.matvec_count = work.count
    return x, stats
