"""Ground-state solvers for -Lap u + f(x,u) = lambda u with ||u||_L2 = 1.

Every nonlinear solve is a self-consistent field (SCF) loop on the splitting
f = w(x,u) u: freeze w at the previous iterate, solve the linear generalized
eigenproblem (A0 + W) x = lambda M x for its smallest pair, repeat.

Three spaces are supported: a whole mesh level (``scf_solve`` with sparse LU
inverse iteration, ``direct_solve_fine`` with multigrid inner solves) and the
augmented space V_H + span{u~} (``solve_augmented``), whose reduced problem
is dense and of size dim V_H + 1.
"""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .assembly import assemble_mass, assemble_nonlinear_load, assemble_stiffness, assemble_weighted_mass
from .exceptions import DegenerateSpace, NoConvergence, SingularSystem, ZeroVector
from .multigrid import mg_tolerance, setup_mg, solve as mg_solve

__all__ = [
    "EigenPair",
    "ScfConfig",
    "AugmentedSpace",
    "EigenWork",
    "normalize_and_orient",
    "smallest_generalized_eigenpair",
    "scf_solve",
    "build_augmented_space",
    "solve_augmented",
    "direct_solve_fine",
    "sine_guess",
    "energy",
]

log = logging.getLogger(__name__)


@dataclass
class EigenPair:
    lam: float
    u: np.ndarray
    level: int
    residual: float = 0.0
    iterations: int = 0


@dataclass(frozen=True)
class ScfConfig:
    tol: float = 1e-10
    max_iter: int = 100
    damping: float = 1.0

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("ScfConfig.tol must be positive")
        if self.max_iter < 1:
            raise ValueError("ScfConfig.max_iter must be at least 1")
        if not 0 < self.damping <= 1:
            raise ValueError("ScfConfig.damping must lie in (0, 1]")


@dataclass
class EigenWork:
    """Tallies filled in by the solvers when a work object is passed."""

    dense_eig_work: int = 0
    assemblies: int = 0
    matvecs: int = 0


def normalize_and_orient(u, M):
    """Scale to u^T M u = 1 and flip the sign so that sum(M u) > 0."""
    u = np.asarray(u, dtype=float)
    Mu = M @ u
    s = float(u @ Mu)
    if not s > 0:
        raise ZeroVector("cannot normalize a vector with zero mass norm")
    scale = 1.0 / np.sqrt(s)
    if Mu.sum() < 0:
        scale = -scale
    return u * scale


def energy(A0, mesh, u, f):
    """a(u, u) = (grad u, grad u) + (f(x, u), u)."""
    return float(u @ (A0 @ u) + u @ assemble_nonlinear_load(mesh, u, f))


def smallest_generalized_eigenpair(A, M, tol=1e-14, max_iter=1000, x0=None, res_tol=None):
    """Smallest pair of A x = lambda M x by inverse iteration (sparse LU of A).

    Stops when the Rayleigh quotient changes by at most ``tol`` relative
    and, if ``res_tol`` is given, ||A x - lambda M x||_2 / ||x||_2 <= res_tol.
    The eigenvector is M-normalized with positive mass-weighted sum.
    """
    A = sp.csc_matrix(A, dtype=float)
    n = A.shape[0]
    if n == 0:
        raise ValueError("empty system")
    try:
        lu = splu(A)
    except RuntimeError as exc:
        raise SingularSystem(f"factorization failed: {exc}") from None
    x = np.ones(n) if x0 is None else np.array(x0, dtype=float)
    x = normalize_and_orient(x, M)
    lam = float(x @ (A @ x))
    history = [lam]
    for _ in range(max_iter):
        y = lu.solve(M @ x)
        if not np.all(np.isfinite(y)):
            raise SingularSystem("inverse iteration produced non-finite values")
        x = normalize_and_orient(y, M)
        lam_new = float(x @ (A @ x))
        history.append(lam_new)
        if abs(lam_new - lam) <= tol * abs(lam_new) and (res_tol is None or _residual(A, M, x, lam_new) <= res_tol):
            return lam_new, x
        lam = lam_new
    raise NoConvergence(f"inverse iteration did not converge in {max_iter} steps", history)


def sine_guess(mesh):
    """Normalized interpolant of prod_i sin(pi x_i)."""
    u = mesh.interpolate(lambda x: np.prod(np.sin(np.pi * x), axis=1))
    return normalize_and_orient(u, assemble_mass(mesh))


def _residual(K, M, u, lam):
    return float(np.linalg.norm(K @ u - lam * (M @ u)) / np.linalg.norm(u))


def scf_solve(A0, M, mesh, f, init=None, cfg=ScfConfig(), work=None):
    """SCF on a full mesh level; each sweep solves its linear problem by inverse iteration.

    Stops when |delta lambda| <= tol and ||(A0 + W(u)) u - lambda M u||_2 / ||u||_2 <= 100 tol.
    For f = 0 the first sweep is exact and is returned directly.
    """
    u = normalize_and_orient(sine_guess(mesh) if init is None else init, M)
    a = cfg.damping
    W = assemble_weighted_mass(mesh, u, f)
    lam_prev = float(u @ ((A0 + W) @ u))
    history = [lam_prev]
    for it in range(1, cfg.max_iter + 1):
        lam, x = smallest_generalized_eigenpair(A0 + W, M, tol=min(1e-14, cfg.tol), x0=u, res_tol=cfg.tol)
        if f.is_zero:
            # linear problem: the first sweep is already the answer
            return EigenPair(lam=lam, u=x, level=mesh.level, residual=_residual(A0, M, x, lam), iterations=1)
        u = normalize_and_orient((1 - a) * u + a * x, M) if a < 1 else x
        W = assemble_weighted_mass(mesh, u, f)
        if work is not None:
            work.assemblies += 1
        res = _residual(A0 + W, M, u, lam)
        history.append(lam)
        if abs(lam - lam_prev) <= cfg.tol and res <= 100 * cfg.tol:
            rq = float(u @ ((A0 + W) @ u))
            return EigenPair(lam=rq, u=u, level=mesh.level, residual=res, iterations=it)
        lam_prev = lam
    raise NoConvergence(f"SCF did not converge in {cfg.max_iter} sweeps", history)


@dataclass(eq=False)
class AugmentedSpace:
    """V_H + span{u~} realized on the fine level as the columns of G = [G_H | u~]."""

    hier: object
    level: int
    G_H: sp.csr_matrix
    u_tilde: np.ndarray
    G: sp.csr_matrix
    stiffness: sp.csr_matrix
    mass: sp.csr_matrix
    gram_min_eig: float

    @property
    def dim(self):
        return self.G.shape[1]


def build_augmented_space(hier, k_plus_1, u_tilde, stiffness=None, mass=None, G_H=None):
    """Assemble the basis of V_H + span{u~} on level ``k_plus_1``.

    Raises DegenerateSpace when the unit-diagonal Gram matrix has an
    eigenvalue below 1e-12, i.e. u~ is numerically a coarse function.
    """
    mesh = hier[k_plus_1]
    u_tilde = np.asarray(u_tilde, dtype=float)
    if u_tilde.shape != (mesh.n_dofs,):
        raise ValueError(f"u_tilde must live on level {k_plus_1} ({mesh.n_dofs} dofs)")
    if not np.any(u_tilde):
        raise ZeroVector("augmenting vector is zero")
    A0 = assemble_stiffness(mesh) if stiffness is None else stiffness
    M = assemble_mass(mesh) if mass is None else mass
    if G_H is None:
        G_H = hier.composite_prolongation(0, k_plus_1)
    G = sp.hstack([G_H, sp.csr_matrix(u_tilde[:, None])], format="csr")
    B = (G.T @ (M @ G)).toarray()
    d = 1.0 / np.sqrt(np.diag(B))
    gmin = float(sla.eigvalsh(d[:, None] * B * d[None, :], subset_by_index=[0, 0])[0])
    if gmin < 1e-12:
        raise DegenerateSpace(f"augmented Gram matrix is singular (smallest eigenvalue {gmin:.3e})")
    return AugmentedSpace(
        hier=hier, level=k_plus_1, G_H=G_H, u_tilde=u_tilde, G=G, stiffness=A0, mass=M, gram_min_eig=gmin
    )


def _normalize_coords(y, Gd, M_red, M):
    s = float(y @ (M_red @ y))
    if not s > 0:
        raise ZeroVector("augmented coefficient vector has zero mass norm")
    y = y / np.sqrt(s)
    if (M @ (Gd @ y)).sum() < 0:
        y = -y
    return y


def solve_augmented(aug, f, init_fine=None, cfg=ScfConfig(), work=None):
    """SCF in the coordinates of the augmented basis; returns (pair, sweeps).

    The pair is lifted to the fine level.  Per sweep: assemble W(u) on the
    fine level, project to the dense (dim V_H + 1)^2 problem, take its
    smallest pair.  Convergence needs both |delta lambda| <= tol and the
    reduced residual, evaluated with W at the new iterate, <= 100 tol.
    For f = 0 the first sweep is exact and is returned directly.
    """
    mesh = aug.hier[aug.level]
    G, A0, M = aug.G, aug.stiffness, aug.mass
    Gd = G.toarray()
    A_red = Gd.T @ (A0 @ Gd)
    M_red = Gd.T @ (M @ Gd)
    nred = A_red.shape[0]

    if init_fine is None:
        y = np.zeros(nred)
        y[-1] = 1.0
    else:
        y = np.linalg.lstsq(Gd, np.asarray(init_fine, dtype=float), rcond=None)[0]
    y = _normalize_coords(y, Gd, M_red, M)
    u = G @ y
    W = assemble_weighted_mass(mesh, u, f)
    lam_prev = float(u @ ((A0 + W) @ u))
    history = [lam_prev]
    a = cfg.damping
    K_red = A_red + Gd.T @ (W @ Gd)
    for it in range(1, cfg.max_iter + 1):
        vals, vecs = sla.eigh(K_red, M_red, subset_by_index=[0, 0])
        lam = float(vals[0])
        if work is not None:
            work.dense_eig_work += nred**3
        y_new = _normalize_coords(vecs[:, 0], Gd, M_red, M)
        if f.is_zero:
            u = G @ y_new
            res = float(np.linalg.norm(K_red @ y_new - lam * (M_red @ y_new)) / np.linalg.norm(y_new))
            return EigenPair(lam=lam, u=u, level=aug.level, residual=res, iterations=1), 1
        y = _normalize_coords((1 - a) * y + a * y_new, Gd, M_red, M) if a < 1 else y_new
        u = G @ y
        W = assemble_weighted_mass(mesh, u, f)
        if work is not None:
            work.assemblies += 1
        K_red = A_red + Gd.T @ (W @ Gd)
        res = float(np.linalg.norm(K_red @ y - lam * (M_red @ y)) / np.linalg.norm(y))
        history.append(lam)
        log.debug("augmented level %d sweep %d: lambda=%.15g res=%.3e", aug.level, it, lam, res)
        if abs(lam - lam_prev) <= cfg.tol and res <= 100 * cfg.tol:
            # report the Rayleigh quotient a(u, u) of the returned vector
            rq = float(y @ (K_red @ y))
            return EigenPair(lam=rq, u=u, level=aug.level, residual=res, iterations=it), it
        lam_prev = lam
    raise NoConvergence(f"augmented SCF did not converge in {cfg.max_iter} sweeps", history)


def direct_solve_fine(hier, level, f, cfg=ScfConfig(), init=None, work=None):
    """Oracle solve on a whole level: nonlinear inverse iteration with MG inner solves.

    Each sweep freezes W(u), solves (A0 + W) x = M u by V-cycles and
    normalizes x.  The eigenvalue estimate is the Rayleigh quotient
    u^T (A0 + W(u)) u at the new iterate.
    """
    mesh = hier[level]
    A0 = assemble_stiffness(mesh)
    M = assemble_mass(mesh)
    u = sine_guess(mesh) if init is None else normalize_and_orient(init, M)
    W = assemble_weighted_mass(mesh, u, f)
    lam_prev = float(u @ ((A0 + W) @ u))
    history = [lam_prev]
    mg = setup_mg(hier, A0, level) if f.is_zero else None
    inner_tol = mg_tolerance(mesh.h)
    for it in range(1, cfg.max_iter + 1):
        K = A0 + W
        if not f.is_zero:
            mg = setup_mg(hier, A0, level, extra_term=W)
        x, stats = mg_solve(mg, M @ u, inner_tol, max_cycles=200, x0=u * (1.0 / lam_prev))
        if work is not None:
            work.matvecs += stats.matvec_count
        x = normalize_and_orient(x, M)
        u = normalize_and_orient((1 - cfg.damping) * u + cfg.damping * x, M) if cfg.damping < 1 else x
        W = assemble_weighted_mass(mesh, u, f)
        K = A0 + W
        lam = float(u @ (K @ u))
        res = _residual(K, M, u, lam)
        history.append(lam)
        log.debug("direct level %d sweep %d: lambda=%.15g res=%.3e", level, it, lam, res)
        if abs(lam - lam_prev) <= cfg.tol and res <= 100 * cfg.tol:
            return EigenPair(lam=lam, u=u, level=level, residual=res, iterations=it)
        lam_prev = lam
    raise NoConvergence(f"direct fine-level solve did not converge in {cfg.max_iter} sweeps", history)
