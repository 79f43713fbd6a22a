"""Multilevel correction scheme for the nonlinear eigenvalue problem.

One correction step takes the eigenpair on level k to level k+1: a linear
source problem is solved by multigrid on level k+1 (fixed-point or Newton
form), then the nonlinear problem is solved again on the small space
V_H + span{u~}.  ``run_scheme`` chains the step from level 1 to level n,
starting from a full SCF solve on level 1.
"""

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .assembly import (
    Nonlinearity,
    assemble_linearized_term,
    assemble_mass,
    assemble_nonlinear_load,
    assemble_stiffness,
)
from .eigen import (
    EigenPair,
    EigenWork,
    ScfConfig,
    build_augmented_space,
    energy,
    normalize_and_orient,
    scf_solve,
    sine_guess,
    solve_augmented,
)
from .exceptions import ConfigError, NlmgError, NonCoercive, NonSPDError, PreconditionError
from .mesh import Domain, build_hierarchy
from .multigrid import SolveStats, mg_tolerance, setup_mg, solve as mg_solve

__all__ = [
    "SchemeConfig",
    "LevelTrace",
    "WorkCounter",
    "LevelOperators",
    "fixed_point_update",
    "newton_update",
    "augmented_tolerance",
    "correction_fixed_point",
    "correction_newton",
    "run_scheme",
    "work_model_check",
]

log = logging.getLogger(__name__)

CORRECTIONS = ("fixed_point", "newton")


@dataclass
class SchemeConfig:
    domain: Domain = Domain.INTERVAL
    H: float = 0.125
    n: int = 3
    beta: int = 2
    nonlinearity: Nonlinearity = field(default_factory=Nonlinearity.zero)
    correction: str = "fixed_point"
    scf: ScfConfig = field(default_factory=ScfConfig)
    aug_tol_factor: float = 0.01
    mg_max_cycles: int = 100

    def __post_init__(self):
        self.domain = Domain.parse(self.domain)
        if int(self.n) != self.n or self.n < 1:
            raise ConfigError("must be an integer >= 1", "n")
        self.n = int(self.n)
        if self.correction not in CORRECTIONS:
            raise ConfigError(f"must be one of {CORRECTIONS}", "correction")
        if self.beta != 2:
            raise ConfigError("only beta=2 is supported", "beta")
        if self.aug_tol_factor is not None and not self.aug_tol_factor > 0:
            raise ConfigError("must be positive or null", "aug_tol_factor")


@dataclass
class LevelTrace:
    k: int
    n_dofs: int
    h: float
    lambda_k: float
    varpi_k: int
    mg_stats: SolveStats = None
    gram_min_eig: float = None
    scf_tol: float = None
    err_lambda: float = None
    err_l2: float = None
    err_h1: float = None


@dataclass
class WorkCounter:
    n_dofs: list = field(default_factory=list)  # N_k for k = 0..n
    mg_work: dict = field(default_factory=dict)  # level -> dof-weighted MG matvecs
    matvecs: int = 0
    dense_eig_work: int = 0
    assemblies: int = 0
    warnings: list = field(default_factory=list)

    @property
    def coarse_dim(self):
        return self.n_dofs[0]


class LevelOperators:
    """Per-level stiffness/mass matrices and the stiffness MG setup, built on demand."""

    def __init__(self, hier):
        self.hier = hier
        self._stiff = {}
        self._mass = {}
        self._mg = {}
        self._GH = {}

    def stiffness(self, k):
        if k not in self._stiff:
            self._stiff[k] = assemble_stiffness(self.hier[k])
        return self._stiff[k]

    def mass(self, k):
        if k not in self._mass:
            self._mass[k] = assemble_mass(self.hier[k])
        return self._mass[k]

    def stiffness_mg(self, k):
        if k not in self._mg:
            self._mg[k] = setup_mg(self.hier, self.stiffness(k), k)
        return self._mg[k]

    def coarse_basis(self, k):
        if k not in self._GH:
            self._GH[k] = self.hier.composite_prolongation(0, k)
        return self._GH[k]


def _check_pair(pair, hier, ops, k):
    if pair.level != k or pair.u.shape != (hier[k].n_dofs,):
        raise PreconditionError(f"eigenpair does not live on level {k}")
    norm = float(pair.u @ (ops.mass(k) @ pair.u))
    if abs(norm - 1.0) > 1e-10:
        raise PreconditionError(f"eigenpair is not L2-normalized (u^T M u = {norm:.12g})")


def fixed_point_update(hier, f, lam, u_lift, level, ops=None, max_cycles=100):
    """Solve (grad u~, grad v) = lam (u, v) - (f(x, u), v) on ``level`` by multigrid.

    ``u_lift`` is the previous iterate already prolonged to ``level``; it
    also serves as the initial guess.
    """
    ops = ops or LevelOperators(hier)
    mesh = hier[level]
    rhs = lam * (ops.mass(level) @ u_lift) - assemble_nonlinear_load(mesh, u_lift, f)
    return mg_solve(ops.stiffness_mg(level), rhs, mg_tolerance(mesh.h), max_cycles, x0=u_lift)


def newton_update(hier, f, lam, u_lift, level, ops=None, max_cycles=100):
    """Solve a_u(e, v) = lam (u, v) - (grad u, grad v) - (f(x, u), v) by multigrid.

    a_u(w, v) = (grad w, grad v) + (f_u(x, u) w, v) is the linearization at
    ``u_lift``.  Returns (u_lift + e, stats, e).
    """
    ops = ops or LevelOperators(hier)
    mesh = hier[level]
    A = ops.stiffness(level)
    J = assemble_linearized_term(mesh, u_lift, f)
    try:
        mg = setup_mg(hier, A, level, extra_term=J)
    except NonSPDError as exc:
        raise NonCoercive(f"linearized operator on level {level} is not SPD: {exc}") from None
    rhs = lam * (ops.mass(level) @ u_lift) - A @ u_lift - assemble_nonlinear_load(mesh, u_lift, f)
    e, stats = mg_solve(mg, rhs, mg_tolerance(mesh.h), max_cycles)
    return u_lift + e, stats, e


def augmented_tolerance(lam_k, aug, f, scf, factor, beta=2):
    """SCF tolerance for the augmented solve on the level of ``aug``.

    Without ``factor`` this is ``scf.tol``.  Otherwise the eigenvalue jump
    |lambda_k - R(u~)| from the previous level, R the Rayleigh quotient of
    the new start vector, estimates the discretization error of the new
    level as jump / (beta^2 - 1); the tolerance is ``factor`` times that
    estimate, never below ``scf.tol``.
    """
    if factor is None:
        return scf
    mesh = aug.hier[aug.level]
    u = normalize_and_orient(aug.u_tilde, aug.mass)
    rq = energy(aug.stiffness, mesh, u, f)
    est = abs(lam_k - rq) / (beta**2 - 1)
    return replace(scf, tol=max(scf.tol, factor * est))


def _correction(kind, hier, f, pair_k, k, scf=ScfConfig(), ops=None, work=None, max_cycles=100, tol_factor=None):
    ops = ops or LevelOperators(hier)
    _check_pair(pair_k, hier, ops, k)
    k1 = k + 1
    u_lift = hier.prolongations[k1] @ pair_k.u
    if kind == "fixed_point":
        u_tilde, stats = fixed_point_update(hier, f, pair_k.lam, u_lift, k1, ops, max_cycles)
    else:
        u_tilde, stats, _ = newton_update(hier, f, pair_k.lam, u_lift, k1, ops, max_cycles)
    aug = build_augmented_space(
        hier, k1, u_tilde, stiffness=ops.stiffness(k1), mass=ops.mass(k1), G_H=ops.coarse_basis(k1)
    )
    ework = EigenWork()
    aug_cfg = augmented_tolerance(pair_k.lam, aug, f, scf, tol_factor, hier.beta)
    pair, varpi = solve_augmented(aug, f, u_tilde, aug_cfg, work=ework)
    if work is not None:
        work.mg_work[k1] = work.mg_work.get(k1, 0) + stats.matvec_count
        work.matvecs += stats.matvec_count
        work.dense_eig_work += ework.dense_eig_work
        work.assemblies += ework.assemblies + 1
    trace = LevelTrace(
        k=k1,
        n_dofs=hier[k1].n_dofs,
        h=hier[k1].h,
        lambda_k=pair.lam,
        varpi_k=varpi,
        mg_stats=stats,
        gram_min_eig=aug.gram_min_eig,
        scf_tol=aug_cfg.tol,
    )
    log.info("level %d: lambda=%.15g varpi=%d cycles=%d", k1, pair.lam, varpi, stats.v_cycles)
    return pair, trace


def correction_fixed_point(hier, f, pair_k, k, scf=ScfConfig(), ops=None, work=None, max_cycles=100, tol_factor=None):
    """One correction step from level k to k+1 with the plain Laplacian on the left.

    Returns the new eigenpair on level k+1 and its LevelTrace.
    """
    return _correction("fixed_point", hier, f, pair_k, k, scf, ops, work, max_cycles, tol_factor)


def correction_newton(hier, f, pair_k, k, scf=ScfConfig(), ops=None, work=None, max_cycles=100, tol_factor=None):
    """Same as :func:`correction_fixed_point` but with the linearized operator on the left."""
    return _correction("newton", hier, f, pair_k, k, scf, ops, work, max_cycles, tol_factor)


def run_scheme(cfg, hier=None, on_level=None):
    """Full scheme: SCF on level 1, then corrections up to level n.

    Returns (pair on level n, traces for levels 1..n, WorkCounter).  On a
    solver failure the exception carries the traces collected so far in
    ``exc.traces``.  ``on_level(pair)`` is called with every intermediate
    pair, including the last one.
    """
    if hier is None:
        hier = build_hierarchy(cfg.domain, cfg.H, cfg.n, cfg.beta)
    f = cfg.nonlinearity
    ops = LevelOperators(hier)
    work = WorkCounter(n_dofs=hier.dims())
    traces = []
    try:
        mesh1 = hier[1]
        ework = EigenWork()
        pair = scf_solve(ops.stiffness(1), ops.mass(1), mesh1, f, sine_guess(mesh1), cfg.scf, work=ework)
        work.assemblies += ework.assemblies
        traces.append(LevelTrace(k=1, n_dofs=mesh1.n_dofs, h=mesh1.h, lambda_k=pair.lam, varpi_k=pair.iterations))
        if on_level is not None:
            on_level(pair)
        for k in range(1, cfg.n):
            pair, trace = _correction(
                cfg.correction, hier, f, pair, k, cfg.scf, ops, work, cfg.mg_max_cycles, cfg.aug_tol_factor
            )
            traces.append(trace)
            if on_level is not None:
                on_level(pair)
    except NlmgError as exc:
        exc.traces = traces
        raise
    work.warnings.extend(_contraction_warnings(traces))
    return pair, traces, work


def _contraction_warnings(traces):
    lams = [t.lambda_k for t in traces]
    diffs = np.abs(np.diff(lams))
    out = []
    for i in range(1, len(diffs)):
        if diffs[i - 1] > 0 and diffs[i] >= diffs[i - 1]:
            out.append(
                f"eigenvalue change did not contract between levels {i + 1} and {i + 2}: "
                "coarse space too coarse, decrease H"
            )
    return out


def work_model_check(work, traces):
    """Summarize measured work against the O(N_k + M_H + varpi N_k) per-level model.

    Fits the MG work of each corrected level to a + b N_k and reports the
    dense coarse-space work, which should grow with the number of levels
    (the M_H log N_n term) rather than with N_n.
    """
    levels = sorted(work.mg_work)
    N = np.array([work.n_dofs[k] for k in levels], dtype=float)
    Wk = np.array([work.mg_work[k] for k in levels], dtype=float)
    if len(levels) >= 2:
        b, a = np.polyfit(N, Wk, 1)
    elif len(levels) == 1:
        a, b = 0.0, Wk[0] / N[0]
    else:
        a = b = float("nan")
    per_dof = Wk / N if len(levels) else np.array([])
    varpi = [t.varpi_k for t in traces if t.k >= 2]
    n_fine = work.n_dofs[-1]
    nred = work.coarse_dim + 1
    return {
        "levels": levels,
        "n_dofs": N.astype(int).tolist(),
        "mg_work": Wk.astype(int).tolist(),
        "mg_work_per_dof": per_dof.tolist(),
        "fit_intercept": float(a),
        "fit_slope": float(b),
        "per_dof_spread": float(per_dof.max() / per_dof.min() - 1.0) if len(levels) else 0.0,
        "total_mg_work": int(work.matvecs),
        "total_mg_work_per_fine_dof": work.matvecs / n_fine,
        "dense_eig_work": int(work.dense_eig_work),
        "dense_eig_work_per_correction": work.dense_eig_work / max(len(varpi), 1),
        "coarse_unit_work": nred**3,
        "varpi": varpi,
        "varpi_max": max(varpi) if varpi else 0,
        "varpi_le_3": all(v <= 3 for v in varpi),
        "assemblies": int(work.assemblies),
        "warnings": list(work.warnings),
    }
