"""Run configurations and convergence studies behind the ``nlmg`` command.

A run configuration is a JSON object.  Every field is optional::

    {
      "domain": "interval01" | "square01",
      "H": 0.125, "n": 3, "beta": 2,
      "nonlinearity": {"kind": "gpe", "v0": 0, "v_harmonic": 100, "zeta": 10},
      "correction": "fixed_point" | "newton",
      "scf": {"tol": 1e-10, "max_iter": 100, "damping": 1.0},
      "aug_tol_factor": 0.01,          # null: converge augmented solves to scf.tol
      "mg_max_cycles": 100,
      "mode": "scheme" | "direct" | "both",
      "reference": "analytic" | "direct_finer" | "none",
      "output": "out",
      "seed": 0
    }

``run_study`` executes one configuration and returns the report dictionary
(see ``write_report``).  Wall-clock time is returned separately so that
reports of identical runs are bit-identical.
"""

import json
import logging
import time
from dataclasses import dataclass, field, fields

import numpy as np

from .assembly import Nonlinearity
from .eigen import ScfConfig, direct_solve_fine
from .exceptions import ConfigError
from .mesh import build_hierarchy
from .report import SCHEMA_VERSION, AnalyticReference, DirectReference, compare_to_reference, compute_rates
from .scheme import SchemeConfig, run_scheme, work_model_check

__all__ = ["RunConfig", "load_config", "parse_config", "run_study", "evaluate_checks"]

log = logging.getLogger(__name__)

MODES = ("scheme", "direct", "both")
REFERENCES = ("analytic", "direct_finer", "none")


@dataclass
class RunConfig:
    domain: str = "interval01"
    H: float = 0.125
    n: int = 3
    beta: int = 2
    nonlinearity: dict = field(default_factory=lambda: {"kind": "zero"})
    correction: str = "fixed_point"
    scf: dict = field(default_factory=dict)
    aug_tol_factor: float = 0.01
    mg_max_cycles: int = 100
    mode: str = "scheme"
    reference: str = "none"
    output: str = "out"
    seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"must be one of {MODES}", "mode")
        if self.reference not in REFERENCES:
            raise ConfigError(f"must be one of {REFERENCES}", "reference")
        try:
            self.f = Nonlinearity.from_dict(self.nonlinearity)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc), "nonlinearity") from None
        if self.reference == "analytic" and not self.f.is_zero:
            raise ConfigError("an analytic reference is only available for f = zero", "reference")
        try:
            self.scf_config = ScfConfig(**self.scf)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc), "scf") from None
        try:
            self.scheme = SchemeConfig(
                domain=self.domain,
                H=self.H,
                n=self.n,
                beta=self.beta,
                nonlinearity=self.f,
                correction=self.correction,
                scf=self.scf_config,
                aug_tol_factor=self.aug_tol_factor,
                mg_max_cycles=self.mg_max_cycles,
            )
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc), "domain") from None
        try:
            build_hierarchy(self.domain, self.H, 1)
        except ValueError as exc:
            raise ConfigError(str(exc), "H") from None

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


def parse_config(doc, overrides=None):
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    doc = dict(doc)
    doc.update({k: v for k, v in (overrides or {}).items() if v is not None})
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ConfigError(f"unknown field(s) {', '.join(unknown)}", unknown[0])
    try:
        return RunConfig(**doc)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path, overrides=None):
    """Read and validate a JSON run configuration; CLI overrides win over file fields."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return parse_config(doc, overrides)


def _direct_ladder(hier, levels, f, scf):
    """Direct solves on the given levels, each started from the previous one."""
    out = {}
    prev = None
    for k in levels:
        init = None if prev is None else hier.prolong(prev.u, prev.level, k)
        out[k] = direct_solve_fine(hier, k, f, scf, init=init)
        prev = out[k]
    return out


def _rate_columns(rows, name, beta):
    vals = [r.get(name) for r in rows]
    for r in rows:
        r[f"rate_{name[4:]}"] = None
    for i in range(1, len(rows)):
        a, b = vals[i - 1], vals[i]
        if a is not None and b is not None and a > 0 and b > 0:
            rows[i][f"rate_{name[4:]}"] = compute_rates([a, b], beta)[0]


def run_study(cfg):
    """Execute ``cfg``; returns (report dict, wall seconds)."""
    t0 = time.perf_counter()
    np.random.seed(cfg.seed)
    sc = cfg.scheme
    f = cfg.f
    hier = build_hierarchy(sc.domain, sc.H, sc.n, sc.beta)
    n = sc.n

    pairs, traces, work = {}, [], None
    if cfg.mode in ("scheme", "both"):
        _, traces, work = run_scheme(sc, hier, on_level=lambda p: pairs.__setitem__(p.level, p))

    direct = {}
    ref = None
    if cfg.reference == "analytic":
        ref = AnalyticReference(hier.d)
    elif cfg.reference == "direct_finer":
        ref_hier = build_hierarchy(sc.domain, sc.H, n + 1, sc.beta)
        direct = _direct_ladder(ref_hier, range(1, n + 2), f, sc.scf)
        ref = DirectReference(ref_hier, n + 1, direct[n + 1].lam, direct[n + 1].u, direct[n].lam)
    if cfg.mode in ("direct", "both") and not direct:
        direct = _direct_ladder(hier, range(1, n + 1), f, sc.scf)

    rows = []
    for k in range(1, n + 1):
        row = {"k": k, "n_dofs": hier[k].n_dofs, "h": hier[k].h}
        if traces:
            t = traces[k - 1]
            row.update(lambda_scheme=t.lambda_k, varpi=t.varpi_k)
            if t.mg_stats is not None:
                row.update(mg_cycles=t.mg_stats.v_cycles, mg_work=t.mg_stats.matvec_count)
        if direct:
            row["lambda_direct"] = direct[k].lam
        if traces and direct:
            row["gap"] = abs(row["lambda_scheme"] - row["lambda_direct"])
            # the scheme should be closer to the direct solution than the
            # direct solution is to the exact one (or to the next level)
            if cfg.reference == "analytic":
                row["gap_bound"] = 0.1 * abs(direct[k].lam - ref.lam)
            elif k + 1 in direct:
                row["gap_bound"] = 0.1 * abs(direct[k].lam - direct[k + 1].lam)
        rows.append(row)

    if ref is not None:
        for row in rows:
            k = row["k"]
            p = pairs[k] if traces else direct[k]
            row["err_lambda"], row["err_l2"], row["err_h1"] = compare_to_reference(p, ref, hier)
            if traces and direct:
                row["direct_err_lambda"] = abs(direct[k].lam - ref.lam)

    columns = ["k", "n_dofs", "h"]
    if traces:
        columns += ["lambda_scheme", "varpi", "mg_cycles", "mg_work"]
    if direct:
        columns += ["lambda_direct"]
    if traces and direct:
        columns += ["gap"] + (["gap_bound"] if any("gap_bound" in r for r in rows) else [])
    if ref is not None:
        for name in ("err_lambda", "err_l2", "err_h1"):
            _rate_columns(rows, name, sc.beta)
        columns += ["err_lambda", "err_l2", "err_h1", "rate_lambda", "rate_l2", "rate_h1"]
        if direct and cfg.mode != "direct":
            columns += ["direct_err_lambda"]

    report = {
        "schema_version": SCHEMA_VERSION,
        # where the files go is not part of the computation
        "config": {k: v for k, v in cfg.to_dict().items() if k != "output"},
        "reference": None if ref is None else {"kind": cfg.reference, "lambda": float(ref.lam)},
        "columns": columns,
        "rows": rows,
        "work": None if work is None else work_model_check(work, traces),
    }
    return report, time.perf_counter() - t0


def evaluate_checks(report, lambda_rate=(1.7, 2.3), h1_rate=(0.8, 1.2), varpi_max=3):
    """Acceptance checks applicable to a finished report; list of (name, passed, detail)."""
    rows = report["rows"]
    ref = report["reference"]
    out = []
    if ref is not None and len(rows) >= 2:
        r = rows[-1]["rate_lambda"]
        out.append(("eigenvalue rate", r is not None and lambda_rate[0] <= r <= lambda_rate[1], f"rate={r}"))
        if ref["kind"] == "analytic":
            r = rows[-1]["rate_h1"]
            out.append(("H1 rate", r is not None and h1_rate[0] <= r <= h1_rate[1], f"rate={r}"))
    bounded = [r for r in rows if r["k"] >= 2 and "gap_bound" in r]
    if bounded:
        bad = [r["k"] for r in bounded if not r["gap"] <= r["gap_bound"]]
        out.append(("scheme vs direct", not bad, f"levels above bound: {bad}"))
    varpi = [r["varpi"] for r in rows if r["k"] >= 2 and "varpi" in r]
    if varpi:
        out.append(("augmented sweeps", max(varpi) <= varpi_max, f"max={max(varpi)}"))
    return out
