"""Error measurement, convergence rates and report files.

Two kinds of reference are supported.  ``AnalyticReference`` is the exact
ground state of the Dirichlet Laplacian (f = 0 only); errors against it are
integrated with a high-order rule so the H1 error is the true seminorm error
and not the superconvergent nodal one.  ``DirectReference`` is a direct
solve one level finer than the run; its eigenvalue is Richardson-extrapolated
with the direct value one level below, and eigenfunctions are compared after
lifting to the reference level.
"""

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .assembly import _geometry, assemble_mass, assemble_stiffness
from .exceptions import MissingReference, NonPositiveError

__all__ = [
    "SCHEMA_VERSION",
    "AnalyticReference",
    "DirectReference",
    "compute_rates",
    "compare_to_reference",
    "fine_quadrature",
    "rows_to_csv",
    "write_report",
    "read_table",
]

SCHEMA_VERSION = 1


def compute_rates(errors, beta=2):
    """rate_k = log(e_{k-1} / e_k) / log(beta) for consecutive errors."""
    e = np.asarray(errors, dtype=float)
    if e.ndim != 1:
        raise ValueError("errors must be a flat sequence")
    if np.any(~(e > 0)):
        raise NonPositiveError("convergence rates need strictly positive errors")
    return (np.log(e[:-1] / e[1:]) / math.log(beta)).tolist()


@dataclass(frozen=True)
class AnalyticReference:
    """Ground state of -Lap on (0,1)^d: lambda = d pi^2, u = 2^(d/2) prod sin(pi x_i)."""

    d: int

    @property
    def lam(self):
        return self.d * math.pi**2

    def u(self, x):
        return 2.0 ** (self.d / 2) * np.prod(np.sin(np.pi * x), axis=-1)

    def grad(self, x):
        s = np.sin(np.pi * x)
        c = np.cos(np.pi * x)
        g = np.empty_like(x)
        for i in range(self.d):
            others = np.prod(np.delete(s, i, axis=-1), axis=-1) if self.d > 1 else 1.0
            g[..., i] = np.pi * c[..., i] * others
        return 2.0 ** (self.d / 2) * g


@dataclass(eq=False)
class DirectReference:
    """Direct solution on ``hier[level]``, optionally with the direct eigenvalue one level below.

    With ``lam_coarser`` the reference eigenvalue is the Richardson value
    (beta^2 lam_fine - lam_coarser) / (beta^2 - 1); without it, ``lam_fine``.
    """

    hier: object
    level: int
    lam_fine: float
    u: np.ndarray
    lam_coarser: float = None

    def __post_init__(self):
        mesh = self.hier[self.level]
        self.mass = assemble_mass(mesh)
        self.stiffness = assemble_stiffness(mesh)

    @property
    def lam(self):
        if self.lam_coarser is None:
            return self.lam_fine
        b2 = self.hier.beta ** 2
        return (b2 * self.lam_fine - self.lam_coarser) / (b2 - 1)


def _gauss01(m):
    x, w = np.polynomial.legendre.leggauss(m)
    return 0.5 * (x + 1.0), 0.5 * w


def fine_quadrature(d, m=6):
    """Barycentric points and weights (sum 1) exact to degree 2m-1 on a cell.

    In 2d the square [0,1]^2 is collapsed onto the triangle (Duffy map).
    """
    s, ws = _gauss01(m)
    if d == 1:
        return np.column_stack([1.0 - s, s]), ws
    S, T = np.meshgrid(s, s, indexing="ij")
    WS, WT = np.meshgrid(ws, ws, indexing="ij")
    S, T, W = S.ravel(), T.ravel(), (2.0 * S * WS * WT).ravel()
    return np.column_stack([1.0 - S, S * (1.0 - T), S * T]), W


def _analytic_errors(mesh, u, ref):
    bary, w = fine_quadrature(mesh.d)
    meas, grads = _geometry(mesh)
    full = mesh.extend(u)
    nodal = full[mesh.cells]
    x = np.einsum("qa,cad->cqd", bary, mesh.vertices[mesh.cells])
    uh = np.einsum("qa,ca->cq", bary, nodal)
    guh = np.einsum("cad,ca->cd", grads, nodal)
    e0 = ref.u(x) - uh
    e1 = ref.grad(x) - guh[:, None, :]
    l2 = np.sqrt(np.einsum("c,q,cq->", meas, w, e0**2))
    h1 = np.sqrt(np.einsum("c,q,cqd->", meas, w, e1**2))
    return float(l2), float(h1)


def compare_to_reference(pair, ref, hier=None):
    """(|lambda - lambda_ref|, L2 error, H1-seminorm error) of an eigenpair.

    ``hier`` is the hierarchy the pair lives on.  The sign of the pair is
    aligned with the reference before differencing.
    """
    if ref is None:
        raise MissingReference("no reference solution configured")
    if isinstance(ref, AnalyticReference):
        if hier is None:
            raise ValueError("an analytic comparison needs the mesh hierarchy")
        mesh = hier[pair.level]
        l2p, _ = _analytic_errors(mesh, pair.u, ref)
        l2m, _ = _analytic_errors(mesh, -pair.u, ref)
        u = pair.u if l2p <= l2m else -pair.u
        l2, h1 = _analytic_errors(mesh, u, ref)
        return abs(pair.lam - ref.lam), l2, h1
    if isinstance(ref, DirectReference):
        if pair.level > ref.level:
            raise MissingReference(f"reference level {ref.level} is coarser than the pair (level {pair.level})")
        u = ref.hier.prolong(pair.u, pair.level, ref.level)
        if u @ (ref.mass @ ref.u) < 0:
            u = -u
        e = u - ref.u
        l2 = math.sqrt(max(float(e @ (ref.mass @ e)), 0.0))
        h1 = math.sqrt(max(float(e @ (ref.stiffness @ e)), 0.0))
        return abs(pair.lam - ref.lam), l2, h1
    raise MissingReference(f"unsupported reference {ref!r}")


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def rows_to_csv(rows, columns):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row.get(c)) for c in columns])
    return buf.getvalue()


def write_report(report, out_dir):
    """Write ``report.json`` and ``table.csv``; floats round-trip exactly in both."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    text = json.dumps(report, indent=2, sort_keys=True, allow_nan=True)
    (out_dir / "report.json").write_text(text + "\n")
    (out_dir / "table.csv").write_text(rows_to_csv(report["rows"], report["columns"]))
    return out_dir / "report.json", out_dir / "table.csv"


def read_table(path):
    """Read a ``table.csv`` back into a dict of columns (floats, None for blanks)."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        cols = {name: [] for name in reader.fieldnames}
        for row in reader:
            for name, val in row.items():
                cols[name].append(float(val) if val not in ("", None) else None)
    return cols
