"""P1 finite element assembly on a single mesh level.

All returned operators are restricted to interior dofs (homogeneous
Dirichlet conditions by elimination) unless ``interior=False`` is passed.
Nonlinear terms are integrated with a fixed per-cell rule: 2-point Gauss in
1d and the 3-point edge-midpoint rule in 2d.  Mass matrices are exact under
both rules; terms like u^3 are not, but every code path uses the same rule.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

__all__ = [
    "QuadratureRule",
    "Nonlinearity",
    "quadrature_rule",
    "assemble_stiffness",
    "assemble_mass",
    "assemble_nonlinear_load",
    "assemble_linearized_term",
    "assemble_weighted_mass",
    "mass_weighted_matrix",
]


@dataclass(frozen=True)
class QuadratureRule:
    """Barycentric points (nq, d+1) and weights summing to one."""

    points: np.ndarray
    weights: np.ndarray
    degree: int


_G = 0.5 / np.sqrt(3.0)
_RULES = {
    1: QuadratureRule(
        points=np.array([[0.5 + _G, 0.5 - _G], [0.5 - _G, 0.5 + _G]]),
        weights=np.array([0.5, 0.5]),
        degree=3,
    ),
    2: QuadratureRule(
        points=np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]]),
        weights=np.full(3, 1.0 / 3.0),
        degree=2,
    ),
}


def quadrature_rule(d):
    return _RULES[d]


class Nonlinearity:
    """The reaction term f(x, u) together with f_u and the splitting f = w u.

    ``kind`` is one of ``zero``, ``potential``, ``cubic`` or ``gpe``.  The
    potential is V(x) = v0 + v_harmonic * sum_i (x_i - 1/2)^2 and ``zeta`` is
    the cubic coupling.  Kinds that do not use a parameter ignore it.
    """

    KINDS = ("zero", "potential", "cubic", "gpe")
    splittable = True

    def __init__(self, kind="zero", v0=0.0, v_harmonic=0.0, zeta=0.0):
        if kind not in self.KINDS:
            raise ValueError(f"unknown nonlinearity kind {kind!r}")
        if zeta < 0:
            raise ValueError("zeta must be non-negative")
        self.kind = kind
        self.v0 = float(v0) if kind in ("potential", "gpe") else 0.0
        self.v_harmonic = float(v_harmonic) if kind in ("potential", "gpe") else 0.0
        self.zeta = float(zeta) if kind in ("cubic", "gpe") else 0.0

    @classmethod
    def zero(cls):
        return cls("zero")

    @classmethod
    def potential(cls, v0=0.0, v_harmonic=0.0):
        return cls("potential", v0=v0, v_harmonic=v_harmonic)

    @classmethod
    def cubic(cls, zeta):
        return cls("cubic", zeta=zeta)

    @classmethod
    def gpe(cls, zeta, v0=0.0, v_harmonic=0.0):
        return cls("gpe", v0=v0, v_harmonic=v_harmonic, zeta=zeta)

    @classmethod
    def from_dict(cls, doc):
        doc = dict(doc)
        return cls(doc.pop("kind", "zero"), **doc)

    def to_dict(self):
        return {"kind": self.kind, "v0": self.v0, "v_harmonic": self.v_harmonic, "zeta": self.zeta}

    def __repr__(self):
        return f"Nonlinearity({self.kind!r}, v0={self.v0}, v_harmonic={self.v_harmonic}, zeta={self.zeta})"

    @property
    def is_zero(self):
        return self.kind == "zero"

    def V(self, x):
        x = np.atleast_2d(x)
        out = np.full(x.shape[0], self.v0)
        if self.v_harmonic:
            out = out + self.v_harmonic * np.sum((x - 0.5) ** 2, axis=1)
        return out

    def f(self, x, u):
        return self.w(x, u) * u

    def f_u(self, x, u):
        return self.V(x) + 3.0 * self.zeta * u**2

    def w(self, x, u):
        return self.V(x) + self.zeta * u**2


def _geometry(mesh):
    """Cell measures and constant barycentric gradients (nc, d+1, d)."""
    x = mesh.vertices[mesh.cells]
    if mesh.d == 1:
        L = x[:, 1, 0] - x[:, 0, 0]
        grads = np.stack([-1.0 / L, 1.0 / L], axis=1)[:, :, None]
        return L, grads
    e1 = x[:, 1] - x[:, 0]
    e2 = x[:, 2] - x[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    inv = np.empty((len(det), 2, 2))
    inv[:, 0, 0] = e2[:, 1] / det
    inv[:, 0, 1] = -e2[:, 0] / det
    inv[:, 1, 0] = -e1[:, 1] / det
    inv[:, 1, 1] = e1[:, 0] / det
    g12 = inv  # rows are gradients of lambda_1 and lambda_2
    g0 = -(g12[:, 0] + g12[:, 1])
    grads = np.concatenate([g0[:, None, :], g12], axis=1)
    return 0.5 * det, grads


def _scatter(mesh, local, interior):
    """Sum element matrices (nc, nl, nl) into a CSR matrix."""
    c = mesh.cells
    nl = c.shape[1]
    rows = np.repeat(c, nl, axis=1).ravel()
    cols = np.tile(c, (1, nl)).ravel()
    n = mesh.n_vertices
    A = sp.csr_matrix((local.ravel(), (rows, cols)), shape=(n, n))
    A.sum_duplicates()
    if interior:
        A = A[mesh.interior][:, mesh.interior]
    A.sort_indices()
    return A.tocsr()


def _scatter_vector(mesh, local, interior):
    b = np.zeros(mesh.n_vertices)
    np.add.at(b, mesh.cells.ravel(), local.ravel())
    return b[mesh.interior] if interior else b


def _quad_values(mesh, u):
    """Quadrature points (nc, nq, d) and values of the P1 interpolant there."""
    rule = quadrature_rule(mesh.d)
    x = np.einsum("qa,cad->cqd", rule.points, mesh.vertices[mesh.cells])
    full = mesh.extend(u) if u is not None else np.zeros(mesh.n_vertices)
    uq = np.einsum("qa,ca->cq", rule.points, full[mesh.cells])
    return rule, x, uq


def assemble_stiffness(mesh, interior=True):
    """Matrix of (grad phi_j, grad phi_i)."""
    meas, grads = _geometry(mesh)
    local = meas[:, None, None] * np.einsum("cid,cjd->cij", grads, grads)
    return _scatter(mesh, local, interior)


def mass_weighted_matrix(mesh, coeff, interior=True):
    """Matrix of (c phi_j, phi_i) for ``coeff`` given at quadrature points (nc, nq)."""
    rule = quadrature_rule(mesh.d)
    meas, _ = _geometry(mesh)
    phi = rule.points
    local = np.einsum("c,q,cq,qi,qj->cij", meas, rule.weights, coeff, phi, phi, optimize=True)
    return _scatter(mesh, local, interior)


def assemble_mass(mesh, interior=True):
    """Consistent mass matrix (phi_j, phi_i)."""
    rule = quadrature_rule(mesh.d)
    return mass_weighted_matrix(mesh, np.ones((mesh.n_cells, len(rule.weights))), interior)


def assemble_nonlinear_load(mesh, u, f, interior=True):
    """Vector with entries (f(x, u_h), phi_i)."""
    if f.is_zero:
        return np.zeros(mesh.n_dofs if interior else mesh.n_vertices)
    rule, x, uq = _quad_values(mesh, u)
    meas, _ = _geometry(mesh)
    fq = f.f(x.reshape(-1, mesh.d), uq.ravel()).reshape(uq.shape)
    local = np.einsum("c,q,cq,qi->ci", meas, rule.weights, fq, rule.points)
    return _scatter_vector(mesh, local, interior)


def assemble_linearized_term(mesh, u, f, interior=True):
    """Matrix of (f_u(x, u_h) phi_j, phi_i): the Jacobian of the nonlinear load."""
    rule, x, uq = _quad_values(mesh, u)
    coeff = f.f_u(x.reshape(-1, mesh.d), uq.ravel()).reshape(uq.shape)
    return mass_weighted_matrix(mesh, coeff, interior)


def assemble_weighted_mass(mesh, u, f, interior=True):
    """Matrix of (w(x, u_h) phi_j, phi_i) where f(x, u) = w(x, u) u.

    Applied to ``u`` it reproduces the nonlinear load exactly.
    """
    if not getattr(f, "splittable", False):
        raise ValueError(f"nonlinearity {f!r} has no multiplicative splitting")
    rule, x, uq = _quad_values(mesh, u)
    coeff = f.w(x.reshape(-1, mesh.d), uq.ravel()).reshape(uq.shape)
    return mass_weighted_matrix(mesh, coeff, interior)
