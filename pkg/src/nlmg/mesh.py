"""Nested uniform meshes of [0,1] and [0,1]^2 and their prolongations.

Level 0 is the coarse mesh T_H.  Every further level is a regular
refinement (midpoint subdivision) of the previous one, so the P1 spaces are
nested and the prolongation is plain nodal interpolation.  Dirichlet
boundary vertices are eliminated: all operators act on interior dofs only.
"""

import enum
import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .exceptions import MeshError

__all__ = [
    "Domain",
    "MeshLevel",
    "MeshHierarchy",
    "build_coarse_mesh",
    "refine_regular",
    "build_hierarchy",
    "assemble_prolongation",
]

_GEOM_TOL = 1e-12


class Domain(enum.Enum):
    INTERVAL = "interval01"
    SQUARE = "square01"

    @property
    def d(self):
        return 1 if self is Domain.INTERVAL else 2

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(value)
        except ValueError:
            raise MeshError(f"unknown domain {value!r}") from None


def _frozen(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class MeshLevel:
    """One triangulation of the hierarchy.

    ``parents`` is only set on refined levels: row i holds the two coarse
    vertices whose midpoint is fine vertex i (the same index twice when the
    fine vertex coincides with a coarse one).  ``coarse_to_fine`` maps each
    coarse vertex to its coincident fine vertex.
    """

    level: int
    h: float
    vertices: np.ndarray
    cells: np.ndarray
    is_boundary: np.ndarray
    parents: np.ndarray = None
    coarse_to_fine: np.ndarray = None
    interior: np.ndarray = field(init=False)
    dof_of_vertex: np.ndarray = field(init=False)

    def __post_init__(self):
        for name in ("vertices", "cells", "is_boundary", "parents", "coarse_to_fine"):
            val = getattr(self, name)
            if val is not None:
                object.__setattr__(self, name, _frozen(val))
        interior = np.flatnonzero(~self.is_boundary)
        dof = np.full(len(self.vertices), -1, dtype=np.int64)
        dof[interior] = np.arange(len(interior))
        object.__setattr__(self, "interior", _frozen(interior))
        object.__setattr__(self, "dof_of_vertex", _frozen(dof))

    @property
    def d(self):
        return self.vertices.shape[1]

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_cells(self):
        return len(self.cells)

    @property
    def n_dofs(self):
        return len(self.interior)

    def cell_measures(self):
        x = self.vertices[self.cells]
        if self.d == 1:
            return x[:, 1, 0] - x[:, 0, 0]
        e1 = x[:, 1] - x[:, 0]
        e2 = x[:, 2] - x[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def extend(self, u):
        """Interior nodal vector -> all-vertex vector with zero boundary values."""
        u = np.asarray(u, dtype=float)
        if u.shape != (self.n_dofs,):
            raise ValueError(f"expected {self.n_dofs} interior values, got shape {u.shape}")
        full = np.zeros(self.n_vertices)
        full[self.interior] = u
        return full

    def interpolate(self, func):
        """Nodal interpolant of ``func(x)`` (x of shape (N, d)) on interior dofs."""
        return np.asarray(func(self.vertices[self.interior]), dtype=float)

    def to_dict(self):
        return {
            "level": self.level,
            "h": self.h,
            "vertices": self.vertices.tolist(),
            "cells": self.cells.tolist(),
            "is_boundary": self.is_boundary.tolist(),
        }


def _boundary_flags(vertices):
    return np.any((np.abs(vertices) < _GEOM_TOL) | (np.abs(vertices - 1.0) < _GEOM_TOL), axis=1)


def _subdivisions(H):
    try:
        H = float(H)
    except (TypeError, ValueError):
        raise MeshError(f"mesh size must be a number, got {H!r}") from None
    if not H > 0 or H >= 1:
        raise MeshError(f"mesh size H must lie in (0, 1), got {H}")
    m = int(round(1.0 / H))
    if abs(m * H - 1.0) > 1e-10:
        raise MeshError(f"1/H must be an integer, got H={H}")
    return m


def build_coarse_mesh(domain, H):
    """Structured level-0 mesh with ``1/H`` subdivisions per side.

    In 2d every square is cut along its (0,0)-(1,1) diagonal.
    """
    domain = Domain.parse(domain)
    m = _subdivisions(H)
    t = np.linspace(0.0, 1.0, m + 1)
    if domain.d == 1:
        vertices = t[:, None]
        cells = np.column_stack([np.arange(m), np.arange(1, m + 1)])
    else:
        X, Y = np.meshgrid(t, t, indexing="xy")
        vertices = np.column_stack([X.ravel(), Y.ravel()])
        i, j = np.meshgrid(np.arange(m), np.arange(m), indexing="xy")
        i, j = i.ravel(), j.ravel()
        v00 = j * (m + 1) + i
        v10 = v00 + 1
        v01 = v00 + (m + 1)
        v11 = v01 + 1
        lower = np.column_stack([v00, v10, v11])
        upper = np.column_stack([v00, v11, v01])
        cells = np.empty((2 * m * m, 3), dtype=np.int64)
        cells[0::2] = lower
        cells[1::2] = upper
    return MeshLevel(
        level=0,
        h=1.0 / m,
        vertices=vertices,
        cells=cells.astype(np.int64),
        is_boundary=_boundary_flags(vertices),
    )


def refine_regular(mesh, beta=2):
    """Split every cell into beta^d children by edge midpoints (beta must be 2).

    Coarse vertices keep their indices; new midpoint vertices are appended.
    """
    if beta != 2:
        raise MeshError(f"only beta=2 refinement is supported, got {beta}")
    nv = mesh.n_vertices
    cells = mesh.cells
    if mesh.d == 1:
        local_edges = [(0, 1)]
    else:
        local_edges = [(0, 1), (1, 2), (2, 0)]
    edges = np.concatenate([cells[:, [a, b]] for a, b in local_edges])
    edges.sort(axis=1)
    uniq, inv = np.unique(edges, axis=0, return_inverse=True)
    inv = inv.reshape(len(local_edges), -1)
    mid = nv + inv  # fine vertex index of each cell edge midpoint

    vertices = np.concatenate([mesh.vertices, 0.5 * (mesh.vertices[uniq[:, 0]] + mesh.vertices[uniq[:, 1]])])
    parents = np.concatenate([np.column_stack([np.arange(nv), np.arange(nv)]), uniq])

    if mesh.d == 1:
        a, b = cells[:, 0], cells[:, 1]
        m01 = mid[0]
        children = np.stack([np.column_stack([a, m01]), np.column_stack([m01, b])], axis=1)
        children = children.reshape(-1, 2)
    else:
        v0, v1, v2 = cells.T
        m01, m12, m20 = mid
        children = np.stack(
            [
                np.column_stack([v0, m01, m20]),
                np.column_stack([m01, v1, m12]),
                np.column_stack([m20, m12, v2]),
                np.column_stack([m01, m12, m20]),
            ],
            axis=1,
        ).reshape(-1, 3)

    return MeshLevel(
        level=mesh.level + 1,
        h=mesh.h / beta,
        vertices=vertices,
        cells=children.astype(np.int64),
        is_boundary=_boundary_flags(vertices),
        parents=parents.astype(np.int64),
        coarse_to_fine=np.arange(nv, dtype=np.int64),
    )


def _check_pair(coarse, fine):
    if fine.parents is None or coarse.d != fine.d or fine.level != coarse.level + 1:
        raise MeshError("fine mesh is not a refinement of the coarse mesh")
    if fine.parents.max() >= coarse.n_vertices:
        raise MeshError("fine mesh parent indices exceed the coarse vertex count")
    mids = 0.5 * (coarse.vertices[fine.parents[:, 0]] + coarse.vertices[fine.parents[:, 1]])
    if not np.allclose(mids, fine.vertices, atol=_GEOM_TOL, rtol=0):
        raise MeshError("fine mesh vertices do not match coarse edge midpoints")


def assemble_prolongation(coarse, fine, interior=True):
    """Nodal interpolation matrix from the coarse P1 space to the fine one.

    With ``interior=True`` (the default) rows/columns are interior dofs only,
    which is the operator used by every solver.  ``interior=False`` gives the
    all-vertex matrix.
    """
    _check_pair(coarse, fine)
    rows = np.repeat(np.arange(fine.n_vertices), 2)
    cols = fine.parents.ravel()
    vals = np.full(len(rows), 0.5)
    P = sp.csr_matrix((vals, (rows, cols)), shape=(fine.n_vertices, coarse.n_vertices))
    P.sum_duplicates()
    if interior:
        P = P[fine.interior][:, coarse.interior]
    P.eliminate_zeros()
    P.sort_indices()
    return P.tocsr()


@dataclass(frozen=True, eq=False)
class MeshHierarchy:
    domain: Domain
    levels: tuple
    beta: int
    prolongations: tuple  # prolongations[k] maps level k-1 to level k; entry 0 is None

    @property
    def n(self):
        """Index of the finest level."""
        return len(self.levels) - 1

    @property
    def d(self):
        return self.domain.d

    def __getitem__(self, k):
        return self.levels[k]

    def dims(self):
        return [lvl.n_dofs for lvl in self.levels]

    def prolong(self, v, k_from, k_to):
        """Carry an interior nodal vector from level ``k_from`` up to ``k_to``."""
        v = np.asarray(v, dtype=float)
        for k in range(k_from + 1, k_to + 1):
            v = self.prolongations[k] @ v
        return v

    def composite_prolongation(self, k_from, k_to):
        if k_to < k_from:
            raise ValueError("composite prolongation only goes from coarse to fine")
        G = sp.identity(self.levels[k_from].n_dofs, format="csr")
        for k in range(k_from + 1, k_to + 1):
            G = (self.prolongations[k] @ G).tocsr()
        return G

    def to_json(self, path=None):
        """Debug dump of all levels (vertices, cells, boundary flags)."""
        doc = {"domain": self.domain.value, "beta": self.beta, "levels": [lvl.to_dict() for lvl in self.levels]}
        text = json.dumps(doc)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def build_hierarchy(domain, H, n, beta=2):
    """Coarse mesh T_H plus ``n`` regular refinements (levels 0..n)."""
    domain = Domain.parse(domain)
    if int(n) != n or n < 1:
        raise MeshError(f"number of refinement levels must be an integer >= 1, got {n}")
    if beta != 2:
        raise MeshError(f"only beta=2 refinement is supported, got {beta}")
    levels = [build_coarse_mesh(domain, H)]
    prolongations = [None]
    for _ in range(int(n)):
        fine = refine_regular(levels[-1], beta)
        prolongations.append(assemble_prolongation(levels[-1], fine))
        levels.append(fine)
    return MeshHierarchy(domain=domain, levels=tuple(levels), beta=beta, prolongations=tuple(prolongations))
