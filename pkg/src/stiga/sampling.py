"""Evaluation of bases and geometry on batches of quadrature points.

A :class:`PointSet` stores per-direction 1D point arrays and the list of
cells (tuples of per-direction rows). Every cell carries a tensor grid of
points, so any spline space whose breakpoints are contained in the cell
structure is evaluated per direction and combined by outer products.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .bspline import (
    KnotVector,
    TensorSpace,
    _find_spans,
    _local_dofs,
    basis_ders,
    rationalize,
    tensor_product,
)
from .quadrature import gauss_legendre

DEFAULT_CHUNK = 512


def _unit(D: int, *axes: int) -> tuple[int, ...]:
    m = [0] * D
    for a in axes:
        m[a] += 1
    return tuple(m)


class PointSet:
    """Quadrature (or sample) points organised by direction."""

    def __init__(self, kind: str, points: list[np.ndarray], weights: list[np.ndarray], rows: np.ndarray):
        self.kind = kind
        self.points = points
        self.weights = weights
        self.rows = rows
        self._tables: dict = {}

    @property
    def dim(self) -> int:
        return len(self.points)

    @classmethod
    def volume(cls, space: TensorSpace, q: int) -> PointSet:
        pts, wts = [], []
        for kv in space.knot_vectors:
            b = kv.breakpoints
            rules = [gauss_legendre(q, b[k], b[k + 1]) for k in range(b.size - 1)]
            pts.append(np.array([r[0] for r in rules]))
            wts.append(np.array([r[1] for r in rules]))
        return cls("volume", pts, wts, _all_rows([p.shape[0] for p in pts]))

    @classmethod
    def face(cls, space: TensorSpace, q: int, which: str = "top") -> PointSet:
        """Sigma_T (``"top"``) or Sigma_0 (``"bottom"``) of the parametric cylinder."""
        vol = cls.volume(space, q)
        tval = {"top": 1.0, "bottom": 0.0}[which]
        pts = vol.points[:-1] + [np.array([[tval]])]
        wts = vol.weights[:-1] + [np.ones((1, 1))]
        return cls(which, pts, wts, _all_rows([p.shape[0] for p in pts]))

    @classmethod
    def scattered(cls, xi) -> PointSet:
        """Arbitrary parametric points; each point forms its own cell."""
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        if np.any(xi < 0.0) or np.any(xi > 1.0):
            raise ValueError("parametric points must lie in [0, 1]^D")
        n, D = xi.shape
        pts = [xi[:, a : a + 1] for a in range(D)]
        wts = [np.ones((n, 1)) for _ in range(D)]
        rows = np.repeat(np.arange(n)[:, None], D, axis=1)
        return cls("points", pts, wts, rows)

    def table(self, kv: KnotVector, axis: int, order: int):
        """Per-row basis derivative table ``(E, q, order+1, p+1)`` and first indices."""
        key = (id(kv), axis)
        hit = self._tables.get(key)
        if hit is not None and hit[0].shape[2] > order:
            return hit[0][:, :, : order + 1], hit[1]
        pts = self.points[axis]
        E, q = pts.shape
        spans = _find_spans(kv, pts[:, 0])
        ders = basis_ders(kv, np.repeat(spans, q), pts.ravel(), order)
        ders = ders.reshape(E, q, order + 1, kv.degree + 1)
        # keep kv alive so the id-based key stays valid
        self._tables[key] = (ders, spans - kv.degree, kv)
        return ders, spans - kv.degree

    def batches(self, geometry, chunk: int = DEFAULT_CHUNK):
        for start in range(0, self.rows.shape[0], chunk):
            yield Batch(self, self.rows[start : start + chunk], geometry)

    def n_cells(self) -> int:
        return self.rows.shape[0]


def _all_rows(counts) -> np.ndarray:
    return np.indices(counts).reshape(len(counts), -1).T


@dataclass
class LocalBasis:
    """Basis functions supported on a batch of cells, in physical coordinates.

    ``grad[..., i]`` and ``hess[..., i, k]`` index the space-time coordinates
    ``(x_1, ..., x_d, t)``.
    """

    dofs: np.ndarray  # (ne, nloc)
    val: np.ndarray  # (ne, nq, nloc)
    grad: np.ndarray | None = None  # (ne, nq, nloc, D)
    hess: np.ndarray | None = None  # (ne, nq, nloc, D, D)


class Batch:
    """A chunk of cells of a :class:`PointSet` mapped through a geometry."""

    def __init__(self, pointset: PointSet, rows: np.ndarray, geometry):
        self.pointset = pointset
        self.rows = rows
        self.geometry = geometry
        self.dim = pointset.dim

    def _parametric(self, space: TensorSpace, order: int, weights=None):
        D = self.dim
        tabs = [self.pointset.table(kv, a, order) for a, kv in enumerate(space.knot_vectors)]
        firsts = [tabs[a][1][self.rows[:, a]] for a in range(D)]
        dofs = _local_dofs(space, firsts)
        ders = {}
        for m in _orders(D, order):
            ders[m] = tensor_product([tabs[a][0][self.rows[:, a], :, m[a], :] for a in range(D)])
        if weights is not None:
            ders = rationalize(ders, weights[dofs][:, None, :])
        return dofs, ders

    @cached_property
    def _geometry_data(self):
        g = self.geometry
        D = self.dim
        dofs, ders = self._parametric(g.space, 2, g.weights)
        P = g.control_points[dofs]  # (ne, nloc, D)
        x = np.einsum("eqa,eai->eqi", ders[(0,) * D], P)
        J = np.stack([np.einsum("eqa,eai->eqi", ders[_unit(D, j)], P) for j in range(D)], axis=-1)
        H = np.empty(J.shape + (D,))
        for j in range(D):
            for l in range(j, D):
                H[..., j, l] = np.einsum("eqa,eai->eqi", ders[_unit(D, j, l)], P)
                H[..., l, j] = H[..., j, l]
        return x, J, H

    @property
    def x(self) -> np.ndarray:
        """Physical points ``(ne, nq, D)``."""
        return self._geometry_data[0]

    @property
    def jacobian(self) -> np.ndarray:
        return self._geometry_data[1]

    @cached_property
    def det(self) -> np.ndarray:
        return np.linalg.det(self.jacobian)

    @cached_property
    def jacobian_inv(self) -> np.ndarray:
        return np.linalg.inv(self.jacobian)

    @cached_property
    def measure(self) -> np.ndarray:
        """Quadrature weights times the volume or face metric, ``(ne, nq)``."""
        wts = tensor_product([self.pointset.weights[a][self.rows[:, a], :, None] for a in range(self.dim)])
        wts = wts[..., 0]
        kind = self.pointset.kind
        if kind == "volume":
            return wts * np.abs(self.det)
        if kind in ("top", "bottom"):
            Js = self.jacobian[..., :-1]
            return wts * np.sqrt(np.linalg.det(np.einsum("eqij,eqik->eqjk", Js, Js)))
        return wts

    def basis(self, space: TensorSpace, order: int = 1, weights=None) -> LocalBasis:
        """Physical values and derivatives (up to ``order`` <= 2) of ``space``'s basis."""
        cache = self.__dict__.setdefault("_basis_cache", {})
        key = (id(space), order, id(weights))
        if key in cache:
            return cache[key][0]
        D = self.dim
        dofs, ders = self._parametric(space, order, weights)
        out = LocalBasis(dofs, ders[(0,) * D])
        if order >= 1:
            Jinv = self.jacobian_inv
            gref = np.stack([ders[_unit(D, j)] for j in range(D)], axis=-1)
            out.grad = np.einsum("eqji,eqaj->eqai", Jinv, gref)
        if order >= 2:
            href = np.empty(gref.shape + (D,))
            for j in range(D):
                for l in range(j, D):
                    href[..., j, l] = ders[_unit(D, j, l)]
                    href[..., l, j] = href[..., j, l]
            H = self._geometry_data[2]
            if np.any(H):
                href = href - np.einsum("eqam,eqmjl->eqajl", out.grad, H)
            tmp = np.einsum("eqji,eqajl->eqail", Jinv, href)
            out.hess = np.einsum("eqail,eqlk->eqaik", tmp, Jinv)
        cache[key] = (out, space, weights)
        return out


def _orders(D: int, order: int):
    return [m for m in itertools.product(range(order + 1), repeat=D) if sum(m) <= order]
