"""Discrete spline spaces on the mapped cylinder and fields living in them.

Scalar fields answer ``sample(batch, keys)`` for keys among ``val``, ``dt``,
``grad`` (spatial gradient), ``lap`` (spatial Laplacian) and ``dtgrad``
(time derivative of the spatial gradient). Flux fields answer ``val``,
``div`` (spatial divergence) and ``dt``.
"""

from __future__ import annotations

from functools import cached_property

import numpy as np

from .bspline import TensorSpace, check_smoothness
from .geometry import GeometryMap, build_mesh, inverse_map
from .sampling import PointSet

SCALAR_KEYS = ("val", "dt", "grad", "lap", "dtgrad")
FLUX_KEYS = ("val", "div", "dt")


class DiscreteSpace:
    """Spline space ``span{R_i o Phi^-1}`` with optional homogeneous constraints.

    With ``constrained=True`` the functions with a nonzero trace on the
    lateral boundary or on the initial face are removed (the space V_0h);
    otherwise all functions are free.
    """

    def __init__(
        self,
        geometry: GeometryMap,
        tensor_space: TensorSpace | None = None,
        weights=None,
        constrained: bool = True,
    ):
        ts = geometry.space if tensor_space is None else tensor_space
        if ts.dim != geometry.dim:
            raise ValueError("space and geometry dimensions differ")
        if weights is None and ts is geometry.space:
            weights = geometry.weights
        for a, (kg, ks) in enumerate(zip(geometry.space.knot_vectors, ts.knot_vectors)):
            missing = np.setdiff1d(kg.breakpoints, ks.breakpoints)
            if missing.size:
                raise ValueError(f"direction {a}: geometry breakpoint {missing[0]:g} is not in the space mesh")
        self.geometry = geometry
        self.tensor_space = ts
        self.weights = None if weights is None else np.asarray(weights, dtype=float)
        self.constrained = constrained
        mask = np.zeros(ts.shape, dtype=bool)
        if constrained:
            for a in range(ts.dim - 1):
                idx = [slice(None)] * ts.dim
                idx[a] = 0
                mask[tuple(idx)] = True
                idx[a] = ts.shape[a] - 1
                mask[tuple(idx)] = True
            mask[..., 0] = True
        self.constrained_mask = mask.ravel()
        self.free = np.flatnonzero(~self.constrained_mask)
        self._free_index = np.full(ts.size, -1)
        self._free_index[self.free] = np.arange(self.free.size)
        self._pointsets: dict = {}

    @property
    def dim(self) -> int:
        return self.tensor_space.dim

    @property
    def d(self) -> int:
        """Number of spatial dimensions."""
        return self.tensor_space.dim - 1

    @property
    def degree(self) -> int:
        return self.tensor_space.degree

    @property
    def n_free(self) -> int:
        return int(self.free.size)

    @property
    def default_q(self) -> int:
        return self.degree + 2

    def free_index(self, flat):
        """Map flat basis indices to free-DOF positions (-1 when constrained)."""
        return self._free_index[flat]

    @cached_property
    def mesh(self):
        return build_mesh(self.geometry, self.tensor_space)

    def pointset(self, q: int | None = None, where: str = "volume") -> PointSet:
        q = self.default_q if q is None else q
        key = (q, where)
        if key not in self._pointsets:
            if where == "volume":
                self._pointsets[key] = PointSet.volume(self.tensor_space, q)
            else:
                self._pointsets[key] = PointSet.face(self.tensor_space, q, where)
        return self._pointsets[key]

    def batches(self, q: int | None = None, where: str = "volume", chunk: int | None = None):
        ps = self.pointset(q, where)
        kw = {} if chunk is None else {"chunk": chunk}
        return ps.batches(self.geometry, **kw)

    def basis(self, batch, order: int = 1):
        return batch.basis(self.tensor_space, order, self.weights)

    def with_tensor_space(self, tensor_space: TensorSpace, constrained: bool | None = None) -> DiscreteSpace:
        c = self.constrained if constrained is None else constrained
        return DiscreteSpace(self.geometry, tensor_space, constrained=c)


class _FieldAlgebra:
    def __add__(self, other):
        return FieldSum([(1.0, self), (1.0, other)])

    def __sub__(self, other):
        return FieldSum([(1.0, self), (-1.0, other)])

    def __neg__(self):
        return FieldSum([(-1.0, self)])

    def __rmul__(self, c: float):
        return FieldSum([(float(c), self)])


def _order_for(keys) -> int:
    keys = set(keys)
    if keys & {"lap", "dtgrad"}:
        return 2
    if keys & {"dt", "grad", "div"}:
        return 1
    return 0


class DiscreteField(_FieldAlgebra):
    """Coefficients over the free DOFs of a :class:`DiscreteSpace`."""

    def __init__(self, space: DiscreteSpace, coefficients):
        c = np.asarray(coefficients, dtype=float)
        if c.shape != (space.n_free,):
            raise ValueError(f"expected {space.n_free} coefficients, got {c.shape}")
        self.space = space
        self.coefficients = c

    @classmethod
    def zero(cls, space: DiscreteSpace) -> DiscreteField:
        return cls(space, np.zeros(space.n_free))

    def full_coefficients(self) -> np.ndarray:
        full = np.zeros(self.space.tensor_space.size)
        full[self.space.free] = self.coefficients
        return full

    def sample(self, batch, keys) -> dict:
        order = _order_for(keys)
        ts = self.space.tensor_space
        if order >= 1:
            check_smoothness(ts, 0)
        if "lap" in keys:
            check_smoothness(ts, 1, range(ts.dim - 1))
        lb = self.space.basis(batch, order)
        c = self.full_coefficients()[lb.dofs]
        return _contract_scalar(lb, c, keys, self.space.d)


def _contract_scalar(lb, c, keys, d) -> dict:
    out = {}
    if "val" in keys:
        out["val"] = np.einsum("ea,eqa->eq", c, lb.val)
    if "dt" in keys or "grad" in keys:
        g = np.einsum("ea,eqai->eqi", c, lb.grad)
        out["dt"] = g[..., d]
        out["grad"] = g[..., :d]
    if "lap" in keys or "dtgrad" in keys:
        H = np.einsum("ea,eqaik->eqik", c, lb.hess)
        out["lap"] = np.trace(H[..., :d, :d], axis1=-2, axis2=-1)
        out["dtgrad"] = H[..., :d, d]
    return out


class AnalyticField(_FieldAlgebra):
    """Scalar field given by callables of the space-time point array ``(..., d+1)``."""

    def __init__(self, val, dt=None, grad=None, lap=None, dtgrad=None):
        self.funcs = {"val": val, "dt": dt, "grad": grad, "lap": lap, "dtgrad": dtgrad}

    def sample(self, batch, keys) -> dict:
        out = {}
        for k in keys:
            fn = self.funcs[k]
            if fn is None:
                raise ValueError(f"analytic field does not provide '{k}'")
            out[k] = np.asarray(fn(batch.x), dtype=float)
        return out


class FieldSum(_FieldAlgebra):
    """Linear combination of scalar fields."""

    def __init__(self, terms):
        self.terms = list(terms)

    def sample(self, batch, keys) -> dict:
        out = {}
        for c, f in self.terms:
            s = f.sample(batch, keys)
            for k in keys:
                out[k] = out.get(k, 0.0) + c * s[k]
        return out


class GradientFlux:
    """``y = grad_x v`` evaluated exactly from ``v``'s derivatives."""

    def __init__(self, v):
        self.v = v

    def sample(self, batch, keys) -> dict:
        need = {"val": "grad", "div": "lap", "dt": "dtgrad"}
        s = self.v.sample(batch, [need[k] for k in keys])
        return {k: s[need[k]] for k in keys}


class AnalyticFlux:
    def __init__(self, val, div=None, dt=None):
        self.funcs = {"val": val, "div": div, "dt": dt}

    def sample(self, batch, keys) -> dict:
        out = {}
        for k in keys:
            fn = self.funcs[k]
            if fn is None:
                raise ValueError(f"analytic flux does not provide '{k}'")
            out[k] = np.asarray(fn(batch.x), dtype=float)
        return out


class FluxField:
    """Vector field with one spline component per spatial direction.

    ``coefficients`` has shape ``(d, n)`` over all basis functions of an
    unconstrained :class:`DiscreteSpace`.
    """

    def __init__(self, space: DiscreteSpace, coefficients):
        if space.constrained:
            raise ValueError("flux components live in an unconstrained space")
        c = np.asarray(coefficients, dtype=float)
        if c.shape != (space.d, space.n_free):
            raise ValueError(f"expected coefficients of shape {(space.d, space.n_free)}")
        self.space = space
        self.coefficients = c

    @property
    def has_div(self) -> bool:
        try:
            check_smoothness(self.space.tensor_space, 0)
        except ValueError:
            return False
        return True

    has_dt = has_div

    def sample(self, batch, keys) -> dict:
        if not self.has_div:
            raise ValueError("flux space is not continuous; div_x and d_t are unavailable")
        lb = self.space.basis(batch, _order_for(keys))
        d = self.space.d
        c = self.coefficients[:, lb.dofs]  # (d, ne, nloc)
        out = {}
        if "val" in keys:
            out["val"] = np.einsum("kea,eqa->eqk", c, lb.val)
        if "div" in keys or "dt" in keys:
            out["div"] = np.einsum("kea,eqak->eq", c, lb.grad[..., :d])
            out["dt"] = np.einsum("kea,eqa->eqk", c, lb.grad[..., d])
        return {k: out[k] for k in keys}


def eval_field(field, points, keys=SCALAR_KEYS, parametric: bool = True, geometry=None) -> dict:
    """Sample a field at scattered points.

    ``points`` are parametric coordinates unless ``parametric=False``, in
    which case they are mapped back through the geometry first. Returned
    arrays have the point index as leading axis.
    """
    if geometry is None:
        geometry = field.space.geometry
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if not parametric:
        pts = np.array([inverse_map(geometry, x) for x in pts])
    ps = PointSet.scattered(pts)
    batch = next(ps.batches(geometry, chunk=pts.shape[0]))
    out = field.sample(batch, list(keys))
    out = {k: v[:, 0] for k, v in out.items()}
    out["x"] = batch.x[:, 0]
    return out
