"""Single-patch geometry map from the parametric cylinder to the physical one."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bspline import TensorSpace, nurbs_eval, tensor_eval

DEGENERATE_DET = 1e-14


@dataclass(frozen=True, eq=False)
class GeometryMap:
    """NURBS map ``Phi(xi) = sum_i R_i(xi) P_i``; the last coordinate is time."""

    space: TensorSpace
    control_points: np.ndarray = field(repr=False)
    weights: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        P = np.array(self.control_points, dtype=float).reshape(self.space.size, -1)
        if P.shape[1] != self.space.dim:
            raise ValueError(f"control points need {self.space.dim} coordinates")
        object.__setattr__(self, "control_points", P)
        if self.weights is not None:
            w = np.array(self.weights, dtype=float).ravel()
            if w.size != self.space.size:
                raise ValueError("one weight per control point required")
            if np.any(w <= 0):
                raise ValueError("NURBS weights must be positive")
            if np.all(w == 1.0):
                w = None
            object.__setattr__(self, "weights", w)

    @property
    def dim(self) -> int:
        return self.space.dim

    @property
    def rational(self) -> bool:
        return self.weights is not None

    @property
    def end_time(self) -> float:
        return float(self.control_points[:, -1].max())

    def spatial_bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        """Box containing Omega (convex-hull property of the control net)."""
        P = self.control_points[:, :-1]
        return P.min(axis=0), P.max(axis=0)


def _greville_net(space: TensorSpace) -> np.ndarray:
    grids = np.meshgrid(*[kv.greville() for kv in space.knot_vectors], indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=-1)


def identity_geometry(space: TensorSpace) -> GeometryMap:
    """``Phi(xi) = xi`` represented in ``space`` (linear precision of Greville points)."""
    return GeometryMap(space, _greville_net(space))


def box_geometry(extents, space: TensorSpace | None = None) -> GeometryMap:
    """Affine map onto ``(0, L_1) x ... x (0, L_d) x (0, T)``; ``extents = (L_1, ..., L_d, T)``."""
    extents = np.asarray(extents, dtype=float)
    if np.any(extents <= 0):
        raise ValueError("box extents must be positive")
    if space is None:
        space = TensorSpace.uniform(1, 1, dim=extents.size)
    if extents.size != space.dim:
        raise ValueError(f"need {space.dim} extents (spatial lengths and T)")
    return GeometryMap(space, _greville_net(space) * extents)


def _basis_ders(g: GeometryMap, xi, k: int):
    if g.rational:
        return nurbs_eval(g.space, g.weights, xi, k)
    return tensor_eval(g.space, xi, k)


def map_point(g: GeometryMap, xi) -> np.ndarray:
    """Physical point ``Phi(xi)``."""
    dofs, ders = _basis_ders(g, xi, 0)
    return ders[(0,) * g.dim] @ g.control_points[dofs]


def jacobian(g: GeometryMap, xi) -> tuple[np.ndarray, float, np.ndarray]:
    """``(grad Phi, det, inverse)``; column ``j`` holds ``d Phi / d xi_j``."""
    dofs, ders = _basis_ders(g, xi, 1)
    P = g.control_points[dofs]
    J = np.empty((g.dim, g.dim))
    for j in range(g.dim):
        m = [0] * g.dim
        m[j] = 1
        J[:, j] = ders[tuple(m)] @ P
    det = float(np.linalg.det(J))
    if abs(det) < DEGENERATE_DET:
        raise ValueError(f"degenerate geometry at xi={np.asarray(xi).tolist()}: det = {det:g}")
    return J, det, np.linalg.inv(J)


def inverse_map(g: GeometryMap, x, tol: float = 1e-13, maxit: int = 50) -> np.ndarray:
    """Parametric preimage of a physical point by Newton's method."""
    x = np.asarray(x, dtype=float)
    lo, hi = g.control_points.min(axis=0), g.control_points.max(axis=0)
    xi = np.clip((x - lo) / (hi - lo), 0.0, 1.0)
    for _ in range(maxit):
        r = map_point(g, xi) - x
        if np.linalg.norm(r) < tol * max(1.0, np.linalg.norm(x)):
            return xi
        _, _, Jinv = jacobian(g, xi)
        xi = np.clip(xi - Jinv @ r, 0.0, 1.0)
    raise ValueError(f"inverse map did not converge for x={x.tolist()}")


@dataclass(frozen=True)
class Element:
    """A nonempty product of knot spans and its mapped size."""

    index: tuple[int, ...]
    lower: np.ndarray
    upper: np.ndarray
    h_param: float
    h: float


@dataclass(frozen=True)
class Mesh:
    elements: list[Element]
    h: float
    quasi_uniformity: float

    def __len__(self) -> int:
        return len(self.elements)


def build_mesh(g: GeometryMap, space: TensorSpace | None = None, q: int | None = None) -> Mesh:
    """Elements of the parametric mesh of ``space`` (default: the geometry's own).

    ``h_K`` is the parametric diameter times the largest spectral norm of the
    Jacobian over the element's Gauss points. The Jacobian determinant is
    checked to be positive at every such point, and the map is checked to
    describe a fixed spatial domain times a time interval.
    """
    from .sampling import PointSet

    space = g.space if space is None else space
    q = space.degree + 2 if q is None else q
    ps = PointSet.volume(space, q)
    bps = [kv.breakpoints for kv in space.knot_vectors]
    elements = []
    for batch in ps.batches(g, chunk=4096):
        J = batch.jacobian
        if np.any(batch.det <= 0.0):
            raise ValueError("geometry map has a non-positive Jacobian determinant")
        _check_cylinder(J)
        norms = np.linalg.norm(J, ord=2, axis=(-2, -1)).max(axis=1)
        for r, jn in zip(batch.rows, norms):
            lower = np.array([bps[a][r[a]] for a in range(space.dim)])
            upper = np.array([bps[a][r[a] + 1] for a in range(space.dim)])
            hp = float(np.linalg.norm(upper - lower))
            elements.append(Element(tuple(int(i) for i in r), lower, upper, hp, float(jn) * hp))
    hs = np.array([e.h for e in elements])
    return Mesh(elements, float(hs.max()), float(hs.max() / hs.min()))


def _check_cylinder(J: np.ndarray, tol: float = 1e-10) -> None:
    # spatial coordinates must not depend on tau, time only on tau
    scale = max(1.0, float(np.abs(J).max()))
    if np.abs(J[..., :-1, -1]).max() > tol * scale or np.abs(J[..., -1, :-1]).max() > tol * scale:
        raise ValueError("geometry is not a fixed spatial domain times a time interval")
    dt = J[..., -1, -1]
    if np.ptp(dt) > tol * scale:
        raise ValueError("time direction must be mapped affinely")
