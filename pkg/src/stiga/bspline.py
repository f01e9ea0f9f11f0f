"""Univariate and tensor-product B-spline / NURBS bases.

Knot vectors are open, live on [0, 1] and are stored exactly as given.
Global (flat) basis indices of a tensor space follow C order over the
multi-index ``(i_1, ..., i_D)``: the last (time) direction varies fastest.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import comb

import numpy as np

MAX_DEGREE = 5
_KNOT_TOL = 1e-14


@dataclass(frozen=True, eq=False)
class KnotVector:
    """Open knot vector of a univariate B-spline basis on [0, 1]."""

    degree: int
    knots: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        knots = np.array(self.knots, dtype=float)
        object.__setattr__(self, "knots", knots)
        knots.setflags(write=False)
        p = self.degree
        if not isinstance(p, (int, np.integer)) or p < 1:
            raise ValueError(f"degree must be an integer >= 1, got {p!r}")
        if p > MAX_DEGREE:
            raise ValueError(f"degree {p} exceeds the supported maximum {MAX_DEGREE}")
        if knots.ndim != 1 or knots.size < 2 * p + 2:
            raise ValueError(f"need at least {2 * p + 2} knots for degree {p}")
        if np.any(np.diff(knots) < 0):
            raise ValueError("knots must be non-decreasing")
        if knots[0] != 0.0 or knots[-1] != 1.0:
            raise ValueError("knot vector must start at 0 and end at 1")
        if np.any(knots[: p + 1] != 0.0) or np.any(knots[-p - 1 :] != 1.0):
            raise ValueError(f"knot vector is not open: end knots need multiplicity {p + 1}")
        if knots[p + 1] == 0.0 or knots[-p - 2] == 1.0:
            raise ValueError(f"end knots have multiplicity larger than {p + 1}")
        _, counts = np.unique(knots[p + 1 : -p - 1], return_counts=True)
        if np.any(counts > p + 1):
            raise ValueError(f"inner knot multiplicity exceeds {p + 1}")

    @classmethod
    def uniform(cls, degree: int, n_elements: int, multiplicity: int = 1) -> KnotVector:
        """Open knot vector with ``n_elements`` equal spans."""
        return cls.from_breakpoints(degree, np.linspace(0.0, 1.0, n_elements + 1), multiplicity)

    @classmethod
    def from_breakpoints(cls, degree: int, breakpoints, multiplicity: int = 1) -> KnotVector:
        b = np.asarray(breakpoints, dtype=float)
        inner = np.repeat(b[1:-1], multiplicity)
        knots = np.concatenate([np.zeros(degree + 1), inner, np.ones(degree + 1)])
        return cls(degree, knots)

    @property
    def n(self) -> int:
        """Number of basis functions."""
        return self.knots.size - self.degree - 1

    @property
    def breakpoints(self) -> np.ndarray:
        return np.unique(self.knots)

    @property
    def n_elements(self) -> int:
        return self.breakpoints.size - 1

    def inner_multiplicities(self) -> tuple[np.ndarray, np.ndarray]:
        """Distinct inner knots and their multiplicities."""
        p = self.degree
        return np.unique(self.knots[p + 1 : -p - 1], return_counts=True)

    def continuity(self) -> int:
        """Global continuity order C^k across the inner knots (p - 1 if there are none)."""
        _, counts = self.inner_multiplicities()
        return self.degree - (int(counts.max()) if counts.size else 1)

    def greville(self) -> np.ndarray:
        p = self.degree
        return np.array([self.knots[i + 1 : i + p + 1].mean() for i in range(self.n)])

    def span_of_element(self, k: int) -> int:
        """Knot-span index of the k-th nonempty interval."""
        return find_span(self, 0.5 * (self.breakpoints[k] + self.breakpoints[k + 1]))

    def __repr__(self) -> str:
        return f"KnotVector(degree={self.degree}, breakpoints={self.breakpoints.tolist()})"


def find_span(kv: KnotVector, xi: float) -> int:
    """Index ``i`` with ``knots[i] <= xi < knots[i+1]``; ``xi = 1`` maps to the last span."""
    xi = float(xi)
    if not (0.0 <= xi <= 1.0):
        raise ValueError(f"parameter {xi} outside [0, 1]")
    return _find_spans(kv, np.array([xi]))[0]


def _find_spans(kv: KnotVector, xi: np.ndarray) -> np.ndarray:
    span = np.searchsorted(kv.knots, xi, side="right") - 1
    return np.clip(span, kv.degree, kv.n - 1)


def _safe_div(a, b):
    # 0/0 := 0, the recursion's convention for repeated knots
    b = np.asarray(b, dtype=float)
    out = np.zeros(np.broadcast(a, b).shape)
    np.divide(a, b, out=out, where=np.abs(b) > _KNOT_TOL)
    return out


def basis_ders(kv: KnotVector, spans: np.ndarray, xi: np.ndarray, k: int) -> np.ndarray:
    """Nonzero basis functions and their derivatives at many points.

    Vectorised triangular Cox-de Boor scheme. ``spans[m]`` is the knot span
    used for point ``xi[m]``. Returns an array of shape ``(npts, k + 1, p + 1)``;
    orders above ``p`` are identically zero.
    """
    U = kv.knots
    p = kv.degree
    spans = np.asarray(spans, dtype=int)
    x = np.asarray(xi, dtype=float)
    m = x.shape[0]
    ndu = np.zeros((m, p + 1, p + 1))
    ndu[:, 0, 0] = 1.0
    left = np.zeros((m, p + 1))
    right = np.zeros((m, p + 1))
    for j in range(1, p + 1):
        left[:, j] = x - U[spans + 1 - j]
        right[:, j] = U[spans + j] - x
        saved = np.zeros(m)
        for r in range(j):
            ndu[:, j, r] = right[:, r + 1] + left[:, j - r]
            temp = _safe_div(ndu[:, r, j - 1], ndu[:, j, r])
            ndu[:, r, j] = saved + right[:, r + 1] * temp
            saved = left[:, j - r] * temp
        ndu[:, j, j] = saved

    ders = np.zeros((m, k + 1, p + 1))
    ders[:, 0, :] = ndu[:, :, p]
    kk_max = min(k, p)
    for r in range(p + 1):
        a = np.zeros((2, m, p + 1))
        a[0, :, 0] = 1.0
        s1, s2 = 0, 1
        for kk in range(1, kk_max + 1):
            d = np.zeros(m)
            rk, pk = r - kk, p - kk
            if r >= kk:
                a[s2, :, 0] = _safe_div(a[s1, :, 0], ndu[:, pk + 1, rk])
                d += a[s2, :, 0] * ndu[:, rk, pk]
            j1 = 1 if rk >= -1 else -rk
            j2 = kk - 1 if r - 1 <= pk else p - r
            for j in range(j1, j2 + 1):
                a[s2, :, j] = _safe_div(a[s1, :, j] - a[s1, :, j - 1], ndu[:, pk + 1, rk + j])
                d += a[s2, :, j] * ndu[:, rk + j, pk]
            if r <= pk:
                a[s2, :, kk] = _safe_div(-a[s1, :, kk - 1], ndu[:, pk + 1, r])
                d += a[s2, :, kk] * ndu[:, r, pk]
            ders[:, kk, r] = d
            s1, s2 = s2, s1
    fac = p
    for kk in range(1, kk_max + 1):
        ders[:, kk, :] *= fac
        fac *= p - kk
    return ders


def eval_basis(kv: KnotVector, xi: float) -> tuple[int, np.ndarray]:
    """Values of the ``p + 1`` basis functions that are nonzero at ``xi``.

    Returns ``(first, values)`` where ``first`` is the index of the first
    supported basis function.
    """
    span = find_span(kv, xi)
    vals = basis_ders(kv, np.array([span]), np.array([float(xi)]), 0)[0, 0]
    return span - kv.degree, vals


def eval_basis_derivatives(kv: KnotVector, xi: float, k: int) -> tuple[int, np.ndarray]:
    """Derivatives up to order ``k`` of the supported basis functions.

    Returns ``(first, table)`` with ``table`` of shape ``(p + 1, k + 1)``;
    column ``j`` holds the ``j``-th derivatives.
    """
    if k < 0 or k > kv.degree:
        raise ValueError(f"derivative order {k} unsupported for degree {kv.degree}")
    span = find_span(kv, xi)
    ders = basis_ders(kv, np.array([span]), np.array([float(xi)]), k)[0]
    return span - kv.degree, ders.T.copy()


@dataclass(frozen=True, eq=False)
class TensorSpace:
    """Tensor-product B-spline space over the parametric cylinder (0, 1)^(d+1).

    The last knot vector is the time direction.
    """

    knot_vectors: tuple[KnotVector, ...]

    def __post_init__(self) -> None:
        kvs = tuple(self.knot_vectors)
        object.__setattr__(self, "knot_vectors", kvs)
        if len(kvs) < 2:
            raise ValueError("a space-time tensor space needs at least 2 directions")
        if len({kv.degree for kv in kvs}) != 1:
            raise ValueError("all directions must share the same degree")

    @classmethod
    def uniform(cls, degree: int, n_elements, dim: int | None = None) -> TensorSpace:
        if np.isscalar(n_elements):
            n_elements = [int(n_elements)] * (dim or 2)
        return cls(tuple(KnotVector.uniform(degree, int(n)) for n in n_elements))

    @property
    def degree(self) -> int:
        return self.knot_vectors[0].degree

    @property
    def dim(self) -> int:
        """Number of parametric directions (d + 1)."""
        return len(self.knot_vectors)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(kv.n for kv in self.knot_vectors)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def n_local(self) -> int:
        return (self.degree + 1) ** self.dim

    def ravel(self, multi_index) -> np.ndarray:
        return np.ravel_multi_index(tuple(np.asarray(multi_index).T), self.shape)

    def unravel(self, flat) -> np.ndarray:
        return np.stack(np.unravel_index(flat, self.shape), axis=-1)

    def with_degree(self, degree: int) -> TensorSpace:
        """Same breakpoints, different degree, C^(degree-1) across inner knots."""
        return TensorSpace(
            tuple(KnotVector.from_breakpoints(degree, kv.breakpoints) for kv in self.knot_vectors)
        )


def check_smoothness(space: TensorSpace, k: int, directions=None) -> None:
    """Raise ``ValueError`` unless the basis is at least C^k in the given directions."""
    directions = range(space.dim) if directions is None else directions
    for a in directions:
        kv = space.knot_vectors[a]
        knots, counts = kv.inner_multiplicities()
        bad = counts > kv.degree - k
        if np.any(bad):
            i = int(np.argmax(bad))
            raise ValueError(
                f"direction {a}: inner knot {knots[i]:g} has multiplicity {counts[i]}; "
                f"C^{k} continuity needs multiplicity <= {kv.degree - k}"
            )


def _local_dofs(space: TensorSpace, firsts: list[np.ndarray]) -> np.ndarray:
    """Flat indices of the locally supported functions; shape ``(npts, (p+1)^D)``."""
    p1 = space.degree + 1
    offs = np.indices((p1,) * space.dim).reshape(space.dim, -1)
    idx = [firsts[a][:, None] + offs[a][None, :] for a in range(space.dim)]
    return np.ravel_multi_index(tuple(idx), space.shape)


_LETTERS = "abcdefgh"


def tensor_product(factors: list[np.ndarray]) -> np.ndarray:
    """Outer product of per-direction local arrays ``(n, q_a, p+1)`` -> ``(n, prod q, prod (p+1))``."""
    D = len(factors)
    qs = _LETTERS[:D]
    ls = "ijklmnop"[:D]
    spec = ",".join(f"z{qs[a]}{ls[a]}" for a in range(D)) + f"->z{qs}{ls}"
    out = np.einsum(spec, *factors)
    n = out.shape[0]
    nq = int(np.prod([f.shape[1] for f in factors]))
    return out.reshape(n, nq, -1)


def derivative_orders(dim: int, k: int):
    """All derivative multi-indices with every entry <= k, sorted by total order."""
    return sorted(itertools.product(range(k + 1), repeat=dim), key=lambda m: (sum(m), m))


def tensor_eval(space: TensorSpace, xi, k: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Multivariate B-spline values and partial derivatives at one point.

    Returns ``(dofs, ders)`` where ``dofs`` are the flat indices of the
    ``(p+1)^D`` supported functions and ``ders[m_1, ..., m_D, :]`` is the
    mixed partial of order ``m_a <= k`` in direction ``a``.
    """
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (space.dim,):
        raise ValueError(f"expected a point with {space.dim} coordinates")
    tables, firsts = [], []
    for a, kv in enumerate(space.knot_vectors):
        span = find_span(kv, xi[a])
        tables.append(basis_ders(kv, np.array([span]), xi[a : a + 1], k)[0])
        firsts.append(np.array([span - kv.degree]))
    dofs = _local_dofs(space, firsts)[0]
    ders = np.zeros((k + 1,) * space.dim + (space.n_local,))
    for m in itertools.product(range(k + 1), repeat=space.dim):
        factors = [tables[a][m[a]][None, None, :] for a in range(space.dim)]
        ders[m] = tensor_product(factors)[0, 0]
    return dofs, ders


def rationalize(ders: dict, w_local: np.ndarray) -> dict:
    """Quotient rule: turn B-spline derivative arrays into NURBS ones.

    ``ders`` maps derivative multi-indices to arrays ``(..., nloc)`` and must
    be closed under lowering any index; ``w_local`` broadcasts against them.
    """
    orders = sorted(ders, key=lambda m: (sum(m), m))
    W = {m: np.sum(ders[m] * w_local, axis=-1, keepdims=True) for m in orders}
    R = {}
    for m in orders:
        num = ders[m] * w_local
        for l in itertools.product(*(range(mi + 1) for mi in m)):
            if sum(l) == 0:
                continue
            c = np.prod([comb(mi, li) for mi, li in zip(m, l)])
            rest = tuple(mi - li for mi, li in zip(m, l))
            num = num - c * W[l] * R[rest]
        R[m] = num / W[(0,) * len(m)]
    return R


def nurbs_eval(space: TensorSpace, weights, xi, k: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Rational basis ``w_i B_i / W`` and its partial derivatives at one point."""
    weights = np.asarray(weights, dtype=float).ravel()
    if weights.size != space.size:
        raise ValueError("one weight per basis function required")
    if np.any(weights <= 0):
        raise ValueError("NURBS weights must be positive")
    dofs, B = tensor_eval(space, xi, k)
    orders = list(itertools.product(range(k + 1), repeat=space.dim))
    R = rationalize({m: B[m] for m in orders}, weights[dofs])
    out = np.zeros_like(B)
    for m in orders:
        out[m] = R[m]
    return dofs, out
