"""Assembly of the stabilised space-time system and of norm Gram matrices.

Element loops are vectorised over fixed-size chunks of cells; every chunk
produces dense local blocks that are scattered into one triplet list in
chunk order, so the compressed matrix does not depend on the number of
worker threads.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .bspline import _find_spans, basis_ders, check_smoothness
from .geometry import map_point
from .linsolve import SparseSystem, solve_spd
from .spaces import DiscreteField, DiscreteSpace

CHUNK = 256


@dataclass(frozen=True)
class StabilizationParams:
    """Time-upwind test function ``lam * w + delta * d_t w`` with ``delta = theta * h``."""

    theta: float
    h: float
    lam: float = 1.0

    def __post_init__(self) -> None:
        if not self.theta > 0:
            raise ValueError("theta must be positive")
        if not self.h > 0:
            raise ValueError("mesh size must be positive")

    @classmethod
    def for_space(cls, space: DiscreteSpace, theta: float = 1.0) -> StabilizationParams:
        return cls(theta=theta, h=space.mesh.h)

    @property
    def delta(self) -> float:
        return self.theta * self.h

    @property
    def mu(self) -> float:
        return self.delta


def _map_chunks(fn, space: DiscreteSpace, q, where: str, threads: int):
    batches = list(space.batches(q, where, chunk=CHUNK))
    if threads > 1 and len(batches) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, batches))
    return [fn(b) for b in batches]


def _scatter_vector(space: DiscreteSpace, vectors) -> np.ndarray:
    b = np.zeros(space.n_free)
    for dofs, v in vectors:
        fi = space.free_index(dofs).ravel()
        keep = fi >= 0
        np.add.at(b, fi[keep], v.ravel()[keep])
    return b


def _scatter(space: DiscreteSpace, blocks, vectors=None):
    """Compress chunk-local blocks ``(dofs, K_loc)`` into a free-DOF CSR matrix."""
    n = space.n_free
    rows, cols, vals = [], [], []
    for dofs, K in blocks:
        fi = space.free_index(dofs)
        nl = dofs.shape[1]
        r = np.repeat(fi, nl, axis=1).ravel()
        c = np.tile(fi, (1, nl)).ravel()
        keep = (r >= 0) & (c >= 0)
        rows.append(r[keep])
        cols.append(c[keep])
        vals.append(K.reshape(-1)[keep])
    A = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    ).tocsr()
    A.sum_duplicates()
    b = None if vectors is None else _scatter_vector(space, vectors)
    return A, b


def assemble_system(space: DiscreteSpace, params: StabilizationParams, f, q: int | None = None, threads: int = 1) -> SparseSystem:
    """Stabilised space-time matrix and load vector over the free DOFs.

    Row ``i`` tests with ``phi_i + delta d_t phi_i``:
    ``K[i, j] = (d_t phi_j, phi_i) + delta (d_t phi_j, d_t phi_i)
    + (grad_x phi_j, grad_x phi_i) + delta (grad_x phi_j, d_t grad_x phi_i)``.
    ``f`` maps points ``(..., d+1)`` to source values.
    """
    check_smoothness(space.tensor_space, 1)
    d = space.d
    delta = params.delta

    def local(batch):
        lb = space.basis(batch, 2)
        w = batch.measure
        N = lb.val
        dt = lb.grad[..., d]
        gx = lb.grad[..., :d]
        dtgx = lb.hess[..., :d, d]
        test = N + delta * dt
        K = np.einsum("eq,eqi,eqj->eij", w, test, dt)
        K += np.einsum("eq,eqik,eqjk->eij", w, gx + delta * dtgx, gx)
        fv = np.asarray(f(batch.x), dtype=float) if f is not None else np.zeros(w.shape)
        F = np.einsum("eq,eq,eqi->ei", w, fv, test)
        return lb.dofs, K, F

    parts = _map_chunks(local, space, q, "volume", threads)
    K, F = _scatter(space, [(p[0], p[1]) for p in parts], [(p[0], p[2]) for p in parts])
    return SparseSystem(K, F)


def assemble_norm_gram(space: DiscreteSpace, params: StabilizationParams | None = None, which="sh", q: int | None = None, threads: int = 1) -> sp.csr_matrix:
    """Symmetric matrix of the weighted energy seminorm.

    ``w^T G w = nu1 |grad_x w|_Q^2 + nu2 |d_t w|_Q^2 + nu3 |grad_x w|_{Sigma_T}^2
    + nu4 |w|_{Sigma_T}^2``. ``which="sh"`` selects ``(1, delta, delta, 1)``;
    otherwise pass the four weights.
    """
    if isinstance(which, str):
        if which != "sh":
            raise ValueError(f"unknown norm preset {which!r}")
        if params is None:
            raise ValueError("the s-h norm needs stabilisation parameters")
        nu = (1.0, params.delta, params.delta, 1.0)
    else:
        nu = tuple(float(v) for v in which)
        if len(nu) != 4:
            raise ValueError("need four weights")
    if min(nu) < 0:
        raise ValueError("norm weights must be nonnegative")
    d = space.d

    def vol(batch):
        lb = space.basis(batch, 1)
        w = batch.measure
        gx, dt = lb.grad[..., :d], lb.grad[..., d]
        G = nu[0] * np.einsum("eq,eqik,eqjk->eij", w, gx, gx) + nu[1] * np.einsum("eq,eqi,eqj->eij", w, dt, dt)
        return lb.dofs, G

    def top(batch):
        lb = space.basis(batch, 1)
        w = batch.measure
        gx = lb.grad[..., :d]
        G = nu[2] * np.einsum("eq,eqik,eqjk->eij", w, gx, gx) + nu[3] * np.einsum("eq,eqi,eqj->eij", w, lb.val, lb.val)
        return lb.dofs, G

    blocks = _map_chunks(vol, space, q, "volume", threads) + _map_chunks(top, space, q, "top", threads)
    G, _ = _scatter(space, blocks)
    return G


def assemble_mass(space: DiscreteSpace, q: int | None = None, threads: int = 1) -> sp.csr_matrix:
    def local(batch):
        lb = space.basis(batch, 0)
        return lb.dofs, np.einsum("eq,eqi,eqj->eij", batch.measure, lb.val, lb.val)

    M, _ = _scatter(space, _map_chunks(local, space, q, "volume", threads))
    return M


def assemble_load(space: DiscreteSpace, g, q: int | None = None) -> np.ndarray:
    """``(g, phi_i)_Q`` for a callable or any scalar field with ``sample``."""
    vecs = []
    for batch in space.batches(q):
        lb = space.basis(batch, 0)
        gv = g.sample(batch, ["val"])["val"] if hasattr(g, "sample") else np.asarray(g(batch.x), dtype=float)
        vecs.append((lb.dofs, np.einsum("eq,eq,eqi->ei", batch.measure, gv, lb.val)))
    return _scatter_vector(space, vecs)


def l2_project(space: DiscreteSpace, g, q: int | None = None) -> DiscreteField:
    """L2(Q)-orthogonal projection of ``g`` onto ``space``."""
    M = assemble_mass(space, q)
    b = assemble_load(space, g, q)
    return DiscreteField(space, solve_spd(M, b))


def interpolate(space: DiscreteSpace, g) -> DiscreteField:
    """Interpolation at the Greville points of the parametric space.

    Constrained coefficients are dropped, so ``g`` should vanish on the
    constrained boundary when the space is constrained.
    """
    if space.weights is not None:
        raise NotImplementedError("interpolation is only provided for polynomial (non-rational) spaces")
    ts = space.tensor_space
    grev = [kv.greville() for kv in ts.knot_vectors]
    colloc = []
    for kv, gr in zip(ts.knot_vectors, grev):
        C = np.zeros((kv.n, kv.n))
        spans = _find_spans(kv, gr)
        vals = basis_ders(kv, spans, gr, 0)[:, 0, :]
        for r in range(kv.n):
            C[r, spans[r] - kv.degree : spans[r] + 1] = vals[r]
        colloc.append(C)
    grid = np.stack(np.meshgrid(*grev, indexing="ij"), axis=-1).reshape(-1, ts.dim)
    X = np.array([map_point(space.geometry, xi) for xi in grid])
    vals = np.asarray(g(X), dtype=float).reshape(ts.shape)
    coef = vals
    for a, C in enumerate(colloc):
        coef = np.moveaxis(np.tensordot(np.linalg.inv(C), np.moveaxis(coef, a, 0), axes=1), 0, a)
    return DiscreteField(space, coef.ravel()[space.free])
