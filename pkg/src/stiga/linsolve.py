"""Sparse direct and iterative solvers with residual checks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import reverse_cuthill_mckee

RESIDUAL_TOL = 1e-10


class SolverError(RuntimeError):
    """Factorization failed or the computed solution misses the residual bound."""


@dataclass(frozen=True)
class SparseSystem:
    """Square sparse matrix over the free DOFs and a right-hand side."""

    matrix: sp.csr_matrix
    rhs: np.ndarray

    def __post_init__(self) -> None:
        n, m = self.matrix.shape
        if n != m or self.rhs.shape != (n,):
            raise ValueError(f"inconsistent system: matrix {self.matrix.shape}, rhs {self.rhs.shape}")


class _OrderingCache:
    """Fill-reducing permutations keyed by sparsity pattern."""

    def __init__(self, maxsize: int = 16):
        self._store: dict = {}
        self.maxsize = maxsize
        self.hits = 0

    def get(self, A: sp.csr_matrix) -> np.ndarray:
        key = (A.shape, A.nnz, hash(A.indptr.tobytes()), hash(A.indices.tobytes()))
        perm = self._store.get(key)
        if perm is not None:
            self.hits += 1
            return perm
        pattern = (abs(A) + abs(A.T)).tocsr()
        perm = reverse_cuthill_mckee(pattern, symmetric_mode=True).astype(np.int64)
        if len(self._store) >= self.maxsize:
            self._store.pop(next(iter(self._store)))
        self._store[key] = perm
        return perm


ORDERING_CACHE = _OrderingCache()


def _as_system(sys_or_matrix, rhs=None) -> SparseSystem:
    if isinstance(sys_or_matrix, SparseSystem):
        return sys_or_matrix
    return SparseSystem(sp.csr_matrix(sys_or_matrix), np.asarray(rhs, dtype=float))


def _check_residual(A, x, b) -> None:
    res = np.linalg.norm(A @ x - b) / max(np.linalg.norm(b), 1.0)
    if not np.isfinite(res) or res >= RESIDUAL_TOL:
        raise SolverError(f"relative residual {res:.3e} exceeds {RESIDUAL_TOL:g}")


def solve_direct(sys_or_matrix, rhs=None, method: str = "direct", tol: float = 1e-10, maxit: int = 5000) -> np.ndarray:
    """Solve a (nonsymmetric) sparse system.

    ``method="direct"`` uses sparse LU with partial pivoting on a cached
    bandwidth-reducing ordering; ``method="iterative"`` uses restarted GMRES.
    """
    s = _as_system(sys_or_matrix, rhs)
    A, b = s.matrix.tocsr(), s.rhs
    if A.shape[0] == 0:
        raise ValueError("empty system")
    if method == "direct":
        perm = ORDERING_CACHE.get(A)
        Ap = A[perm][:, perm].tocsc()
        try:
            lu = spla.splu(Ap, permc_spec="NATURAL")
        except RuntimeError as exc:
            raise SolverError(f"sparse LU failed: {exc}") from exc
        x = np.empty_like(b)
        x[perm] = lu.solve(b[perm])
    elif method == "iterative":
        x, info = spla.gmres(A, b, rtol=tol, atol=0.0, restart=min(200, A.shape[0]), maxiter=maxit)
        if info != 0:
            raise SolverError(f"GMRES did not converge (info={info})")
    else:
        raise ValueError(f"unknown solver method {method!r}")
    _check_residual(A, x, b)
    return x


def solve_spd(sys_or_matrix, rhs=None) -> np.ndarray:
    """Solve a symmetric positive definite system.

    Unpivoted sparse LU on a symmetric ordering; all pivots positive is
    equivalent to positive definiteness, so a nonpositive pivot raises.
    """
    s = _as_system(sys_or_matrix, rhs)
    A, b = s.matrix.tocsr(), s.rhs
    if A.shape[0] == 0:
        raise ValueError("empty system")
    asym = abs(A - A.T).max() if A.nnz else 0.0
    if asym > 1e-12 * max(abs(A).max(), 1e-300):
        raise SolverError("matrix is not symmetric")
    perm = ORDERING_CACHE.get(A)
    Ap = A[perm][:, perm].tocsc()
    try:
        lu = spla.splu(Ap, permc_spec="NATURAL", diag_pivot_thresh=0.0, options={"SymmetricMode": True})
    except RuntimeError as exc:
        raise SolverError(f"factorization failed: {exc}") from exc
    if np.any(lu.perm_r != np.arange(A.shape[0])) or np.any(lu.U.diagonal() <= 0.0):
        raise SolverError("matrix is not positive definite")
    x = np.empty_like(b)
    x[perm] = lu.solve(b[perm])
    _check_residual(A, x, b)
    return x
