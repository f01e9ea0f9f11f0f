"""Tensor-product Gauss-Legendre rules on parametric boxes and their faces."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


def _legendre_pair(q: int, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(P_{q-1}(x), P_q(x)) by the three-term recurrence."""
    p0, p1 = np.ones_like(x), x.copy()
    for n in range(2, q + 1):
        p0, p1 = p1, ((2 * n - 1) * x * p1 - (n - 1) * p0) / n
    return p0, p1


@lru_cache(maxsize=32)
def _gauss_legendre_ref(q: int) -> tuple[np.ndarray, np.ndarray]:
    # Newton iteration on P_q, nodes on [-1, 1]
    k = np.arange(1, q + 1)
    x = np.cos(np.pi * (k - 0.25) / (q + 0.5))
    for _ in range(100):
        p0, p1 = _legendre_pair(q, x)
        dx = p1 / (q * (x * p1 - p0) / (x * x - 1.0))
        x = x - dx
        if np.max(np.abs(dx)) < 1e-15:
            break
    p0, p1 = _legendre_pair(q, x)
    dp = q * (x * p1 - p0) / (x * x - 1.0)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    order = np.argsort(x)
    return x[order], w[order]


def gauss_legendre(q: int, a: float = 0.0, b: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """``q``-point Gauss-Legendre nodes and weights on ``[a, b]``."""
    if q < 1:
        raise ValueError("need at least one quadrature point")
    x, w = _gauss_legendre_ref(int(q))
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


@dataclass(frozen=True)
class QuadratureRule:
    """Points ``(n, D)`` and positive weights ``(n,)``."""

    points: np.ndarray
    weights: np.ndarray

    def integrate(self, f) -> float:
        return float(np.dot(self.weights, f(self.points)))


def _tensor_rule(rules_1d) -> QuadratureRule:
    pts = np.stack(np.meshgrid(*[r[0] for r in rules_1d], indexing="ij"), axis=-1)
    wts = np.ones(pts.shape[:-1])
    for a, r in enumerate(rules_1d):
        shape = [1] * len(rules_1d)
        shape[a] = -1
        wts = wts * r[1].reshape(shape)
    return QuadratureRule(pts.reshape(-1, len(rules_1d)), wts.ravel())


def element_rule(q: int, lower, upper) -> QuadratureRule:
    """Tensor Gauss rule with ``q`` points per direction on the box ``[lower, upper]``."""
    lower = np.atleast_1d(np.asarray(lower, dtype=float))
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    return _tensor_rule([gauss_legendre(q, lo, hi) for lo, hi in zip(lower, upper)])


def face_rule(q: int, face, lower=None, upper=None) -> QuadratureRule:
    """Rule on a face of the box ``[lower, upper]`` (default: unit cube in 2D).

    ``face`` is ``"top"`` (last coordinate at its upper bound, Sigma_T),
    ``"bottom"`` (Sigma_0) or ``(axis, side)`` with ``side`` in {0, 1} for a
    lateral face. Weights measure the ``D - 1`` dimensional face area.
    """
    if lower is None:
        lower = np.zeros(2) if upper is None else np.zeros(len(upper))
    lower = np.asarray(lower, dtype=float)
    upper = np.ones(lower.size) if upper is None else np.asarray(upper, dtype=float)
    D = lower.size
    if face == "top":
        axis, side = D - 1, 1
    elif face == "bottom":
        axis, side = D - 1, 0
    else:
        axis, side = face
    rules = []
    for a in range(D):
        if a == axis:
            rules.append((np.array([upper[a] if side else lower[a]]), np.ones(1)))
        else:
            rules.append(gauss_legendre(q, lower[a], upper[a]))
    return _tensor_rule(rules)
