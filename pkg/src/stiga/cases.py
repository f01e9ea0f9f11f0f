"""Manufactured solutions on the unit space-time cylinder (T = 1)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .spaces import AnalyticField, AnalyticFlux

pi = np.pi
sin, cos = np.sin, np.cos


@dataclass(frozen=True)
class ManufacturedCase:
    """Exact solution with its derivatives and the matching source ``f = d_t u - lap_x u``.

    Every callable takes points ``(..., d+1)`` with time last. ``grad`` and
    ``dtgrad`` return arrays ``(..., d)``.
    """

    name: str
    d: int
    u: Callable
    dt: Callable
    grad: Callable
    lap: Callable
    dtgrad: Callable
    extents: tuple = ()
    optional: bool = False

    def f(self, X):
        return self.dt(X) - self.lap(X)

    @property
    def field(self) -> AnalyticField:
        return AnalyticField(self.u, self.dt, self.grad, self.lap, self.dtgrad)

    @property
    def flux(self) -> AnalyticFlux:
        """Exact flux ``grad_x u`` with its divergence and time derivative."""
        return AnalyticFlux(self.grad, self.lap, self.dtgrad)

    def domain(self) -> tuple:
        return self.extents or (1.0,) * (self.d + 1)


def _ms1() -> ManufacturedCase:
    def u(X):
        return sin(pi * X[..., 0]) * sin(pi * X[..., 1])

    def dt(X):
        return pi * sin(pi * X[..., 0]) * cos(pi * X[..., 1])

    def grad(X):
        return (pi * cos(pi * X[..., 0]) * sin(pi * X[..., 1]))[..., None]

    def lap(X):
        return -(pi**2) * u(X)

    def dtgrad(X):
        return (pi**2 * cos(pi * X[..., 0]) * cos(pi * X[..., 1]))[..., None]

    return ManufacturedCase("MS1", 1, u, dt, grad, lap, dtgrad)


def _ms2() -> ManufacturedCase:
    def u(X):
        x, t = X[..., 0], X[..., 1]
        return x * (1 - x) * t

    def dt(X):
        x = X[..., 0]
        return x * (1 - x)

    def grad(X):
        x, t = X[..., 0], X[..., 1]
        return ((1 - 2 * x) * t)[..., None]

    def lap(X):
        return -2.0 * X[..., 1]

    def dtgrad(X):
        return (1 - 2 * X[..., 0])[..., None]

    return ManufacturedCase("MS2", 1, u, dt, grad, lap, dtgrad)


def _ms3() -> ManufacturedCase:
    def s(X):
        return sin(pi * X[..., 0]) * sin(pi * X[..., 1])

    def u(X):
        return s(X) * sin(pi * X[..., 2])

    def dt(X):
        return pi * s(X) * cos(pi * X[..., 2])

    def gx(X):
        x, y = X[..., 0], X[..., 1]
        return pi * np.stack([cos(pi * x) * sin(pi * y), sin(pi * x) * cos(pi * y)], axis=-1)

    def grad(X):
        return gx(X) * sin(pi * X[..., 2])[..., None]

    def lap(X):
        return -2 * pi**2 * u(X)

    def dtgrad(X):
        return gx(X) * (pi * cos(pi * X[..., 2]))[..., None]

    return ManufacturedCase("MS3", 2, u, dt, grad, lap, dtgrad, optional=True)


CASES = {c.name: c for c in (_ms1(), _ms2(), _ms3())}


def get_case(name: str) -> ManufacturedCase:
    try:
        return CASES[name]
    except KeyError:
        raise ValueError(f"unknown case {name!r}; available: {', '.join(CASES)}") from None
