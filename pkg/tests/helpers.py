"""Shared fixtures-by-function for the test suite (cached solves)."""

from functools import lru_cache

from stiga.assembly import StabilizationParams, assemble_system
from stiga.bspline import TensorSpace
from stiga.cases import get_case
from stiga.geometry import identity_geometry
from stiga.linsolve import solve_direct
from stiga.majorant import ProblemConstants
from stiga.spaces import DiscreteField, DiscreteSpace


def unit_space(p, n, dim=2, constrained=True):
    g = identity_geometry(TensorSpace.uniform(1, 1, dim))
    return DiscreteSpace(g, TensorSpace.uniform(p, n, dim), constrained=constrained)


@lru_cache(maxsize=None)
def solved(case_name, p, n, theta=1.0):
    """(case, space, stabilisation, discrete solution, problem constants)."""
    case = get_case(case_name)
    V = unit_space(p, n, case.d + 1)
    stab = StabilizationParams.for_space(V, theta)
    v = DiscreteField(V, solve_direct(assemble_system(V, stab, case.f)))
    return case, V, stab, v, ProblemConstants.for_space(V, stab.delta)
