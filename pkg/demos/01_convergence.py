"""Convergence of the stabilised space-time scheme on a smooth solution.

We solve u_t - u_xx = f on (0,1) x (0,1) with u = sin(pi x) sin(pi t),
refining the space-time mesh uniformly, and watch the discrete energy
error |||u - u_h|||_{s,h} decay like h^p.
"""

import math

from stiga.assembly import StabilizationParams, assemble_system
from stiga.bspline import TensorSpace
from stiga.cases import get_case
from stiga.geometry import identity_geometry
from stiga.linsolve import solve_direct
from stiga.majorant import error_norms, sh_weights
from stiga.spaces import DiscreteField, DiscreteSpace

case = get_case("MS1")
geometry = identity_geometry(TensorSpace.uniform(1, 1, 2))

for p in (2, 3):
    print(f"degree {p}")
    prev = None
    for level in range(2, 6):
        # one patch, 2^level elements in x and in t, maximal smoothness
        V = DiscreteSpace(geometry, TensorSpace.uniform(p, 2**level, 2))
        stab = StabilizationParams.for_space(V, theta=1.0)
        system = assemble_system(V, stab, case.f)
        u_h = DiscreteField(V, solve_direct(system))

        err = math.sqrt(error_norms(u_h, case.field).weighted(sh_weights(stab.delta)))
        rate = "" if prev is None else f"  order {math.log2(prev / err):.2f}"
        print(f"  h = {V.mesh.h:.4f}  dofs = {V.n_free:5d}  error = {err:.3e}{rate}")
        prev = err
