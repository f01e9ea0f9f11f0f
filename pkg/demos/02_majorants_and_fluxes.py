"""Guaranteed error bounds and how the choice of flux affects them.

For any conforming v and any flux y the majorants bound a weighted energy
error from above. With y = grad v the duality residual vanishes, but the
equation residual f - v_t + lap v converges one order slower than the
error. Minimising the first majorant over a spline flux space recovers
part of that loss.
"""

from stiga.assembly import StabilizationParams, assemble_system
from stiga.bspline import TensorSpace
from stiga.cases import get_case
from stiga.flux import reconstruct_flux
from stiga.geometry import identity_geometry
from stiga.linsolve import solve_direct
from stiga.majorant import ProblemConstants, majorant
from stiga.spaces import DiscreteField, DiscreteSpace

case = get_case("MS1")
geometry = identity_geometry(TensorSpace.uniform(1, 1, 2))

print(f"{'n':>4} {'flux':>10} {'kind':>4} {'majorant':>11} {'error^2':>11} {'I_eff':>7}")
for n in (4, 8, 16):
    V = DiscreteSpace(geometry, TensorSpace.uniform(2, n, 2))
    stab = StabilizationParams.for_space(V)
    v = DiscreteField(V, solve_direct(assemble_system(V, stab, case.f)))
    consts = ProblemConstants.for_space(V, stab.delta)  # C_F from the bounding box, mu = delta

    fluxes = {
        "gradient": reconstruct_flux(v),
        "minimized": reconstruct_flux(v, "minimized", f=case.f, consts=consts, sweeps=6),
    }
    for mode, y in fluxes.items():
        for kind in ("I", "II"):
            rep = majorant(kind, v, y, case.f, consts, u_exact=case.field)
            print(f"{n:4d} {mode:>10} {kind:>4} {rep.value:11.4e} {rep.lhs:11.4e} {rep.i_eff:7.2f}")

# Whatever the flux, R_eq - div R_d = e_t - lap e, so the first majorant
# can never drop below gamma * mu * |e_t - lap e|^2. With mu = delta ~ h
# this forces its efficiency index to grow like h^(-1/2).
