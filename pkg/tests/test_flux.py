import numpy as np
import pytest
from helpers import solved

from stiga.flux import default_flux_space, reconstruct_flux
from stiga.majorant import majorant_I


def test_gradient_flux_on_representable_case():
    case, V, stab, v, K = solved("MS2", 2, 4)
    assert majorant_I(v, reconstruct_flux(v), case.f, K).value < 1e-10


@pytest.mark.parametrize("p", [2, 3])
def test_minimization_is_monotone(p):
    case, V, stab, v, K = solved("MS1", p, 4)
    y = reconstruct_flux(v, "minimized", f=case.f, consts=K, sweeps=6)
    h = np.array(y.history)
    assert np.all(np.diff(h) <= 0)
    assert abs(majorant_I(v, y, case.f, K).value - h[-1]) <= 1e-12 * h[-1]


@pytest.mark.parametrize("n", [8, 16, 32])
def test_minimized_beats_gradient(n):
    case, V, stab, v, K = solved("MS1", 2, n)
    g = majorant_I(v, reconstruct_flux(v), case.f, K, u_exact=case.field)
    m = majorant_I(v, reconstruct_flux(v, "minimized", f=case.f, consts=K), case.f, K, u_exact=case.field)
    assert m.value <= g.value
    assert m.i_eff <= g.i_eff


def test_flux_space_options():
    case, V, stab, v, K = solved("MS1", 2, 4)
    Y = default_flux_space(V, 2)
    y = reconstruct_flux(v, "minimized", flux_space=Y, f=case.f, consts=K, sweeps=2)
    assert np.all(np.diff(y.history) <= 0)
    assert getattr(y, "space", Y) is Y
    with pytest.raises(ValueError):
        reconstruct_flux(v, "minimized", flux_space=V, f=case.f, consts=K)
    with pytest.raises(ValueError):
        reconstruct_flux(v, "bogus")
    with pytest.raises(ValueError):
        reconstruct_flux(v, "minimized")
