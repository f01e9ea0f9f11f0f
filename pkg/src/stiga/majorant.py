"""Guaranteed functional error majorants for the space-time heat problem.

All integrals are taken on the quadrature mesh of a host space (by default
the space of ``v``); every field involved must have its breakpoints nested
in that mesh. Majorant values are computed by the pure formula functions
from a :class:`ResidualNorms` breakdown, so the report can always be
re-evaluated from its own terms.

Parameter sentinels: ``math.inf`` for a Young parameter means the term
multiplied by ``1 + alpha`` is zero and is dropped; ``0`` means the term
multiplied by ``1 + 1/alpha`` is zero and is dropped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bspline import check_smoothness

KINDS = ("I", "II", "I_w", "II_w")


# ----------------------------------------------------------------------------
# constants and parameters


def friedrichs_constant(geometry) -> float:
    """Upper bound ``1 / (pi sqrt(sum 1/L_i^2))`` from the spatial bounding box.

    The box contains the spatial domain by the convex hull property of the
    control net, and the Dirichlet eigenvalue decreases under domain
    inclusion, so the value bounds the true constant from above.
    """
    lo, hi = geometry.spatial_bounding_box()
    L = np.asarray(hi, dtype=float) - np.asarray(lo, dtype=float)
    if not np.all(np.isfinite(L)) or np.any(L <= 0.0):
        raise ValueError(f"degenerate spatial bounding box with extents {L.tolist()}")
    return float(1.0 / (math.pi * math.sqrt(np.sum(1.0 / L**2))))


@dataclass(frozen=True)
class ProblemConstants:
    """Friedrichs constant and the weights ``lam`` (of ``e``) and ``mu`` (of ``d_t e``)."""

    C_F: float
    mu: float
    lam: float = 1.0

    def __post_init__(self) -> None:
        if not self.C_F > 0:
            raise ValueError("C_F must be positive")
        if not (self.lam > 0 and self.mu > 0):
            raise ValueError("lam and mu must be positive")

    @classmethod
    def for_space(cls, space, delta: float, lam: float = 1.0) -> ProblemConstants:
        return cls(C_F=friedrichs_constant(space.geometry), mu=delta, lam=lam)


@dataclass(frozen=True)
class MajorantParams:
    """Free parameters; ``None`` for a Young parameter selects its optimum."""

    gamma: float = 1.0
    alpha1: float | None = None
    alpha2: float | None = None
    zeta: float = 1.0
    beta1: float | None = None
    beta2: float | None = None
    epsilon: float = 2.0
    rho1: float = 3.0
    rho2: float = 3.0

    def __post_init__(self) -> None:
        if not self.gamma >= 0.5:
            raise ValueError(f"gamma must be >= 1/2, got {self.gamma}")
        if not self.zeta >= 0.5:
            raise ValueError(f"zeta must be >= 1/2, got {self.zeta}")
        if not self.epsilon >= 1.0:
            raise ValueError(f"epsilon must be >= 1, got {self.epsilon}")
        for name in ("rho1", "rho2"):
            if not getattr(self, name) >= 1.0:
                raise ValueError(f"{name} must be >= 1")
        for name in ("alpha1", "alpha2", "beta1", "beta2"):
            val = getattr(self, name)
            if val is not None and not val >= 0.0:
                raise ValueError(f"{name} must be positive (or 0/inf sentinels)")


# ----------------------------------------------------------------------------
# pure formulas


@dataclass(frozen=True)
class ResidualNorms:
    """Squared norms entering the majorants; ``J`` is sign-indefinite."""

    rd: float
    req: float
    div_rd: float
    dt_rd: float = 0.0
    rd_top: float = 0.0
    w_top: float = 0.0
    grad_w_top: float = 0.0
    J: float = 0.0

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _young(A: float, B: float, a: float) -> float:
    """``(1 + a) A + (1 + 1/a) B`` including the sentinel limits."""
    if math.isinf(a):
        return B if A == 0.0 else math.inf
    if a == 0.0:
        return A if B == 0.0 else math.inf
    return (1.0 + a) * A + (1.0 + 1.0 / a) * B


def _ratio(num: float, den: float) -> float:
    if den > 0.0:
        return num / den
    return math.inf


def optimal_alphas(rd: float, req: float, div_rd: float, C_F: float) -> tuple[float, float]:
    """Minimisers of the first majorant for given (unsquared) residual norms."""
    return _ratio(C_F * req, rd), _ratio(req, div_rd)


def optimal_betas(rd: float, req: float, dt_rd: float, C_F: float, lam: float, mu: float) -> tuple[float, float]:
    """Minimisers of the second majorant for given (unsquared) residual norms.

    ``beta2`` does not depend on ``beta1``; given ``beta2`` the optimum in
    ``beta1`` is explicit, so no iteration is needed.
    """
    b2 = _ratio(C_F * req, rd)
    inner = _young(rd**2, C_F**2 * req**2, b2)
    b1 = _ratio(mu / lam * dt_rd, math.sqrt(inner))
    return b1, b2


def formula_I(n: ResidualNorms, C_F: float, lam: float, mu: float, gamma: float, a1: float, a2: float) -> float:
    return gamma * (lam * _young(n.rd, C_F**2 * n.req, a1) + mu * _young(n.div_rd, n.req, a2))


def formula_II(n: ResidualNorms, C_F: float, lam: float, mu: float, zeta: float, eps: float, b1: float, b2: float) -> float:
    inner = _young(n.rd, C_F**2 * n.req, b2)
    return eps * mu * n.rd_top + zeta * (lam * _young(inner, (mu / lam) ** 2 * n.dt_rd, b1) + mu * n.req)


def rho_terms(n: ResidualNorms, lam: float, mu: float, rho1: float, rho2: float) -> float:
    return max(1.0, lam) * rho1 * n.w_top + max(1.0, mu) * rho2 * n.grad_w_top


def lhs_weights(kind: str, lam: float, mu: float, params: MajorantParams) -> tuple[float, float, float, float]:
    """Weights ``(nu1..nu4)`` of the error norm bounded by majorant ``kind``."""
    g, z, eps = params.gamma, params.zeta, params.epsilon
    if kind == "I":
        return ((2 - 1 / g) * lam, (2 - 1 / g) * mu, mu, lam)
    if kind == "II":
        return ((2 - 1 / z) * lam, (2 - 1 / z) * mu, mu * (1 - 1 / eps), lam)
    if kind == "I_w":
        return ((2 - 1 / g) * lam, (2 - 1 / g) * mu, mu * (1 - 1 / params.rho2), lam * (1 - 1 / params.rho1))
    if kind == "II_w":
        return ((2 - 1 / z) * lam, (2 - 1 / z) * mu, mu * (1 - 1 / eps - 1 / params.rho2), lam * (1 - 1 / params.rho1))
    raise ValueError(f"unknown majorant kind {kind!r}; expected one of {KINDS}")


def _rho_const(lam_or_mu: float, rho: float) -> float:
    return rho * (2 * lam_or_mu + rho) / (lam_or_mu * (rho - 1))


def equivalence_constant(kind: str, lam: float, mu: float, params: MajorantParams) -> float:
    """Upper equivalence constant of the advanced majorants."""
    r1, r2 = params.rho1, params.rho2
    if kind == "I_w":
        g = params.gamma
        return max(2 * g / (2 * g - 1), _rho_const(lam, r1), _rho_const(mu, r2))
    if kind == "II_w":
        z, eps = params.zeta, params.epsilon
        return max(2 * z / (2 * z - 1), _rho_const(lam, r1), (2 * mu + r2) / (mu * (1 - 1 / eps - 1 / r2)))
    raise ValueError("equivalence constants exist for the advanced majorants only")


# ----------------------------------------------------------------------------
# integration of residuals


def _host_space(space, *fields):
    if space is not None:
        return space
    for f in fields:
        if hasattr(f, "space"):
            return f.space
    raise ValueError("no discrete field given; pass the host space explicitly")


def _sq(a: np.ndarray) -> np.ndarray:
    return a * a if a.ndim == 2 else np.sum(a * a, axis=-1)


def residual_norms(v, y, f, consts: ProblemConstants, w=None, *, need_dt: bool = False, space=None, q=None) -> ResidualNorms:
    """Squared residual norms for ``v`` and flux ``y`` (modified by ``w`` if given).

    With ``w`` the residuals are ``f + div y - d_t(v + w)`` and
    ``y - grad(v - w)``, and the w-dependent terms are filled in as well.
    """
    host = _host_space(space, v, y, w)
    q = host.degree + 3 if q is None else q
    vkeys = ["dt", "grad", "lap"] + (["dtgrad"] if need_dt else [])
    ykeys = ["val", "div"] + (["dt"] if need_dt else [])
    lam, mu = consts.lam, consts.mu
    acc = dict(rd=0.0, req=0.0, div_rd=0.0, dt_rd=0.0, J=0.0)
    for batch in host.batches(q, "volume"):
        sv = v.sample(batch, vkeys)
        sy = y.sample(batch, ykeys)
        fv = np.asarray(f(batch.x), dtype=float)
        m = batch.measure
        dt_v, grad_v, lap_v = sv["dt"], sv["grad"], sv["lap"]
        dtgrad_v = sv.get("dtgrad")
        if w is not None:
            sw = w.sample(batch, ["val", "dt", "grad", "lap", "dtgrad"])
            z = lam * sw["val"] - mu * sw["dt"]
            grad_z = lam * sw["grad"] - mu * sw["dtgrad"]
            acc["J"] += float(np.sum(m * (z * dt_v + np.sum(grad_z * grad_v, axis=-1) - z * fv)))
            dt_eq = dt_v + sw["dt"]
            grad_v = grad_v - sw["grad"]
            lap_v = lap_v - sw["lap"]
            if need_dt:
                dtgrad_v = dtgrad_v - sw["dtgrad"]
        else:
            dt_eq = dt_v
        acc["req"] += float(np.sum(m * (fv + sy["div"] - dt_eq) ** 2))
        acc["rd"] += float(np.sum(m * _sq(sy["val"] - grad_v)))
        acc["div_rd"] += float(np.sum(m * (sy["div"] - lap_v) ** 2))
        if need_dt:
            acc["dt_rd"] += float(np.sum(m * _sq(sy["dt"] - dtgrad_v)))
    top = dict(rd_top=0.0, w_top=0.0, grad_w_top=0.0)
    if need_dt or w is not None:
        for batch in host.batches(q, "top"):
            m = batch.measure
            grad_v = v.sample(batch, ["grad"])["grad"]
            if w is not None:
                sw = w.sample(batch, ["val", "grad"])
                top["w_top"] += float(np.sum(m * sw["val"] ** 2))
                top["grad_w_top"] += float(np.sum(m * _sq(sw["grad"])))
                grad_v = grad_v - sw["grad"]
            if need_dt:
                yv = y.sample(batch, ["val"])["val"]
                top["rd_top"] += float(np.sum(m * _sq(yv - grad_v)))
    return ResidualNorms(**acc, **top)


# ----------------------------------------------------------------------------
# reports


@dataclass
class MajorantReport:
    """Majorant value with its breakdown, the parameters used and the bounded norm."""

    kind: str
    value: float
    terms: ResidualNorms
    params: dict
    lhs_weights: tuple
    equivalence_constant: float | None = None
    lhs: float | None = None
    extra: dict = field(default_factory=dict)

    @property
    def i_eff(self) -> float | None:
        if self.lhs is None or self.lhs <= 0.0:
            return None
        return math.sqrt(self.value / self.lhs)


def evaluate(kind: str, terms: ResidualNorms, consts: ProblemConstants, params: MajorantParams) -> tuple[float, dict]:
    """Majorant value from its breakdown; ``None`` Young parameters are optimised."""
    C_F, lam, mu = consts.C_F, consts.lam, consts.mu
    sq = math.sqrt
    used: dict = {}
    if kind in ("I", "I_w"):
        a1s, a2s = optimal_alphas(sq(terms.rd), sq(terms.req), sq(terms.div_rd), C_F)
        a1 = a1s if params.alpha1 is None else params.alpha1
        a2 = a2s if params.alpha2 is None else params.alpha2
        used.update(gamma=params.gamma, alpha1=a1, alpha2=a2)
        val = formula_I(terms, C_F, lam, mu, params.gamma, a1, a2)
    elif kind in ("II", "II_w"):
        _, b2s = optimal_betas(sq(terms.rd), sq(terms.req), sq(terms.dt_rd), C_F, lam, mu)
        b2 = b2s if params.beta2 is None else params.beta2
        if params.beta1 is None:
            # optimum in beta1 for the beta2 actually used
            b1 = _ratio(mu / lam * sq(terms.dt_rd), sq(_young(terms.rd, C_F**2 * terms.req, b2)))
        else:
            b1 = params.beta1
        used.update(zeta=params.zeta, epsilon=params.epsilon, beta1=b1, beta2=b2)
        val = formula_II(terms, C_F, lam, mu, params.zeta, params.epsilon, b1, b2)
    else:
        raise ValueError(f"unknown majorant kind {kind!r}; expected one of {KINDS}")
    if kind.endswith("_w"):
        used.update(rho1=params.rho1, rho2=params.rho2)
        val += rho_terms(terms, lam, mu, params.rho1, params.rho2) + 2.0 * terms.J
    return val, used


def _check_flux(y, need_dt: bool) -> None:
    if hasattr(y, "has_div") and not y.has_div:
        raise ValueError("flux has no square-integrable divergence")
    if need_dt and hasattr(y, "has_dt") and not y.has_dt:
        raise ValueError("flux has no square-integrable time derivative")


def _check_v(v, need_dt: bool) -> None:
    sp = getattr(v, "space", None)
    if sp is None:
        return
    ts = sp.tensor_space
    check_smoothness(ts, 1, range(ts.dim - 1))
    if need_dt:
        check_smoothness(ts, 1)


def majorant(kind: str, v, y, f, consts: ProblemConstants, params: MajorantParams | None = None, w=None, *, space=None, q=None, u_exact=None) -> MajorantReport:
    """Evaluate majorant ``kind`` in ``("I", "II", "I_w", "II_w")``.

    If ``u_exact`` is given the bounded error norm is computed too, which
    fills in ``lhs`` and the efficiency index.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown majorant kind {kind!r}; expected one of {KINDS}")
    params = MajorantParams() if params is None else params
    advanced = kind.endswith("_w")
    need_dt = kind.startswith("II")
    if advanced:
        if not (params.rho1 > 1.0 and params.rho2 > 1.0):
            raise ValueError("rho1 and rho2 must exceed 1 for the advanced majorants")
        if kind == "II_w" and 1 - 1 / params.epsilon - 1 / params.rho2 < 0:
            raise ValueError("need 1 - 1/epsilon - 1/rho2 >= 0")
        if w is None:
            raise ValueError("advanced majorants need a free function w")
    elif w is not None:
        raise ValueError("w is only used by the advanced majorants")
    _check_flux(y, need_dt)
    _check_v(v, need_dt)
    terms = residual_norms(v, y, f, consts, w, need_dt=need_dt, space=space, q=q)
    value, used = evaluate(kind, terms, consts, params)
    weights = lhs_weights(kind, consts.lam, consts.mu, params)
    rep = MajorantReport(
        kind=kind,
        value=value,
        terms=terms,
        params=used,
        lhs_weights=weights,
        equivalence_constant=equivalence_constant(kind, consts.lam, consts.mu, params) if advanced else None,
    )
    if u_exact is not None:
        rep.lhs = error_norms(v, u_exact, space=space, q=q).weighted(weights)
    return rep


def majorant_I(v, y, f, consts, params=None, **kw) -> MajorantReport:
    return majorant("I", v, y, f, consts, params, **kw)


def majorant_II(v, y, f, consts, params=None, **kw) -> MajorantReport:
    return majorant("II", v, y, f, consts, params, **kw)


def advanced_majorant_I(v, y, w, f, consts, params=None, **kw) -> MajorantReport:
    return majorant("I_w", v, y, f, consts, params, w=w, **kw)


def advanced_majorant_II(v, y, w, f, consts, params=None, **kw) -> MajorantReport:
    return majorant("II_w", v, y, f, consts, params, w=w, **kw)


# ----------------------------------------------------------------------------
# error norms


@dataclass(frozen=True)
class ErrorNorms:
    """Squared components of ``e = u - v``: grad and d_t over Q, grad and value on Sigma_T."""

    grad: float
    dt: float
    grad_top: float
    val_top: float

    def weighted(self, nu) -> float:
        n1, n2, n3, n4 = nu
        return n1 * self.grad + n2 * self.dt + n3 * self.grad_top + n4 * self.val_top


def sh_weights(delta: float) -> tuple[float, float, float, float]:
    return (1.0, delta, delta, 1.0)


def error_norms(v, u_exact, *, space=None, q=None) -> ErrorNorms:
    """Quadrature of the four error components; combine with :meth:`ErrorNorms.weighted`."""
    host = _host_space(space, v)
    q = host.degree + 3 if q is None else q
    e = u_exact - v
    g = dt = gt = vt = 0.0
    for batch in host.batches(q, "volume"):
        s = e.sample(batch, ["grad", "dt"])
        m = batch.measure
        g += float(np.sum(m * _sq(s["grad"])))
        dt += float(np.sum(m * s["dt"] ** 2))
    for batch in host.batches(q, "top"):
        s = e.sample(batch, ["val", "grad"])
        m = batch.measure
        gt += float(np.sum(m * _sq(s["grad"])))
        vt += float(np.sum(m * s["val"] ** 2))
    return ErrorNorms(g, dt, gt, vt)
