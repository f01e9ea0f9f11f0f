"""Configuration, convergence studies and CSV output."""

from __future__ import annotations

import csv
import io
import math
import sys
import time
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .assembly import StabilizationParams, assemble_system
from .bspline import KnotVector, TensorSpace
from .cases import ManufacturedCase, get_case
from .flux import FLUX_MODES, reconstruct_flux
from .geometry import GeometryMap, box_geometry, map_point
from .linsolve import solve_direct
from .majorant import KINDS, MajorantParams, ProblemConstants, error_norms, majorant, sh_weights
from .spaces import DiscreteField, DiscreteSpace

CSV_HEADER = ["level", "h", "dofs", "error_sh", "majorant", "i_eff", "order", "solve_seconds", "estimate_seconds"]
ERROR_FLOOR = 1e-9
REQUIRED = ("case", "degree", "levels")


class ConfigError(ValueError):
    """Invalid study configuration."""


@dataclass
class StudyConfig:
    case: str
    degree: int
    levels: list
    theta: float = 1.0
    quadrature_points: int | None = None
    majorant: str = "I"
    flux: str = "gradient"
    flux_sweeps: int = 5
    solver: str = "direct"
    solver_tol: float = 1e-10
    solver_maxit: int = 5000
    gamma: float = 1.0
    zeta: float = 1.0
    epsilon: float = 2.0
    rho1: float = 3.0
    rho2: float = 3.0
    geometry: str = "box"
    output: str | None = None
    timings: bool = True
    source: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def q(self) -> int:
        return self.degree + 2 if self.quadrature_points is None else self.quadrature_points

    def majorant_params(self) -> MajorantParams:
        return MajorantParams(gamma=self.gamma, zeta=self.zeta, epsilon=self.epsilon, rho1=self.rho1, rho2=self.rho2)


VALID_KEYS = tuple(f.name for f in fields(StudyConfig) if f.name != "source")


def _parse_levels(text: str) -> list:
    out = []
    for part in text.replace(" ", "").split(","):
        if "-" in part:
            a, b = part.split("-", 1)
            out.extend(range(int(a), int(b) + 1))
        elif part:
            out.append(int(part))
    if not out:
        raise ValueError("empty level list")
    if sorted(set(out)) != out:
        raise ValueError("levels must be strictly increasing")
    if out[0] < 0:
        raise ValueError("levels must be nonnegative")
    return out


def _parse_bool(text: str) -> bool:
    t = text.lower()
    if t in ("on", "true", "yes", "1"):
        return True
    if t in ("off", "false", "no", "0"):
        return False
    raise ValueError("expected on/off")


_CONVERT = {
    "degree": int,
    "levels": _parse_levels,
    "theta": float,
    "quadrature_points": int,
    "flux_sweeps": int,
    "solver_tol": float,
    "solver_maxit": int,
    "gamma": float,
    "zeta": float,
    "epsilon": float,
    "rho1": float,
    "rho2": float,
    "timings": _parse_bool,
}


def parse_config_text(text: str, origin: str = "<config>") -> StudyConfig:
    seen: dict = {}
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{origin}:{lineno}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in VALID_KEYS:
            raise ConfigError(f"{origin}:{lineno}: unknown key '{key}'; valid keys: {', '.join(VALID_KEYS)}")
        if key in seen:
            raise ConfigError(f"{origin}: duplicate key '{key}' on lines {seen[key]} and {lineno}")
        seen[key] = lineno
        try:
            values[key] = _CONVERT.get(key, str)(val)
        except ValueError as exc:
            raise ConfigError(f"{origin}:{lineno}: bad value for '{key}': {exc}") from None
    missing = [k for k in REQUIRED if k not in values]
    if missing:
        have = ", ".join(f"{k} (line {n})" for k, n in seen.items()) or "none"
        raise ConfigError(f"{origin}: missing required key(s) {', '.join(missing)}; keys present: {have}")
    cfg = StudyConfig(**values, source=seen)
    _validate(cfg, origin)
    return cfg


def parse_config(path) -> StudyConfig:
    p = Path(path)
    return parse_config_text(p.read_text(encoding="utf-8"), str(p))


def _validate(cfg: StudyConfig, origin: str) -> None:
    def fail(key, msg):
        where = f":{cfg.source[key]}" if key in cfg.source else ""
        raise ConfigError(f"{origin}{where}: {key}: {msg}")

    try:
        get_case(cfg.case)
    except ValueError as exc:
        fail("case", str(exc))
    if cfg.degree < 2:
        fail("degree", "must be >= 2 (the scheme needs C1 splines)")
    if not cfg.theta > 0:
        fail("theta", "must be > 0")
    if cfg.quadrature_points is not None and cfg.quadrature_points < 1:
        fail("quadrature_points", "must be >= 1")
    if cfg.majorant not in KINDS:
        fail("majorant", f"must be one of {', '.join(KINDS)}")
    if cfg.flux not in FLUX_MODES:
        fail("flux", f"must be one of {', '.join(FLUX_MODES)}")
    if cfg.flux_sweeps < 1:
        fail("flux_sweeps", "must be >= 1")
    if cfg.solver not in ("direct", "iterative"):
        fail("solver", "must be direct or iterative")
    if not cfg.solver_tol > 0:
        fail("solver_tol", "must be > 0")
    if cfg.solver_maxit < 1:
        fail("solver_maxit", "must be >= 1")
    try:
        params = cfg.majorant_params()
    except ValueError as exc:
        raise ConfigError(f"{origin}: {exc}") from None
    if cfg.majorant.endswith("_w") and not (params.rho1 > 1 and params.rho2 > 1):
        fail("rho1" if params.rho1 <= 1 else "rho2", "must be > 1 for the advanced majorants")
    if cfg.majorant == "II_w" and 1 - 1 / cfg.epsilon - 1 / cfg.rho2 < 0:
        fail("rho2", "need 1 - 1/epsilon - 1/rho2 >= 0")
    if not (cfg.geometry == "box" or cfg.geometry.startswith("box ") or cfg.geometry.startswith("file:")):
        fail("geometry", "expected 'box', 'box L1 ... T' or 'file:<path>'")


# ----------------------------------------------------------------------------
# geometry


def read_control_net(path) -> GeometryMap:
    """Read a plain-text single-patch geometry.

    Format (``#`` starts a comment)::

        degree 2
        knots 0 0 0 0.5 1 1 1      # one line per direction, time last
        knots 0 0 0 1 1 1
        point x_1 ... x_d t [weight]   # one line per control point

    Control points are listed in lexicographic multi-index order with the
    last (time) index running fastest.
    """
    degree = None
    kvs, pts, wts = [], [], []
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.split("#", 1)[0].split()
        if not line:
            continue
        tag, rest = line[0], [float(s) for s in line[1:]]
        if tag == "degree":
            degree = int(rest[0])
        elif tag == "knots":
            if degree is None:
                raise ValueError("'degree' must precede 'knots'")
            kvs.append(KnotVector(degree, np.array(rest)))
        elif tag == "point":
            pts.append(rest)
        else:
            raise ValueError(f"unknown record '{tag}'")
    if not kvs:
        raise ValueError("no knot vectors")
    D = len(kvs)
    if any(len(r) not in (D, D + 1) for r in pts):
        raise ValueError(f"each point needs {D} coordinates and an optional weight")
    P = np.array([r[:D] for r in pts])
    W = np.array([r[D] if len(r) > D else 1.0 for r in pts])
    return GeometryMap(TensorSpace(tuple(kvs)), P, W)


def make_geometry(cfg: StudyConfig, case: ManufacturedCase) -> GeometryMap:
    spec = cfg.geometry
    if spec == "box":
        return box_geometry(case.domain())
    if spec.startswith("box "):
        return box_geometry([float(s) for s in spec[4:].replace(",", " ").split()])
    return read_control_net(spec[5:])


def check_compatible(case: ManufacturedCase, g: GeometryMap, n: int = 7) -> None:
    """The exact solution must vanish on the lateral and initial faces of the geometry."""
    if g.dim != case.d + 1:
        raise ConfigError(f"case {case.name} is posed in {case.d} space dimension(s), geometry has {g.dim - 1}")
    s = np.linspace(0.0, 1.0, n)
    grids = np.stack(np.meshgrid(*([s] * g.dim), indexing="ij"), axis=-1).reshape(-1, g.dim)
    on_face = (grids[:, -1] == 0.0) | np.any((grids[:, :-1] == 0.0) | (grids[:, :-1] == 1.0), axis=1)
    X = np.array([map_point(g, xi) for xi in grids[on_face]])
    worst = float(np.abs(case.u(X)).max())
    if worst > 1e-12:
        raise ConfigError(f"case {case.name} does not vanish on the boundary of this geometry (max |u| = {worst:.3g})")


# ----------------------------------------------------------------------------
# per-level pipeline


@dataclass
class LevelSolution:
    level: int
    space: DiscreteSpace
    stab: StabilizationParams
    v: DiscreteField
    seconds: float


def level_space(cfg: StudyConfig, g: GeometryMap, level: int) -> DiscreteSpace:
    ts = TensorSpace.uniform(cfg.degree, 2**level, g.dim)
    return DiscreteSpace(g, ts)


def solve_level(cfg: StudyConfig, g: GeometryMap, case: ManufacturedCase, level: int, threads: int = 1) -> LevelSolution:
    t0 = time.perf_counter()
    V = level_space(cfg, g, level)
    stab = StabilizationParams.for_space(V, cfg.theta)
    system = assemble_system(V, stab, case.f, q=cfg.q, threads=threads)
    coef = solve_direct(system, method=cfg.solver, tol=cfg.solver_tol, maxit=cfg.solver_maxit)
    return LevelSolution(level, V, stab, DiscreteField(V, coef), time.perf_counter() - t0)


def estimate_level(cfg: StudyConfig, sol: LevelSolution, case: ManufacturedCase):
    """Majorant report (with its bounded norm) and the s-h error for one level."""
    V, v = sol.space, sol.v
    consts = ProblemConstants.for_space(V, sol.stab.delta)
    y = reconstruct_flux(v, cfg.flux, f=case.f, consts=consts, sweeps=cfg.flux_sweeps)
    w = DiscreteField.zero(V) if cfg.majorant.endswith("_w") else None
    rep = majorant(cfg.majorant, v, y, case.f, consts, cfg.majorant_params(), w=w, u_exact=case.field)
    err = math.sqrt(error_norms(v, case.field).weighted(sh_weights(sol.stab.delta)))
    return rep, err


@dataclass
class StudyTable:
    rows: list = field(default_factory=list)
    notes: list = field(default_factory=list)


def run_study(cfg: StudyConfig, threads: int = 1) -> StudyTable:
    if len(cfg.levels) < 2:
        raise ConfigError("levels: a study needs at least two levels to estimate orders")
    case = get_case(cfg.case)
    g = make_geometry(cfg, case)
    check_compatible(case, g)
    table = StudyTable()
    prev = None
    for level in cfg.levels:
        try:
            sol = solve_level(cfg, g, case, level, threads)
            t0 = time.perf_counter()
            rep, err = estimate_level(cfg, sol, case)
            est_t = time.perf_counter() - t0
        except (ValueError, RuntimeError, ArithmeticError) as exc:
            table.notes.append(f"level {level}: {type(exc).__name__}: {exc}")
            table.rows.append({"level": level})
            prev = None
            continue
        h = sol.space.mesh.h
        resolved = err >= ERROR_FLOOR
        row = {
            "level": level,
            "h": h,
            "dofs": sol.space.n_free,
            "error_sh": err,
            "majorant": rep.value,
            "i_eff": rep.i_eff if resolved and rep.lhs else None,
            "order": None,
            "solve_seconds": sol.seconds if cfg.timings else None,
            "estimate_seconds": est_t if cfg.timings else None,
        }
        if prev is not None and resolved and prev[1] >= ERROR_FLOOR:
            row["order"] = math.log(prev[1] / err) / math.log(prev[0] / h)
        prev = (h, err)
        table.rows.append(row)
    return table


def _fmt(v) -> str:
    if v is None:
        return "NA"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.12g}"


def format_csv(table) -> str:
    rows = table.rows if isinstance(table, StudyTable) else list(table)
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(CSV_HEADER)
    for r in rows:
        wr.writerow([_fmt(r.get(k)) for k in CSV_HEADER])
    return buf.getvalue()


def emit_csv(table, path=None) -> str:
    """Write the study table as CSV to ``path`` (stdout when ``None``)."""
    text = format_csv(table)
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


def read_csv(path) -> list:
    with open(path, encoding="utf-8", newline="") as fh:
        return [{k: (None if v == "NA" else float(v)) for k, v in r.items()} for r in csv.DictReader(fh)]
