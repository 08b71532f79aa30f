"""Registry of identity checks run by the command line harness.

Each check takes a :class:`RunConfig` and returns a list of :class:`Case`
residuals with their tolerances. Checks are deterministic functions of the
configuration (all sampling goes through seeded generators).
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from fracfueter.config import RunConfig
from fracfueter.domain import Box4, calibrate_orientation
from fracfueter.errors import HypothesisNotMet
from fracfueter.frac1d import (
    WeightFunction,
    frac_integral,
    power_rule_oracle,
    semigroup_residual,
)
from fracfueter.frac_fueter import (
    CONVENTIONS,
    WeightVector,
    cauchy_type_check,
    dropped_volume_bound,
    frac_bp_eval,
    frac_stokes_residual,
    hadamard_ops,
    op_C,
    op_D,
    op_I,
    prop1_residual,
    second_order_bp_check,
)
from fracfueter.fueter import (
    FDScheme,
    IntegralQuad,
    VolumeQuad,
    borel_pompeiu_eval,
    constant_field,
    stokes_residual,
)
from fracfueter.quaternion import qconj, qmul, qnorm


@dataclass(frozen=True)
class Case:
    label: str
    residual: float
    tolerance: float

    def __post_init__(self):
        # plain floats keep the JSON and CSV output free of numpy reprs
        object.__setattr__(self, "residual", float(self.residual))
        object.__setattr__(self, "tolerance", float(self.tolerance))

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.residual) and self.residual <= self.tolerance)


@dataclass(frozen=True)
class CheckReport:
    name: str
    identity: str
    cases: tuple[Case, ...]
    conventions: dict
    error: str | None = None
    wall_time_s: float = 0.0
    inputs: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.error is None and len(self.cases) > 0 and all(c.passed for c in self.cases)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["cases"] = [dict(asdict(c), passed=c.passed) for c in self.cases]
        out["passed"] = self.passed
        return out


@dataclass(frozen=True)
class Check:
    name: str
    identity: str
    fn: Callable[[RunConfig], list[Case]]


REGISTRY: dict[str, Check] = {}


def register(name: str, identity: str):
    def deco(fn):
        REGISTRY[name] = Check(name, identity, fn)
        return fn

    return deco


# {{{ sampling


def interior_points(box: Box4, count: int, seed: int, margin: float = 0.15) -> np.ndarray:
    rng = np.random.default_rng(seed)
    u = rng.uniform(margin, 1.0 - margin, size=(count, 4))
    return box.lo + u * box.lengths


def exterior_points(box: Box4, count: int, seed: int) -> np.ndarray:
    """Points with every ``x_k > a_k`` and two coordinates beyond ``b_k``."""
    rng = np.random.default_rng(seed + 7919)
    pts = interior_points(box, count, seed + 7919)
    for i in range(count):
        axes = rng.choice(4, size=2, replace=False)
        pts[i, axes] = box.hi[axes] + box.lengths[axes] * rng.uniform(0.2, 0.5, size=2)
    return pts


def _relative(v: np.ndarray, ref: np.ndarray) -> float:
    return float(np.max(np.abs(v - ref)) / max(1.0, float(np.max(np.abs(ref)))))


# }}}


# {{{ checks


@register("quaternion-laws", "quaternion algebra laws")
def check_quaternion_laws(cfg: RunConfig) -> list[Case]:
    rng = np.random.default_rng(cfg.samples["seed"])
    a, b, c = rng.normal(size=(3, 1000, 4))
    na, nb, nc = qnorm(a), qnorm(b), qnorm(c)
    assoc = qnorm(qmul(qmul(a, b), c) - qmul(a, qmul(b, c))) / (na * nb * nc)
    anti = qnorm(qconj(qmul(a, b)) - qmul(qconj(b), qconj(a))) / (na * nb)
    norm = np.abs(qnorm(qmul(a, b)) - na * nb) / (na * nb)
    tol = cfg.tolerance("quaternion-laws", "relative", 1e-12)
    return [
        Case("associativity", float(np.max(assoc)), tol),
        Case("conjugation anti-homomorphism", float(np.max(anti)), tol),
        Case("norm multiplicativity", float(np.max(norm)), tol),
    ]


def _distinct_weights(g: WeightVector) -> list[WeightFunction]:
    seen, out = set(), []
    for w in g.g:
        key = (w.kind, w.params, w.a, w.b)
        if key not in seen:
            seen.add(key)
            out.append(w)
    return out


@register("frac1d-selftest", "fractional power rule and semigroup property")
def check_frac1d(cfg: RunConfig) -> list[Case]:
    quad = cfg.one_d
    tol_power = cfg.tolerance("frac1d-selftest", "power_rule", 1e-6)
    tol_semi = cfg.tolerance("frac1d-selftest", "semigroup", 1e-3)
    coeffs = np.random.default_rng(cfg.samples["seed"]).uniform(-1.0, 1.0, 4)
    cubic = lambda t: np.polynomial.polynomial.polyval(t, coeffs)  # noqa: E731
    cases = []
    for w in _distinct_weights(cfg.g):
        ga = float(w.g(np.array(w.a)))
        xs = w.a + (w.b - w.a) * np.linspace(0.1, 1.0, 6)
        worst = 0.0
        for p in range(4):
            f = lambda t, p=p: (w.g(t) - ga) ** p  # noqa: E731
            for al in (0.25, 0.5, 0.75):
                got = frac_integral(f, w, w.a, xs, al, quad)
                ref = np.array([power_rule_oracle(p, al, w, w.a, x) for x in xs])
                worst = max(worst, float(np.max(np.abs(got - ref) / np.abs(ref))))
        cases.append(Case(f"power rule [{w.kind} on [{w.a:g}, {w.b:g}]]", worst, tol_power))
        pts = w.a + (w.b - w.a) * np.linspace(0.1, 0.9, 10)
        semi = max(semigroup_residual(cubic, w, w.a, al, pts, quad) for al in (0.25, 0.5, 0.75))
        cases.append(Case(f"semigroup [{w.kind} on [{w.a:g}, {w.b:g}]]", semi, tol_semi))
    return cases


@register("stokes", "Stokes formula for the psi-Fueter operator")
def check_stokes(cfg: RunConfig) -> list[Case]:
    box, psi, r = cfg.box, cfg.psi, cfg.resolution
    table = calibrate_orientation(psi, box, n=8)
    f = cfg.polynomial(2).field()
    ttf = cfg.polynomial(2, 1).field()
    quad = IntegralQuad(n_face=r["N_face"], n_volume=r["N_volume"], fd=FDScheme(r["fd_h"], 4))
    return [
        Case("orientation calibration (x_m moments)", table.residual,
             cfg.tolerance("stokes", "calibration", 1e-8)),
        Case("quadratic f, ttf", stokes_residual(f, ttf, box, psi, quad),
             cfg.tolerance("stokes", "residual", 1e-4)),
    ]


@register("borel-pompeiu", "Borel-Pompeiu formula")
def check_borel_pompeiu(cfg: RunConfig) -> list[Case]:
    box, psi, r, s = cfg.box, cfg.psi, cfg.resolution, cfg.samples
    f, ttf = cfg.fields()
    ttf = ttf if ttf is not None else constant_field([0.0, 0.0, 0.0, 0.0])
    vq = VolumeQuad(r["N_volume"], "exclusion", "midpoint", r["epsilon"])
    quad = IntegralQuad(n_face=r["N_face"], n_volume=r["N_volume"], singular=vq, fd=FDScheme(r["fd_h"], 4))
    tol = cfg.tolerance("borel-pompeiu", "relative", 0.02)
    cases = []
    for i, x in enumerate(interior_points(box, s["points"], s["seed"])):
        res = borel_pompeiu_eval(f, ttf, box, psi, x, quad)
        cases.append(Case(f"interior point {i}", res.relative, tol))
    scale = float(np.linalg.norm(f(box.center) + ttf(box.center)))
    for i, x in enumerate(exterior_points(box, s["exterior_points"], s["seed"])):
        res = borel_pompeiu_eval(f, ttf, box, psi, x, quad)
        cases.append(Case(f"exterior point {i}", float(np.linalg.norm(res.lhs)) / scale, tol))
    return cases


@register("prop1", "composition identities for I, C, D and P")
def check_prop1(cfg: RunConfig) -> list[Case]:
    box, psi, r, s = cfg.box, cfg.psi, cfg.resolution, cfg.samples
    f = cfg.polynomial(2).field()
    fd = FDScheme(r["fd_h"], 4)
    tols = {1: cfg.tolerance("prop1", "item1", 1e-3), 2: cfg.tolerance("prop1", "item2", 1e-3),
            3: cfg.tolerance("prop1", "item3", 1e-2)}
    qs = interior_points(box, s["pairs"], s["seed"], margin=0.2)
    xs = interior_points(box, s["pairs"], s["seed"] + 1, margin=0.2)
    cases = []
    for i, (q, x) in enumerate(zip(qs, xs)):
        for item in (1, 2, 3):
            res = prop1_residual(f, q, x, cfg.alpha, cfg.g, psi, item, quad=cfg.one_d, fd=fd)
            cases.append(Case(f"pair {i} item {item}", res, tols[item]))
    return cases


@register("frac-stokes", "fractional Stokes type formula")
def check_frac_stokes(cfg: RunConfig) -> list[Case]:
    f, ttf = cfg.fields(with_ttf=True)
    res = frac_stokes_residual(f, ttf, cfg.base_point, cfg.box, cfg.alpha, cfg.beta, cfg.g, cfg.h, cfg.psi,
                               cfg.frac_quad)
    return [Case("relative residual", res, cfg.tolerance("frac-stokes", "relative", 0.05))]


@register("frac-bp", "fractional Borel-Pompeiu type formula")
def check_frac_bp(cfg: RunConfig) -> list[Case]:
    box, s = cfg.box, cfg.samples
    f, ttf = cfg.fields()
    tol = cfg.tolerance("frac-bp", "relative", 0.05)
    args = (f, ttf, cfg.base_point, box, cfg.alpha, cfg.beta, cfg.g, cfg.h, cfg.psi)
    cases = []
    for i, x in enumerate(interior_points(box, s["points"], s["seed"])):
        cases.append(Case(f"interior point {i}", frac_bp_eval(*args, x, cfg.frac_quad).relative, tol))
    for i, x in enumerate(exterior_points(box, s["exterior_points"], s["seed"])):
        cases.append(Case(f"exterior point {i}", frac_bp_eval(*args, x, cfg.frac_quad).relative, tol))
    return cases


@register("cauchy-type", "fractional Cauchy type formula")
def check_cauchy_type(cfg: RunConfig) -> list[Case]:
    box, quad = cfg.box, cfg.frac_quad
    f, ttf = cfg.fields()
    x = interior_points(box, 1, cfg.samples["seed"])[0]
    common = (cfg.base_point, box, cfg.alpha, cfg.beta, cfg.g, cfg.h, cfg.psi, x)
    zero = cauchy_type_check(None, None, *common, quad)
    try:
        cauchy_type_check(f, ttf, *common, quad)
        raised = 0.0
    except HypothesisNotMet:
        raised = 1.0
    c = cauchy_type_check(f, ttf, *common, quad, tol=np.inf)
    full = frac_bp_eval(f, ttf, *common, quad).residual
    bound = dropped_volume_bound(f, ttf, *common, quad)
    gap = abs(c - full) / bound if bound > 0 else abs(c - full)
    return [
        Case("zero fields", zero, 1e-12),
        Case("premise violated -> HypothesisNotMet", 1.0 - raised, 0.0),
        Case("gap to full formula / dropped-term bound", gap, 1.0),
    ]


@register("hadamard", "Hadamard arrangement of the ln-weighted operators")
def check_hadamard(cfg: RunConfig) -> list[Case]:
    box, psi, s = cfg.box, cfg.psi, cfg.samples
    g = WeightVector.uniform("log", box)
    quad = cfg.one_d
    f = cfg.polynomial(2).field()
    qs = interior_points(box, s["evaluations"], s["seed"], margin=0.1)
    xs = interior_points(box, s["evaluations"], s["seed"] + 1, margin=0.1)
    generic = {
        "I": lambda q, x: op_I(f, q, x, cfg.alpha, g, quad),
        "D": lambda q, x: op_D(f, q, x, cfg.alpha, g, "left", psi, quad),
        "D_r": lambda q, x: op_D(f, q, x, cfg.alpha, g, "right", psi, quad),
        "C": lambda q, x: op_C(f, q, x, cfg.alpha, g, "left", psi, quad),
    }
    worst = {k: 0.0 for k in generic}
    for i, (q, x) in enumerate(zip(qs, xs)):
        which = tuple(generic)[i % 4]
        had = hadamard_ops(f, q, x, cfg.alpha, which, box, psi, quad).standard()
        worst[which] = max(worst[which], _relative(had, generic[which](q, x).standard()))
    tol = cfg.tolerance("hadamard", "relative", 1e-10)
    return [Case(f"{k} vs generic ln", v, tol) for k, v in worst.items()]


@register("second-order", "Borel-Pompeiu formula with the g'' correction")
def check_second_order(cfg: RunConfig) -> list[Case]:
    box, s = cfg.box, cfg.samples
    f, _ = cfg.fields()
    tol = cfg.tolerance("second-order", "relative", 0.05)
    cases = []
    for i, x in enumerate(interior_points(box, s["points"], s["seed"])):
        res = second_order_bp_check(f, cfg.base_point, box, cfg.alpha, cfg.g, cfg.psi, x, cfg.frac_quad)
        cases.append(Case(f"interior point {i}", res.relative, tol))
    for i, x in enumerate(exterior_points(box, s["exterior_points"], s["seed"])):
        res = second_order_bp_check(f, cfg.base_point, box, cfg.alpha, cfg.g, cfg.psi, x, cfg.frac_quad)
        cases.append(Case(f"exterior point {i}", res.relative, tol))
    return cases


# }}}


def _inputs(cfg: RunConfig) -> dict:
    keep = ("box", "structural_set", "weights", "orders", "base_point", "test_function", "resolution", "samples")
    return {k: cfg.raw[k] for k in keep}


def run_check(name: str, raw: dict) -> CheckReport:
    """Run one registered check; errors are recorded in the report, not raised."""
    check = REGISTRY[name]
    cfg = RunConfig.from_dict(raw)
    start = time.perf_counter()
    try:
        cases, error = tuple(check.fn(cfg)), None
    except Exception as exc:  # noqa: BLE001 - any failure is reported per check
        cases = ()
        error = f"{type(exc).__name__}: {exc}"
    return CheckReport(
        name=name,
        identity=check.identity,
        cases=cases,
        conventions=dict(CONVENTIONS),
        error=error,
        wall_time_s=time.perf_counter() - start,
        inputs=_inputs(cfg),
    )
