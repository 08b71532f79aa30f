"""Acceptance criteria, one test each, with runtime budgets.

Every test prints a single ``PASS``/``FAIL`` line (also collected into the
terminal summary by ``conftest.py``).
"""

import json
import time

import numpy as np
import pytest

from fracfueter.checks import exterior_points, interior_points
from fracfueter.cli import main
from fracfueter.domain import calibrate_orientation, make_box
from fracfueter.frac1d import (
    SingularQuadSpec,
    WeightFunction,
    frac_integral,
    power_rule_oracle,
    semigroup_residual,
)
from fracfueter.frac_fueter import (
    FracQuad,
    WeightVector,
    frac_bp_eval,
    frac_kernel,
    frac_stokes_residual,
    hadamard_ops,
    m_term,
    op_C,
    op_D,
    op_I,
    op_P,
    prop1_residual,
    second_order_bp_check,
)
from fracfueter.fueter import (
    FDScheme,
    IntegralQuad,
    VolumeQuad,
    borel_pompeiu_eval,
    constant_field,
    random_polynomial,
    stokes_residual,
    teodorescu_inversion_residual,
)
from fracfueter.quaternion import I, J, K, ONE, PSI_STD, qconj, qmul, qnorm, validate_structural_set
from fracfueter.reference import plain_kernel, plain_ops
from fracfueter.reports import strip_timing

pytestmark = [pytest.mark.acceptance, pytest.mark.slow]

BOX = make_box([1, 1, 1, 1], [2, 2, 2, 2])
ID = WeightVector.uniform("identity", BOX)
LN = WeightVector.uniform("log", BOX)
ALPHA = (0.5, 0.6, 0.7, 0.4)
BETA = (0.6, 0.5, 0.4, 0.7)
PSI_ODD = validate_structural_set([ONE, I, K, J])
ONE_FIELD = constant_field([1, 0, 0, 0])
WEIGHTS_1D = {
    "id": WeightFunction.identity(1.0, 2.0),
    "ln": WeightFunction.log(1.0, 2.0),
    "affine": WeightFunction.affine(1.0, 2.0),
}


class Criterion:
    """Collects ``(label, value, tolerance)`` items and times the block."""

    def __init__(self, log, number: int, title: str, budget_s: float):
        self.log, self.number, self.title, self.budget = log, number, title, budget_s
        self.items: list[tuple[str, float, float]] = []
        self.passed = False

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def check(self, label: str, value: float, tol: float) -> None:
        self.items.append((label, float(value), float(tol)))

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.perf_counter() - self.start
        ok_items = all(np.isfinite(v) and v < tol for _, v, tol in self.items)
        self.passed = exc_type is None and bool(self.items) and ok_items and elapsed < self.budget
        if exc_type is not None:
            detail = f"{exc_type.__name__}: {exc}"
        elif self.items:
            label, value, tol = max(self.items, key=lambda it: it[1] / it[2])
            detail = f"worst {label} = {value:.3e} (tol {tol:g})"
        else:
            detail = "no residuals recorded"
        line = (f"{'PASS' if self.passed else 'FAIL'} criterion {self.number:2d} {self.title}: {detail}; "
                f"{elapsed:.1f}s of {self.budget:g}s")
        self.log.append(line)
        print(line)
        return False


def rel_err(got, ref) -> float:
    got, ref = np.asarray(got), np.asarray(ref)
    return float(np.max(np.abs(got - ref)) / max(1.0, float(np.max(np.abs(ref)))))


def test_criterion_01_quaternion_laws(acceptance_log):
    with Criterion(acceptance_log, 1, "quaternion laws", 1.0) as c:
        a, b, d = np.random.default_rng(2024).normal(size=(3, 1000, 4))
        na, nb, nd = qnorm(a), qnorm(b), qnorm(d)
        c.check("associativity", np.max(qnorm(qmul(qmul(a, b), d) - qmul(a, qmul(b, d))) / (na * nb * nd)), 1e-12)
        c.check("conjugation", np.max(qnorm(qconj(qmul(a, b)) - qmul(qconj(b), qconj(a))) / (na * nb)), 1e-12)
        c.check("norm", np.max(np.abs(qnorm(qmul(a, b)) - na * nb) / (na * nb)), 1e-12)
    assert c.passed


def test_criterion_02_power_rule(acceptance_log):
    quad = SingularQuadSpec(4096)
    with Criterion(acceptance_log, 2, "fractional power rule", 10.0) as c:
        for name, w in WEIGHTS_1D.items():
            ga = float(w.g(np.array(w.a)))
            xs = np.linspace(w.a, w.b, 6)[1:]
            for p in range(4):
                for alpha in (0.25, 0.5, 0.75):
                    got = frac_integral(lambda t, p=p: (w.g(t) - ga) ** p, w, w.a, xs, alpha, quad)
                    ref = np.array([power_rule_oracle(p, alpha, w, w.a, x) for x in xs])
                    c.check(f"{name} p={p} alpha={alpha}", np.max(np.abs(got - ref) / np.abs(ref)), 1e-6)
    assert c.passed


def test_criterion_03_semigroup(acceptance_log):
    def cubic(t):
        return 1.0 + t * (1.0 + t * (-0.5 + t / 3.0))

    quad = SingularQuadSpec(2048)
    with Criterion(acceptance_log, 3, "semigroup D^a I^a = id", 30.0) as c:
        for name, w in WEIGHTS_1D.items():
            pts = w.a + (w.b - w.a) * np.linspace(0.1, 0.9, 10)
            for alpha in (0.25, 0.5, 0.75):
                c.check(f"{name} alpha={alpha}", semigroup_residual(cubic, w, w.a, alpha, pts, quad), 1e-3)
    assert c.passed


def test_criterion_04_stokes(acceptance_log):
    with Criterion(acceptance_log, 4, "orientation calibration and Stokes", 60.0) as c:
        for label, psi in (("std", PSI_STD), ("odd", PSI_ODD)):
            c.check(f"calibration {label}", calibrate_orientation(psi, BOX, n=8).residual, 1e-8)
            f = random_polynomial(2, 0).field()
            ttf = random_polynomial(2, 1).field()
            quad = IntegralQuad(n_face=12, n_volume=12, fd=FDScheme(1e-3, 4))
            c.check(f"quadratic Stokes {label}", stokes_residual(f, ttf, BOX, psi, quad), 1e-4)
    assert c.passed


def test_criterion_05_borel_pompeiu(acceptance_log):
    f = random_polynomial(2, 0).field()
    ttf = random_polynomial(2, 1).field()
    quad = IntegralQuad(12, 24, VolumeQuad(24, "exclusion", "midpoint"), FDScheme(1e-3, 4))
    with Criterion(acceptance_log, 5, "Borel-Pompeiu", 300.0) as c:
        for i, x in enumerate(interior_points(BOX, 5, 0)):
            c.check(f"interior {i}", borel_pompeiu_eval(f, ttf, BOX, PSI_STD, x, quad).relative, 0.02)
        scale = float(np.linalg.norm(f(BOX.center) + ttf(BOX.center)))
        for i, x in enumerate(exterior_points(BOX, 2, 0)):
            res = borel_pompeiu_eval(f, ttf, BOX, PSI_STD, x, quad)
            c.check(f"exterior {i}", np.linalg.norm(res.lhs) / scale, 0.02)
    assert c.passed


def test_criterion_06_teodorescu(acceptance_log):
    f = random_polynomial(2, 0).field()
    with Criterion(acceptance_log, 6, "Teodorescu inversion", 120.0) as c:
        for i, x in enumerate(interior_points(BOX, 5, 0)):
            c.check(f"point {i}", teodorescu_inversion_residual(f, BOX, x, PSI_STD, VolumeQuad(16)), 0.02)
    assert c.passed


def test_criterion_07_composition_identities(acceptance_log):
    f = random_polynomial(2, 0).field()
    qs = interior_points(BOX, 20, 0, margin=0.2)
    xs = interior_points(BOX, 20, 1, margin=0.2)
    tols = {1: 1e-3, 2: 1e-3, 3: 1e-2}
    # (node_count, FD order, FD step), coarse to fine
    ladder = ((16, 2, 1e-2), (64, 2, 1e-3), (256, 4, 1e-3))
    with Criterion(acceptance_log, 7, "I/C/D/P composition identities", 180.0) as c:
        for gname, g in (("id", ID), ("ln", LN)):
            for item in (1, 2, 3):
                worst = max(prop1_residual(f, q, x, ALPHA, g, PSI_STD, item, quad=SingularQuadSpec(256),
                                           fd=FDScheme(1e-3, 4)) for q, x in zip(qs, xs))
                c.check(f"{gname} item {item}", worst, tols[item])
                steps = [max(prop1_residual(f, q, x, ALPHA, g, PSI_STD, item, quad=SingularQuadSpec(n),
                                            fd=FDScheme(h, order)) for q, x in zip(qs[:3], xs[:3]))
                         for n, order, h in ladder]
                # ratio of successive residuals; below 1 means refinement helps
                c.check(f"{gname} item {item} refinement", max(steps[1] / steps[0], steps[2] / steps[1]), 1.0)
    assert c.passed


def test_criterion_08_identity_reduction(acceptance_log):
    qs = interior_points(BOX, 50, 10, margin=0.1)
    xs = interior_points(BOX, 50, 11, margin=0.1)
    ys = interior_points(BOX, 50, 12, margin=0.1)
    f = random_polynomial(2, 0).field()
    with Criterion(acceptance_log, 8, "identity weights reduce to plain RL", 30.0) as c:
        worst = {}
        for q, x, y in zip(qs, xs, ys):
            ref = plain_ops(f, q, x, ALPHA, BOX.a, PSI_STD)
            got = {
                "I": op_I(f, q, x, ALPHA, ID).standard(),
                "D": op_D(f, q, x, ALPHA, ID, "left").standard(),
                "D_r": op_D(f, q, x, ALPHA, ID, "right").standard(),
                "C": op_C(f, q, x, ALPHA, ID).standard(),
                "P": op_P(f, q, x, ALPHA, ID).standard(),
                "M": m_term(f, q, x, ALPHA, ID).standard(),
            }
            for key, value in got.items():
                worst[key] = max(worst.get(key, 0.0), rel_err(value, ref[key]))
            kern = frac_kernel(x, x, y, ALPHA, ID).standard()
            worst["kernel"] = max(worst.get("kernel", 0.0), rel_err(kern, plain_kernel(x, y, ALPHA, BOX.a)))
        for key, value in worst.items():
            c.check(key, value, 1e-10)
    assert c.passed


def test_criterion_09_hadamard(acceptance_log):
    qs = interior_points(BOX, 50, 20, margin=0.1)
    xs = interior_points(BOX, 50, 21, margin=0.1)
    f = random_polynomial(2, 0).field()
    generic = {
        "I": lambda q, x: op_I(f, q, x, ALPHA, LN),
        "D": lambda q, x: op_D(f, q, x, ALPHA, LN, "left"),
        "D_r": lambda q, x: op_D(f, q, x, ALPHA, LN, "right"),
        "C": lambda q, x: op_C(f, q, x, ALPHA, LN),
    }
    with Criterion(acceptance_log, 9, "Hadamard arrangement", 30.0) as c:
        worst = dict.fromkeys(generic, 0.0)
        for q, x in zip(qs, xs):
            for key, op in generic.items():
                had = hadamard_ops(f, q, x, ALPHA, key, BOX).standard()
                worst[key] = max(worst[key], rel_err(had, op(q, x).standard()))
        for key, value in worst.items():
            c.check(key, value, 1e-10)
    assert c.passed


def test_criterion_10_fractional_stokes(acceptance_log):
    families = {
        "constant": (constant_field([1, 0.5, -0.25, 0.75]), constant_field([0.3, -1, 0.2, 0.4])),
        "linear": (random_polynomial(1, 0).field(), random_polynomial(1, 1).field()),
    }
    pairs = {"id,id": (ID, ID), "ln,ln": (LN, LN), "id,ln": (ID, LN)}
    with Criterion(acceptance_log, 10, "fractional Stokes", 600.0) as c:
        for fam, (f, ttf) in families.items():
            for pname, (g, h) in pairs.items():
                res = [frac_stokes_residual(f, ttf, BOX.center, BOX, ALPHA, BETA, g, h, PSI_STD, FracQuad(n, n))
                       for n in (6, 8, 10, 12)]
                c.check(f"{fam} {pname} N=10", res[2], 0.05)
                c.check(f"{fam} {pname} N=12", res[3], 0.05)
                c.check(f"{fam} {pname} refinement", max(b / a for a, b in zip(res, res[1:])), 1.0)
    assert c.passed


def test_criterion_11_fractional_borel_pompeiu(acceptance_log):
    args = (ONE_FIELD, None, BOX.center, BOX, ALPHA, BETA)
    with Criterion(acceptance_log, 11, "fractional Borel-Pompeiu", 1200.0) as c:
        for i, x in enumerate(interior_points(BOX, 3, 0)):
            for n in (12, 16):
                res = frac_bp_eval(*args, ID, ID, PSI_STD, x, FracQuad(n, n))
                c.check(f"id interior {i} N={n}", res.relative, 0.05)
        for i, x in enumerate(exterior_points(BOX, 2, 0)):
            res = frac_bp_eval(*args, ID, ID, PSI_STD, x, FracQuad(12, 12))
            c.check(f"id exterior {i}", res.relative, 0.05)
        x_in = interior_points(BOX, 1, 0)[0]
        x_out = exterior_points(BOX, 1, 0)[0]
        c.check("ln interior", frac_bp_eval(*args, LN, LN, PSI_STD, x_in, FracQuad(12, 12)).relative, 0.05)
        c.check("ln exterior", frac_bp_eval(*args, LN, LN, PSI_STD, x_out, FracQuad(12, 12)).relative, 0.05)
    assert c.passed


def test_criterion_12_second_order(acceptance_log):
    quad = FracQuad(12, 12)
    poly = random_polynomial(2, 0).field()
    with Criterion(acceptance_log, 12, "second-order correction", 600.0) as c:
        for i, x in enumerate(interior_points(BOX, 3, 0)):
            c.check(f"ln interior {i}", second_order_bp_check(ONE_FIELD, BOX.center, BOX, ALPHA, LN, PSI_STD, x,
                                                             quad).relative, 0.05)
            c.check(f"id interior {i}", second_order_bp_check(poly, BOX.center, BOX, ALPHA, ID, PSI_STD, x,
                                                             quad).relative, 0.02)
    assert c.passed


def test_criterion_13_reproducibility(acceptance_log, tmp_path):
    config = tmp_path / "config.json"
    config.write_text("{}")
    with Criterion(acceptance_log, 13, "reproducible report payloads", 900.0) as c:
        docs = []
        for run in ("first", "second"):
            out = tmp_path / run
            main(["run", "--config", str(config), "--out", str(out)])
            docs.append(strip_timing(json.loads((out / "report.json").read_text())))
        same = json.dumps(docs[0], sort_keys=True) == json.dumps(docs[1], sort_keys=True)
        c.check("payload mismatch", 0.0 if same else 1.0, 0.5)
    assert c.passed
