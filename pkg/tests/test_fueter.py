import math

import numpy as np
import pytest

from fracfueter.domain import make_box
from fracfueter.errors import BoundaryProximity, SingularPoint
from fracfueter.fueter import (
    FDScheme,
    FieldFn,
    IntegralQuad,
    VolumeQuad,
    borel_pompeiu_eval,
    cauchy_kernel,
    cauchy_kernel_array,
    constant_field,
    coordinate_field,
    fueter,
    fueter_array,
    laplacian_array,
    random_polynomial,
    stokes_residual,
    teodorescu_inversion_residual,
)
from fracfueter.quaternion import I, J, K, ONE, PSI_STD, Quaternion, qmul, validate_structural_set

PSI_ODD = validate_structural_set([ONE, I, K, J])
BOX = make_box([1, 1, 1, 1], [2, 2, 2, 2])
X0 = np.array([1.45, 1.6, 1.35, 1.55])


def test_fueter_examples():
    # D x_m = psi_m, and D of a constant vanishes
    for psi in (PSI_STD, PSI_ODD):
        for m in range(4):
            got = fueter(coordinate_field(m), X0, psi)
            assert np.allclose(got.as_array(), psi.matrix[m], atol=1e-10)
        assert fueter(constant_field([1, 2, 3, 4]), X0, psi) == Quaternion(0, 0, 0, 0)
    # left and right differ on a non-scalar coefficient
    f = coordinate_field(1, J)
    left = fueter(f, X0, PSI_STD, "left").as_array()
    right = fueter(f, X0, PSI_STD, "right").as_array()
    assert np.allclose(left, qmul(I.as_array(), J.as_array()))
    assert np.allclose(right, qmul(J.as_array(), I.as_array()))


def test_fueter_of_conjugate_identity():
    # D(x_0 - x_1 i - x_2 j - x_3 k) = 4 for the standard set
    f = FieldFn(lambda y: y * np.array([1, -1, -1, -1]), "polynomial")
    assert np.allclose(fueter(f, X0, PSI_STD).as_array(), [4, 0, 0, 0], atol=1e-10)


def test_fueter_errors():
    with pytest.raises(BoundaryProximity):
        fueter(constant_field([1, 0, 0, 0]), [1.001, 1.5, 1.5, 1.5], PSI_STD, box=BOX)
    with pytest.raises(ValueError):
        fueter(constant_field([1, 0, 0, 0]), X0, PSI_STD, side="up")
    with pytest.raises(ValueError):
        FDScheme(1e-3, 3)


def test_laplacian():
    f = FieldFn(lambda y: np.stack([np.sum(y**2, axis=1)] + [0 * y[:, 0]] * 3, -1), "polynomial")
    assert np.allclose(laplacian_array(f, X0, FDScheme(1e-2, 4))[0], [8, 0, 0, 0], atol=1e-8)


def test_kernel_examples():
    k = cauchy_kernel(PSI_STD, [1, 0, 0, 0], [0, 0, 0, 0])
    assert np.allclose(k.as_array(), [1 / (2 * math.pi**2), 0, 0, 0])
    k = cauchy_kernel(PSI_STD, [0, 2, 0, 0], [0, 0, 0, 0])
    assert np.allclose(k.as_array(), [0, -2 / (2 * math.pi**2 * 16), 0, 0])
    with pytest.raises(SingularPoint):
        cauchy_kernel(PSI_STD, X0, X0)


@pytest.mark.parametrize("psi", [PSI_STD, PSI_ODD], ids=["std", "odd"])
def test_kernel_is_monogenic_away_from_pole(psi):
    rng = np.random.default_rng(3)
    ys = X0 + rng.uniform(0.3, 0.8, size=(6, 4)) * rng.choice([-1, 1], size=(6, 4))
    kern = lambda y: cauchy_kernel_array(psi, y, X0)  # noqa: E731
    fd = FDScheme(1e-3, 4)
    scale = np.max(np.abs(kern(ys)))
    assert np.max(np.abs(fueter_array(kern, ys, psi, "left", fd))) < 1e-7 * scale / 0.3
    assert np.max(np.abs(fueter_array(kern, ys, psi, "right", fd))) < 1e-7 * scale / 0.3


@pytest.mark.parametrize("psi", [PSI_STD, PSI_ODD], ids=["std", "odd"])
def test_stokes(psi):
    f = random_polynomial(2, 0).field()
    ttf = random_polynomial(2, 1).field()
    assert stokes_residual(f, ttf, BOX, psi, IntegralQuad(6, 6, fd=FDScheme(1e-3, 4))) < 1e-8


def test_teodorescu_inversion():
    f = random_polynomial(1, 4).field()
    assert teodorescu_inversion_residual(f, BOX, X0, PSI_STD, VolumeQuad(10)) < 1e-2


def test_borel_pompeiu_inside_and_outside():
    f = random_polynomial(1, 0).field()
    ttf = random_polynomial(1, 1).field()
    quad = IntegralQuad(8, 10, VolumeQuad(10), FDScheme(1e-3, 4))
    inside = borel_pompeiu_eval(f, ttf, BOX, PSI_STD, X0, quad)
    assert inside.inside and inside.relative < 1e-2
    outside = borel_pompeiu_eval(f, ttf, BOX, PSI_STD, [1.5, 1.5, 2.4, 2.3], quad)
    assert not outside.inside
    assert np.linalg.norm(outside.lhs) < 1e-4 * np.linalg.norm(f(X0) + ttf(X0))


def test_borel_pompeiu_exclusion_extrapolation():
    f = random_polynomial(1, 0).field()
    ttf = constant_field([0, 0, 0, 0])
    vq = VolumeQuad(12, "exclusion", "midpoint")
    quad = IntegralQuad(8, 12, vq, FDScheme(1e-3, 4))
    plain = borel_pompeiu_eval(f, ttf, BOX, PSI_STD, X0, quad, extrapolate=False)
    extrap = borel_pompeiu_eval(f, ttf, BOX, PSI_STD, X0, quad)
    # at this grid the lattice error dominates the O(eps^2) ball term
    assert plain.relative < 1e-2 and extrap.relative < 1e-2
    assert not np.allclose(plain.lhs, extrap.lhs)
