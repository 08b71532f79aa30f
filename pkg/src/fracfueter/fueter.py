r"""Classical :math:`\psi`-Fueter calculus on a box.

Fields are callables on node arrays ``(M, 4)`` returning quaternion arrays
``(M, 4)`` in standard coordinates. Partial derivatives are central finite
differences; integrals use the rules of :mod:`fracfueter.domain`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from fracfueter.domain import (
    Box4,
    NodeRule,
    VolumeGrid,
    enumerate_faces,
    face_rule,
    singular_volume_rule,
    surface_integral,
    volume_grid,
    volume_integral,
)
from fracfueter.errors import BoundaryProximity, SingularPoint
from fracfueter.quaternion import Quaternion, StructuralSet, qconj, qmul

KERNEL_SCALE = 1.0 / (2.0 * math.pi**2)

SMOOTHNESS_TAGS = ("C0", "C1", "AC1", "polynomial")


# {{{ fields


@dataclass(frozen=True)
class FieldFn:
    """Quaternion-valued field on :math:`\\mathbb{R}^4`.

    ``fn`` maps ``(M, 4)`` points to ``(M, 4)`` values; ``grad`` (optional)
    maps them to ``(M, 4, 4)`` with the derivative axis first.
    """

    fn: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    smoothness: str = "C1"
    grad: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)
    name: str = ""

    def __post_init__(self):
        if self.smoothness not in SMOOTHNESS_TAGS:
            raise ValueError(f"unknown smoothness tag: {self.smoothness!r}")

    def __call__(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            return np.asarray(self.fn(pts[None, :]))[0]
        return np.asarray(self.fn(pts))

    def eval(self, x: Sequence[float]) -> Quaternion:
        return Quaternion.from_array(np.real(self(np.asarray(x, dtype=float))))

    def __add__(self, other: FieldFn) -> FieldFn:
        grad = None
        if self.grad is not None and other.grad is not None:
            grad = lambda y: self.grad(y) + other.grad(y)  # noqa: E731
        tag = self.smoothness if self.smoothness == other.smoothness else "C1"
        return FieldFn(lambda y: self.fn(y) + other.fn(y), tag, grad, f"({self.name}+{other.name})")

    def scaled(self, c: float) -> FieldFn:
        grad = None if self.grad is None else (lambda y: c * self.grad(y))
        return FieldFn(lambda y: c * self.fn(y), self.smoothness, grad, f"{c}*{self.name}")


@dataclass(frozen=True)
class PolynomialField:
    """:math:`\\sum_t c_t\\, y^{e_t}` with quaternion coefficients ``c_t``."""

    exponents: tuple[tuple[int, int, int, int], ...]
    coeffs: tuple[tuple[float, float, float, float], ...]

    @property
    def degree(self) -> int:
        return max((sum(e) for e in self.exponents), default=0)

    def value(self, y: np.ndarray) -> np.ndarray:
        e = np.asarray(self.exponents, dtype=float).reshape(-1, 4)
        c = np.asarray(self.coeffs, dtype=float).reshape(-1, 4)
        mono = np.prod(y[:, None, :] ** e[None, :, :], axis=-1)
        return mono @ c

    def gradient(self, y: np.ndarray) -> np.ndarray:
        e = np.asarray(self.exponents, dtype=float).reshape(-1, 4)
        c = np.asarray(self.coeffs, dtype=float).reshape(-1, 4)
        out = np.empty((y.shape[0], 4, 4))
        for k in range(4):
            ek = e.copy()
            scale = ek[:, k].copy()
            ek[:, k] = np.maximum(ek[:, k] - 1.0, 0.0)
            mono = np.prod(y[:, None, :] ** ek[None, :, :], axis=-1) * scale
            out[:, k, :] = mono @ c
        return out

    def field(self) -> FieldFn:
        return FieldFn(self.value, "polynomial", self.gradient, f"poly(deg={self.degree})")


def constant_field(c: Sequence[float] | Quaternion) -> FieldFn:
    c = c.as_array() if isinstance(c, Quaternion) else np.asarray(c, dtype=float)
    return PolynomialField(((0, 0, 0, 0),), (tuple(c),)).field()


def coordinate_field(m: int, coeff: Sequence[float] | Quaternion = (1.0, 0.0, 0.0, 0.0)) -> FieldFn:
    """``coeff * x_m``."""
    c = coeff.as_array() if isinstance(coeff, Quaternion) else np.asarray(coeff, dtype=float)
    e = [0, 0, 0, 0]
    e[m] = 1
    return PolynomialField((tuple(e),), (tuple(c),)).field()


def random_polynomial(degree: int, seed: int, scale: float = 1.0) -> PolynomialField:
    """All monomials of total degree ``<= degree`` with seeded random coefficients."""
    rng = np.random.default_rng(seed)
    exps = [
        (i, j, k, m)
        for i in range(degree + 1)
        for j in range(degree + 1 - i)
        for k in range(degree + 1 - i - j)
        for m in range(degree + 1 - i - j - k)
    ]
    coeffs = scale * rng.uniform(-1.0, 1.0, size=(len(exps), 4))
    return PolynomialField(tuple(exps), tuple(tuple(float(v) for v in c) for c in coeffs))


# }}}


# {{{ finite differences and Fueter operators


@dataclass(frozen=True)
class FDScheme:
    h: float = 1e-3
    order: int = 4

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("finite-difference step must be positive")
        if self.order not in (2, 4):
            raise ValueError("finite-difference order must be 2 or 4")

    @property
    def reach(self) -> float:
        return self.h * (2 if self.order == 4 else 1)


def partial(fn: Callable[[np.ndarray], np.ndarray], x: np.ndarray, k: int, fd: FDScheme) -> np.ndarray:
    """Central difference of ``fn`` along axis ``k`` at points ``x`` of shape ``(M, 4)``."""
    e = np.zeros(4)
    e[k] = fd.h
    if fd.order == 2:
        return (fn(x + e) - fn(x - e)) / (2.0 * fd.h)
    return (-fn(x + 2 * e) + 8.0 * fn(x + e) - 8.0 * fn(x - e) + fn(x - 2 * e)) / (12.0 * fd.h)


def fueter_array(fn: Callable[[np.ndarray], np.ndarray], x: np.ndarray, psi: StructuralSet,
                 side: str = "left", fd: FDScheme = FDScheme()) -> np.ndarray:
    r""":math:`\sum_k \psi_k \partial_k f` (left) or :math:`\sum_k \partial_k f\, \psi_k` (right)."""
    if side not in ("left", "right"):
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    x = np.atleast_2d(np.asarray(x, dtype=float))
    rows = psi.matrix
    out = None
    for k in range(4):
        d = partial(fn, x, k, fd)
        term = qmul(rows[k], d) if side == "left" else qmul(d, rows[k])
        out = term if out is None else out + term
    return out


def fueter(f: FieldFn, x: Sequence[float], psi: StructuralSet, side: str = "left",
           fd: FDScheme = FDScheme(), box: Optional[Box4] = None) -> Quaternion:
    """ψ-Fueter operator of ``f`` at the point ``x``."""
    x = np.asarray(x, dtype=float)
    if box is not None and box.distance_to_boundary(x) < fd.reach:
        raise BoundaryProximity(
            f"point is closer than the stencil reach {fd.reach:g} to the box boundary"
        )
    return Quaternion.from_array(np.real(fueter_array(f, x[None, :], psi, side, fd)[0]))


def laplacian_array(fn: Callable[[np.ndarray], np.ndarray], x: np.ndarray, fd: FDScheme) -> np.ndarray:
    """Four-variable Laplacian by central differences of the scheme's order."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    f0 = fn(x)
    out = 0.0
    for k in range(4):
        e = np.zeros(4)
        e[k] = fd.h
        if fd.order == 2:
            out = out + (fn(x + e) - 2.0 * f0 + fn(x - e)) / fd.h**2
        else:
            out = out + (-fn(x + 2 * e) + 16.0 * fn(x + e) - 30.0 * f0 + 16.0 * fn(x - e)
                         - fn(x - 2 * e)) / (12.0 * fd.h**2)
    return out


# }}}


# {{{ Cauchy kernel and Teodorescu transform


def cauchy_kernel_array(psi: StructuralSet, y: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Kernel values for node arrays ``y`` (``(M, 4)``) and a point or array ``x``."""
    z = np.asarray(y, dtype=float) - np.asarray(x, dtype=float)
    r2 = np.sum(z * z, axis=-1)
    if np.any(r2 < 1e-28):
        raise SingularPoint("Cauchy kernel evaluated at its pole")
    return KERNEL_SCALE * qconj(z @ psi.matrix) / (r2 * r2)[..., None]


def cauchy_kernel(psi: StructuralSet, y: Sequence[float], x: Sequence[float]) -> Quaternion:
    r""":math:`K_\psi(y - x) = \overline{(y - x)_\psi} / (2\pi^2 |y - x|^4)`."""
    return Quaternion.from_array(cauchy_kernel_array(psi, np.asarray(y)[None, :], np.asarray(x))[0])


@dataclass(frozen=True)
class VolumeQuad:
    """How a singular volume integral around a point is discretized.

    ``method="duffy"`` uses :func:`singular_volume_rule` with ``n`` radial
    and ``n // 2`` angular nodes; ``method="exclusion"`` uses an ``n``-point
    tensor grid with an exclusion ball of radius ``epsilon`` (default
    1.5 grid spacings).
    """

    n: int = 12
    method: str = "duffy"
    scheme: str = "gauss"
    epsilon: Optional[float] = None

    def __post_init__(self):
        if self.method not in ("duffy", "exclusion"):
            raise ValueError(f"unknown volume method: {self.method!r}")
        if self.n < 2:
            raise ValueError("volume resolution must be at least 2")

    def rule(self, box: Box4, center: Sequence[float]) -> VolumeGrid | NodeRule:
        if self.method == "duffy":
            return singular_volume_rule(box, center, self.n, max(2, self.n // 2))
        return volume_grid(box, self.n, self.scheme, center=center, epsilon=self.epsilon)


def teodorescu(f: FieldFn, box: Box4, x: Sequence[float], psi: StructuralSet,
               quad: VolumeQuad = VolumeQuad(16)) -> np.ndarray:
    r""":math:`T[f](x) = \int_J K_\psi(x - y) f(y)\,dy` (standard coordinates).

    The kernel is taken at :math:`x - y`, the orientation for which
    :math:`D \circ T` is the identity.
    """
    x = np.asarray(x, dtype=float)
    rule = quad.rule(box, x)
    return volume_integral(box, lambda y: -qmul(cauchy_kernel_array(psi, y, x), f(y)), rule)


def teodorescu_inversion_residual(f: FieldFn, box: Box4, x: Sequence[float], psi: StructuralSet,
                                  quad: VolumeQuad = VolumeQuad(16),
                                  fd: FDScheme = FDScheme(1e-3, 4)) -> float:
    r"""Relative residual :math:`|D T[f](x) - f(x)| / |f(x)|`."""
    x = np.asarray(x, dtype=float)

    def t_at(points):
        return np.stack([teodorescu(f, box, p, psi, quad) for p in points])

    dt = fueter_array(t_at, x[None, :], psi, "left", fd)[0]
    fx = f(x)
    return float(np.linalg.norm(dt - fx) / np.linalg.norm(fx))


# }}}


# {{{ Stokes and Borel-Pompeiu


@dataclass(frozen=True)
class IntegralQuad:
    """Resolutions for boundary/volume checks.

    ``n_face`` and ``n_volume`` are Gauss nodes per axis on faces and in
    the volume; ``singular`` drives volume integrals with a kernel pole.
    """

    n_face: int = 12
    n_volume: int = 12
    singular: VolumeQuad = VolumeQuad(12)
    fd: FDScheme = FDScheme(1e-2, 4)


def stokes_residual(f: FieldFn, ttf: FieldFn, box: Box4, psi: StructuralSet,
                    quad: IntegralQuad = IntegralQuad()) -> float:
    r""":math:`|\int_{\partial J} \mathfrak{f}\sigma f - \int_J (\mathfrak{f}\, D f + D_r \mathfrak{f}\, f)|`."""
    faces = enumerate_faces(box, psi)
    rules = [face_rule(face, quad.n_face) for face in faces]
    lhs = surface_integral(faces, ttf, f, rules=rules)
    grid = volume_grid(box, quad.n_volume)

    def integrand(y):
        df = fueter_array(f, y, psi, "left", quad.fd)
        dttf = fueter_array(ttf, y, psi, "right", quad.fd)
        return qmul(ttf(y), df) + qmul(dttf, f(y))

    rhs = volume_integral(box, integrand, grid)
    return float(np.linalg.norm(lhs - rhs))


@dataclass(frozen=True)
class BPResult:
    lhs: np.ndarray
    expected: np.ndarray
    residual: float
    inside: bool

    @property
    def relative(self) -> float:
        scale = np.linalg.norm(self.expected)
        return self.residual / scale if scale > 0 else self.residual


def _bp_lhs(f: FieldFn, ttf: FieldFn, box: Box4, psi: StructuralSet, x: np.ndarray,
            quad: IntegralQuad, volume: VolumeQuad) -> np.ndarray:
    faces = enumerate_faces(box, psi)
    rules = [face_rule(face, quad.n_face) for face in faces]
    kern = lambda y: cauchy_kernel_array(psi, y, x)  # noqa: E731
    boundary = surface_integral(faces, kern, f, rules=rules) + surface_integral(faces, ttf, kern, rules=rules)

    def integrand(y):
        k = kern(y)
        df = fueter_array(f, y, psi, "left", quad.fd)
        dttf = fueter_array(ttf, y, psi, "right", quad.fd)
        return qmul(k, df) + qmul(dttf, k)

    if box.contains(x):
        rule = volume.rule(box, x)
    else:
        rule = volume_grid(box, volume.n)
    return boundary - volume_integral(box, integrand, rule)


def borel_pompeiu_eval(f: FieldFn, ttf: FieldFn, box: Box4, psi: StructuralSet, x: Sequence[float],
                       quad: IntegralQuad = IntegralQuad(), extrapolate: bool = True) -> BPResult:
    r"""Borel-Pompeiu representation at ``x`` against :math:`f(x) + \mathfrak{f}(x)` (or 0 outside).

    With an exclusion-ball volume rule and ``extrapolate=True`` the volume
    term is evaluated at radii :math:`2\epsilon` and :math:`\epsilon` and
    Richardson-extrapolated in :math:`\epsilon^2`: the kernel is odd, so the
    ball contributes :math:`O(\epsilon^2)` against smooth data.
    """
    x = np.asarray(x, dtype=float)
    inside = box.contains(x)
    vq = quad.singular
    if inside and vq.method == "exclusion" and extrapolate:
        eps = vq.epsilon if vq.epsilon is not None else 1.5 * float(np.max(box.lengths)) / vq.n
        coarse = _bp_lhs(f, ttf, box, psi, x, quad, VolumeQuad(vq.n, "exclusion", vq.scheme, 2.0 * eps))
        fine = _bp_lhs(f, ttf, box, psi, x, quad, VolumeQuad(vq.n, "exclusion", vq.scheme, eps))
        lhs = (4.0 * fine - coarse) / 3.0
    else:
        lhs = _bp_lhs(f, ttf, box, psi, x, quad, vq)
    expected = (f(x) + ttf(x)) if inside else np.zeros(4)
    return BPResult(lhs, expected, float(np.linalg.norm(lhs - expected)), inside)


# }}}
