r"""Real and complex quaternion algebra over structural sets.

Quaternions are stored in *standard* coordinates on :math:`\{1, i, j, k\}`.
The array-level helpers (:func:`qmul`, :func:`qconj`, ...) operate on
arrays whose trailing axis has length 4 and broadcast over the leading
axes; they accept both real and complex dtypes, so complex quaternions
:math:`\mathbb{H}(\mathbb{C})` reuse the same code through bilinearity.

A structural set :math:`\psi = \{\psi_0, \dots, \psi_3\}` is stored as the
4x4 matrix whose rows are the standard coordinates of :math:`\psi_k`.
Since the rows are orthonormal, :math:`\psi`-coordinates of a quaternion
are obtained by a matrix-vector product with that matrix.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from fracfueter.errors import MixedBasis, NotOrthonormal

#: Tolerance used when accepting a candidate structural set.
ORTHONORMAL_TOL = 1e-10


# {{{ array-level algebra


def qmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product of quaternion arrays (broadcasting over leading axes)."""
    a = np.asarray(a)
    b = np.asarray(b)
    a0, a1, a2, a3 = a[..., 0], a[..., 1], a[..., 2], a[..., 3]
    b0, b1, b2, b3 = b[..., 0], b[..., 1], b[..., 2], b[..., 3]
    return np.stack(
        [
            a0 * b0 - a1 * b1 - a2 * b2 - a3 * b3,
            a0 * b1 + a1 * b0 + a2 * b3 - a3 * b2,
            a0 * b2 - a1 * b3 + a2 * b0 + a3 * b1,
            a0 * b3 + a1 * b2 - a2 * b1 + a3 * b0,
        ],
        axis=-1,
    )


_CONJ = np.array([1.0, -1.0, -1.0, -1.0])


def qconj(a: np.ndarray) -> np.ndarray:
    return np.asarray(a) * _CONJ


def qnorm(a: np.ndarray) -> np.ndarray:
    """Euclidean norm of the (possibly complex) coefficient vector."""
    a = np.asarray(a)
    return np.sqrt(np.sum(np.abs(a) ** 2, axis=-1))


def left_mul_matrix(p: np.ndarray) -> np.ndarray:
    """Real 4x4 matrix ``L`` with ``L @ x == qmul(p, x)``."""
    p0, p1, p2, p3 = np.asarray(p, dtype=float)
    return np.array(
        [
            [p0, -p1, -p2, -p3],
            [p1, p0, -p3, p2],
            [p2, p3, p0, -p1],
            [p3, -p2, p1, p0],
        ]
    )


def right_mul_matrix(p: np.ndarray) -> np.ndarray:
    """Real 4x4 matrix ``R`` with ``R @ x == qmul(x, p)``."""
    p0, p1, p2, p3 = np.asarray(p, dtype=float)
    return np.array(
        [
            [p0, -p1, -p2, -p3],
            [p1, p0, p3, -p2],
            [p2, -p3, p0, p1],
            [p3, p2, -p1, p0],
        ]
    )


# }}}


# {{{ scalar types


@dataclass(frozen=True)
class Quaternion:
    """Real quaternion ``w0 + w1 i + w2 j + w3 k``."""

    w0: float = 0.0
    w1: float = 0.0
    w2: float = 0.0
    w3: float = 0.0

    @classmethod
    def from_array(cls, arr: Iterable[float]) -> Quaternion:
        w = [float(v) for v in arr]
        if len(w) != 4:
            raise ValueError(f"expected 4 coefficients, got {len(w)}")
        return cls(*w)

    def as_array(self) -> np.ndarray:
        return np.array([self.w0, self.w1, self.w2, self.w3])

    def __iter__(self):
        return iter((self.w0, self.w1, self.w2, self.w3))

    def __add__(self, other: Quaternion | float) -> Quaternion:
        if isinstance(other, Quaternion):
            return Quaternion.from_array(self.as_array() + other.as_array())
        if isinstance(other, (int, float)):
            return Quaternion(self.w0 + other, self.w1, self.w2, self.w3)
        return NotImplemented

    __radd__ = __add__

    def __neg__(self) -> Quaternion:
        return Quaternion(-self.w0, -self.w1, -self.w2, -self.w3)

    def __sub__(self, other: Quaternion | float) -> Quaternion:
        return self + (-other)

    def __mul__(self, other: Quaternion | float) -> Quaternion:
        if isinstance(other, Quaternion):
            return q_mul(self, other)
        if isinstance(other, (int, float)):
            return Quaternion.from_array(self.as_array() * other)
        return NotImplemented

    def __rmul__(self, other: float) -> Quaternion:
        if isinstance(other, (int, float)):
            return Quaternion.from_array(self.as_array() * other)
        return NotImplemented

    def conj(self) -> Quaternion:
        return q_conj(self)

    def norm(self) -> float:
        return float(np.linalg.norm(self.as_array()))


ONE = Quaternion(1.0, 0.0, 0.0, 0.0)
I = Quaternion(0.0, 1.0, 0.0, 0.0)
J = Quaternion(0.0, 0.0, 1.0, 0.0)
K = Quaternion(0.0, 0.0, 0.0, 1.0)


def q_mul(a: Quaternion, b: Quaternion) -> Quaternion:
    return Quaternion.from_array(qmul(a.as_array(), b.as_array()))


def q_conj(q: Quaternion) -> Quaternion:
    return Quaternion(q.w0, -q.w1, -q.w2, -q.w3)


def scalar_product(q: Quaternion, x: Quaternion) -> float:
    r"""Quaternionic scalar product :math:`\frac12(\bar q x + \bar x q)`.

    Computed through the algebra rather than as a dot product so that the
    two routes can be compared in tests.
    """
    qa, xa = q.as_array(), x.as_array()
    s = 0.5 * (qmul(qconj(qa), xa) + qmul(qconj(xa), qa))
    return float(s[0])


# }}}


# {{{ structural sets


@dataclass(frozen=True)
class StructuralSet:
    """An orthonormal quaternion basis with its orientation sign.

    Construct through :func:`validate_structural_set` (or :data:`PSI_STD`);
    the constructor itself performs no checks.
    """

    rows: tuple[tuple[float, float, float, float], ...]
    sgn: int

    @property
    def matrix(self) -> np.ndarray:
        return np.array(self.rows, dtype=float)

    @property
    def psi(self) -> tuple[Quaternion, ...]:
        return tuple(Quaternion(*r) for r in self.rows)

    def __getitem__(self, k: int) -> Quaternion:
        return Quaternion(*self.rows[k])

    def conjugate(self) -> StructuralSet:
        r"""The conjugate set :math:`\bar\psi = \{\bar\psi_0, \dots, \bar\psi_3\}`."""
        return validate_structural_set([q_conj(p) for p in self.psi])

    def is_standard(self) -> bool:
        return np.array_equal(self.matrix, np.eye(4))


def validate_structural_set(candidates: Sequence[Quaternion | Sequence[float]]) -> StructuralSet:
    """Check orthonormality of four quaternions and compute the orientation."""
    rows = np.array(
        [c.as_array() if isinstance(c, Quaternion) else np.asarray(c, dtype=float) for c in candidates],
        dtype=float,
    )
    if rows.shape != (4, 4):
        raise NotOrthonormal(f"expected 4 quaternions, got array of shape {rows.shape}")

    gram = rows @ rows.T
    err = np.max(np.abs(gram - np.eye(4)))
    if not err <= ORTHONORMAL_TOL:
        raise NotOrthonormal(f"structural set is not orthonormal (max Gram error {err:.3e})")

    sgn = 1 if np.linalg.det(rows) > 0 else -1
    return StructuralSet(rows=tuple(tuple(float(v) for v in r) for r in rows), sgn=sgn)


PSI_STD = validate_structural_set([ONE, I, J, K])


def psi_scalar_product(q: Quaternion, x: Quaternion, psi: StructuralSet) -> float:
    r""":math:`\langle q, x\rangle_\psi = \sum_k q_k x_k` on :math:`\psi`-coordinates."""
    return float(np.dot(psi_coords(q, psi), psi_coords(x, psi)))


def psi_coords(q: Quaternion, psi: StructuralSet) -> np.ndarray:
    return psi.matrix @ q.as_array()


def psi_assemble(x: Sequence[float], psi: StructuralSet) -> Quaternion:
    return Quaternion.from_array(np.asarray(x, dtype=float) @ psi.matrix)


# }}}


# {{{ complex quaternions


@dataclass(frozen=True)
class ComplexQuaternion:
    r"""Element :math:`\sum_k c_k \psi_k` of :math:`\mathbb{H}(\mathbb{C})`.

    The complex unit commutes with every quaternion, so products are the
    bilinear extension of the Hamilton product.
    """

    coeffs: tuple[complex, complex, complex, complex]
    psi: StructuralSet = PSI_STD

    @classmethod
    def from_standard(cls, arr: np.ndarray, psi: StructuralSet = PSI_STD) -> ComplexQuaternion:
        c = psi.matrix @ np.asarray(arr, dtype=complex)
        return cls(coeffs=tuple(complex(v) for v in c), psi=psi)

    @classmethod
    def from_quaternion(cls, q: Quaternion, psi: StructuralSet = PSI_STD) -> ComplexQuaternion:
        return cls.from_standard(q.as_array(), psi)

    def standard(self) -> np.ndarray:
        return np.asarray(self.coeffs, dtype=complex) @ self.psi.matrix

    def real_part(self) -> Quaternion:
        return Quaternion.from_array(self.standard().real)

    def imag_part(self) -> Quaternion:
        return Quaternion.from_array(self.standard().imag)

    def norm(self) -> float:
        return float(qnorm(np.asarray(self.coeffs, dtype=complex)))

    def __add__(self, other: ComplexQuaternion) -> ComplexQuaternion:
        return cq_add(self, other)

    def __sub__(self, other: ComplexQuaternion) -> ComplexQuaternion:
        return cq_add(self, cq_scale(other, -1.0))

    def __mul__(self, other):
        if isinstance(other, ComplexQuaternion):
            return cq_mul(self, other)
        if isinstance(other, (int, float, complex)):
            return cq_scale(self, other)
        return NotImplemented

    def __rmul__(self, other):
        if isinstance(other, (int, float, complex)):
            return cq_scale(self, other)
        return NotImplemented


def _same_basis(a: ComplexQuaternion, b: ComplexQuaternion) -> None:
    if a.psi != b.psi:
        raise MixedBasis("complex quaternions are expressed in different structural sets")


def cq_mul(a: ComplexQuaternion, b: ComplexQuaternion) -> ComplexQuaternion:
    _same_basis(a, b)
    return ComplexQuaternion.from_standard(qmul(a.standard(), b.standard()), a.psi)


def cq_add(a: ComplexQuaternion, b: ComplexQuaternion) -> ComplexQuaternion:
    _same_basis(a, b)
    return ComplexQuaternion(
        coeffs=tuple(x + y for x, y in zip(a.coeffs, b.coeffs)), psi=a.psi
    )


def cq_scale(a: ComplexQuaternion, c: complex) -> ComplexQuaternion:
    return ComplexQuaternion(coeffs=tuple(c * x for x in a.coeffs), psi=a.psi)


# }}}
