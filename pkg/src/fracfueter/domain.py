r"""The 4D box :math:`J_a^b`, its oriented faces, and volume/surface quadrature.

Two kinds of volume rules are provided:

* :class:`VolumeGrid` -- tensor-product Gauss-Legendre or midpoint nodes,
  optionally with an exclusion ball around a singular point (nodes inside
  the ball are dropped, weights are not renormalized);
* :func:`singular_volume_rule` -- the box is split at the singular point
  into 16 orthants and each orthant is integrated with a Duffy rule, so a
  :math:`|y - x|^{-3}` (or weaker) point singularity is absorbed by the
  Jacobian. Nodes move smoothly with the singular point, which makes the
  rule usable under finite differences in that point.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np

from fracfueter.errors import CalibrationFailure, DegenerateBox, NonFiniteIntegrand
from fracfueter.quadrature import (
    duffy_cube,
    gauss_legendre,
    midpoint,
    tensor_rule,
    two_sided_grading,
)
from fracfueter.quaternion import Quaternion, StructuralSet, qmul

PointFn = Callable[[np.ndarray], np.ndarray]

_CHUNK = 50_000


# {{{ box and faces


@dataclass(frozen=True)
class Box4:
    a: tuple[float, float, float, float]
    b: tuple[float, float, float, float]

    @property
    def lo(self) -> np.ndarray:
        return np.array(self.a, dtype=float)

    @property
    def hi(self) -> np.ndarray:
        return np.array(self.b, dtype=float)

    @property
    def lengths(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def measure(self) -> float:
        return float(np.prod(self.lengths))

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.lengths))

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def contains(self, x: np.ndarray, closed: bool = False) -> bool:
        x = np.asarray(x, dtype=float)
        if closed:
            return bool(np.all(x >= self.lo) and np.all(x <= self.hi))
        return bool(np.all(x > self.lo) and np.all(x < self.hi))

    def distance_to_boundary(self, x: np.ndarray) -> float:
        """Smallest per-axis distance from an interior point to the faces."""
        x = np.asarray(x, dtype=float)
        return float(np.min(np.minimum(x - self.lo, self.hi - x)))


def make_box(a: Sequence[float], b: Sequence[float]) -> Box4:
    a = tuple(float(v) for v in a)
    b = tuple(float(v) for v in b)
    if len(a) != 4 or len(b) != 4:
        raise DegenerateBox("box corners must have 4 coordinates")
    if not all(lo < hi for lo, hi in zip(a, b)):
        raise DegenerateBox(f"box is degenerate: a={a}, b={b}")
    return Box4(a, b)


@dataclass(frozen=True)
class Face:
    """One of the 8 faces ``{y_axis = a_axis}`` (side -1) or ``{y_axis = b_axis}`` (side +1)."""

    box: Box4
    axis: int
    side: int
    sign: int
    sigma_factor: Quaternion

    @property
    def free_axes(self) -> tuple[int, int, int]:
        return tuple(k for k in range(4) if k != self.axis)

    @property
    def value(self) -> float:
        return self.box.b[self.axis] if self.side > 0 else self.box.a[self.axis]

    @property
    def area_element(self) -> float:
        """3-volume of the face."""
        return float(np.prod([self.box.b[k] - self.box.a[k] for k in self.free_axes]))


FACE_KEYS = tuple((k, s) for k in range(4) for s in (-1, 1))


@dataclass(frozen=True)
class OrientationTable:
    """Calibrated sign per face, keyed by ``(axis, side)``.

    ``nominal_factor`` is the ratio between the calibrated signs and the
    signs obtained by reading the surface form with the boundary
    orientation induced by the outward normal; it is constant over faces.
    """

    signs: dict = field(hash=False)
    residual: float
    nominal_factor: int

    def sign(self, axis: int, side: int) -> int:
        return self.signs[(axis, side)]


def enumerate_faces(box: Box4, psi: StructuralSet, signs: Optional[OrientationTable | dict] = None) -> list[Face]:
    """The 8 faces of ``box`` carrying ``sign * psi_axis`` as surface factor.

    Without an explicit table the signs come from :func:`calibrate_orientation`.
    """
    if signs is None:
        signs = calibrate_orientation(psi, box)
    table = signs.signs if isinstance(signs, OrientationTable) else signs
    faces = []
    for axis, side in FACE_KEYS:
        s = int(table[(axis, side)])
        faces.append(Face(box, axis, side, s, s * psi[axis]))
    return faces


# }}}


# {{{ 1D axis rules


def axis_rule(lo: float, hi: float, n: int, scheme: str = "gauss", grading: float = 1.0):
    """1D rule on ``[lo, hi]``.

    ``scheme`` is ``"gauss"``, ``"midpoint"`` or ``"graded"`` (Gauss-Legendre
    after a two-sided polynomial grading map with exponent ``grading``).
    """
    if scheme == "gauss":
        x, w = gauss_legendre(n)
    elif scheme == "midpoint":
        x, w = midpoint(n)
    elif scheme == "graded":
        x, w = graded_unit_rule(n, grading)
    else:
        raise ValueError(f"unknown axis scheme: {scheme!r}")
    return lo + (hi - lo) * x, (hi - lo) * w


@lru_cache(maxsize=None)
def graded_unit_rule(n: int, q: float) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre through the map ``s -> s^q / (s^q + (1-s)^q)``."""
    s, w = gauss_legendre(n)
    if q == 1.0:
        return s, w
    a, b = s**q, (1.0 - s) ** q
    x = a / (a + b)
    dx = q * (s ** (q - 1.0) * b + a * (1.0 - s) ** (q - 1.0)) / (a + b) ** 2
    return x, w * dx


# }}}


# {{{ volume grids


@dataclass(frozen=True)
class VolumeGrid:
    """Tensor-product nodes over a box with an optional exclusion ball."""

    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    n: int = 0
    scheme: str = "gauss"
    exclusion_center: Optional[tuple] = None
    epsilon: float = 0.0

    @property
    def spacing(self) -> float:
        return float(np.max(np.ptp(self.nodes, axis=0))) / max(self.n, 1)


def volume_grid(box: Box4, n: int, scheme: str = "gauss", center: Optional[Sequence[float]] = None,
                epsilon: Optional[float] = None, grading: float = 1.0) -> VolumeGrid:
    """Tensor grid with ``n`` nodes per axis.

    With ``center`` given and ``epsilon=None`` the exclusion radius defaults
    to 1.5 times the largest grid spacing.
    """
    rules = [axis_rule(box.a[k], box.b[k], n, scheme, grading) for k in range(4)]
    nodes, weights = tensor_rule(rules)
    eps = 0.0
    c = None
    if center is not None:
        c = tuple(float(v) for v in center)
        eps = 1.5 * float(np.max(box.lengths)) / n if epsilon is None else float(epsilon)
        keep = np.linalg.norm(nodes - np.asarray(c), axis=1) >= eps
        nodes, weights = nodes[keep], weights[keep]
    return VolumeGrid(nodes=nodes, weights=weights, n=n, scheme=scheme, exclusion_center=c, epsilon=eps)


@dataclass(frozen=True)
class NodeRule:
    """Plain node/weight list (used for the singular and face rules)."""

    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)


def _weighted_sum(fn: PointFn, nodes: np.ndarray, weights: np.ndarray) -> np.ndarray:
    total = None
    for start in range(0, nodes.shape[0], _CHUNK):
        sl = slice(start, start + _CHUNK)
        vals = np.asarray(fn(nodes[sl]))
        if not np.all(np.isfinite(vals)):
            raise NonFiniteIntegrand("integrand is not finite at some quadrature node")
        part = np.einsum("m...,m->...", vals, weights[sl])
        total = part if total is None else total + part
    if total is None:
        raise NonFiniteIntegrand("empty quadrature rule")
    return total


def volume_integral(box: Box4, integrand: PointFn, grid: VolumeGrid | NodeRule) -> np.ndarray:
    """Quadrature sum of a (quaternion-valued) integrand over the box."""
    return _weighted_sum(integrand, grid.nodes, grid.weights)


@lru_cache(maxsize=64)
def _duffy_unit(n_radial: int, n_angular: int, radial_grading: float, angular_grading: float):
    r = graded_unit_rule(n_radial, radial_grading)
    v = graded_unit_rule(n_angular, angular_grading)
    rr = (tuple(r[0]), tuple(r[1]))
    vv = (tuple(v[0]), tuple(v[1]))
    return duffy_cube(4, rr, vv)


@lru_cache(maxsize=64)
def _nested_duffy_unit(axes: tuple[int, ...], n_radial: int, n_angular: int, radial_grading: float,
                       angular_grading: float, inner_radial_grading: float):
    r"""Duffy rule on the 4-cube whose pyramids listed in ``axes`` are Duffy-split again.

    Inside such a pyramid the transverse coordinates :math:`v` are
    integrated with a 3D Duffy rule around :math:`v = 0`, which absorbs a
    :math:`\rho^{-2}` singularity along the edge :math:`\xi_k = 0, k \ne m`.
    """
    r, wr = graded_unit_rule(n_radial, radial_grading)
    v, wv = graded_unit_rule(n_angular, angular_grading)
    rv = graded_unit_rule(n_angular, inner_radial_grading)
    vv = (tuple(v), tuple(wv))
    inner_nodes, inner_w = duffy_cube(3, (tuple(rv[0]), tuple(rv[1])), vv)
    plain_nodes, plain_w = tensor_rule([(v, wv)] * 3)
    nodes_all, weights_all = [], []
    for m in range(4):
        vn, vw = (inner_nodes, inner_w) if m in axes else (plain_nodes, plain_w)
        xi = np.empty((r.size, vn.shape[0], 4))
        xi[:, :, m] = r[:, None]
        others = [k for k in range(4) if k != m]
        for i, k in enumerate(others):
            xi[:, :, k] = r[:, None] * vn[None, :, i]
        w = (wr * r**3)[:, None] * vw[None, :]
        nodes_all.append(xi.reshape(-1, 4))
        weights_all.append(w.ravel())
    return np.concatenate(nodes_all), np.concatenate(weights_all)


def singular_volume_rule(box: Box4, center: Sequence[float], n_radial: int = 8, n_angular: int = 6,
                         radial_grading: float = 1.0, angular_grading: float = 1.0,
                         segment_axes: Sequence[int] = (), segment_grading: float = 1.0) -> NodeRule:
    r"""Orthant-split Duffy rule for integrands singular at ``center``.

    ``segment_axes`` lists axes ``j`` for which the integrand is also singular
    (like :math:`\rho^{-2}`) along the segment from ``center`` toward the
    lower face in direction :math:`-e_j`; those pyramids get a nested Duffy
    split. Gradings are two-sided polynomial exponents (1 = plain Gauss).
    """
    x = np.asarray(center, dtype=float)
    lo, hi = box.lo, box.hi
    nodes_all, weights_all = [], []
    for signs in itertools.product((-1.0, 1.0), repeat=4):
        s = np.array(signs)
        lengths = np.where(s > 0, hi - x, x - lo)
        if np.any(lengths <= 0):
            continue
        nested = tuple(k for k in segment_axes if s[k] < 0)
        if nested:
            xi, w = _nested_duffy_unit(nested, n_radial, n_angular, radial_grading,
                                       angular_grading, segment_grading)
        else:
            xi, w = _duffy_unit(n_radial, n_angular, radial_grading, angular_grading)
        nodes_all.append(x + xi * (s * lengths))
        weights_all.append(w * float(np.prod(lengths)))
    return NodeRule(np.concatenate(nodes_all), np.concatenate(weights_all))


# }}}


# {{{ surfaces


def face_rule(face: Face, n: int, scheme: str = "gauss", grading: float = 1.0) -> NodeRule:
    """Tensor rule on a face; the fixed coordinate is set exactly."""
    box = face.box
    rules = [axis_rule(box.a[k], box.b[k], n, scheme, grading) for k in face.free_axes]
    pts, w = tensor_rule(rules)
    nodes = np.empty((pts.shape[0], 4))
    nodes[:, list(face.free_axes)] = pts
    nodes[:, face.axis] = face.value
    return NodeRule(nodes, w)


def singular_face_rule(face: Face, center: Sequence[float], n_radial: int = 8, n_angular: int = 6,
                       radial_grading: float = 1.0, angular_grading: float = 1.0) -> NodeRule:
    """Octant-split 3D Duffy rule on a face, singular at the projection of ``center``."""
    box = face.box
    free = list(face.free_axes)
    c = np.asarray(center, dtype=float)[free]
    lo, hi = box.lo[free], box.hi[free]
    r = graded_unit_rule(n_radial, radial_grading)
    v = graded_unit_rule(n_angular, angular_grading)
    xi, w = duffy_cube(3, (tuple(r[0]), tuple(r[1])), (tuple(v[0]), tuple(v[1])))
    nodes_all, weights_all = [], []
    for signs in itertools.product((-1.0, 1.0), repeat=3):
        s = np.array(signs)
        lengths = np.where(s > 0, hi - c, c - lo)
        if np.any(lengths <= 0):
            continue
        pts = c + xi * (s * lengths)
        nodes = np.empty((pts.shape[0], 4))
        nodes[:, free] = pts
        nodes[:, face.axis] = face.value
        nodes_all.append(nodes)
        weights_all.append(w * float(np.prod(lengths)))
    return NodeRule(np.concatenate(nodes_all), np.concatenate(weights_all))


def surface_integral(faces: Sequence[Face], left: Optional[PointFn], right: Optional[PointFn],
                     n: int = 8, rules: Optional[Sequence[NodeRule]] = None) -> np.ndarray:
    r"""Sandwich integral :math:`\int_{\partial J} \mathrm{left}\,\sigma^\psi\,\mathrm{right}`.

    ``left``/``right`` map node arrays ``(M, 4)`` to quaternion arrays
    ``(M, 4)`` (real or complex); ``None`` stands for the constant 1.
    ``rules`` optionally gives one node rule per face (defaults to an
    ``n``-point Gauss tensor rule).
    """
    total = np.zeros(4, dtype=complex)
    for i, face in enumerate(faces):
        rule = rules[i] if rules is not None else face_rule(face, n)
        sigma = face.sigma_factor.as_array()

        def integrand(y, sigma=sigma):
            lv = np.broadcast_to(sigma, y.shape) if left is None else qmul(left(y), sigma)
            return lv if right is None else qmul(lv, right(y))

        total = total + _weighted_sum(integrand, rule.nodes, rule.weights)
    return total


# }}}


# {{{ orientation calibration


def _nominal_signs(psi: StructuralSet) -> dict:
    # surface form -sgn(psi) * sum_k (-1)^k psi_k dx^_k, with dx^_k restricted to
    # the face {x_k = const} carrying the induced boundary orientation (-1)^k * side
    return {(k, s): -psi.sgn * (-1) ** k * ((-1) ** k * s) for k, s in FACE_KEYS}


def calibrate_orientation(psi: StructuralSet, box: Box4, n: int = 8,
                          signs: Optional[dict] = None, tol: float = 1e-8) -> OrientationTable:
    r"""Fix the face signs from :math:`\int_{\partial J} \sigma^\psi x_m = \psi_m\, m(J)`.

    All :math:`2^8` sign assignments are tried (or only ``signs`` if given);
    exactly one must reproduce the identity for :math:`m = 0, \dots, 3`.
    """
    return _calibrate(psi, box, n, None if signs is None else tuple(sorted(signs.items())), tol)


@lru_cache(maxsize=128)
def _calibrate(psi, box, n, signs_items, tol):
    psi_m = psi.matrix
    # raw[f, m] = int_face psi_axis x_m dS  (quaternion)
    raw = np.zeros((len(FACE_KEYS), 4, 4))
    for f, (axis, side) in enumerate(FACE_KEYS):
        face = Face(box, axis, side, 1, psi[axis])
        rule = face_rule(face, n)
        moments = rule.weights @ rule.nodes
        raw[f] = moments[:, None] * psi_m[axis][None, :]
    target = psi_m * box.measure
    scale = max(1.0, box.measure)

    if signs_items is not None:
        candidates = [np.array([dict(signs_items)[key] for key in FACE_KEYS], dtype=float)]
    else:
        candidates = [np.array(c) for c in itertools.product((-1.0, 1.0), repeat=len(FACE_KEYS))]

    accepted = []
    for c in candidates:
        res = np.max(np.abs(np.einsum("f,fmq->mq", c, raw) - target)) / scale
        if res <= tol:
            accepted.append((c, res))
    if len(accepted) != 1:
        raise CalibrationFailure(
            f"{len(accepted)} face-sign assignments reproduce the calibration identity (expected 1)"
        )
    c, res = accepted[0]
    table = {key: int(v) for key, v in zip(FACE_KEYS, c)}
    nominal = _nominal_signs(psi)
    ratios = {table[k] * nominal[k] for k in FACE_KEYS}
    nominal_factor = ratios.pop() if len(ratios) == 1 else 0
    return OrientationTable(signs=table, residual=float(res), nominal_factor=nominal_factor)


# }}}
