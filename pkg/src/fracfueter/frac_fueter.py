r"""Fractional :math:`\psi`-Fueter operators with respect to a vector of weights.

For a base point :math:`q` and an axis :math:`j` the *slice* of a field
:math:`f` is :math:`t \mapsto f(q_0, \dots, t, \dots, q_3)` with :math:`t` in
position :math:`j`. All operators act slice-wise:

* ``op_I``: :math:`\sum_j I^{1-\alpha_j}_{g_j}[\text{slice}_j](x_j)`
* ``op_D``: :math:`\sum_j \psi_j D^{\alpha_j}_{g_j}[\text{slice}_j](x_j)`
* ``op_C``: :math:`\sum_j (g_j'(x_j) - 1)\psi_j D^{\alpha_j}_{g_j}[\text{slice}_j](x_j)`
* ``op_P``: :math:`\sum_j D^{1-\alpha_j}_{g_j}[\text{slice}_j](x_j)`

The Borel-Pompeiu type kernel is ``op_P`` applied in the :math:`x` variable
to :math:`x \mapsto K_\psi(y - x)` with slices through :math:`x` itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.polynomial import chebyshev

from fracfueter.domain import (
    Box4,
    Face,
    NodeRule,
    enumerate_faces,
    face_rule,
    singular_face_rule,
    singular_volume_rule,
    surface_integral,
    volume_grid,
    volume_integral,
)
from fracfueter.errors import (
    DomainError,
    HypothesisNotMet,
    KernelPathSingularity,
    MissingSecondDerivative,
)
from fracfueter.frac1d import (
    DEFAULT_QUAD,
    SingularQuadSpec,
    WeightFunction,
    check_order,
    frac_derivative,
    frac_integral,
    gamma,
)
from fracfueter.fueter import (
    KERNEL_SCALE,
    FDScheme,
    FieldFn,
    cauchy_kernel_array,
    fueter_array,
    laplacian_array,
)
from fracfueter.quadrature import composite_gauss, gauss_jacobi_left
from fracfueter.quaternion import PSI_STD, ComplexQuaternion, StructuralSet, qconj, qmul

#: Convention flags reported alongside every fractional check.
CONVENTIONS = {
    "integral_order": "1-alpha_j",
    "laplacian": "R4",
    "kernel_slices": "through x",
    "m_term_gamma": "Gamma(alpha_j)",
}


# {{{ weights and orders


@dataclass(frozen=True)
class WeightVector:
    """One weight function per axis."""

    g: tuple[WeightFunction, WeightFunction, WeightFunction, WeightFunction]

    def __post_init__(self):
        if len(self.g) != 4:
            raise ValueError("a weight vector has exactly 4 components")

    def __getitem__(self, j: int) -> WeightFunction:
        return self.g[j]

    @classmethod
    def uniform(cls, kind: str, box: Box4, **params) -> WeightVector:
        return cls(tuple(WeightFunction.from_spec(kind, box.a[k], box.b[k], **params) for k in range(4)))

    @classmethod
    def from_kinds(cls, kinds: Sequence[str], box: Box4, params: Optional[Sequence[dict]] = None) -> WeightVector:
        params = params or [{}] * 4
        return cls(tuple(WeightFunction.from_spec(kinds[k], box.a[k], box.b[k], **params[k]) for k in range(4)))

    @property
    def kinds(self) -> tuple[str, ...]:
        return tuple(w.kind for w in self.g)

    def lower(self) -> np.ndarray:
        return np.array([w.a for w in self.g])

    def prime(self, y: np.ndarray) -> np.ndarray:
        """``g_j'(y_j)`` for node arrays ``(M, 4)``."""
        return np.stack([self.g[j].g_prime(y[:, j]) for j in range(4)], axis=-1)

    def increment(self, x: np.ndarray, j: int) -> float:
        w = self.g[j]
        return float(w.g(np.array(x[j])) - w.g(np.array(w.a)))


def check_orders(alpha: Sequence[float]) -> tuple[float, float, float, float]:
    alpha = tuple(check_order(float(a)) for a in alpha)
    if len(alpha) != 4:
        raise ValueError("an order vector has exactly 4 components")
    return alpha


def _as_cq(arr: np.ndarray, psi: StructuralSet = PSI_STD) -> ComplexQuaternion:
    return ComplexQuaternion.from_standard(arr, psi)


# }}}


# {{{ slices and per-axis operators


def slice_fn(f: Callable[[np.ndarray], np.ndarray], base: Sequence[float], j: int) -> Callable:
    """``t -> f(base with coordinate j replaced by t)`` for arrays ``t`` of any shape."""
    base = np.asarray(base, dtype=float)

    def fn(t):
        t = np.asarray(t, dtype=float)
        pts = np.broadcast_to(base, t.shape + (4,)).copy()
        pts[..., j] = t
        vals = np.asarray(f(pts.reshape(-1, 4)))
        return vals.reshape(t.shape + vals.shape[1:])

    return fn


def axis_integral(f, base, j: int, t, alpha_j: float, w: WeightFunction,
                  quad: SingularQuadSpec = DEFAULT_QUAD) -> np.ndarray:
    r""":math:`I^{1-\alpha_j}_{g_j}[\text{slice}_j](t)`."""
    return frac_integral(slice_fn(f, base, j), w, w.a, t, 1.0 - alpha_j, quad)


def axis_derivative(f, base, j: int, t, order: float, w: WeightFunction,
                    quad: SingularQuadSpec = DEFAULT_QUAD) -> np.ndarray:
    """Fractional derivative of the given ``order`` of the axis-``j`` slice."""
    return frac_derivative(slice_fn(f, base, j), w, w.a, t, order, quad)


def _check_point(x: np.ndarray, g: WeightVector, strict: bool) -> None:
    lo = g.lower()
    hi = np.array([w.b for w in g.g])
    bad = (x <= lo) if strict else (x < lo)
    if np.any(bad) or np.any(x > hi):
        raise DomainError(f"point {x} outside the weight domains")


def op_I_array(f, q, x, alpha, g: WeightVector, quad: SingularQuadSpec = DEFAULT_QUAD) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    _check_point(x, g, strict=False)
    return sum(axis_integral(f, q, j, x[j], alpha[j], g[j], quad) for j in range(4))


def _axis_D_values(f, q, x, alpha, g, quad) -> list[np.ndarray]:
    return [axis_derivative(f, q, j, x[j], alpha[j], g[j], quad) for j in range(4)]


def _assemble(psi: StructuralSet, coeffs: Sequence[float], values: Sequence[np.ndarray], side: str) -> np.ndarray:
    if side not in ("left", "right"):
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    rows = psi.matrix
    out = 0.0
    for j in range(4):
        term = qmul(rows[j], values[j]) if side == "left" else qmul(values[j], rows[j])
        out = out + coeffs[j] * term
    return out


def op_D_array(f, q, x, alpha, g, psi=PSI_STD, side="left", quad=DEFAULT_QUAD) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    _check_point(x, g, strict=True)
    return _assemble(psi, [1.0] * 4, _axis_D_values(f, q, x, alpha, g, quad), side)


def op_C_array(f, q, x, alpha, g, psi=PSI_STD, side="left", quad=DEFAULT_QUAD) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    _check_point(x, g, strict=True)
    factors = [float(g[j].g_prime(np.array(x[j]))) - 1.0 for j in range(4)]
    values = [
        axis_derivative(f, q, j, x[j], alpha[j], g[j], quad) if factors[j] != 0.0 else np.zeros(4)
        for j in range(4)
    ]
    return _assemble(psi, factors, values, side)


def op_P_array(f, q, x, alpha, g, quad=DEFAULT_QUAD) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    _check_point(x, g, strict=True)
    return sum(axis_derivative(f, q, j, x[j], 1.0 - alpha[j], g[j], quad) for j in range(4))


def m_term_array(f, q, x, alpha, g, quad=DEFAULT_QUAD) -> np.ndarray:
    r""":math:`\sum_{j \ne k} I^{1-\alpha_k}[\text{slice}_k](x_k)\,(g_j(x_j) - g_j(a_j))^{\alpha_j - 1} / \Gamma(\alpha_j)`."""
    x = np.asarray(x, dtype=float)
    _check_point(x, g, strict=True)
    integrals = [axis_integral(f, q, k, x[k], alpha[k], g[k], quad) for k in range(4)]
    factors = [g.increment(x, j) ** (alpha[j] - 1.0) / gamma(alpha[j]) for j in range(4)]
    out = 0.0
    for j in range(4):
        for k in range(4):
            if k != j:
                out = out + integrals[k] * factors[j]
    return out


def op_I(f: FieldFn, q, x, alpha, g: WeightVector, quad: SingularQuadSpec = DEFAULT_QUAD) -> ComplexQuaternion:
    """Sum of per-axis fractional integrals of order ``1 - alpha_j`` of the slices at ``q``."""
    return _as_cq(op_I_array(f, q, x, check_orders(alpha), g, quad))


def op_D(f: FieldFn, q, x, alpha, g: WeightVector, side: str = "left", psi: StructuralSet = PSI_STD,
         quad: SingularQuadSpec = DEFAULT_QUAD) -> ComplexQuaternion:
    """Fractional ψ-Fueter operator of order ``alpha`` with respect to ``g``."""
    return _as_cq(op_D_array(f, q, x, check_orders(alpha), g, psi, side, quad))


def op_C(f: FieldFn, q, x, alpha, g: WeightVector, side: str = "left", psi: StructuralSet = PSI_STD,
         quad: SingularQuadSpec = DEFAULT_QUAD) -> ComplexQuaternion:
    return _as_cq(op_C_array(f, q, x, check_orders(alpha), g, psi, side, quad))


def op_P(f: FieldFn, q, x, alpha, g: WeightVector, quad: SingularQuadSpec = DEFAULT_QUAD) -> ComplexQuaternion:
    return _as_cq(op_P_array(f, q, x, check_orders(alpha), g, quad))


def m_term(f: FieldFn, q, x, alpha, g: WeightVector, quad: SingularQuadSpec = DEFAULT_QUAD) -> ComplexQuaternion:
    return _as_cq(m_term_array(f, q, x, check_orders(alpha), g, quad))


# }}}


# {{{ slice tables


@dataclass(frozen=True)
class AxisTable:
    r"""Chebyshev interpolant of a per-axis operator value on :math:`[a_j, b_j]`.

    Values behave like :math:`(g(t) - g(a))^{e}` times a function analytic
    in :math:`u = g(t)`, so the factor is divided out and the remainder is
    interpolated in :math:`u`.
    """

    weight: WeightFunction
    exponent: float
    coeffs: np.ndarray = field(repr=False)

    def __call__(self, t: np.ndarray) -> np.ndarray:
        w = self.weight
        ga, gb = float(w.g(np.array(w.a))), float(w.g(np.array(w.b)))
        u = w.g(np.asarray(t, dtype=float))
        s = np.clip((2.0 * u - ga - gb) / (gb - ga), -1.0, 1.0)
        base = np.maximum(u - ga, 0.0) ** self.exponent
        return base[..., None] * chebyshev.chebval(s, self.coeffs).T


def _cheb_nodes(w: WeightFunction, degree: int) -> tuple[np.ndarray, np.ndarray]:
    ga, gb = float(w.g(np.array(w.a))), float(w.g(np.array(w.b)))
    s = np.cos(np.pi * (np.arange(degree + 1) + 0.5) / (degree + 1))[::-1]
    u = 0.5 * (ga + gb) + 0.5 * (gb - ga) * s
    return s, np.asarray(w.g_inv(u)), u - ga


def integral_table(f, base, j, alpha_j, w, quad=DEFAULT_QUAD, degree=32) -> AxisTable:
    s, t, du = _cheb_nodes(w, degree)
    vals = axis_integral(f, base, j, t, alpha_j, w, quad)
    exponent = 1.0 - alpha_j
    coeffs = chebyshev.chebfit(s, vals / du[:, None] ** exponent, degree)
    return AxisTable(w, exponent, coeffs)


def derivative_table(f, base, j, alpha_j, w, quad=DEFAULT_QUAD, degree=32) -> AxisTable:
    s, t, du = _cheb_nodes(w, degree)
    vals = np.empty((t.size, 4))
    default = quad.step_for(w)
    for i, ti in enumerate(t):
        # keep the stencil well inside the singular layer at the lower limit
        step = min(default, (ti - w.a) / 50.0)
        local = SingularQuadSpec(quad.node_count, quad.grading, step, quad.richardson, quad.panel_order)
        vals[i] = np.real(axis_derivative(f, base, j, ti, alpha_j, w, local))
    exponent = -alpha_j
    coeffs = chebyshev.chebfit(s, vals / du[:, None] ** exponent, degree)
    return AxisTable(w, exponent, coeffs)


@dataclass
class FracField:
    """Per-axis tables of :math:`I^{1-\\alpha_j}` and :math:`D^{\\alpha_j}` of one field at one base point.

    Evaluating the fractional operators at the many nodes of a 4D rule
    reduces to 1D table lookups because every operator is a sum of
    single-axis functions.
    """

    f: FieldFn
    q: np.ndarray
    alpha: tuple
    g: WeightVector
    quad: SingularQuadSpec = DEFAULT_QUAD
    degree: int = 32

    @cached_property
    def integrals(self) -> list[AxisTable]:
        return [integral_table(self.f, self.q, j, self.alpha[j], self.g[j], self.quad, self.degree) for j in range(4)]

    @cached_property
    def derivatives(self) -> list[AxisTable]:
        return [derivative_table(self.f, self.q, j, self.alpha[j], self.g[j], self.quad, self.degree) for j in range(4)]

    def I(self, y: np.ndarray) -> np.ndarray:  # noqa: E743
        return sum(self.integrals[j](y[:, j]) for j in range(4))

    def axis_I(self, j: int, y: np.ndarray) -> np.ndarray:
        return self.integrals[j](y[:, j])

    def D(self, y: np.ndarray, psi: StructuralSet, side: str = "left", weights=None) -> np.ndarray:
        r""":math:`\sum_j c_j \psi_j D^{\alpha_j}` with per-node factors ``weights`` (default 1)."""
        rows = psi.matrix
        out = 0.0
        for j in range(4):
            v = self.derivatives[j](y[:, j])
            if weights is not None:
                v = v * weights[:, j, None]
            out = out + (qmul(rows[j], v) if side == "left" else qmul(v, rows[j]))
        return out

    def C(self, y, psi, side="left"):
        return self.D(y, psi, side, self.g.prime(y) - 1.0)

    def CD(self, y, psi, side="left"):
        """``C + D``, the Fueter derivative of :meth:`I` in ``y``."""
        return self.D(y, psi, side, self.g.prime(y))


# }}}


# {{{ fractional kernel


@dataclass(frozen=True)
class KernelQuad:
    """Rule for the fractional derivative inside the kernel.

    Gauss panels with ``order`` nodes are graded geometrically (``ratio``)
    toward the point of the integration segment closest to the pole, so
    every panel is about as long as its distance to the pole; the number of
    levels adapts to the pole distance up to ``max_levels``.
    """

    order: int = 8
    ratio: float = 0.5
    max_levels: int = 40
    chunk: int = 20_000


#: point evaluations; agrees with the plain path to ~1e-13
DEFAULT_KERNEL_QUAD = KernelQuad(order=12)
#: inside 4D rules, where the volume rule error dominates
BULK_KERNEL_QUAD = KernelQuad(order=8)


@lru_cache(maxsize=1024)
def _pole_rule(alpha: float, split: bool, levels_a: int, levels_b: int, order: int, ratio: float):
    r"""Reference rule for :math:`\int_0^\Lambda \sigma^{\alpha-1} F(\sigma)\,d\sigma` with a pole near :math:`\sigma^*`.

    Returns ``(cA, wA_jacobi, cB, wB, cC, wC)`` in normalized coordinates:

    * ``split=False`` (pole at 0): ``cA`` are Gauss-Jacobi nodes on the
      innermost panel of ``[0, 1]`` (in units of :math:`\Lambda`), ``cB`` the
      Gauss-Legendre nodes of the outer panels; ``cC`` is empty.
    * ``split=True``: ``cA`` are Gauss-Jacobi nodes on ``[0, 1/2]`` and ``cB``
      Gauss-Legendre nodes on ``[1/2, 1]`` graded toward 1 (units of
      :math:`\sigma^*`); ``cC`` are nodes on ``[0, 1]`` graded toward 0 in
      units of :math:`\Lambda - \sigma^*`, offset by :math:`\sigma^*`.
    """
    xj, wj = gauss_jacobi_left(order, alpha - 1.0)
    if not split:
        inner = ratio**levels_a
        cA, wA = inner * xj, inner**alpha * wj
        breaks = ratio ** np.arange(levels_a, -1, -1)
        cB, wB = composite_gauss(tuple(breaks), order)
        return cA, wA, cB, wB, np.empty(0), np.empty(0)
    cA, wA = 0.5 * xj, 0.5**alpha * wj
    breaks = 1.0 - 0.5 * ratio ** np.arange(0, levels_a + 1)
    cB, wB = composite_gauss(tuple(np.concatenate([breaks, [1.0]])), order)
    tail = ratio ** np.arange(levels_b, -1, -1)
    cC, wC = composite_gauss(tuple(np.concatenate([[0.0], tail])), order)
    return cA, wA, cB, wB, cC, wC


def _levels(width: np.ndarray, length: np.ndarray, kq: KernelQuad) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        lv = np.ceil(np.log(np.maximum(width, 1e-300) / np.maximum(length, 1e-300)) / np.log(kq.ratio)) + 1
    return np.clip(np.nan_to_num(lv, nan=0.0), 0, kq.max_levels).astype(int)


def kernel_axis_coefficients(x: np.ndarray, y: np.ndarray, j: int, alpha_j: float, w: WeightFunction,
                             kq: KernelQuad = DEFAULT_KERNEL_QUAD) -> tuple[np.ndarray, np.ndarray]:
    r"""Scalars ``(A, B)`` with :math:`\mathfrak{K}_j = A\bar\psi_j + B\sum_{k \ne j}(y_k - x_k)\bar\psi_k`.

    :math:`\mathfrak{K}_j(x, y)` is the derivative of order :math:`1-\alpha_j`
    in :math:`x_j` of :math:`K_\psi(y - x)` along the axis-:math:`j` line
    through :math:`x`. After an integration by parts it reads, with
    :math:`\sigma = g(x_j) - g(t)`,

    .. math::

        \frac{1}{\Gamma(\alpha_j)}\Big[\Lambda^{\alpha_j-1}\Phi(g(a_j))
        + \int_0^\Lambda \sigma^{\alpha_j-1}\,\Phi'(g(x_j)-\sigma)\,d\sigma\Big],

    where :math:`\Phi(u) = K_\psi(y - x^{(j)}(g^{-1}(u)))`; the gradient of
    the kernel is analytic.
    """
    a = w.a
    xj = float(x[j])
    G = float(w.g(np.array(xj)))
    lam = G - float(w.g(np.array(a)))
    if lam <= 0:
        raise DomainError("kernel needs x_j > a_j on every axis")
    al = alpha_j
    d = y - x
    rho2 = np.sum(d * d, axis=1) - d[:, j] ** 2
    yj = y[:, j]
    tstar = np.clip(yj, a, xj)
    sig_star = np.clip(G - w.g(tstar), 0.0, lam)
    gap = yj - tstar
    width = w.g_prime(tstar) * np.sqrt(rho2 + gap * gap)
    split = sig_star >= width
    la = np.where(split, _levels(width, 0.5 * sig_star, kq), _levels(width, np.full_like(width, lam), kq))
    lb = np.where(split, _levels(width, lam - sig_star, kq), 0)

    S0 = np.empty(y.shape[0])
    S1 = np.empty(y.shape[0])
    S2 = np.empty(y.shape[0])
    keys = np.stack([split.astype(int), la, lb], axis=1)
    uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    for gi, (sp, LA, LB) in enumerate(uniq):
        cA, wA, cB, wB, cC, wC = _pole_rule(al, bool(sp), int(LA), int(LB), kq.order, kq.ratio)
        idx_all = np.nonzero(inverse == gi)[0]
        for start in range(0, idx_all.size, kq.chunk):
            idx = idx_all[start:start + kq.chunk]
            if sp:
                ss = sig_star[idx, None]
                rest = lam - ss
                sig_b = ss * cB
                sig_c = ss + rest * cC
                sigma = np.concatenate([ss * cA, sig_b, sig_c], axis=1)
                ws = np.concatenate([ss**al * wA, ss * wB * sig_b ** (al - 1.0),
                                     rest * wC * sig_c ** (al - 1.0)], axis=1)
            else:
                sig_b = lam * cB
                sigma = np.broadcast_to(np.concatenate([lam * cA, sig_b]), (idx.size, cA.size + cB.size))
                ws = np.broadcast_to(np.concatenate([lam**al * wA, lam * wB * sig_b ** (al - 1.0)]), sigma.shape)
            t = w.g_inv(G - sigma)
            base = ws / w.g_prime(t)
            wj = yj[idx, None] - t
            r2 = rho2[idx, None] + wj * wj
            inv4 = base / (r2 * r2)
            inv6 = inv4 / r2
            S0[idx] = np.sum(inv4, axis=1)
            S1[idx] = np.sum(inv6 * wj, axis=1)
            # S0 - 4 * sum(w_j^2 / r^6) computed without cancellation
            S2[idx] = np.sum(inv6 * (rho2[idx, None] - 3.0 * wj * wj), axis=1)
    wa2 = rho2 + (yj - a) ** 2
    end = lam ** (al - 1.0) / (wa2 * wa2)
    scale = KERNEL_SCALE / gamma(al)
    A = scale * (end * (yj - a) - S2)
    B = scale * (end + 4.0 * S1)
    return A, B


def path_distance(x: np.ndarray, y: np.ndarray, j: int, a_j: float) -> np.ndarray:
    """Distance from nodes ``y`` to the segment from ``x`` down to ``x_j = a_j``."""
    d = y - x
    rho2 = np.sum(d * d, axis=1) - d[:, j] ** 2
    gap = y[:, j] - np.clip(y[:, j], a_j, x[j])
    return np.sqrt(rho2 + gap * gap)


def frac_kernel_array(x: np.ndarray, y: np.ndarray, alpha, g: WeightVector, psi: StructuralSet,
                      kq: KernelQuad = DEFAULT_KERNEL_QUAD) -> np.ndarray:
    """Fractional Borel-Pompeiu kernel at nodes ``y`` (``(M, 4)``), standard coordinates."""
    x = np.asarray(x, dtype=float)
    y = np.atleast_2d(np.asarray(y, dtype=float))
    conj_rows = qconj(psi.matrix)
    d = y - x
    out = np.zeros((y.shape[0], 4))
    for j in range(4):
        A, B = kernel_axis_coefficients(x, y, j, alpha[j], g[j], kq)
        dperp = d.copy()
        dperp[:, j] = 0.0
        out += A[:, None] * conj_rows[j] + B[:, None] * (dperp @ conj_rows)
    return out


def frac_kernel(q, x, y, alpha, g: WeightVector, psi: StructuralSet = PSI_STD, margin: float = 1e-6,
                slices: str = "x", quad: SingularQuadSpec = DEFAULT_QUAD,
                kq: KernelQuad = DEFAULT_KERNEL_QUAD) -> ComplexQuaternion:
    r""":math:`\mathfrak{K}(x, y)`: ``op_P`` in the :math:`x` variable of :math:`K_\psi(y - x)`.

    ``slices="x"`` takes the axis slices through :math:`x` (the kernel of the
    Borel-Pompeiu type identity); ``slices="q"`` takes them through the
    base point ``q`` and evaluates through the generic 1D pipeline.
    """
    alpha = check_orders(alpha)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    base = x if slices == "x" else np.asarray(q, dtype=float)
    if slices not in ("x", "q"):
        raise ValueError(f"slices must be 'x' or 'q', got {slices!r}")
    for j in range(4):
        lineref = base.copy()
        lineref[j] = x[j]
        if path_distance(lineref, y[None, :], j, g[j].a)[0] < margin:
            raise KernelPathSingularity(f"pole lies within {margin:g} of the axis-{j} integration segment")
    if slices == "x":
        return _as_cq(frac_kernel_array(x, y[None, :], alpha, g, psi, kq)[0])
    kern = FieldFn(lambda pts: cauchy_kernel_array(psi, y[None, :], pts), "C1")
    return _as_cq(op_P_array(kern, base, x, alpha, g, quad))


# }}}


# {{{ composition identities


def prop1_residual(f: FieldFn, q, x, alpha, g: WeightVector, psi: StructuralSet = PSI_STD, item: int = 1,
                   side: str = "left", quad: SingularQuadSpec = DEFAULT_QUAD,
                   fd: FDScheme = FDScheme(1e-3, 4)) -> float:
    r"""Residual of one of the three identities linking ``op_I``, ``op_C``, ``op_D`` and ``op_P``.

    1. :math:`D_x\,I = C + D` (``side="right"`` uses the right operators)
    2. :math:`P\,I = \sum_j \text{slice}_j(x_j) + M`
    3. :math:`\bar D_x\,D = \Delta I - \bar D_x\,C`
    """
    alpha = check_orders(alpha)
    q = np.asarray(q, dtype=float)
    x = np.asarray(x, dtype=float)

    def I_at(pts):
        # slices through x repeat coordinates heavily; integrate each value once
        out = 0.0
        for j in range(4):
            t, inv = np.unique(pts[:, j], return_inverse=True)
            out = out + axis_integral(f, q, j, t, alpha[j], g[j], quad)[inv]
        return out

    if item == 1:
        lhs = fueter_array(I_at, x, psi, side, fd)[0]
        rhs = op_C_array(f, q, x, alpha, g, psi, side, quad) + op_D_array(f, q, x, alpha, g, psi, side, quad)
    elif item == 2:
        lhs = op_P_array(FieldFn(I_at, "AC1"), x, x, alpha, g, quad)
        rhs = sum(slice_fn(f, q, j)(np.array(x[j])) for j in range(4)) + m_term_array(f, q, x, alpha, g, quad)
    elif item == 3:
        bar = psi.conjugate()

        def D_at(pts, c_factor=False):
            out = 0.0
            for j in range(4):
                v = axis_derivative(f, q, j, pts[:, j], alpha[j], g[j], quad)
                if c_factor:
                    v = v * (g[j].g_prime(pts[:, j]) - 1.0)[:, None]
                out = out + (qmul(psi.matrix[j], v) if side == "left" else qmul(v, psi.matrix[j]))
            return out

        def C_at(pts):
            return D_at(pts, c_factor=True)

        lhs = fueter_array(D_at, x, bar, side, fd)[0]
        rhs = laplacian_array(I_at, x, fd)[0] - fueter_array(C_at, x, bar, side, fd)[0]
    else:
        raise ValueError(f"item must be 1, 2 or 3, got {item!r}")
    return float(np.linalg.norm(lhs - rhs))


# }}}


# {{{ boundary/volume checks


@dataclass(frozen=True)
class FracQuad:
    """Resolutions of the fractional integral identities.

    ``n_volume`` / ``n_face`` drive the 4D and 3D rules (radial nodes of
    the singular rules, nodes per axis of the tensor rules); angular
    Duffy directions use half as many nodes.
    """

    n_volume: int = 12
    n_face: int = 12
    one_d: SingularQuadSpec = DEFAULT_QUAD
    table_degree: int = 32
    kernel: KernelQuad = BULK_KERNEL_QUAD

    @property
    def n_angular(self) -> int:
        return max(3, self.n_volume // 2)

    @property
    def n_face_angular(self) -> int:
        return max(3, self.n_face // 2)


def _grading(alpha) -> float:
    return float(np.clip(1.0 / min(alpha), 2.0, 4.0))


def _tensor_rules(faces, quad: FracQuad, grading: float) -> list[NodeRule]:
    return [face_rule(face, quad.n_face, "graded", grading) for face in faces]


@dataclass(frozen=True)
class FracBPResult:
    lhs: np.ndarray
    expected: np.ndarray
    residual: float
    inside: bool
    scale: float
    conventions: dict = field(default_factory=lambda: dict(CONVENTIONS))

    @property
    def relative(self) -> float:
        return self.residual / self.scale if self.scale > 0 else self.residual


def frac_stokes_residual(f: FieldFn, ttf: FieldFn, q, box: Box4, alpha, beta, g: WeightVector,
                         h: WeightVector, psi: StructuralSet = PSI_STD, quad: FracQuad = FracQuad(),
                         relative: bool = True) -> float:
    r"""Residual of the Stokes type formula for :math:`I_h[\mathfrak{f}]` and :math:`I_g[f]`.

    With ``relative=True`` the residual is divided by the magnitude of the
    boundary term (or returned as is when that vanishes).
    """
    alpha, beta = check_orders(alpha), check_orders(beta)
    q = np.asarray(q, dtype=float)
    Fg = FracField(f, q, alpha, g, quad.one_d, quad.table_degree)
    Fh = FracField(ttf, q, beta, h, quad.one_d, quad.table_degree)
    grading = _grading(alpha + beta)
    faces = enumerate_faces(box, psi)
    boundary = surface_integral(faces, Fh.I, Fg.I, rules=_tensor_rules(faces, quad, grading))
    grid = volume_grid(box, quad.n_volume, "graded", grading=grading)

    def integrand(y):
        return qmul(Fh.I(y), Fg.CD(y, psi, "left")) + qmul(Fh.CD(y, psi, "right"), Fg.I(y))

    volume = volume_integral(box, integrand, grid)
    res = float(np.linalg.norm(boundary - volume))
    scale = float(np.linalg.norm(boundary))
    return res / scale if relative and scale > 0 else res


def _exterior_rules(box, faces, quad, grading):
    return _tensor_rules(faces, quad, grading), volume_grid(box, quad.n_volume, "graded", grading=grading)


def _near_face_rules(faces, x, quad: FracQuad, grading: float) -> list[NodeRule]:
    # the kernel peaks at the projection of x on every face, lower or upper
    return [singular_face_rule(face, x, quad.n_face, quad.n_face_angular, grading, grading) for face in faces]


def _bp_rules(box: Box4, psi: StructuralSet, x: np.ndarray, quad: FracQuad, grading: float):
    faces = enumerate_faces(box, psi)
    if not box.contains(x):
        face_rules, vol_rule = _exterior_rules(box, faces, quad, grading)
        return faces, face_rules, vol_rule
    face_rules = _near_face_rules(faces, x, quad, grading)
    vol_rule = singular_volume_rule(box, x, quad.n_volume, quad.n_angular, grading, grading,
                                    segment_axes=(0, 1, 2, 3), segment_grading=grading)
    return faces, face_rules, vol_rule


def _kernels(Fg, Fh, x, psi, quad):
    kg = (lambda y: frac_kernel_array(x, y, Fg.alpha, Fg.g, psi, quad.kernel)) if Fg is not None else None
    kh = (lambda y: frac_kernel_array(x, y, Fh.alpha, Fh.g, psi, quad.kernel)) if Fh is not None else None
    return kg, kh


def _bp_grading(Fg, Fh) -> float:
    return _grading((Fg.alpha if Fg is not None else ()) + (Fh.alpha if Fh is not None else ()))


def _frac_bp_parts(Fg: Optional[FracField], Fh: Optional[FracField], box: Box4, psi: StructuralSet,
                   x: np.ndarray, quad: FracQuad, drop_D: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Boundary term and volume term of the fractional Borel-Pompeiu identity."""
    faces, face_rules, vol_rule = _bp_rules(box, psi, x, quad, _bp_grading(Fg, Fh))
    kg, kh = _kernels(Fg, Fh, x, psi, quad)

    boundary = np.zeros(4)
    if Fg is not None:
        boundary = boundary + surface_integral(faces, kg, Fg.I, rules=face_rules)
    if Fh is not None:
        boundary = boundary + surface_integral(faces, Fh.I, kh, rules=face_rules)

    def integrand(y):
        out = 0.0
        if Fg is not None:
            h_g = Fg.C(y, psi, "left") if drop_D else Fg.CD(y, psi, "left")
            out = out + qmul(kg(y), h_g)
        if Fh is not None:
            h_h = Fh.C(y, psi, "right") if drop_D else Fh.CD(y, psi, "right")
            out = out + qmul(h_h, kh(y))
        return out

    return np.real(boundary), np.real(volume_integral(box, integrand, vol_rule))


def dropped_volume_bound(f: Optional[FieldFn], ttf: Optional[FieldFn], q, box: Box4, alpha, beta,
                         g: WeightVector, h: WeightVector, psi: StructuralSet, x,
                         quad: FracQuad = FracQuad()) -> float:
    r""":math:`\int_J |\mathfrak{K}_g D_g f| + |D_{r,h} \mathfrak{f}\, \mathfrak{K}_h|` on the same rule.

    Bounds the gap between :func:`cauchy_type_check` and :func:`frac_bp_eval`.
    """
    alpha, beta = check_orders(alpha), check_orders(beta)
    q = np.asarray(q, dtype=float)
    x = np.asarray(x, dtype=float)
    Fg = FracField(f, q, alpha, g, quad.one_d, quad.table_degree) if f is not None else None
    Fh = FracField(ttf, q, beta, h, quad.one_d, quad.table_degree) if ttf is not None else None
    if Fg is None and Fh is None:
        return 0.0
    _, _, rule = _bp_rules(box, psi, x, quad, _bp_grading(Fg, Fh))
    kg, kh = _kernels(Fg, Fh, x, psi, quad)
    total = np.zeros(rule.nodes.shape[0])
    if Fg is not None:
        total = total + np.linalg.norm(qmul(kg(rule.nodes), Fg.D(rule.nodes, psi, "left")), axis=-1)
    if Fh is not None:
        total = total + np.linalg.norm(qmul(Fh.D(rule.nodes, psi, "right"), kh(rule.nodes)), axis=-1)
    return float(np.abs(rule.weights) @ total)


def _expected(f, ttf, q, x, alpha, beta, g, h, quad: SingularQuadSpec) -> np.ndarray:
    out = np.zeros(4)
    for fn, al, w in ((f, alpha, g), (ttf, beta, h)):
        if fn is None:
            continue
        out = out + sum(slice_fn(fn, q, j)(np.array(x[j])) for j in range(4))
        out = out + m_term_array(fn, q, x, al, w, quad)
    return np.real(out)


def _interior_scale(f, ttf, q, box, alpha, beta, g, h, quad) -> float:
    return float(np.linalg.norm(_expected(f, ttf, q, box.center, alpha, beta, g, h, quad)))


def frac_bp_eval(f: Optional[FieldFn], ttf: Optional[FieldFn], q, box: Box4, alpha, beta, g: WeightVector,
                 h: WeightVector, psi: StructuralSet, x, quad: FracQuad = FracQuad()) -> FracBPResult:
    r"""Both sides of the fractional Borel-Pompeiu identity at ``x``.

    ``f`` or ``ttf`` may be ``None`` (the zero field). Outside the box the
    expected value is 0 and ``scale`` is the magnitude of the interior
    expected value at the box centre.
    """
    alpha, beta = check_orders(alpha), check_orders(beta)
    q = np.asarray(q, dtype=float)
    x = np.asarray(x, dtype=float)
    if np.any(x <= np.array(box.a)):
        raise DomainError("the fractional kernel needs x_k > a_k on every axis")
    Fg = FracField(f, q, alpha, g, quad.one_d, quad.table_degree) if f is not None else None
    Fh = FracField(ttf, q, beta, h, quad.one_d, quad.table_degree) if ttf is not None else None
    inside = box.contains(x)
    if Fg is None and Fh is None:
        zero = np.zeros(4)
        return FracBPResult(zero, zero, 0.0, inside, 0.0)
    boundary, volume = _frac_bp_parts(Fg, Fh, box, psi, x, quad)
    lhs = boundary - volume
    if inside:
        expected = _expected(f, ttf, q, x, alpha, beta, g, h, quad.one_d)
        scale = float(np.linalg.norm(expected))
    else:
        expected = np.zeros(4)
        scale = _interior_scale(f, ttf, q, box, alpha, beta, g, h, quad.one_d)
    return FracBPResult(lhs, expected, float(np.linalg.norm(lhs - expected)), inside, scale)


def cauchy_type_check(f: Optional[FieldFn], ttf: Optional[FieldFn], q, box: Box4, alpha, beta,
                      g: WeightVector, h: WeightVector, psi: StructuralSet, x, quad: FracQuad = FracQuad(),
                      tol: float = 1e-8, samples: int = 3) -> float:
    r"""Residual of the identity with the :math:`D`-volume terms dropped.

    The premise (``op_D`` of ``f`` from the left and of ``ttf`` from the
    right vanish) is checked on a ``samples^4`` grid first; ``tol=inf``
    skips the check.
    """
    alpha, beta = check_orders(alpha), check_orders(beta)
    q = np.asarray(q, dtype=float)
    x = np.asarray(x, dtype=float)
    Fg = FracField(f, q, alpha, g, quad.one_d, quad.table_degree) if f is not None else None
    Fh = FracField(ttf, q, beta, h, quad.one_d, quad.table_degree) if ttf is not None else None
    lo, hi = box.lo, box.hi
    t = (np.arange(samples) + 0.5) / samples
    grid = np.stack(np.meshgrid(*[lo[k] + (hi[k] - lo[k]) * t for k in range(4)], indexing="ij"), -1).reshape(-1, 4)
    for F, side in ((Fg, "left"), (Fh, "right")):
        if F is None or not np.isfinite(tol):
            continue
        worst = float(np.max(np.linalg.norm(F.D(grid, psi, side), axis=-1)))
        if worst > tol:
            raise HypothesisNotMet(f"fractional Fueter derivative does not vanish (max {worst:.3e} > {tol:g})")
    if Fg is None and Fh is None:
        return 0.0
    boundary, volume = _frac_bp_parts(Fg, Fh, box, psi, x, quad, drop_D=True)
    expected = _expected(f, ttf, q, x, alpha, beta, g, h, quad.one_d) if box.contains(x) else np.zeros(4)
    return float(np.linalg.norm(boundary - volume - expected))


def second_order_bp_check(f: FieldFn, q, box: Box4, alpha, g: WeightVector, psi: StructuralSet, x,
                          quad: FracQuad = FracQuad()) -> FracBPResult:
    r"""Borel-Pompeiu formula for :math:`H = \sum_j (g_j')^{-1} I^{1-\alpha_j}[\text{slice}_j]`.

    Needs :math:`g_j''`: the Fueter derivative of :math:`H` is
    :math:`D^{\vec\alpha}_g[f] - \sum_j \psi_j (g_j''/g_j'^2) I^{1-\alpha_j}[\text{slice}_j]`.
    """
    alpha = check_orders(alpha)
    if any(w.g_second is None for w in g.g):
        raise MissingSecondDerivative("every weight needs a second derivative")
    q = np.asarray(q, dtype=float)
    x = np.asarray(x, dtype=float)
    F = FracField(f, q, alpha, g, quad.one_d, quad.table_degree)
    rows = psi.matrix

    def H(y):
        gp = g.prime(y)
        return sum(F.axis_I(j, y) / gp[:, j, None] for j in range(4))

    def curvature(y):
        out = 0.0
        for j in range(4):
            w = g[j]
            c = w.g_second(y[:, j]) / w.g_prime(y[:, j]) ** 2
            out = out + qmul(rows[j], F.axis_I(j, y) * c[:, None])
        return out

    inside = box.contains(x)
    grading = _grading(alpha)
    faces = enumerate_faces(box, psi)
    if inside:
        face_rules = _near_face_rules(faces, x, quad, grading)
        vol_rule = singular_volume_rule(box, x, quad.n_volume, quad.n_angular, grading, grading)
    else:
        face_rules, vol_rule = _exterior_rules(box, faces, quad, grading)
    kern = lambda y: cauchy_kernel_array(psi, y, x)  # noqa: E731
    boundary = surface_integral(faces, kern, H, rules=face_rules)
    volume = volume_integral(box, lambda y: qmul(kern(y), curvature(y) - F.D(y, psi, "left")), vol_rule)
    lhs = np.real(boundary + volume)

    def H_point(p):
        return np.real(H(np.asarray(p, dtype=float)[None, :])[0])

    if inside:
        expected = H_point(x)
        scale = float(np.linalg.norm(expected))
    else:
        expected = np.zeros(4)
        scale = float(np.linalg.norm(H_point(box.center)))
    return FracBPResult(lhs, expected, float(np.linalg.norm(lhs - expected)), inside, scale)


# }}}


# {{{ Hadamard arrangement


def _hadamard_integral(phi, a: float, x: np.ndarray, order: float, quad: SingularQuadSpec) -> np.ndarray:
    r""":math:`\frac{1}{\Gamma(\beta)}\int_a^x (\ln x - \ln y)^{\beta - 1}\varphi(y)\,dy/y` via :math:`y = x (a/x)^\tau`."""
    tau, omega = quad.reference_rule(order)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    ell = np.log(x / a)
    y = x[:, None] * np.exp(-ell[:, None] * tau[None, :])
    vals = phi(y)
    s = np.einsum("xn...,n->x...", vals, omega)
    return s * (ell**order / gamma(order))[:, None]


def hadamard_ops(f: FieldFn, q, x, alpha, which: str, box: Box4, psi: StructuralSet = PSI_STD,
                 quad: SingularQuadSpec = DEFAULT_QUAD) -> ComplexQuaternion:
    r"""Operators for :math:`\vec g = \ln` written with :math:`x_j\,\partial/\partial x_j`.

    ``which`` is ``"I"``, ``"D"``, ``"D_r"`` or ``"C"``; lower limits are the
    box corner, which must lie in :math:`(0, \infty)^4`.
    """
    alpha = check_orders(alpha)
    q = np.asarray(q, dtype=float)
    x = np.asarray(x, dtype=float)
    if any(v <= 0 for v in box.a):
        raise DomainError("Hadamard operators need a box inside (0, inf)^4")
    rows = psi.matrix

    def integral(j, t):
        return _hadamard_integral(slice_fn(f, q, j), box.a[j], t, 1.0 - alpha[j], quad)

    def x_d_dx(j):
        step = quad.fd_step if quad.fd_step is not None else (box.b[j] - box.a[j]) * 1e-4
        if x[j] - box.a[j] <= 2 * step:
            raise DomainError("point too close to the lower face for the difference stencil")
        v = integral(j, x[j] + step * np.array([-2.0, -1.0, 1.0, 2.0]))
        if quad.richardson:
            d = (4.0 * (v[2] - v[1]) / (2 * step) - (v[3] - v[0]) / (4 * step)) / 3.0
        else:
            d = (v[2] - v[1]) / (2 * step)
        return x[j] * d

    if which == "I":
        out = sum(integral(j, x[j])[0] for j in range(4))
    elif which in ("D", "D_r", "C"):
        out = 0.0
        for j in range(4):
            d = x_d_dx(j)
            if which == "C":
                d = (1.0 - x[j]) * d / x[j]
            out = out + (qmul(d, rows[j]) if which == "D_r" else qmul(rows[j], d))
    else:
        raise ValueError(f"which must be one of I, D, D_r, C; got {which!r}")
    return _as_cq(out)


# }}}
