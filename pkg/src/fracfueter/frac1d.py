r"""Riemann-Liouville fractional integrals and derivatives with respect to a weight.

For a monotone weight :math:`g` on :math:`[a, b]` and :math:`0 < \alpha < 1`,

.. math::

    (I^\alpha_{a,g} f)(x) = \frac{1}{\Gamma(\alpha)} \int_a^x
        f(y) g'(y) (g(x) - g(y))^{\alpha - 1} \,dy,
    \qquad
    (D^\alpha_{a,g} f)(x) = \frac{1}{g'(x)} \frac{d}{dx} (I^{1-\alpha}_{a,g} f)(x).

Quadrature is carried out after the substitution :math:`u = g(y)`, which
turns the weight into a pure algebraic singularity at :math:`u = g(x)` and
removes :math:`g'` from the integrand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from fracfueter.errors import DerivativeStepError, DomainError, QuadratureFailure
from fracfueter.quadrature import singular_reference_rule

ArrayFn = Callable[[np.ndarray], np.ndarray]

#: Points used to check monotonicity of a weight at construction.
VALIDATION_POINTS = 257
#: Chunk size (number of x values times nodes) for vectorized evaluation.
_CHUNK = 2_000_000


def check_order(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"fractional order must lie in (0, 1): {alpha}")
    return alpha


def gamma(z: float) -> float:
    return math.gamma(z)


# {{{ weight functions


def _monotone_inverse(g: ArrayFn, g_prime: ArrayFn, lo: float, hi: float) -> ArrayFn:
    """Vectorized inverse of an increasing function by safeguarded Newton."""

    def inv(u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        left = np.full(u.shape, lo)
        right = np.full(u.shape, hi)
        glo, ghi = g(np.array(lo)), g(np.array(hi))
        y = lo + (hi - lo) * np.clip((u - glo) / (ghi - glo), 0.0, 1.0)
        for _ in range(100):
            r = g(y) - u
            left = np.where(r < 0, y, left)
            right = np.where(r > 0, y, right)
            step = y - r / g_prime(y)
            bad = (step <= left) | (step >= right) | ~np.isfinite(step)
            ynew = np.where(bad, 0.5 * (left + right), step)
            if np.all(np.abs(ynew - y) <= 4e-16 * np.maximum(1.0, np.abs(y))):
                return ynew
            y = ynew
        return y

    return inv


@dataclass(frozen=True)
class WeightFunction:
    r"""Monotone weight :math:`g` on :math:`[a, b]` with its derivatives.

    Use the named constructors (:meth:`identity`, :meth:`log`, :meth:`affine`,
    :meth:`power`, :meth:`custom`); they validate :math:`g' > 0` on a grid.
    """

    g: ArrayFn
    g_prime: ArrayFn
    a: float
    b: float
    kind: str = "custom"
    params: tuple = ()
    g_second: Optional[ArrayFn] = None
    g_inv: Optional[ArrayFn] = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if not self.a < self.b:
            raise DomainError(f"weight domain is empty: [{self.a}, {self.b}]")
        if self.kind == "log" and not self.a > 0:
            raise DomainError(f"log weight needs a > 0, got a = {self.a}")
        t = np.linspace(self.a, self.b, VALIDATION_POINTS)
        gp = np.asarray(self.g_prime(t), dtype=float)
        if not np.all(np.isfinite(gp)) or not np.all(gp > 0):
            raise DomainError(f"weight '{self.kind}' is not strictly increasing on [{self.a}, {self.b}]")
        if self.g_inv is None:
            object.__setattr__(self, "g_inv", _monotone_inverse(self.g, self.g_prime, self.a, self.b))

    # named constructors

    @classmethod
    def identity(cls, a: float, b: float) -> WeightFunction:
        return cls(
            g=lambda x: np.asarray(x, dtype=float),
            g_prime=lambda x: np.ones_like(np.asarray(x, dtype=float)),
            g_second=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
            g_inv=lambda u: np.asarray(u, dtype=float),
            a=float(a), b=float(b), kind="identity",
        )

    @classmethod
    def log(cls, a: float, b: float) -> WeightFunction:
        return cls(
            g=np.log,
            g_prime=lambda x: 1.0 / np.asarray(x, dtype=float),
            g_second=lambda x: -1.0 / np.asarray(x, dtype=float) ** 2,
            g_inv=np.exp,
            a=float(a), b=float(b), kind="log",
        )

    @classmethod
    def affine(cls, a: float, b: float, slope: float = 2.0, shift: float = 0.5) -> WeightFunction:
        if not slope > 0:
            raise DomainError(f"affine weight needs a positive slope, got {slope}")
        return cls(
            g=lambda x: slope * np.asarray(x, dtype=float) + shift,
            g_prime=lambda x: np.full_like(np.asarray(x, dtype=float), slope),
            g_second=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
            g_inv=lambda u: (np.asarray(u, dtype=float) - shift) / slope,
            a=float(a), b=float(b), kind="affine", params=(float(slope), float(shift)),
        )

    @classmethod
    def power(cls, a: float, b: float, p: float = 2.0) -> WeightFunction:
        if not p > 0:
            raise DomainError(f"power weight needs p > 0, got {p}")
        return cls(
            g=lambda x: np.asarray(x, dtype=float) ** p,
            g_prime=lambda x: p * np.asarray(x, dtype=float) ** (p - 1.0),
            g_second=lambda x: p * (p - 1.0) * np.asarray(x, dtype=float) ** (p - 2.0),
            g_inv=lambda u: np.asarray(u, dtype=float) ** (1.0 / p),
            a=float(a), b=float(b), kind="power", params=(float(p),),
        )

    @classmethod
    def custom(cls, g: ArrayFn, g_prime: ArrayFn, a: float, b: float,
               g_second: Optional[ArrayFn] = None, g_inv: Optional[ArrayFn] = None) -> WeightFunction:
        return cls(g=g, g_prime=g_prime, g_second=g_second, g_inv=g_inv, a=float(a), b=float(b))

    @classmethod
    def from_spec(cls, kind: str, a: float, b: float, **params) -> WeightFunction:
        """Build a named weight from its kind string (used by configuration files)."""
        if kind in ("identity", "id"):
            return cls.identity(a, b)
        if kind in ("log", "ln"):
            return cls.log(a, b)
        if kind == "affine":
            return cls.affine(a, b, **params)
        if kind == "power":
            return cls.power(a, b, **params)
        raise DomainError(f"unknown weight kind: {kind!r}")

    def restrict(self, a: float, b: float) -> WeightFunction:
        """Same weight on a different interval (re-validated)."""
        if self.kind == "custom":
            return WeightFunction.custom(self.g, self.g_prime, a, b, self.g_second, None)
        return WeightFunction.from_spec(self.kind, a, b, **self._param_dict())

    def _param_dict(self) -> dict:
        if self.kind == "affine":
            return {"slope": self.params[0], "shift": self.params[1]}
        if self.kind == "power":
            return {"p": self.params[0]}
        return {}


# }}}


# {{{ quadrature specification


@dataclass(frozen=True)
class SingularQuadSpec:
    """Resolution of the weakly singular 1D quadrature.

    ``grading=None`` selects ``2 / alpha`` clipped to ``[1, 6]``;
    ``fd_step=None`` selects ``(b - a) * 1e-4`` of the weight's interval.
    """

    node_count: int = 512
    grading: Optional[float] = None
    fd_step: Optional[float] = None
    richardson: bool = True
    panel_order: int = 16

    def __post_init__(self) -> None:
        if self.node_count < 8:
            raise ValueError(f"node_count must be at least 8, got {self.node_count}")
        if self.grading is not None and self.grading < 1:
            raise ValueError(f"grading exponent must be >= 1, got {self.grading}")
        if self.fd_step is not None and not self.fd_step > 0:
            raise ValueError(f"fd_step must be positive, got {self.fd_step}")

    def grading_for(self, alpha: float) -> float:
        if self.grading is not None:
            return float(self.grading)
        return float(min(6.0, max(1.0, 2.0 / alpha)))

    def step_for(self, w: WeightFunction) -> float:
        return self.fd_step if self.fd_step is not None else (w.b - w.a) * 1e-4

    def reference_rule(self, alpha: float) -> tuple[np.ndarray, np.ndarray]:
        return singular_reference_rule(
            float(alpha), self.node_count, self.grading_for(alpha), self.panel_order
        )


DEFAULT_QUAD = SingularQuadSpec()


# }}}


# {{{ operators


def _apply(f: ArrayFn, y: np.ndarray) -> np.ndarray:
    values = np.asarray(f(y))
    if values.shape[: y.ndim] != y.shape:
        raise QuadratureFailure(
            f"integrand returned shape {values.shape} for input of shape {y.shape}"
        )
    return values


def _integral_unchecked(f: ArrayFn, w: WeightFunction, a: float, x: np.ndarray,
                        alpha: float, quad: SingularQuadSpec) -> np.ndarray:
    tau, omega = quad.reference_rule(alpha)
    x = np.asarray(x, dtype=float)
    flat = x.ravel()
    ga = float(w.g(np.array(a)))
    out = None
    chunk = max(1, _CHUNK // tau.size)
    for start in range(0, flat.size, chunk):
        xs = flat[start:start + chunk]
        G = w.g(xs)
        lam = G - ga
        u = G[:, None] - lam[:, None] * tau[None, :]
        values = _apply(f, w.g_inv(u))
        if not np.all(np.isfinite(values)):
            raise QuadratureFailure("non-finite integrand value in fractional integral")
        s = np.einsum("xn...,n->x...", values, omega)
        scale = np.where(lam > 0, np.abs(lam) ** alpha, 0.0) / gamma(alpha)
        res = s * scale.reshape(scale.shape + (1,) * (s.ndim - 1))
        if out is None:
            out = np.empty((flat.size,) + res.shape[1:], dtype=res.dtype)
        out[start:start + chunk] = res
    return out.reshape(x.shape + out.shape[1:])


def _check_interval(w: WeightFunction, a: float, x: np.ndarray) -> None:
    tol = 1e-12 * (w.b - w.a)
    if a < w.a - tol or a > w.b + tol:
        raise DomainError(f"lower limit {a} outside weight domain [{w.a}, {w.b}]")
    if np.any(x < a - tol) or np.any(x > w.b + tol):
        raise DomainError(f"evaluation point outside [{a}, {w.b}]")


def frac_integral(f: ArrayFn, w: WeightFunction, a: float, x, alpha: float,
                  quad: SingularQuadSpec = DEFAULT_QUAD) -> np.ndarray:
    """Left fractional integral of order ``alpha`` of ``f`` with respect to ``w``.

    ``f`` must be vectorized: it receives an array of abscissae and returns
    values of the same shape, optionally with trailing component axes (for
    quaternion-valued integrands). ``x`` may be a scalar or an array.
    """
    alpha = check_order(alpha)
    x = np.asarray(x, dtype=float)
    _check_interval(w, a, x)
    return _integral_unchecked(f, w, a, x, alpha, quad)


def _stencil_derivative(F: Callable[[np.ndarray], np.ndarray], x: np.ndarray, h: float,
                        richardson: bool) -> np.ndarray:
    if richardson:
        offsets = np.array([-2.0, -1.0, 1.0, 2.0]) * h
    else:
        offsets = np.array([-1.0, 1.0]) * h
    vals = F(x[..., None] + offsets)
    extra = vals.ndim - x.ndim - 1
    take = lambda i: vals[(Ellipsis, i) + (slice(None),) * extra]  # noqa: E731
    if richardson:
        d1 = (take(2) - take(1)) / (2 * h)
        d2 = (take(3) - take(0)) / (4 * h)
        return (4.0 * d1 - d2) / 3.0
    return (take(1) - take(0)) / (2 * h)


def frac_derivative(f: ArrayFn, w: WeightFunction, a: float, x, alpha: float,
                    quad: SingularQuadSpec = DEFAULT_QUAD) -> np.ndarray:
    r"""Left fractional derivative :math:`(1/g') \, d/dx \, I^{1-\alpha} f`.

    The outer derivative is a central difference with one Richardson level.
    The stencil may reach past ``w.b`` by a couple of steps; ``f`` and the
    weight must be evaluable there.
    """
    alpha = check_order(alpha)
    x = np.asarray(x, dtype=float)
    _check_interval(w, a, x)
    if np.any(x <= a):
        raise DomainError("fractional derivative is singular at the lower limit")
    h = quad.step_for(w)
    reach = 2 * h if quad.richardson else h
    if np.any(x - a <= reach):
        raise DerivativeStepError(
            f"finite-difference stencil (step {h:g}) leaves the interval at x - a = {np.min(x - a):g}"
        )
    integral = lambda t: _integral_unchecked(f, w, a, t, 1.0 - alpha, quad)  # noqa: E731
    d = _stencil_derivative(integral, x, h, quad.richardson)
    gp = np.asarray(w.g_prime(x), dtype=float)
    return d / gp.reshape(gp.shape + (1,) * (d.ndim - gp.ndim))


def power_rule_oracle(p: float, alpha: float, w: WeightFunction, a: float, x: float,
                      kind: str = "integral") -> float:
    r"""Closed form for :math:`f = (g - g(a))^p`.

    ``kind="integral"``: :math:`\Gamma(p+1)/\Gamma(p+1+\alpha)\,(g(x)-g(a))^{p+\alpha}`;
    ``kind="derivative"``: :math:`\Gamma(p+1)/\Gamma(p+1-\alpha)\,(g(x)-g(a))^{p-\alpha}`.
    """
    alpha = check_order(alpha)
    if p < 0:
        raise ValueError(f"power must be nonnegative, got {p}")
    lam = float(w.g(np.array(x)) - w.g(np.array(a)))
    if kind == "integral":
        if lam == 0.0:
            return 0.0
        return math.gamma(p + 1) / math.gamma(p + 1 + alpha) * lam ** (p + alpha)
    if kind == "derivative":
        return math.gamma(p + 1) / math.gamma(p + 1 - alpha) * lam ** (p - alpha)
    raise ValueError(f"unknown oracle kind: {kind!r}")


def semigroup_residual(f: ArrayFn, w: WeightFunction, a: float, alpha: float, sample_points,
                       quad: SingularQuadSpec = DEFAULT_QUAD) -> float:
    """Max over ``sample_points`` of ``|D^alpha I^alpha f - f|``."""
    alpha = check_order(alpha)
    pts = np.atleast_1d(np.asarray(sample_points, dtype=float))
    if np.any(pts <= a) or np.any(pts >= w.b):
        raise DomainError("semigroup sample points must lie strictly inside (a, b)")
    inner = lambda t: _integral_unchecked(f, w, a, t, alpha, quad)  # noqa: E731
    worst = 0.0
    for x in pts:
        d = frac_derivative(inner, w, a, x, alpha, quad)
        diff = np.abs(np.asarray(d) - np.asarray(f(np.array(x))))
        worst = max(worst, float(np.max(diff)))
    return worst


# }}}
