r"""Plain Riemann-Liouville operators (:math:`\vec g = \mathrm{id}`), coded independently.

Nothing here goes through :mod:`fracfueter.frac1d`: integrals use QUADPACK's
algebraic-weight rule and derivatives are integrated by parts,

.. math::

    D^{\alpha}\varphi(x) = \frac{\varphi(a)(x-a)^{-\alpha}}{\Gamma(1-\alpha)} + I^{1-\alpha}\varphi'(x),

with :math:`\varphi'` taken from analytic gradients. Used as the second path
in dual-path comparisons.
"""

from __future__ import annotations

import math
import warnings
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import IntegrationWarning, quad

from fracfueter.fueter import KERNEL_SCALE, FieldFn
from fracfueter.quaternion import PSI_STD, StructuralSet, qconj, qmul

_EPSABS = 1e-15
_EPSREL = 1e-12


def rl_integral(phi: Callable[[float], np.ndarray], a: float, x: float, order: float) -> np.ndarray:
    r""":math:`\frac{1}{\Gamma(\beta)}\int_a^x (x-t)^{\beta-1}\varphi(t)\,dt` for a 4-vector valued ``phi``."""
    if x <= a:
        return np.zeros(4)
    out = np.empty(4)
    with warnings.catch_warnings():
        # the round-off notice fires once the requested accuracy is at machine level
        warnings.simplefilter("ignore", IntegrationWarning)
        for c in range(4):
            val, _ = quad(lambda t: float(phi(t)[c]), a, x, weight="alg", wvar=(0.0, order - 1.0),
                          epsabs=_EPSABS, epsrel=_EPSREL, limit=200)
            out[c] = val
    return out / math.gamma(order)


def rl_derivative(phi: Callable[[float], np.ndarray], dphi: Callable[[float], np.ndarray],
                  a: float, x: float, order: float) -> np.ndarray:
    """Left RL derivative of ``phi`` with ``dphi`` its derivative."""
    head = phi(a) * (x - a) ** (-order) / math.gamma(1.0 - order)
    return head + rl_integral(dphi, a, x, 1.0 - order)


def _slice(f: FieldFn, base: np.ndarray, j: int):
    def value(t):
        p = base.copy()
        p[j] = t
        return np.asarray(f.fn(p[None, :]))[0]

    def deriv(t):
        if f.grad is None:
            raise ValueError("reference path needs an analytic gradient")
        p = base.copy()
        p[j] = t
        return np.asarray(f.grad(p[None, :]))[0, j]

    return value, deriv


def plain_I(f: FieldFn, q, x, alpha, a) -> np.ndarray:
    q, x = np.asarray(q, float), np.asarray(x, float)
    return sum(rl_integral(_slice(f, q, j)[0], a[j], x[j], 1.0 - alpha[j]) for j in range(4))


def _plain_derivs(f, q, x, orders, a):
    q, x = np.asarray(q, float), np.asarray(x, float)
    return [rl_derivative(*_slice(f, q, j), a[j], x[j], orders[j]) for j in range(4)]


def plain_D(f: FieldFn, q, x, alpha, a, psi: StructuralSet = PSI_STD, side: str = "left") -> np.ndarray:
    rows = psi.matrix
    vals = _plain_derivs(f, q, x, alpha, a)
    if side == "left":
        return sum(qmul(rows[j], vals[j]) for j in range(4))
    return sum(qmul(vals[j], rows[j]) for j in range(4))


def plain_P(f: FieldFn, q, x, alpha, a) -> np.ndarray:
    return sum(_plain_derivs(f, q, x, [1.0 - al for al in alpha], a))


def plain_M(f: FieldFn, q, x, alpha, a) -> np.ndarray:
    q, x = np.asarray(q, float), np.asarray(x, float)
    ints = [rl_integral(_slice(f, q, k)[0], a[k], x[k], 1.0 - alpha[k]) for k in range(4)]
    facs = [(x[j] - a[j]) ** (alpha[j] - 1.0) / math.gamma(alpha[j]) for j in range(4)]
    return sum(ints[k] * facs[j] for j in range(4) for k in range(4) if k != j)


def _kernel(psi: StructuralSet, w: np.ndarray) -> np.ndarray:
    r2 = float(w @ w)
    return KERNEL_SCALE * qconj(w @ psi.matrix) / r2**2


def _kernel_grad(psi: StructuralSet, w: np.ndarray, m: int) -> np.ndarray:
    r2 = float(w @ w)
    conj_rows = qconj(psi.matrix)
    return KERNEL_SCALE * (conj_rows[m] / r2**2 - 4.0 * w[m] * qconj(w @ psi.matrix) / r2**3)


def plain_kernel(x, y, alpha, a, psi: StructuralSet = PSI_STD) -> np.ndarray:
    """Order ``1 - alpha_j`` derivatives in ``x_j`` of ``K(y - x)`` along lines through ``x``, summed."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    out = np.zeros(4)
    for j in range(4):
        def point(t, j=j):
            p = x.copy()
            p[j] = t
            return p

        phi = lambda t, j=j: _kernel(psi, y - point(t))  # noqa: E731
        dphi = lambda t, j=j: -_kernel_grad(psi, y - point(t), j)  # noqa: E731
        out = out + rl_derivative(phi, dphi, a[j], x[j], 1.0 - alpha[j])
    return out


def plain_ops(f: FieldFn, q, x, alpha, a: Sequence[float], psi: StructuralSet = PSI_STD) -> dict[str, np.ndarray]:
    """All plain operators at one point, keyed like the generic ones."""
    return {
        "I": plain_I(f, q, x, alpha, a),
        "D": plain_D(f, q, x, alpha, a, psi, "left"),
        "D_r": plain_D(f, q, x, alpha, a, psi, "right"),
        "C": np.zeros(4),
        "P": plain_P(f, q, x, alpha, a),
        "M": plain_M(f, q, x, alpha, a),
    }
