"""One-dimensional reference rules and their tensor/Duffy combinations.

Every rule here is returned as ``(nodes, weights)`` on a reference interval
and is cached, so callers only pay for affine maps.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre


@lru_cache(maxsize=None)
def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre rule on ``[0, 1]``."""
    x, w = roots_legendre(n)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def gauss_jacobi_left(n: int, beta: float) -> tuple[np.ndarray, np.ndarray]:
    """Rule for ``int_0^1 s**beta f(s) ds`` (weight absorbed)."""
    x, w = roots_jacobi(n, 0.0, beta)
    return 0.5 * (x + 1.0), w * 0.5 ** (beta + 1.0)


@lru_cache(maxsize=None)
def midpoint(n: int) -> tuple[np.ndarray, np.ndarray]:
    x = (np.arange(n) + 0.5) / n
    return x, np.full(n, 1.0 / n)


def two_sided_grading(s: np.ndarray, q: float) -> np.ndarray:
    """Map ``[0, 1] -> [0, 1]`` that clusters points at both ends with exponent ``q``."""
    if q == 1.0:
        return s
    a = s**q
    b = (1.0 - s) ** q
    return a / (a + b)


@lru_cache(maxsize=None)
def geometric_panels(levels: int, ratio: float, sides: str) -> np.ndarray:
    """Panel breakpoints on ``[0, 1]`` refined geometrically toward one or both ends.

    ``sides`` is ``"left"``, ``"right"`` or ``"both"``.
    """
    if levels <= 0:
        return np.array([0.0, 1.0])
    tail = ratio ** np.arange(levels, 0, -1)
    if sides == "left":
        inner = tail
    elif sides == "right":
        inner = 1.0 - tail[::-1]
    elif sides == "both":
        half = 0.5 * tail
        inner = np.concatenate([half, [0.5], 1.0 - half[::-1]])
    else:
        raise ValueError(f"unknown side: {sides!r}")
    return np.concatenate([[0.0], inner, [1.0]])


@lru_cache(maxsize=None)
def composite_gauss(breaks: tuple[float, ...], order: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre rule with the given panel breakpoints."""
    x, w = gauss_legendre(order)
    b = np.asarray(breaks)
    h = np.diff(b)
    nodes = (b[:-1, None] + h[:, None] * x[None, :]).ravel()
    weights = (h[:, None] * w[None, :]).ravel()
    return nodes, weights


def geometric_rule(levels: int, order: int, ratio: float = 0.2, sides: str = "both"):
    """Composite Gauss rule on geometrically graded panels (hp-style).

    Converges exponentially in ``levels`` for integrands with algebraic
    endpoint singularities on the graded side(s).
    """
    return composite_gauss(tuple(geometric_panels(levels, ratio, sides)), order)


@lru_cache(maxsize=None)
def singular_reference_rule(
    alpha: float, node_count: int, grading: float, order: int
) -> tuple[np.ndarray, np.ndarray]:
    r"""Rule for :math:`\int_0^1 \tau^{\alpha - 1} F(\tau)\,d\tau`.

    Panels follow a two-sided polynomial grading with exponent ``grading``;
    the panel touching :math:`\tau = 0` uses Gauss-Jacobi so the algebraic
    weight is integrated exactly. The other panels use Gauss-Legendre in
    :math:`s = \tau^\alpha`, where the weight becomes the constant
    :math:`1/\alpha`.
    """
    beta = alpha - 1.0
    npanels = max(1, node_count // order)
    if npanels == 1:
        return gauss_jacobi_left(node_count, beta)

    breaks = two_sided_grading(np.linspace(0.0, 1.0, npanels + 1), grading)
    h0 = breaks[1]
    xj, wj = gauss_jacobi_left(order, beta)
    first_nodes = h0 * xj
    first_weights = h0**alpha * wj

    s_nodes, s_weights = composite_gauss(tuple(breaks[1:] ** alpha), order)
    rest_nodes = s_nodes ** (1.0 / alpha)
    rest_weights = s_weights / alpha
    nodes = np.concatenate([first_nodes, rest_nodes])
    weights = np.concatenate([first_weights, rest_weights])
    return nodes, weights


def tensor_rule(rules: list[tuple[np.ndarray, np.ndarray]]) -> tuple[np.ndarray, np.ndarray]:
    """Tensor product of 1D rules; nodes are returned with shape ``(M, d)``."""
    grids = np.meshgrid(*[r[0] for r in rules], indexing="ij")
    wgrids = np.meshgrid(*[r[1] for r in rules], indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=-1)
    weights = np.prod(np.stack([w.ravel() for w in wgrids], axis=-1), axis=-1)
    return nodes, weights


@lru_cache(maxsize=None)
def duffy_cube(
    dim: int, radial: tuple[tuple[float, ...], tuple[float, ...]], angular: tuple[tuple[float, ...], tuple[float, ...]]
) -> tuple[np.ndarray, np.ndarray]:
    r"""Duffy rule on :math:`[0, 1]^d` for integrands singular at the origin.

    The cube is split into ``d`` pyramids according to the largest
    coordinate; on pyramid ``m`` the map is :math:`\xi_m = r`,
    :math:`\xi_k = r v_k`, with Jacobian :math:`r^{d-1}`. The radial rule
    should already contain any algebraic weight in ``r`` the caller wants
    to absorb; the returned weights include :math:`r^{d-1}`.
    """
    r, wr = (np.asarray(radial[0]), np.asarray(radial[1]))
    v, wv = (np.asarray(angular[0]), np.asarray(angular[1]))
    vn, vw = tensor_rule([(v, wv)] * (dim - 1))
    nodes_all = []
    weights_all = []
    for m in range(dim):
        xi = np.empty((r.size, vn.shape[0], dim))
        xi[:, :, m] = r[:, None]
        others = [k for k in range(dim) if k != m]
        for i, k in enumerate(others):
            xi[:, :, k] = r[:, None] * vn[None, :, i]
        w = (wr * r ** (dim - 1))[:, None] * vw[None, :]
        nodes_all.append(xi.reshape(-1, dim))
        weights_all.append(w.ravel())
    return np.concatenate(nodes_all), np.concatenate(weights_all)
