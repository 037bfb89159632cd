"""
Quadrature helpers for the tabulated constitutive antiderivatives.
"""
import logging
import typing

import numpy as np
from scipy import integrate

log = logging.getLogger(__name__)

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


def gauss_legendre(f: typing.Callable, a, b, order: int = 8):
    """
    Fixed-order Gauss-Legendre rule on ``[a, b]``, vectorized over arrays of endpoints.

    :param f: Vectorized integrand.
    :param a: Lower endpoint(s).
    :param b: Upper endpoint(s).
    :param order: Number of nodes.
    :return: Integral(s) with the broadcast shape of ``a`` and ``b``.
    """
    if order == 8:
        nodes, weights = _GL_NODES, _GL_WEIGHTS
    else:
        nodes, weights = np.polynomial.legendre.leggauss(order)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    y = mid[..., None] + half[..., None] * nodes
    return half * np.sum(weights * f(y), axis=-1)


class PrimitiveTable:
    """
    Antiderivative ``F(s) = ∫_{s_min}^{s} f`` tabulated on geometric nodes.

    Panels between nodes are integrated once with :func:`scipy.integrate.quad`; queries add a
    fixed Gauss-Legendre panel from the nearest node below. Arguments above ``s_max`` fall back
    to adaptive quadrature.

    .. note::
        The table is immutable after construction and safe to share between workers.

    :ivar nodes: Geometric node positions.
    :ivar cumulative: ``F`` at the nodes.
    """

    def __init__(
        self,
        integrand: typing.Callable,
        s_min: float = 1e-8,
        s_max: float = 1e4,
        n_nodes: int = 1024,
    ):
        self.integrand = integrand
        self.s_min = s_min
        self.s_max = s_max
        self.nodes = np.geomspace(s_min, s_max, n_nodes)
        pieces = [
            integrate.quad(integrand, a, b, epsabs=0.0, epsrel=1e-13, limit=200)[0]
            for a, b in zip(self.nodes[:-1], self.nodes[1:])
        ]
        self.cumulative = np.concatenate(([0.0], np.cumsum(pieces)))
        self.cumulative.setflags(write=False)
        self.nodes.setflags(write=False)

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        if np.any(s < self.s_min):
            raise ValueError(f"PrimitiveTable queried below s_min={self.s_min}")
        out = np.empty_like(s)
        inside = s <= self.s_max
        k = np.searchsorted(self.nodes, s[inside], side="right") - 1
        k = np.clip(k, 0, len(self.nodes) - 2)
        out[inside] = self.cumulative[k] + gauss_legendre(self.integrand, self.nodes[k], s[inside])
        if not np.all(inside):
            log.warning(f"{np.count_nonzero(~inside)} values above tabulated range {self.s_max}")
            top = self.cumulative[-1]
            out[~inside] = [
                top + integrate.quad(self.integrand, self.s_max, value, limit=200)[0]
                for value in s[~inside]
            ]
        return out
