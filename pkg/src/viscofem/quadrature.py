"""Quadrature rules on the reference triangle and on 1D edges.

The reference triangle has vertices (0,0), (1,0), (0,1) and area 1/2.
All rules have strictly positive weights.
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import UnsupportedDegree

MAX_EXACTNESS = 8


@dataclass(frozen=True)
class QuadratureRule:
    """Points (cartesian reference coordinates), weights, exactness degree."""

    points: np.ndarray   # (nq, 2)
    weights: np.ndarray  # (nq,), sum = 1/2
    exactness: int


def _orbit3(a):
    """Permutations of barycentric (a, a, 1-2a) as cartesian (l1, l2)."""
    b = 1.0 - 2.0 * a
    return [(a, b), (b, a), (a, a)]


# Symmetric Gaussian rules (weights in barycentric normalization, sum = 1).
def _symmetric_rule(degree):
    if degree == 1:
        pts = [(1 / 3, 1 / 3)]
        wts = [1.0]
    elif degree == 2:
        pts = _orbit3(1 / 6)
        wts = [1 / 3] * 3
    elif degree == 4:
        pts = _orbit3(0.445948490915965) + _orbit3(0.091576213509771)
        wts = [0.223381589678011] * 3 + [0.109951743655322] * 3
    elif degree == 5:
        pts = [(1 / 3, 1 / 3)]
        pts += _orbit3(0.470142064105115) + _orbit3(0.101286507323456)
        wts = [0.225]
        wts += [0.132394152788506] * 3 + [0.125939180544827] * 3
    else:
        return None
    points = np.array(pts, dtype=float)
    weights = 0.5 * np.array(wts, dtype=float)
    return points, weights


def _collapsed_rule(degree):
    """Gauss-Legendre product rule mapped square -> triangle (Duffy).

    Exact for total degree <= degree, all weights positive.
    """
    n = (degree + 3) // 2
    x, w = np.polynomial.legendre.leggauss(n)
    u = 0.5 * (x + 1.0)
    wu = 0.5 * w
    U, V = np.meshgrid(u, u, indexing="ij")
    WU, WV = np.meshgrid(wu, wu, indexing="ij")
    px = U.ravel()
    py = (V * (1.0 - U)).ravel()
    wts = (WU * WV * (1.0 - U)).ravel()
    return np.column_stack([px, py]), wts


@lru_cache(maxsize=None)
def triangle_rule(exactness: int) -> QuadratureRule:
    """Rule on the reference triangle exact for polynomials up to `exactness`."""
    if not 1 <= exactness <= MAX_EXACTNESS:
        raise UnsupportedDegree(
            f"triangle quadrature exactness must be in 1..{MAX_EXACTNESS}, got {exactness}"
        )
    # Symmetric tables where available; degree 3 is served by the degree-4
    # rule, degrees 6..8 by the collapsed product rule.
    table_degree = {1: 1, 2: 2, 3: 4, 4: 4, 5: 5}.get(exactness)
    if table_degree is not None:
        points, weights = _symmetric_rule(table_degree)
    else:
        points, weights = _collapsed_rule(exactness)
    points.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(points=points, weights=weights, exactness=exactness)


@lru_cache(maxsize=None)
def edge_rule(exactness: int):
    """Gauss rule on [0,1]: (points, weights), weights sum to 1."""
    if exactness < 1:
        raise UnsupportedDegree(f"edge quadrature exactness must be >= 1, got {exactness}")
    n = (exactness + 2) // 2
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w
