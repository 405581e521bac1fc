"""Quadrature rules on the reference triangle and on segments.

The reference triangle has vertices (0,0), (1,0), (0,1). Rules are given
as barycentric abscissae and weights that sum to 1; physical integrals
multiply by the element area.
"""
from __future__ import annotations

import numpy as np

# Dunavant degree-4 rule, 6 points.
_D4_GROUPS = [
    (0.223381589678011, (0.108103018168070, 0.445948490915965)),
    (0.109951743655322, (0.816847572980459, 0.091576213509771)),
]

def _expand(groups):
    bary = []
    weights = []
    for w, (a, b) in groups:
        for perm in ((a, b, b), (b, a, b), (b, b, a)):
            bary.append(perm)
            weights.append(w)
    return np.asarray(bary), np.asarray(weights)


def _collapsed_product(n: int):
    # Gauss-Legendre product rule on the square collapsed onto the triangle
    # via x = xi, y = eta (1 - xi); exact for total degree <= 2n - 2.
    x, w = np.polynomial.legendre.leggauss(n)
    xi = 0.5 * (x + 1.0)
    gw = 0.5 * w
    X, Y = np.meshgrid(xi, xi, indexing="ij")
    WX, WY = np.meshgrid(gw, gw, indexing="ij")
    px = X
    py = Y * (1.0 - X)
    weights = 2.0 * WX * WY * (1.0 - X)
    pts = np.column_stack([px.ravel(), py.ravel()])
    bary = np.column_stack([1.0 - pts.sum(axis=1), pts])
    return bary, weights.ravel()


_RULES = {
    4: _expand(_D4_GROUPS),
    8: _collapsed_product(5),
}


def triangle_rule(degree: int):
    """Return (points, weights) on the reference triangle.

    `points` has shape (n, 2) in reference coordinates, `weights` sum to 1.
    Exact for polynomials up to `degree` (4 or 8).
    """
    if degree <= 4:
        bary, w = _RULES[4]
    elif degree <= 8:
        bary, w = _RULES[8]
    else:
        raise ValueError(f"no triangle rule of degree {degree}")
    pts = bary[:, 1:3].copy()
    return pts, w.copy()


def segment_rule(n: int = 6):
    """Gauss-Legendre rule mapped to [0, 1]; (points, weights), weights sum to 1."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w
