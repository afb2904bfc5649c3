"""Quadrature rules on the reference triangle and on edges."""

import numpy as np

# reference triangle (0,0)-(1,0)-(0,1); rules exact up to the keyed degree
_TRI_RULES = {}


def _build_tri_rules():
    _TRI_RULES[1] = (np.array([[1 / 3, 1 / 3]]), np.array([1.0]))
    _TRI_RULES[2] = (
        np.array([[0.5, 0.0], [0.5, 0.5], [0.0, 0.5]]),
        np.array([1 / 3, 1 / 3, 1 / 3]),
    )
    # Dunavant degree-4 rule, 6 points, all weights positive
    a1, a2 = 0.445948490915965, 0.091576213509771
    w1, w2 = 0.223381589678011, 0.109951743655322
    pts = []
    wts = []
    for a, w in ((a1, w1), (a2, w2)):
        pts += [[a, a], [1 - 2 * a, a], [a, 1 - 2 * a]]
        wts += [w, w, w]
    _TRI_RULES[4] = (np.array(pts), np.array(wts))
    # degree-5 rule, 7 points
    a1, a2 = 0.470142064105115, 0.101286507323456
    w1, w2 = 0.132394152788506, 0.125939180544827
    pts = [[1 / 3, 1 / 3]]
    wts = [0.225]
    for a, w in ((a1, w1), (a2, w2)):
        pts += [[a, a], [1 - 2 * a, a], [a, 1 - 2 * a]]
        wts += [w, w, w]
    _TRI_RULES[5] = (np.array(pts), np.array(wts))


_build_tri_rules()


def triangle_rule(degree):
    """Reference-triangle points and weights; weights sum to 1 (reference area 1/2 folded out)."""
    for d in sorted(_TRI_RULES):
        if d >= degree:
            return _TRI_RULES[d]
    raise ValueError(f"no triangle rule of degree {degree} available")


def edge_rule(degree):
    """Gauss points and weights on [0, 1]; weights sum to 1."""
    n = max(1, (degree + 2) // 2)
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def physical_triangle_points(grid, ref_points):
    """Map reference points into every triangle; returns (n_tri, n_q, 2)."""
    v = grid.vertices[grid.triangles]  # (n_tri, 3, 2)
    lam0 = 1.0 - ref_points[:, 0] - ref_points[:, 1]
    bary = np.column_stack([lam0, ref_points[:, 0], ref_points[:, 1]])  # (n_q, 3)
    return np.einsum("qk,tkd->tqd", bary, v)
