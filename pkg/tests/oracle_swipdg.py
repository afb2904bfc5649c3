"""Independent dense assembly of the SWIPDG matrix on the two-triangle unit
square, via exact symbolic integration.  Used as the oracle for the sparse
vectorized assembly; shares no code with the implementation.
"""

import numpy as np
import sympy as sym

X, Y, S = sym.symbols("x y s", real=True)


def _basis(v0, v1, v2):
    """Monomials of the reference coordinates of the affine map (v0, v1, v2)."""
    J = sym.Matrix([[v1[0] - v0[0], v2[0] - v0[0]], [v1[1] - v0[1], v2[1] - v0[1]]])
    ref = J.inv() * sym.Matrix([X - v0[0], Y - v0[1]])
    return [sym.Integer(1), sym.expand(ref[0]), sym.expand(ref[1])]


def _edge_integral(expr, a, b):
    """Exact integral of expr(x, y) over the segment a-b."""
    length = sym.sqrt((b[0] - a[0]) ** 2 + (b[1] - a[1]) ** 2)
    sub = expr.subs({X: a[0] + S * (b[0] - a[0]), Y: a[1] + S * (b[1] - a[1])})
    return sym.integrate(sub * length, (S, 0, 1))


def _tri_integral(expr, v0, v1, v2):
    """Exact integral over the triangle by mapping to the reference triangle."""
    u, w = sym.symbols("u w", real=True)
    xm = v0[0] + u * (v1[0] - v0[0]) + w * (v2[0] - v0[0])
    ym = v0[1] + u * (v1[1] - v0[1]) + w * (v2[1] - v0[1])
    jac = sym.Abs((v1[0] - v0[0]) * (v2[1] - v0[1]) - (v2[0] - v0[0]) * (v1[1] - v0[1]))
    inner = sym.integrate(expr.subs({X: xm, Y: ym}) * jac, (w, 0, 1 - u))
    return sym.integrate(inner, (u, 0, 1))


def dense_swipdg_matrix(sigma=8, theta_sym=1):
    """6x6 SWIPDG matrix on the unit square split along the SW-NE diagonal,
    with unit scalar diffusion, as exact rationals cast to float.

    Dof order: triangle (0,0)-(1,0)-(1,1) then triangle (0,0)-(1,1)-(0,1),
    monomial basis {1, xhat, yhat} each.
    """
    t0 = ((0, 0), (1, 0), (1, 1))
    t1 = ((0, 0), (1, 1), (0, 1))
    phi = _basis(*t0) + _basis(*t1)
    grad = [sym.Matrix([sym.diff(p, X), sym.diff(p, Y)]) for p in phi]
    on_t0 = [1, 1, 1, 0, 0, 0]

    B = sym.zeros(6, 6)

    # volume terms: grad phi_i . grad phi_j on the owning triangle
    for i in range(6):
        for j in range(6):
            if on_t0[i] == on_t0[j]:
                tri = t0 if on_t0[i] else t1
                B[i, j] += _tri_integral((grad[i].T * grad[j])[0], *tri)

    # faces: (a, b, normal, inner flag); delta = 1 on both sides everywhere
    sqrt2 = sym.sqrt(2)
    faces = [
        (((0, 0), (1, 0)), (0, -1), False, 0),   # bottom, boundary of t0
        (((1, 0), (1, 1)), (1, 0), False, 0),    # right, boundary of t0
        (((0, 1), (1, 1)), (0, 1), False, 1),    # top, boundary of t1
        (((0, 0), (0, 1)), (-1, 0), False, 1),   # left, boundary of t1
        (((0, 0), (1, 1)), (-1 / sqrt2, 1 / sqrt2), True, None),  # diagonal, t- = t0
    ]

    for (a, b), n, inner, owner in faces:
        n = sym.Matrix(n)
        h = sym.sqrt((b[0] - a[0]) ** 2 + (b[1] - a[1]) ** 2)
        if inner:
            omega_m = omega_p = sym.Rational(1, 2)
            sig_e = sigma / h * sym.Rational(1, 2)

            def jump(i):
                return phi[i] if on_t0[i] else -phi[i]

            def mean_flux(i):
                w = omega_m if on_t0[i] else omega_p
                return w * (grad[i].T * n)[0]

        else:
            sig_e = sigma / h

            def jump(i, owner=owner):
                return phi[i] if on_t0[i] == (owner == 0) else sym.Integer(0)

            def mean_flux(i, owner=owner):
                if on_t0[i] == (owner == 0):
                    return (grad[i].T * n)[0]
                return sym.Integer(0)

        for i in range(6):
            for j in range(6):
                bc_ji = -_edge_integral(mean_flux(j) * jump(i), a, b)  # b_c(phi_j, phi_i)
                bc_ij = -_edge_integral(mean_flux(i) * jump(j), a, b)  # b_c(phi_i, phi_j)
                bp = _edge_integral(sig_e * jump(j) * jump(i), a, b)
                B[i, j] += bc_ji + theta_sym * bc_ij + bp

    return np.array(B.evalf(20)).astype(float)


if __name__ == "__main__":
    np.set_printoptions(precision=10, linewidth=140)
    print(dense_swipdg_matrix())
