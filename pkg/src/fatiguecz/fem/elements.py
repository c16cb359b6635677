"""Element-level kinematics and stiffness kernels."""

from __future__ import annotations

import math

import numpy as np

_G = 1.0 / math.sqrt(3.0)
QUAD_GAUSS = ((-_G, -_G), (_G, -_G), (_G, _G), (-_G, _G))

# 3-point Newton-Cotes (Simpson) on the unit parameter of a line interface
LINE_NEWTON_COTES = ((0.0, 1.0 / 6.0), (0.5, 4.0 / 6.0), (1.0, 1.0 / 6.0))

# 2-point Gauss on the unit parameter of a cohesive crack segment
SEGMENT_GAUSS = ((0.5 * (1.0 - _G), 0.5), (0.5 * (1.0 + _G), 0.5))


def quad4_stiffness(coords, c_matrix, thickness):
    """8x8 stiffness of a bilinear quad, 2x2 Gauss."""
    k = np.zeros((8, 8))
    for xi, eta in QUAD_GAUSS:
        dn = 0.25 * np.array([
            [-(1.0 - eta), -(1.0 - xi)],
            [(1.0 - eta), -(1.0 + xi)],
            [(1.0 + eta), (1.0 + xi)],
            [-(1.0 + eta), (1.0 - xi)],
        ])
        jac = coords.T @ dn
        det = np.linalg.det(jac)
        grads = dn @ np.linalg.inv(jac)
        b = np.zeros((3, 8))
        b[0, 0::2] = grads[:, 0]
        b[1, 1::2] = grads[:, 1]
        b[2, 0::2] = grads[:, 1]
        b[2, 1::2] = grads[:, 0]
        k += b.T @ c_matrix @ b * det * thickness
    return k


def tri3_b_matrix(coords):
    """Constant strain-displacement matrix of a linear triangle.

    Returns (B (3x6), area).
    """
    x, y = coords[:, 0], coords[:, 1]
    area2 = ((x[1] - x[0]) * (y[2] - y[0]) - (x[2] - x[0]) * (y[1] - y[0]))
    dndx = np.array([y[1] - y[2], y[2] - y[0], y[0] - y[1]]) / area2
    dndy = np.array([x[2] - x[1], x[0] - x[2], x[1] - x[0]]) / area2
    b = np.zeros((3, 6))
    b[0, 0::2] = dndx
    b[1, 1::2] = dndy
    b[2, 0::2] = dndy
    b[2, 1::2] = dndx
    return b, 0.5 * abs(area2)


def tri3_shape(coords, point):
    """Barycentric shape functions of a linear triangle at a global point."""
    t = np.array([
        [coords[0, 0] - coords[2, 0], coords[1, 0] - coords[2, 0]],
        [coords[0, 1] - coords[2, 1], coords[1, 1] - coords[2, 1]],
    ])
    lam = np.linalg.solve(t, point - coords[2])
    return np.array([lam[0], lam[1], 1.0 - lam[0] - lam[1]])


def line_frame(p0, p1):
    """Length and local rotation (rows: normal, tangent) of a line element.

    The normal is the tangent rotated +90 deg, so with the bottom face
    ordered left-to-right it points from the bottom to the top face.
    """
    tangent = p1 - p0
    length = float(np.linalg.norm(tangent))
    tangent = tangent / length
    normal = np.array([-tangent[1], tangent[0]])
    return length, np.array([normal, tangent])


def line_interface_jump_operator(xi):
    """(2 x 8) operator: global jump at parameter xi from the dof vector
    [b1x b1y b2x b2y t1x t1y t2x t2y]."""
    n1, n2 = 1.0 - xi, xi
    op = np.zeros((2, 8))
    op[0, 4] = n1
    op[1, 5] = n1
    op[0, 6] = n2
    op[1, 7] = n2
    op[0, 0] = -n1
    op[1, 1] = -n1
    op[0, 2] = -n2
    op[1, 3] = -n2
    return op
