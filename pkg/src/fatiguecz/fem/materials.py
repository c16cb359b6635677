"""Orthotropic plane elasticity for ply materials.

Voigt ordering (xx, yy, xy) with engineering shear strain.
Moduli in MPa, Poisson ratios dimensionless.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import InvalidPropertyError

PLANE_STRESS = "plane-stress"
PLANE_STRAIN = "plane-strain"


@dataclass(frozen=True)
class BulkMaterial:
    e1: float
    e2: float
    g12: float
    nu12: float
    formulation: str = PLANE_STRESS
    e3: float | None = None     # plane strain only; defaults to e2
    nu23: float | None = None   # plane strain only; defaults to nu12
    g23: float | None = None    # defaults to E2 / (2 (1 + nu23))

    def __post_init__(self):
        if self.formulation not in (PLANE_STRESS, PLANE_STRAIN):
            raise InvalidPropertyError(
                f"unknown formulation {self.formulation!r}")
        for name in ("e1", "e2", "g12"):
            if not getattr(self, name) > 0.0:
                raise InvalidPropertyError(f"{name} must be positive")
        c = self.stiffness(0.0)
        if np.any(np.linalg.eigvalsh(c) <= 0.0):
            raise InvalidPropertyError(
                "elasticity matrix is not positive definite")

    def stiffness(self, angle_deg: float = 0.0) -> np.ndarray:
        """3x3 stiffness in the global frame for a ply rotated by angle_deg.

        Plane strain supports angle 0 only (sufficient for cross-section
        models); rotated plies use plane stress.
        """
        if self.formulation == PLANE_STRESS:
            q = self._plane_stress_q()
            return _rotate_q(q, math.radians(angle_deg))
        if abs(angle_deg) > 1e-12:
            raise InvalidPropertyError(
                "plane-strain plies support fiber angle 0 only")
        return self._plane_strain_c()

    def _plane_stress_q(self):
        nu21 = self.nu12 * self.e2 / self.e1
        den = 1.0 - self.nu12 * nu21
        return np.array([
            [self.e1 / den, self.nu12 * self.e2 / den, 0.0],
            [self.nu12 * self.e2 / den, self.e2 / den, 0.0],
            [0.0, 0.0, self.g12],
        ])

    def _plane_strain_c(self):
        e3 = self.e3 if self.e3 is not None else self.e2
        nu23 = self.nu23 if self.nu23 is not None else self.nu12
        g23 = self.g23 if self.g23 is not None else self.e2 / (2.0 * (1.0 + nu23))
        nu13 = self.nu12
        g13 = self.g12
        s = np.zeros((6, 6))
        s[0, 0] = 1.0 / self.e1
        s[1, 1] = 1.0 / self.e2
        s[2, 2] = 1.0 / e3
        s[0, 1] = s[1, 0] = -self.nu12 / self.e1
        s[0, 2] = s[2, 0] = -nu13 / self.e1
        s[1, 2] = s[2, 1] = -nu23 / self.e2
        s[3, 3] = 1.0 / g23
        s[4, 4] = 1.0 / g13
        s[5, 5] = 1.0 / self.g12
        c = np.linalg.inv(s)
        # epsilon_zz = gamma_yz = gamma_xz = 0: keep (xx, yy, xy) block
        idx = [0, 1, 5]
        return c[np.ix_(idx, idx)]


def _rotate_q(q, theta):
    m, n = math.cos(theta), math.sin(theta)
    q11, q12, q22, q66 = q[0, 0], q[0, 1], q[1, 1], q[2, 2]
    m2, n2 = m * m, n * n
    m4, n4 = m2 * m2, n2 * n2
    out = np.empty((3, 3))
    out[0, 0] = q11 * m4 + 2.0 * (q12 + 2.0 * q66) * m2 * n2 + q22 * n4
    out[1, 1] = q11 * n4 + 2.0 * (q12 + 2.0 * q66) * m2 * n2 + q22 * m4
    out[0, 1] = out[1, 0] = (q11 + q22 - 4.0 * q66) * m2 * n2 + q12 * (m4 + n4)
    out[0, 2] = out[2, 0] = ((q11 - q12 - 2.0 * q66) * m2
                             + (q12 - q22 + 2.0 * q66) * n2) * m * n
    out[1, 2] = out[2, 1] = ((q11 - q12 - 2.0 * q66) * n2
                             + (q12 - q22 + 2.0 * q66) * m2) * m * n
    out[2, 2] = (q11 + q22 - 2.0 * q12 - 2.0 * q66) * m2 * n2 + q66 * (m4 + n4)
    return out
