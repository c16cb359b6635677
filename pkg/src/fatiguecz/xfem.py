"""Phantom-node crack representation in tri3 plies.

A crack *line* is a maximal straight cut with a fixed normal (perpendicular
to the ply fibers). Each element it crosses carries one cohesive *segment*;
collinear continuation segments join the line and share its duplicated
nodes so that traction continuity holds across element boundaries and the
post-insertion residual vanishes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import cohesive as cz
from .fem.elements import tri3_shape

# relative (to element size) tolerance for "the line passes through a node"
DEGENERATE_CUT_TOL = 1e-9


@dataclass
class CrackSegment:
    """One element's share of a crack line."""

    element: int
    conn_a: tuple       # side-A field: real nodes on side A, duplicates on B
    conn_b: tuple
    sides: np.ndarray   # +1 node on side A (normal points towards A), else -1
    p0: np.ndarray      # segment endpoints on the element edges
    p1: np.ndarray
    length: float
    area_a: float
    area_b: float
    rotation: np.ndarray        # rows (normal, tangent), crack frame
    shift: np.ndarray           # local (normal, shear) jump shift, immutable
    states: list = field(default_factory=list)
    f_index: float = 0.0        # insertion index at creation (log)

    def copy(self):
        return CrackSegment(
            element=self.element, conn_a=self.conn_a, conn_b=self.conn_b,
            sides=self.sides, p0=self.p0, p1=self.p1, length=self.length,
            area_a=self.area_a, area_b=self.area_b, rotation=self.rotation,
            shift=self.shift, states=[s.copy() for s in self.states],
            f_index=self.f_index)


@dataclass
class CrackLine:
    ply: int
    angle: float                 # fiber angle of the ply, degrees
    point: np.ndarray            # anchor on the line
    normal: np.ndarray           # unit, fixed
    duplicates: dict = field(default_factory=dict)   # real node -> phantom
    segments: list = field(default_factory=list)

    def offset_of(self, x) -> float:
        return float((np.asarray(x) - self.point) @ self.normal)

    def copy(self):
        out = CrackLine(ply=self.ply, angle=self.angle, point=self.point,
                        normal=self.normal, duplicates=dict(self.duplicates))
        out.segments = [s.copy() for s in self.segments]
        return out


@dataclass
class InsertionCandidate:
    element: int
    ply: int
    angle: float
    normal: np.ndarray
    stress: np.ndarray   # Voigt (xx, yy, xy) at the bulk integration point
    f_index: float


def crack_normal_from_angle(angle_deg: float) -> np.ndarray:
    """Unit crack normal, perpendicular to the fiber direction."""
    a = math.radians(angle_deg)
    return np.array([-math.sin(a), math.cos(a)])


def _traction_components(stress, normal):
    sxx, syy, sxy = stress
    t = np.array([sxx * normal[0] + sxy * normal[1],
                  sxy * normal[0] + syy * normal[1]])
    tangent = np.array([-normal[1], normal[0]])
    return float(t @ normal), float(t @ tangent)


def insertion_index(stress, normal, props: cz.CohesiveProperties,
                    fat: cz.FatigueProperties, squared: bool = False) -> float:
    """Fatigue crack insertion index f_I = sigma_eq / sigma_end.

    The mode-mixity before insertion comes from the bulk traction
    t = sigma.n; the default is the printed linear-in-traction form, the
    `squared` variant mirrors the displacement-based definition.
    """
    tn, ts = _traction_components(stress, normal)
    tn_pos = max(tn, 0.0)
    tsh = abs(ts)
    sigma_eq = math.hypot(tn_pos, tsh)
    if sigma_eq <= 0.0:
        return 0.0
    if squared:
        num = tsh * tsh / props.k_sh
        den = tn_pos * tn_pos / props.k_n + num
    else:
        num = tsh / props.k_sh
        den = tn_pos / props.k_n + num
    mixity = num / den if den > 0.0 else 0.0
    k_mode = props.k_n * (1.0 - mixity) + mixity * props.k_sh
    f_mode = math.sqrt(k_mode * (props.f_n ** 2 / props.k_n
                                 + (props.f_sh ** 2 / props.k_sh
                                    - props.f_n ** 2 / props.k_n)
                                 * mixity ** props.eta_bk))
    endurance = cz.relative_endurance(mixity, fat.stress_ratio, fat.epsilon)
    return sigma_eq / (endurance * f_mode)


def compute_shift(stress, normal, props: cz.CohesiveProperties) -> np.ndarray:
    """Jump shift K^-1 sigma.n in the crack frame so that the cohesive
    traction at zero numerical opening equals the bulk traction."""
    tn, ts = _traction_components(stress, normal)
    return np.array([tn / props.k_n, ts / props.k_sh])


def cut_triangle(coords, point, normal):
    """Intersect a crack line with a tri3 element.

    Returns (sides (+1/-1 per node), p0, p1, area_a, area_b) or None when
    the line misses the element or passes through a node (degenerate cut,
    insertion is skipped with a diagnostic).
    """
    coords = np.asarray(coords, dtype=float)
    scale = max(np.ptp(coords[:, 0]), np.ptp(coords[:, 1]))
    s = (coords - point) @ normal
    if np.any(np.abs(s) < DEGENERATE_CUT_TOL * scale):
        return None
    sides = np.where(s > 0.0, 1, -1)
    if abs(int(sides.sum())) == 3:
        return None
    cuts = []
    for i, j in ((0, 1), (1, 2), (2, 0)):
        if sides[i] != sides[j]:
            t = s[i] / (s[i] - s[j])
            cuts.append((coords[i] + t * (coords[j] - coords[i]), i, j))
    if len(cuts) != 2:
        return None
    (pa, _, _), (pb, _, _) = cuts
    # the node alone on its side spans both cut edges
    lone_side = 1 if int((sides > 0).sum()) == 1 else -1
    lone = int(np.where(sides == lone_side)[0][0])
    full = _polygon_area([coords[0], coords[1], coords[2]])
    small = _polygon_area([coords[lone], pa, pb])
    if lone_side == 1:
        area_a, area_b = small, full - small
    else:
        area_a, area_b = full - small, small
    tangent = np.array([-normal[1], normal[0]])
    if (pb - pa) @ tangent < 0.0:
        pa, pb = pb, pa
    return sides, pa, pb, area_a, area_b


def _polygon_area(pts):
    area = 0.0
    n = len(pts)
    for i in range(n):
        x0, y0 = pts[i]
        x1, y1 = pts[(i + 1) % n]
        area += x0 * y1 - x1 * y0
    return 0.5 * abs(area)


def segment_jump_operator(segment: CrackSegment, coords, xi: float):
    """(2 x 12) operator mapping [u_real(3 nodes); u_phantom(3 nodes)] to the
    global jump u_A - u_B at parameter xi along the segment."""
    x = segment.p0 + xi * (segment.p1 - segment.p0)
    shapes = tri3_shape(np.asarray(coords), x)
    op = np.zeros((2, 12))
    for i in range(3):
        c = shapes[i] * segment.sides[i]
        op[0, 2 * i] = c
        op[1, 2 * i + 1] = c
        op[0, 6 + 2 * i] = -c
        op[1, 7 + 2 * i] = -c
    return op


def cracked_element_fields(segment: CrackSegment, coords, u_pair, xi: float):
    """Displacement jump on the cohesive segment at parameter xi.

    u_pair stacks the six real dofs followed by the six phantom dofs.
    Returns (global jump, local jump including the stored shift).
    """
    op = segment_jump_operator(segment, coords, xi)
    jump_global = op @ u_pair
    jump_local = segment.rotation @ jump_global + segment.shift
    return jump_global, jump_local


def build_segment(element, element_nodes, coords, line: CrackLine, stress,
                  props: cz.CohesiveProperties, fat: cz.FatigueProperties,
                  f_index: float, duplicate_of) -> CrackSegment | None:
    """Geometry + state bookkeeping for one new segment on a line.

    `duplicate_of(node)` returns (creating on demand) the phantom id of a
    real node for this line; it is only called once the cut is valid.
    """
    cut = cut_triangle(coords, line.point, line.normal)
    if cut is None:
        return None
    sides, p0, p1, area_a, area_b = cut
    conn_a = tuple(nid if sides[i] > 0 else duplicate_of(nid)
                   for i, nid in enumerate(element_nodes))
    conn_b = tuple(duplicate_of(nid) if sides[i] > 0 else nid
                   for i, nid in enumerate(element_nodes))
    tangent = np.array([-line.normal[1], line.normal[0]])
    rotation = np.array([line.normal, tangent])
    shift = compute_shift(stress, line.normal, props)
    length = float(np.linalg.norm(p1 - p0))

    # fresh segment: zero damage, the shift is its committed jump; the
    # committed rate seeds the (1-theta) term of the first cyclic step
    jump0 = np.array([shift[0], shift[1], 0.0])
    kin = cz.equivalent_kinematics(jump0, props, 0.0)
    endurance = cz.relative_endurance(kin.mixity, fat.stress_ratio,
                                      fat.epsilon)
    beta = cz.sn_exponent(endurance, fat.eta_brittle)
    rate = cz.damage_rate_cf20(kin.delta, kin.delta_star, 0.0, endurance,
                               beta, fat.paris_exponent(beta), fat.gamma)
    if not math.isfinite(rate):
        rate = 0.0
    states = [cz.CohesivePointState(damage=0.0, jump=jump0.copy(), rate=rate)
              for _ in range(2)]
    return CrackSegment(element=element, conn_a=conn_a, conn_b=conn_b,
                        sides=sides, p0=p0, p1=p1, length=length,
                        area_a=area_a, area_b=area_b, rotation=rotation,
                        shift=shift, states=states, f_index=f_index)
