"""Mixed-mode cohesive material with high-cycle fatigue damage.

Integration-point constitutive model for zero-thickness cohesive points:
bilinear mixed-mode traction-separation law with mode-dependent dummy
stiffness, CF20 fatigue damage evolution integrated with the generalized
trapezoidal rule (implicit local root solve), and the consistent material
tangent for both the static and the fatigue branch.

Jump and traction vectors are ordered (normal, shear-1, shear-2); in plane
models shear-2 is identically zero for line interfaces and carries the
second in-plane slip component for ply-to-ply area interfaces.

Units: mm for jumps, MPa for tractions, N/mm^3 for stiffnesses, N/mm for
fracture energies, cycles for N.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidEnduranceError, InvalidPropertyError, LocalSolverFailure

# Residual stiffness fraction kept on fully failed points so the global
# matrix stays non-singular; compression always retains full normal stiffness.
DAMAGE_CLAMP = 1.0 - 1e-12
# Below this, K_n<u_n>^2 + K_sh*u_sh^2 is degenerate for the mixity ratio.
DEGENERATE_MEASURE = 1e-30
# Mixity clamp used in derivative evaluation only (B^(eta-1) at pure modes).
MIXITY_EPS = 1e-12

# Local root solve: |r| acceptance bound is 1e-10; iterate tighter so the
# root noise stays far below finite-difference perturbations of the tangent.
LOCAL_TOL = 1e-13
LOCAL_ACCEPT = 1e-10
LOCAL_MAX_ITER = 50
LOCAL_STALL_LIMIT = 5

JUVINALL_SLOPE = -0.42  # dC_l / dB

BRANCH_UNLOADING = "unloading"
BRANCH_STATIC = "static"
BRANCH_FATIGUE = "fatigue"


def macaulay(x: float) -> float:
    return x if x > 0.0 else 0.0


def derive_shear_stiffness(k_n: float, f_n: float, f_sh: float,
                           g_ic: float, g_iic: float) -> float:
    """Shear dummy stiffness that keeps mixed-mode dissipation consistent
    with the B-K interpolation: K_sh = K_n (G_Ic/G_IIc) (f_sh/f_n)^2."""
    for name, value in (("k_n", k_n), ("f_n", f_n), ("f_sh", f_sh),
                        ("g_ic", g_ic), ("g_iic", g_iic)):
        if not value > 0.0:
            raise InvalidPropertyError(f"{name} must be positive, got {value}")
    return k_n * (g_ic / g_iic) * (f_sh / f_n) ** 2


@dataclass(frozen=True)
class CohesiveProperties:
    """Static mixed-mode cohesive law parameters.

    k_sh is derived from the other properties at construction; passing it
    explicitly is allowed only if it matches the derived value.
    """

    k_n: float
    f_n: float
    f_sh: float
    g_ic: float
    g_iic: float
    eta_bk: float
    k_sh: float = 0.0

    def __post_init__(self):
        for name in ("k_n", "f_n", "f_sh", "g_ic", "g_iic", "eta_bk"):
            if not getattr(self, name) > 0.0:
                raise InvalidPropertyError(f"{name} must be positive")
        derived = derive_shear_stiffness(self.k_n, self.f_n, self.f_sh,
                                         self.g_ic, self.g_iic)
        if self.k_sh:
            if abs(self.k_sh - derived) > 1e-9 * derived:
                raise InvalidPropertyError(
                    f"k_sh={self.k_sh} inconsistent with derived {derived}")
        else:
            object.__setattr__(self, "k_sh", derived)

    @classmethod
    def from_shear_stiffness(cls, k_sh, f_n, f_sh, g_ic, g_iic, eta_bk):
        """Construct from a prescribed shear stiffness, back-deriving k_n."""
        k_n = derive_shear_stiffness(k_sh, f_sh, f_n, g_iic, g_ic)
        return cls(k_n=k_n, f_n=f_n, f_sh=f_sh, g_ic=g_ic, g_iic=g_iic,
                   eta_bk=eta_bk)

    # pure-mode initiation / final-failure jumps
    @property
    def u0_n(self) -> float:
        return self.f_n / self.k_n

    @property
    def uf_n(self) -> float:
        return 2.0 * self.g_ic / self.f_n

    @property
    def u0_sh(self) -> float:
        return self.f_sh / self.k_sh

    @property
    def uf_sh(self) -> float:
        return 2.0 * self.g_iic / self.f_sh

    def critical_err(self, mixity: float) -> float:
        """B-K interpolated critical energy release rate."""
        return self.g_ic + (self.g_iic - self.g_ic) * mixity ** self.eta_bk


@dataclass(frozen=True)
class FatigueProperties:
    """CF20 fatigue inputs plus the analysis-wide stress ratio.

    The Paris-calibration exponent follows p = beta + p_offset unless
    p_fixed is set, which decouples p from the S-N exponent.
    """

    eta_brittle: float
    epsilon: float
    stress_ratio: float
    gamma: float = 1.0e7
    p_offset: float = 0.0
    p_fixed: float | None = None

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise InvalidPropertyError(f"epsilon must be in (0,1), got {self.epsilon}")
        if self.gamma < 1.0:
            raise InvalidPropertyError("gamma must be >= 1 cycle")
        if not self.stress_ratio < 1.0:
            raise InvalidPropertyError("stress ratio must be < 1")
        if self.eta_brittle < 0.0:
            raise InvalidPropertyError("eta_brittle must be >= 0")

    @property
    def coupled(self) -> bool:
        return self.p_fixed is None

    def paris_exponent(self, beta: float) -> float:
        return self.p_fixed if self.p_fixed is not None else beta + self.p_offset


@dataclass
class CohesivePointState:
    """Committed history of one cohesive integration point.

    damage is the energy-based variable (dissipated fraction of the critical
    ERR), non-decreasing across committed steps. jump is the displacement
    jump at the last converged step; rate the fatigue damage rate there,
    used for the (1-theta) term of the trapezoidal update.
    """

    damage: float = 0.0
    jump: np.ndarray = field(default_factory=lambda: np.zeros(3))
    rate: float = 0.0
    root_residual: float = 0.0  # |r| of the last implicit solve (diagnostic)

    def copy(self) -> "CohesivePointState":
        return CohesivePointState(self.damage, self.jump.copy(), self.rate,
                                  self.root_residual)


@dataclass(frozen=True)
class EquivalentKinematics:
    """Equivalent 1D quantities of the mixed-mode law at one jump."""

    delta: float        # equivalent jump
    delta0: float       # initiation jump
    delta_f: float      # final-failure jump
    delta_star: float   # reference jump at the current damage
    mixity: float       # B in [0,1]
    k_mode: float       # mode-dependent dummy stiffness K_B
    f_mode: float       # mode-dependent strength K_B * delta0
    sigma_eq: float     # equivalent traction (1-d) K_B delta


def mode_mixity_from_jump(jump, k_n: float, k_sh: float,
                          fallback: float = 0.0) -> float:
    """Displacement-based mode-mixity B = K_sh u_sh^2 / (K_n<u_n>^2 + K_sh u_sh^2).

    Returns `fallback` when the damage-driving measure degenerates (origin).
    """
    mun = macaulay(jump[0])
    ush2 = jump[1] * jump[1] + jump[2] * jump[2]
    measure = k_n * mun * mun + k_sh * ush2
    if measure < DEGENERATE_MEASURE:
        return fallback
    return k_sh * ush2 / measure


def stiffness_damage(damage: float, delta0: float, delta_f: float) -> float:
    """Stiffness damage d from the energy damage D, clamped below 1."""
    dstar = damage * delta_f + (1.0 - damage) * delta0
    d = 1.0 - (1.0 - damage) * delta0 / dstar
    return min(d, DAMAGE_CLAMP)


def equivalent_kinematics(jump, props: CohesiveProperties, damage: float,
                          mixity_fallback: float = 0.0) -> EquivalentKinematics:
    """Evaluate the equivalent 1D law quantities at a jump and damage level."""
    k_n, k_sh = props.k_n, props.k_sh
    mun = macaulay(jump[0])
    ush2 = jump[1] * jump[1] + jump[2] * jump[2]
    measure = k_n * mun * mun + k_sh * ush2
    if measure < DEGENERATE_MEASURE:
        delta = 0.0
        mixity = mixity_fallback
    else:
        delta = measure / math.sqrt(k_n * k_n * mun * mun + k_sh * k_sh * ush2)
        mixity = k_sh * ush2 / measure
    k_mode = k_n * (1.0 - mixity) + mixity * k_sh
    b_eta = mixity ** props.eta_bk
    delta0 = math.sqrt((k_n * props.u0_n ** 2
                        + (k_sh * props.u0_sh ** 2 - k_n * props.u0_n ** 2) * b_eta)
                       / k_mode)
    delta_f = (k_n * props.u0_n * props.uf_n
               + (k_sh * props.u0_sh * props.uf_sh
                  - k_n * props.u0_n * props.uf_n) * b_eta) / (k_mode * delta0)
    delta_star = damage * (delta_f - delta0) + delta0
    d = stiffness_damage(damage, delta0, delta_f)
    return EquivalentKinematics(delta=delta, delta0=delta0, delta_f=delta_f,
                                delta_star=delta_star, mixity=mixity,
                                k_mode=k_mode, f_mode=k_mode * delta0,
                                sigma_eq=(1.0 - d) * k_mode * delta)


def static_damage(delta: float, delta0: float, delta_f: float) -> float:
    """Quasi-static damage (Δ−Δ0)/(Δf−Δ0), clamped to [0, 1]."""
    ds = (delta - delta0) / (delta_f - delta0)
    return min(1.0, max(0.0, ds))


def relative_endurance(mixity: float, stress_ratio: float, epsilon: float) -> float:
    """Relative endurance limit from the Goodman diagram with the Juvinall
    mode-mixity correction C_l = 1 - 0.42 B."""
    cl = 1.0 + JUVINALL_SLOPE * mixity
    denom = cl * epsilon + 1.0 + stress_ratio * (cl * epsilon - 1.0)
    e = 2.0 * cl * epsilon / denom
    if not 0.0 < e < 1.0:
        raise InvalidEnduranceError(
            f"relative endurance {e} outside (0,1) for B={mixity}, "
            f"R={stress_ratio}, epsilon={epsilon}")
    return e


def sn_exponent(endurance: float, eta_brittle: float) -> float:
    """S-N curve exponent beta = -7 eta / log10(E)."""
    if not 0.0 < endurance < 1.0:
        raise InvalidEnduranceError(f"endurance must be in (0,1), got {endurance}")
    return -7.0 * eta_brittle / math.log10(endurance)


def damage_rate_cf20(delta: float, delta_star: float, damage: float,
                     endurance: float, beta: float, p: float,
                     gamma: float) -> float:
    """CF20 damage rate per cycle.

    Fully failed points (D = 1) accumulate nothing; the rate vanishes at
    zero equivalent jump. May overflow to inf for extreme trial jumps,
    which the implicit solver treats as instant failure.
    """
    if damage >= 1.0 or delta <= 0.0:
        return 0.0
    try:
        return ((1.0 - damage) ** (beta - p) / (endurance ** beta * (p + 1.0))
                * (delta / delta_star) ** beta / gamma)
    except OverflowError:
        return math.inf


def _rate_parameters(mixity: float, fat: FatigueProperties):
    e = relative_endurance(mixity, fat.stress_ratio, fat.epsilon)
    beta = sn_exponent(e, fat.eta_brittle)
    return e, beta, fat.paris_exponent(beta)


def _scan_for_bracket(residual, lo, r_lo, hi):
    """Probe r between lo and hi for a sign change (interior roots for p > beta).

    Returns (a, ra, b, rb) bracketing a root or None when r never turns
    positive, which is the no-root case of the implicit update.
    """
    fractions = (1e-6, 1e-5, 1e-4, 1e-3, 3e-3, 0.01, 0.03, 0.06, 0.1, 0.15,
                 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99)
    a, ra = lo, r_lo
    for frac in fractions:
        x = lo + (hi - lo) * frac
        rx = residual(x)
        if not math.isfinite(rx):
            return None
        if rx >= 0.0:
            return a, ra, x, rx
        a, ra = x, rx
    return None


def update_fatigue_damage_implicit(state: CohesivePointState,
                                   kin: EquivalentKinematics,
                                   dn: float, theta: float,
                                   fat: FatigueProperties):
    """Advance the fatigue damage over dn cycles with the generalized
    trapezoidal rule.

    Solves r(D) = D - D_prev - dn[(1-theta) f^(n-1) + theta f(D)] = 0 by a
    safeguarded local Newton iteration with the analytical dr/dD; the
    reference jump is re-evaluated from D inside the iteration. When no
    root exists in [D_prev, 1) the point fails completely and exactly 1 is
    returned. theta = 0 is the explicit Euler-forward comparison mode.

    Returns (damage, |r| at the returned root).
    """
    d_prev = state.damage
    if dn <= 0.0 or d_prev >= 1.0:
        return d_prev, 0.0
    if theta == 0.0:
        return min(1.0, d_prev + dn * state.rate), 0.0

    e, beta, p = _rate_parameters(kin.mixity, fat)
    span = kin.delta_f - kin.delta0
    base = dn * (1.0 - theta) * state.rate

    def residual(d):
        dstar = d * span + kin.delta0
        f = damage_rate_cf20(kin.delta, dstar, d, e, beta, p, fat.gamma)
        if not math.isfinite(f):
            return -math.inf
        return d - d_prev - base - dn * theta * f

    def slope(d, r):
        # dr/dD at constant jump: 1 - dn theta (df/dD + df/dD* (Δf-Δ0))
        dstar = d * span + kin.delta0
        f = damage_rate_cf20(kin.delta, dstar, d, e, beta, p, fat.gamma)
        if not math.isfinite(f):
            return 0.0
        dfdd = (p - beta) / (1.0 - d) * f if d < 1.0 else 0.0
        dfds = -beta / dstar * f
        return 1.0 - dn * theta * (dfdd + dfds * span)

    hi_cap = 1.0 - 1e-12
    r_lo = residual(d_prev)
    if r_lo >= 0.0:
        return d_prev, abs(r_lo)
    if not math.isfinite(r_lo):
        return 1.0, 0.0

    r_hi = residual(hi_cap)
    if math.isfinite(r_hi) and r_hi >= 0.0:
        lo, rl, hi, rh = d_prev, r_lo, hi_cap, r_hi
    else:
        found = _scan_for_bracket(residual, d_prev, r_lo, hi_cap)
        if found is None:
            return 1.0, 0.0  # no root: complete failure within the step
        lo, rl, hi, rh = found

    d, r = lo, rl
    stall = 0
    for _ in range(LOCAL_MAX_ITER):
        if abs(r) < LOCAL_TOL:
            return d, abs(r)
        if hi - lo < 4e-16 * max(1.0, hi):
            break  # bracket at float resolution
        m = slope(d, r)
        if stall >= LOCAL_STALL_LIMIT or m <= 0.0:
            d_new = 0.5 * (lo + hi)
        else:
            d_new = d - r / m
            if not lo < d_new < hi:
                d_new = 0.5 * (lo + hi)
        r_new = residual(d_new)  # -inf on rate overflow: negative side
        # Newton in its quadratic regime gains orders of magnitude per
        # iteration; anything slower (e.g. e-fold creep down the rate
        # function's cliff) counts as non-productive
        stall = stall + 1 if abs(r_new) > 0.1 * abs(r) else 0
        if r_new < 0.0:
            lo, rl = d_new, r_new
        else:
            hi, rh = d_new, r_new
        d, r = d_new, r_new
    if abs(r) < LOCAL_ACCEPT:
        return d, abs(r)
    raise LocalSolverFailure(
        f"implicit damage update did not converge: |r|={abs(r):.3e}")


@dataclass
class TractionAndTangent:
    traction: np.ndarray
    tangent: np.ndarray
    state: CohesivePointState  # trial; commit on global convergence
    branch: str


def _secant_matrix(jump, props, d):
    k = np.zeros((3, 3))
    k[0, 0] = props.k_n * (1.0 - d) if jump[0] > 0.0 else props.k_n
    k[1, 1] = (1.0 - d) * props.k_sh
    k[2, 2] = (1.0 - d) * props.k_sh
    return k


def _anchor_derivatives(jump, props, kin):
    """d(mixity)/du, d(delta0)/du, d(delta_f)/du and d(delta)/du at a jump."""
    k_n, k_sh = props.k_n, props.k_sh
    mun = macaulay(jump[0])
    us1, us2 = jump[1], jump[2]
    ush2 = us1 * us1 + us2 * us2
    measure = k_n * mun * mun + k_sh * ush2
    zero = np.zeros(3)
    if measure < DEGENERATE_MEASURE:
        return zero, zero, zero, zero
    db_du = (2.0 * k_n * k_sh / measure ** 2) * np.array(
        [-ush2 * mun, us1 * mun * mun, us2 * mun * mun])
    b = min(max(kin.mixity, MIXITY_EPS), 1.0 - MIXITY_EPS)
    b_pow = props.eta_bk * b ** (props.eta_bk - 1.0)
    dd0_db = ((k_sh * props.u0_sh ** 2 - k_n * props.u0_n ** 2) * b_pow
              / (2.0 * kin.delta0 * kin.k_mode))
    dd0_dkb = -kin.delta0 / (2.0 * kin.k_mode)
    dkb_db = k_sh - k_n
    dd0_du = (dd0_db + dd0_dkb * dkb_db) * db_du
    ddf_db = ((k_sh * props.u0_sh * props.uf_sh
               - k_n * props.u0_n * props.uf_n) * b_pow
              / (kin.delta0 * kin.k_mode))
    ddf_dkb = -kin.delta_f / kin.k_mode
    ddf_dd0 = -kin.delta_f / kin.delta0
    ddf_du = (ddf_db + ddf_dkb * dkb_db) * db_du + ddf_dd0 * dd0_du
    s3 = (k_n * k_n * mun * mun + k_sh * k_sh * ush2) ** 1.5
    ddelta_du = np.array([
        k_n * mun * (k_n * k_n * mun * mun
                     + (2.0 * k_sh * k_sh - k_n * k_sh) * ush2),
        k_sh * us1 * (2.0 * k_n * k_n * mun * mun
                      - k_n * k_sh * mun * mun + k_sh * k_sh * ush2),
        k_sh * us2 * (2.0 * k_n * k_n * mun * mun
                      - k_n * k_sh * mun * mun + k_sh * k_sh * ush2),
    ]) / s3
    return db_du, dd0_du, ddf_du, ddelta_du


def _damage_gradient(jump, props, fat, dn, theta, damage, branch, kin,
                     state: CohesivePointState):
    """dD/du on the active loading branch (zero on unloading)."""
    db_du, dd0_du, ddf_du, ddelta_du = _anchor_derivatives(jump, props, kin)
    span = kin.delta_f - kin.delta0
    if branch == BRANCH_STATIC:
        dds_ddelta = 1.0 / span
        dds_dd0 = (kin.delta - kin.delta_f) / span ** 2
        dds_ddf = (kin.delta0 - kin.delta) / span ** 2
        return dds_ddelta * ddelta_du + dds_dd0 * dd0_du + dds_ddf * ddf_du

    # fatigue branch: consistency condition of the converged local residual
    e, beta, p = _rate_parameters(kin.mixity, fat)
    dstar = damage * span + kin.delta0
    f = damage_rate_cf20(kin.delta, dstar, damage, e, beta, p, fat.gamma)
    if f <= 0.0 or not math.isfinite(f) or damage >= 1.0:
        return np.zeros(3)
    df_ddelta = beta / kin.delta * f
    df_dstar = -beta / dstar * f
    df_dd = (p - beta) / (1.0 - damage) * f
    df_de = -beta / e * f
    df_dbeta = (math.log(kin.delta / dstar) + math.log1p(-damage)
                - math.log(e)) * f
    df_dp = -f / (p + 1.0) * (1.0 + (p + 1.0) * math.log1p(-damage))
    dbeta_de = 7.0 * fat.eta_brittle * math.log(10.0) / (math.log(e) ** 2 * e)
    dp_dbeta = 1.0 if fat.coupled else 0.0
    cl = 1.0 + JUVINALL_SLOPE * kin.mixity
    eps, ratio = fat.epsilon, fat.stress_ratio
    de_dcl = 2.0 * eps * (1.0 - ratio) / (cl * eps * (ratio + 1.0)
                                          - ratio + 1.0) ** 2
    param_chain = ((df_de + (df_dbeta + df_dp * dp_dbeta) * dbeta_de)
                   * de_dcl * JUVINALL_SLOPE)
    dstar_du = (1.0 - damage) * dd0_du + damage * ddf_du
    dr_dd = 1.0 - dn * theta * (df_dd + df_dstar * span)
    # dr/dD -> 0 at the fold where the local root disappears (possible for
    # p > beta); bound the consistency amplification so the global tangent
    # stays finite there. Regular states have dr/dD of order one.
    dr_dd = max(dr_dd, 1e-2)
    dr_du = -dn * theta * (df_ddelta * ddelta_du + df_dstar * dstar_du
                           + param_chain * db_du)
    return -dr_du / dr_dd


def _tangent(jump, props, fat, dn, theta, damage, branch, kin,
             state: CohesivePointState):
    if branch == BRANCH_UNLOADING or damage >= 1.0:
        # frozen secant; `damage` (not the committed value) so that points
        # that just failed completely carry the clamped residual stiffness
        committed = equivalent_kinematics(state.jump, props, state.damage)
        d = stiffness_damage(damage, committed.delta0, committed.delta_f)
        return _secant_matrix(jump, props, d)
    d = stiffness_damage(damage, kin.delta0, kin.delta_f)
    dd_du_damage = _damage_gradient(jump, props, fat, dn, theta, damage,
                                    branch, kin, state)
    _, dd0_du, ddf_du, _ = _anchor_derivatives(jump, props, kin)
    dstar = damage * kin.delta_f + (1.0 - damage) * kin.delta0
    dd_dbig = kin.delta0 * kin.delta_f / dstar ** 2
    dd_dd0 = (damage - 1.0) * damage * kin.delta_f / dstar ** 2
    dd_ddf = (1.0 - damage) * damage * kin.delta0 / dstar ** 2
    dd_du = dd_dbig * dd_du_damage + dd_dd0 * dd0_du + dd_ddf * ddf_du
    pku = np.array([props.k_n * macaulay(jump[0]),
                    props.k_sh * jump[1], props.k_sh * jump[2]])
    return _secant_matrix(jump, props, d) - np.outer(pku, dd_du)


def update_traction(jump, state: CohesivePointState, dn: float, theta: float,
                    props: CohesiveProperties,
                    fat: FatigueProperties) -> TractionAndTangent:
    """Full traction update at one integration point.

    Computes the equivalent kinematics at the current jump, takes the
    maximum of committed, static and fatigue damage (monotone), applies the
    stiffness damage to the tensile/shear part of the dummy stiffness
    (compressive normal jumps retain full normal stiffness), and returns
    traction, consistent tangent and the trial state.
    """
    jump = np.asarray(jump, dtype=float)
    fallback = mode_mixity_from_jump(state.jump, props.k_n, props.k_sh)
    kin = equivalent_kinematics(jump, props, state.damage, fallback)
    ds = static_damage(kin.delta, kin.delta0, kin.delta_f)
    if dn > 0.0 and state.damage < 1.0:
        df, res = update_fatigue_damage_implicit(state, kin, dn, theta, fat)
    else:
        df, res = state.damage, 0.0
    damage = min(1.0, max(state.damage, ds, df))

    tangent = None
    if damage <= state.damage:
        branch = BRANCH_UNLOADING
        committed = equivalent_kinematics(state.jump, props, state.damage)
        d = stiffness_damage(state.damage, committed.delta0, committed.delta_f)
        tangent = _secant_matrix(jump, props, d)
    else:
        branch = BRANCH_FATIGUE if df > ds else BRANCH_STATIC
        d = stiffness_damage(damage, kin.delta0, kin.delta_f)
        if damage >= 1.0:
            tangent = _secant_matrix(jump, props, DAMAGE_CLAMP)

    traction = np.array([
        props.k_n * jump[0] - d * props.k_n * macaulay(jump[0]),
        (1.0 - d) * props.k_sh * jump[1],
        (1.0 - d) * props.k_sh * jump[2],
    ])
    if tangent is None:
        tangent = _tangent(jump, props, fat, dn, theta, damage, branch, kin,
                           state)

    e, beta, p = _rate_parameters(kin.mixity, fat)
    dstar = damage * (kin.delta_f - kin.delta0) + kin.delta0
    rate = damage_rate_cf20(kin.delta, dstar, damage, e, beta, p, fat.gamma)
    if not math.isfinite(rate):
        rate = 0.0
    trial = CohesivePointState(damage=damage, jump=jump.copy(), rate=rate,
                               root_residual=res)
    return TractionAndTangent(traction=traction, tangent=tangent,
                              state=trial, branch=branch)


def consistent_tangent(jump, state: CohesivePointState, branch: str,
                       dn: float, theta: float, props: CohesiveProperties,
                       fat: FatigueProperties) -> np.ndarray:
    """Material tangent for a prescribed branch at a (jump, state) pair.

    The caller is responsible for passing the branch that is actually
    active at this jump; `update_traction` determines it internally.
    """
    jump = np.asarray(jump, dtype=float)
    fallback = mode_mixity_from_jump(state.jump, props.k_n, props.k_sh)
    kin = equivalent_kinematics(jump, props, state.damage, fallback)
    if branch == BRANCH_UNLOADING:
        damage = state.damage
    else:
        ds = static_damage(kin.delta, kin.delta0, kin.delta_f)
        if branch == BRANCH_FATIGUE and dn > 0.0:
            df, _ = update_fatigue_damage_implicit(state, kin, dn, theta, fat)
        else:
            df = state.damage
        damage = min(1.0, max(state.damage, ds, df))
    return _tangent(jump, props, fat, dn, theta, damage, branch, kin, state)


def dissipated_energy(state: CohesivePointState,
                      props: CohesiveProperties) -> float:
    """Energy dissipated so far at a point: D times the B-K critical ERR."""
    mixity = mode_mixity_from_jump(state.jump, props.k_n, props.k_sh)
    return state.damage * props.critical_err(mixity)
