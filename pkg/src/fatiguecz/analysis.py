"""Post-processing and analytical oracles: crack length, growth rates,
ASTM energy release rate, analytical cycles-to-failure, S-N sweeps and
Paris-data extraction."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import cohesive as cz
from .errors import InvalidPropertyError

FULL_FAILURE = 1.0 - 1e-9


@dataclass
class CrackHistoryRecord:
    n_cycles: float
    a: float            # crack length, mm
    g_imax: float       # ERR at maximum load, N/mm
    dadn: float         # growth rate, mm/cycle
    f_max: float        # reaction force at the load node, N


def crack_length(damages, weights, a0: float) -> float:
    """Damage-weighted crack length a0 + sum(D_ip J_ip w_ip)."""
    return a0 + float(np.dot(damages, weights))


def interface_crack_length(model, state, a0: float) -> float:
    """Crack length from the committed interface damage of a model state."""
    damages = []
    weights = []
    for cache, states in zip(model.line_cache + model.area_cache,
                             state.interface_states):
        for st, w in zip(states, cache["wgeo"]):
            damages.append(st.damage)
            weights.append(w)
    return crack_length(np.array(damages), np.array(weights), a0)


def growth_rate(ns, lengths):
    """Backward-difference da/dN; entries with dN = 0 are skipped (nan)."""
    ns = np.asarray(ns, dtype=float)
    lengths = np.asarray(lengths, dtype=float)
    out = np.full(len(ns), np.nan)
    for i in range(1, len(ns)):
        dn = ns[i] - ns[i - 1]
        if dn > 0.0:
            out[i] = (lengths[i] - lengths[i - 1]) / dn
    return out


def err_astm(f_max: float, u_p_max: float, width: float, a: float,
             delta_cor: float) -> float:
    """Mode-I energy release rate per the ASTM D5528 reduction:
    G = 3 F u / (2 b (a + delta_cor))."""
    if width <= 0.0 or a + delta_cor <= 0.0:
        raise InvalidPropertyError("ASTM reduction needs positive geometry")
    return 3.0 * f_max * u_p_max / (2.0 * width * (a + delta_cor))


def analytical_cycles_to_failure(stress_factor: float, endurance: float,
                                 beta: float, p: float,
                                 gamma: float) -> float:
    """Cycles to failure of a constant-stress point:
    N = gamma E^beta s^-beta (1 - s^(p+1))."""
    if not 0.0 < stress_factor <= 1.0:
        raise InvalidPropertyError(
            f"stress factor must be in (0, 1], got {stress_factor}")
    return (gamma * endurance ** beta * stress_factor ** (-beta)
            * (1.0 - stress_factor ** (p + 1.0)))


def cycles_to_failure_for(fat: cz.FatigueProperties,
                          stress_factor: float) -> float:
    """Analytical life for a pure mode-I point with the given fatigue set."""
    e = cz.relative_endurance(0.0, fat.stress_ratio, fat.epsilon)
    beta = cz.sn_exponent(e, fat.eta_brittle)
    return analytical_cycles_to_failure(stress_factor, e, beta,
                                        fat.paris_exponent(beta), fat.gamma)


def cycles_to_failure_from_run(result) -> tuple[float, bool]:
    """Simulated failure life from a driver run.

    The first committed step whose damage reaches full failure defines
    N_fail, interpolated linearly in N between the bracketing steps. A
    stalled run (no equilibrium beyond the failure damage at constant
    stress) fails at its last committed cycle count. Otherwise the life is
    censored: returns (last N, True).
    """
    prev = None
    for rec in result.records:
        if rec.max_damage >= FULL_FAILURE:
            if prev is None or rec.max_damage <= prev.max_damage:
                return rec.n_cycles, False
            frac = ((FULL_FAILURE - prev.max_damage)
                    / (rec.max_damage - prev.max_damage))
            return prev.n_cycles + frac * (rec.n_cycles - prev.n_cycles), False
        if rec.dn > 0.0:
            prev = rec
    if result.stalled:
        return result.state.n_cycles, False
    return result.state.n_cycles, True


@dataclass
class SweepRow:
    stress_factor: float
    n_fail_sim: float
    n_fail_analytical: float
    censored: bool

    @property
    def rel_err(self) -> float:
        # sub-cycle analytical lives (factor -> 1) compare absolutely
        return abs(self.n_fail_sim - self.n_fail_analytical) \
            / max(self.n_fail_analytical, 1.0)


def sn_sweep(build_case, stress_factors, fat: cz.FatigueProperties):
    """Run the driver per stress factor and report both lives.

    `build_case(factor)` must return (model, program, controller) for a
    constant-stress single-element run at that factor.
    """
    from . import driver  # local import to avoid a cycle
    from .errors import AnalysisStalled

    rows = []
    for s in stress_factors:
        model, program, controller = build_case(s)
        try:
            result = driver.run(model, program, controller)
        except AnalysisStalled:
            # no equilibrium on the static ramp: fails before cycling starts
            n_sim, censored = 0.0, False
        else:
            n_sim, censored = cycles_to_failure_from_run(result)
        rows.append(SweepRow(stress_factor=s, n_fail_sim=n_sim,
                             n_fail_analytical=cycles_to_failure_for(fat, s),
                             censored=censored))
    return rows


def dcb_crack_history(records, a0: float, width: float, u_p_max: float,
                      delta_cor: float):
    """Crack-history records of a DCB run from the driver step records."""
    out = []
    ns = [r.n_cycles for r in records]
    lengths = [a0 + r.delaminated for r in records]
    rates = growth_rate(ns, lengths)
    for rec, a, rate in zip(records, lengths, rates):
        f_max = abs(rec.reaction[1])
        out.append(CrackHistoryRecord(
            n_cycles=rec.n_cycles, a=a,
            g_imax=err_astm(f_max, u_p_max, width, a, delta_cor),
            dadn=rate if math.isfinite(rate) else 0.0, f_max=f_max))
    return out


def fit_loglog(x, y):
    """Least-squares line through (log10 x, log10 y); returns
    (slope, intercept, r_squared)."""
    lx = np.log10(np.asarray(x, dtype=float))
    ly = np.log10(np.asarray(y, dtype=float))
    slope, intercept = np.polyfit(lx, ly, 1)
    fit = slope * lx + intercept
    ss_res = float(np.sum((ly - fit) ** 2))
    ss_tot = float(np.sum((ly - np.mean(ly)) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0.0 else 1.0
    return float(slope), float(intercept), r2


def paris_data(history, g_ic: float, stress_ratio: float, records=None):
    """Propagation-phase Paris points: normalized ERR vs growth rate.

    Records before the process zone is fully developed (first step whose
    damage reaches 1) are dropped; so are zero-rate entries.
    """
    onset_n = None
    if records is not None:
        for rec in records:
            if rec.max_damage >= FULL_FAILURE:
                onset_n = rec.n_cycles
                break
    g_norm = []
    rates = []
    for rec in history:
        if onset_n is not None and rec.n_cycles < onset_n:
            continue
        if rec.dadn > 0.0 and rec.g_imax > 0.0 and rec.n_cycles > 0.0:
            g_norm.append(rec.g_imax * (1.0 - stress_ratio) / g_ic)
            rates.append(rec.dadn)
    return np.array(g_norm), np.array(rates)


# ---- consistent-tangent audit ----------------------------------------------

def jump_with_mixity(props: cz.CohesiveProperties, mixity: float,
                     scale: float, negative_normal: bool = False):
    """Jump vector with an exact target mode-mixity and equivalent jump
    equal to `scale` (compression replaces the zero normal part at B=1)."""
    if mixity == 0.0:
        return np.array([scale, 0.0, 0.0])
    k_mode = props.k_n * (1.0 - mixity) + mixity * props.k_sh
    ush = scale * math.sqrt(k_mode * mixity / props.k_sh)
    if mixity == 1.0:
        un = -0.3 * scale if negative_normal else 0.0
    else:
        un = scale * math.sqrt(k_mode * (1.0 - mixity) / props.k_n)
    return np.array([un, ush, 0.0])


def _fd_tangent(jump, state, dn, theta, props, fat, rel_step=1e-8):
    h = rel_step * np.linalg.norm(jump)
    out = np.zeros((3, 3))
    for j in range(3):
        plus, minus = jump.copy(), jump.copy()
        plus[j] += h
        minus[j] -= h
        tp = cz.update_traction(plus, state, dn, theta, props, fat).traction
        tm = cz.update_traction(minus, state, dn, theta, props, fat).traction
        out[:, j] = (tp - tm) / (2.0 * h)
    return out


def tangent_audit(props: cz.CohesiveProperties, fat: cz.FatigueProperties,
                  mixities=(0.0, 0.3, 0.7, 1.0), samples=100, seed=0,
                  theta=0.5):
    """Randomized consistency audit of the material tangent.

    Loading branches (static and fatigue) are compared against central
    finite differences of the traction update at fixed history and cycle
    increment; the unloading branch is compared against the secant matrix
    it must equal exactly. Returns {branch: (max relative error, count)}.
    """
    rng = np.random.default_rng(seed)
    results = {b: [0.0, 0] for b in ("static", "fatigue", "unloading")}
    scale0 = props.u0_n

    def record(branch, err):
        results[branch][0] = max(results[branch][0], err)
        results[branch][1] += 1

    for mixity in mixities:
        count = {b: 0 for b in results}
        guard = 0
        while min(count.values()) < samples and guard < 40 * samples:
            guard += 1
            branch = min(count, key=count.get)
            if branch == "static":
                jump = jump_with_mixity(props, mixity,
                                        rng.uniform(2.0, 8.0) * scale0, True)
                kin = cz.equivalent_kinematics(jump, props, 0.0)
                ds = cz.static_damage(kin.delta, kin.delta0, kin.delta_f)
                state = cz.CohesivePointState(
                    damage=rng.uniform(0.0, 0.8) * ds, jump=0.2 * jump)
                dn = 0.0
            elif branch == "fatigue":
                jump = jump_with_mixity(props, mixity,
                                        rng.uniform(0.3, 0.8) * scale0, True)
                state = cz.CohesivePointState(
                    damage=rng.uniform(0.05, 0.5), jump=jump.copy(),
                    rate=rng.uniform(1e-5, 1e-3))
                dn = rng.uniform(20.0, 300.0)
            else:
                jump = jump_with_mixity(props, mixity,
                                        rng.uniform(2.0, 6.0) * scale0, True)
                kin = cz.equivalent_kinematics(jump, props, 0.0)
                ds = cz.static_damage(kin.delta, kin.delta0, kin.delta_f)
                state = cz.CohesivePointState(
                    damage=min(0.95, ds + rng.uniform(0.01, 0.3)),
                    jump=jump.copy())
                jump = 0.5 * jump
                dn = 0.0
            tt = cz.update_traction(jump, state, dn, theta, props, fat)
            if tt.branch != branch or tt.state.damage >= 1.0:
                continue
            if branch == "unloading":
                committed = cz.equivalent_kinematics(state.jump, props,
                                                     state.damage)
                d = cz.stiffness_damage(state.damage, committed.delta0,
                                        committed.delta_f)
                secant = np.zeros((3, 3))
                secant[0, 0] = props.k_n * (1.0 - d) if jump[0] > 0 \
                    else props.k_n
                secant[1, 1] = secant[2, 2] = (1.0 - d) * props.k_sh
                err = (np.linalg.norm(tt.tangent - secant)
                       / np.linalg.norm(secant))
            else:
                fd = _fd_tangent(jump, state, dn, theta, props, fat)
                err = (np.linalg.norm(fd - tt.tangent)
                       / np.linalg.norm(tt.tangent))
            record(branch, err)
            count[branch] += 1
    return {b: (v[0], v[1]) for b, v in results.items()}
