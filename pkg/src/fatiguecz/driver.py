"""Analysis orchestration: static ramp, cyclic phase with adaptive cycle
jumping keyed to global Newton iteration counts, step cancellation/retry
and crack-insertion re-equilibration."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import cohesive as cz
from . import system
from .errors import AnalysisStalled, FatigueCZError


@dataclass
class LoadProgram:
    """Ramp + cyclic loading. The model's prescribed patterns and force
    patterns carry the full amplitude; the driver scales them by the load
    factor in [0, 1]."""

    control: str = "displacement"    # 'displacement' | 'force'
    amplitude: float = 1.0           # u_p^max (mm) or resultant force scale
    group: str = "load"              # group used for stiffness reporting
    comp: int = 1
    ramp_steps: int = 10
    max_cycles: float = 1.0e7
    stiffness_floor: float = 0.0     # fraction of the post-ramp stiffness
    stop_on_full_failure: bool = False
    adaptive: bool = True
    dn_constant: float = 10.0


@dataclass
class CycleStepController:
    """Cycle-increment adaptation from global Newton iteration counts."""

    growth_base: float = 2.0
    smoothing: float = 2.0
    n_iter_opt: int = 4
    n_iter_max: int = 10
    cut_factor: float = 0.6
    dn_init: float = 0.1
    dn_min: float = 1.0e-3
    dn_max: float = 1.0e6

    def __post_init__(self):
        if not (self.growth_base > 1.0 and self.smoothing > 0.0
                and 0.0 < self.cut_factor < 1.0
                and self.dn_min <= self.dn_init <= self.dn_max):
            raise FatigueCZError("inconsistent step controller parameters")

    def next_increment(self, dn_current: float, n_iter: int) -> float:
        grow = self.growth_base ** (-(n_iter - self.n_iter_opt)
                                    / self.smoothing)
        return min(self.dn_max, max(self.dn_min, grow * dn_current))


@dataclass
class StepRecord:
    step: int
    n_cycles: float
    dn: float
    n_iter: int
    load_factor: float
    stiffness: float
    dissipated: float
    n_cracks: int
    delaminated: float
    max_damage: float
    reaction: np.ndarray
    u_load: float


@dataclass
class RunResult:
    records: list
    events: list
    state: system.SystemState
    end_reason: str

    @property
    def stalled(self) -> bool:
        return self.end_reason == "stalled"


class CommitAudit:
    """Streaming checks over every committed state (used by acceptance).

    Counts violations of: damage monotonicity, the quasi-static envelope
    D >= D_s(delta), the compressive Macaulay contract, and the |r| < 1e-10
    bound of implicit local roots.
    """

    def __init__(self):
        self.points = 0
        self.monotonicity = 0
        self.envelope = 0
        self.compression = 0
        self.residual = 0

    @property
    def violations(self):
        return (self.monotonicity + self.envelope + self.compression
                + self.residual)

    def observe(self, model, state, trial, dn):
        caches = model.line_cache + model.area_cache
        for cache, old_states, new_states in zip(
                caches, state.interface_states, trial.interface):
            for old, new in zip(old_states, new_states):
                self._check(old, new, cache["props"], model, dn)
        for line, seg_trials in zip(state.cracks, trial.cracks):
            props = model.crack_props[line.ply]
            for seg, new_states in zip(line.segments, seg_trials):
                for old, new in zip(seg.states, new_states):
                    self._check(old, new, props, model, dn)

    def _check(self, old, new, props, model, dn):
        self.points += 1
        if new.damage < old.damage - 1e-15:
            self.monotonicity += 1
        kin = cz.equivalent_kinematics(new.jump, props, new.damage)
        ds = cz.static_damage(kin.delta, kin.delta0, kin.delta_f)
        if new.damage < ds - 1e-12:
            self.envelope += 1
        if new.jump[0] < 0.0:
            tt = cz.update_traction(new.jump, new, 0.0, model.theta, props,
                                    model.fatigue)
            if tt.traction[0] != props.k_n * new.jump[0]:
                self.compression += 1
        if dn > 0.0 and new.root_residual >= 1e-10:
            self.residual += 1


def _measure(model, state, program, f_int, load_factor):
    reaction = model.reaction(f_int, program.group)
    if program.control == "displacement":
        force = abs(reaction[program.comp])
        disp = abs(load_factor * program.amplitude)
    else:
        pattern = model.force_pattern(state.ndof)
        nodes = model.mesh.groups[program.group]
        dofs = [2 * int(n) + program.comp for n in nodes]
        force = abs(load_factor * sum(pattern[d] for d in dofs))
        disp = abs(float(np.mean([state.u[d] for d in dofs])))
    stiffness = force / disp if disp > 0.0 else 0.0
    return reaction, force, disp, stiffness


def _insertion_pass(model, state, load_factor, solve, events, audit,
                    max_rounds=20):
    """Insert cracks and re-equilibrate until no candidate remains.

    Returns the number of inserted segments, or None on a failed
    re-equilibration (caller cancels the step)."""
    total = 0
    for _ in range(max_rounds):
        cands = system.collect_insertion_candidates(model, state, state.u)
        if not cands:
            break
        n, ev = system.insert_cracks(model, state, cands)
        for kind, element, f_index, nx, ny in ev:
            events.append((kind, state.step + 1, state.n_cycles, element,
                           f_index, nx, ny))
        if n == 0:
            break
        total += n
        res = system.newton_solve(model, state, load_factor, 0.0, solve)
        if not res.converged:
            return None
        if audit is not None:
            audit.observe(model, state, res.trial, 0.0)
        model.commit(state, res.u, res.trial)
    return total


def run(model: system.FatigueModel, program: LoadProgram,
        controller: CycleStepController,
        solve: system.SolveSettings | None = None,
        audit: CommitAudit | None = None,
        max_steps: int | None = None) -> RunResult:
    """Execute the full analysis. Returns the history of converged steps
    and an event log; raises AnalysisStalled only when the ramp itself
    cannot be equilibrated."""
    solve = solve or system.SolveSettings()
    state = model.initial_state()
    records = []
    events = []
    step = 0

    def commit_step(res, load_factor, dn):
        nonlocal step
        if audit is not None:
            audit.observe(model, state, res.trial, dn)
        model.commit(state, res.u, res.trial)
        presc_idx, _ = model.prescribed_arrays()
        ref = float(np.linalg.norm(res.f_int[presc_idx])) if len(presc_idx) \
            else 0.0
        ref = max(ref, load_factor * float(np.linalg.norm(
            model.force_pattern(state.ndof))))
        state.reference_force = max(state.reference_force, ref)
        inserted = _insertion_pass(model, state, load_factor, solve, events,
                                   audit)
        if inserted is None:
            return None
        step += 1
        state.step = step
        reaction, force, disp, stiffness = _measure(
            model, state, program, res.f_int, load_factor)
        summary = system.measure_damage(model, state)
        record = StepRecord(
            step=step, n_cycles=state.n_cycles, dn=dn,
            n_iter=res.iterations, load_factor=load_factor,
            stiffness=stiffness, dissipated=summary.dissipated,
            n_cracks=summary.n_segments, delaminated=summary.delaminated,
            max_damage=summary.max_damage, reaction=reaction, u_load=disp)
        records.append(record)
        return record

    # ---- static ramp (dn = 0, fatigue inactive) -------------------------
    def ramp_to(lam_from, lam_to, depth):
        res = system.newton_solve(model, state, lam_to, 0.0, solve)
        if res.converged:
            return commit_step(res, lam_to, 0.0) is not None
        if depth >= 4:
            return False
        mid = 0.5 * (lam_from + lam_to)
        return (ramp_to(lam_from, mid, depth + 1)
                and ramp_to(mid, lam_to, depth + 1))

    lam_prev = 0.0
    for k in range(1, program.ramp_steps + 1):
        lam = k / program.ramp_steps
        if not ramp_to(lam_prev, lam, 0):
            raise AnalysisStalled(
                f"static ramp failed to converge at load factor {lam}")
        lam_prev = lam

    stiff0 = records[-1].stiffness if records else 0.0
    end_reason = "max-cycles"

    def solve_cyclic(dn):
        res = system.newton_solve(model, state, 1.0, dn, solve,
                                  max_iter=controller.n_iter_max)
        if res.converged or program.adaptive:
            return res
        # constant increments cannot be cut; warm-start the full step from
        # intermediate (non-committing) solves at fractional increments
        u_warm = state.u
        sub = 0.25 * dn
        reached = 0.0
        for _ in range(64):
            target = min(dn, reached + sub)
            trial = system.newton_solve(model, state, 1.0, target, solve,
                                        max_iter=controller.n_iter_max,
                                        u0=u_warm)
            if trial.converged:
                u_warm = trial.u
                reached = target
                if target >= dn:
                    events.append(("continuation", state.n_cycles, dn))
                    return trial
            else:
                sub *= 0.5
                if sub < 1e-3 * dn:
                    return trial
        return res

    # ---- cyclic phase ----------------------------------------------------
    dn = controller.dn_init if program.adaptive else program.dn_constant
    while state.n_cycles < program.max_cycles:
        if max_steps is not None and step >= max_steps:
            end_reason = "max-steps"
            break
        snapshot = state.clone()
        res = solve_cyclic(dn)
        record = None
        if res.converged:
            state.n_cycles += dn
            record = commit_step(res, 1.0, dn)
        if record is None:
            state = snapshot
            events.append(("cut", state.n_cycles, dn))
            if not program.adaptive:
                end_reason = "non-convergence"
                break
            dn *= controller.cut_factor
            if dn < controller.dn_min:
                end_reason = "stalled"
                break
            continue
        if program.stop_on_full_failure and record.max_damage >= 1.0 - 1e-9:
            end_reason = "full-failure"
            break
        if (program.stiffness_floor > 0.0 and stiff0 > 0.0
                and record.stiffness < program.stiffness_floor * stiff0):
            end_reason = "stiffness-floor"
            break
        if program.adaptive:
            dn = controller.next_increment(dn, res.iterations)

    return RunResult(records=records, events=events, state=state,
                     end_reason=end_reason)
