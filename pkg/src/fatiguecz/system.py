"""Global model: sparse assembly, displacement/force control and the
Newton-Raphson solver, plus crack-insertion bookkeeping.

Dof numbering is (2*node, 2*node+1) for (ux, uy); phantom nodes appended
by crack insertion extend the dof vector. Bulk elements are linear elastic
with cached stiffness; all nonlinearity lives in cohesive points.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import cohesive as cz
from . import xfem
from .errors import AssemblyError
from .errors import LocalSolverFailure
from .fem.elements import (LINE_NEWTON_COTES, SEGMENT_GAUSS, line_frame,
                           line_interface_jump_operator, quad4_stiffness,
                           tri3_b_matrix)


@dataclass
class XfemSettings:
    enabled: bool = False
    l_c: float = 1.0
    same_line_tol: float = 0.35
    max_per_step: int = 100
    squared_mixity: bool = False


@dataclass
class SystemState:
    """Everything that evolves during an analysis.

    History commits only on converged steps; cancelled steps restore a
    clone taken before the attempt.
    """

    u: np.ndarray
    n_nodes: int
    n_cycles: float = 0.0
    step: int = 0
    interface_states: list = field(default_factory=list)
    cracks: list = field(default_factory=list)
    reference_force: float = 0.0

    def clone(self) -> "SystemState":
        return SystemState(
            u=self.u.copy(), n_nodes=self.n_nodes, n_cycles=self.n_cycles,
            step=self.step,
            interface_states=[[s.copy() for s in states]
                              for states in self.interface_states],
            cracks=[line.copy() for line in self.cracks],
            reference_force=self.reference_force)

    @property
    def ndof(self) -> int:
        return 2 * self.n_nodes


def _interleave(nodes):
    out = np.empty(2 * len(nodes), dtype=int)
    for i, n in enumerate(nodes):
        out[2 * i] = 2 * n
        out[2 * i + 1] = 2 * n + 1
    return out


@dataclass
class Trial:
    """Material history produced by one assembly; committed on convergence."""

    interface: list = field(default_factory=list)
    cracks: list = field(default_factory=list)   # parallel to state.cracks


class FatigueModel:
    """Mesh + materials + boundary conditions + cohesive bindings."""

    def __init__(self, mesh, materials, fatigue, theta=0.5,
                 interface_props=None, crack_props=None, xfem_settings=None):
        self.mesh = mesh.validate()
        self.materials = materials
        self.fatigue = fatigue
        self.theta = theta
        self.interface_props = interface_props or {}
        self.crack_props = crack_props or {}
        self.xfem = xfem_settings or XfemSettings()
        self.threads = max(1, int(os.environ.get("FATIGUECZ_THREADS", "1")))
        self._prescribed = {}
        self._forces = {}
        self._build_caches()

    # ---- boundary conditions -------------------------------------------
    def prescribe(self, nodes, comp, value):
        """Displacement control: dof value is value * load_factor."""
        for n in np.atleast_1d(nodes):
            self._prescribed[2 * int(n) + comp] = float(value)

    def add_force(self, nodes, comp, value_per_node):
        """Force control: external force is value * load_factor."""
        for n in np.atleast_1d(nodes):
            dof = 2 * int(n) + comp
            self._forces[dof] = self._forces.get(dof, 0.0) + float(value_per_node)

    def prescribed_arrays(self):
        if self._prescribed:
            idx = np.array(sorted(self._prescribed), dtype=int)
            val = np.array([self._prescribed[i] for i in idx])
        else:
            idx = np.zeros(0, dtype=int)
            val = np.zeros(0)
        return idx, val

    def force_pattern(self, ndof):
        f = np.zeros(ndof)
        for dof, value in self._forces.items():
            f[dof] = value
        return f

    # ---- caches ---------------------------------------------------------
    def _build_caches(self):
        mesh = self.mesh
        self.bulk_cache = []
        for eid, el in enumerate(mesh.bulk):
            coords = mesh.nodes[list(el.nodes)]
            c = self.materials[el.material].stiffness(el.angle)
            dofs = _interleave(el.nodes)
            if el.kind == "quad4":
                k = quad4_stiffness(coords, c, el.thickness)
                entry = dict(kind="quad4", dofs=dofs, k=k, coords=coords)
            else:
                b, area = tri3_b_matrix(coords)
                btcb = b.T @ c @ b * el.thickness   # per unit area
                entry = dict(kind="tri3", dofs=dofs, k=btcb * area,
                             btcb=btcb, cb=c @ b, area=area, coords=coords,
                             normal=xfem.crack_normal_from_angle(el.angle))
            if not np.all(np.isfinite(entry["k"])):
                raise AssemblyError(f"bulk element {eid}: non-finite stiffness")
            kmat = entry["k"]
            entry["rows"] = np.repeat(dofs, len(dofs))
            entry["cols"] = np.tile(dofs, len(dofs))
            entry["flat"] = kmat.ravel()
            self.bulk_cache.append(entry)

        self.line_cache = []
        for el in mesh.line_interfaces:
            p0 = mesh.nodes[el.nodes[0]]
            p1 = mesh.nodes[el.nodes[1]]
            length, rot = line_frame(p0, p1)
            dofs = _interleave(el.nodes)
            ips = []
            weights = []
            for xi, w in LINE_NEWTON_COTES:
                op = rot @ line_interface_jump_operator(xi)
                ips.append((op, w * length * mesh.thickness))
                weights.append(w * length)
            self.line_cache.append(dict(
                dofs=dofs, ips=ips, wgeo=weights,
                rows=np.repeat(dofs, 8), cols=np.tile(dofs, 8),
                props=self.interface_props[el.props]))

        self.area_cache = []
        for el in mesh.area_interfaces:
            coords = mesh.nodes[list(el.nodes[:3])]
            _, area = tri3_b_matrix(coords)
            dofs = _interleave(el.nodes)
            rows_ips, cols_ips = [], []
            for ip in range(3):
                bot = dofs[2 * ip:2 * ip + 2]
                top = dofs[6 + 2 * ip:6 + 2 * ip + 2]
                rr, cc = [], []
                for (da, db) in ((top, top), (bot, bot), (top, bot),
                                 (bot, top)):
                    rr.append(np.repeat(da, 2))
                    cc.append(np.tile(db, 2))
                rows_ips.append(np.concatenate(rr))
                cols_ips.append(np.concatenate(cc))
            self.area_cache.append(dict(dofs=dofs, w=area / 3.0,
                                        wgeo=[area / 3.0] * 3,
                                        rows_ips=rows_ips, cols_ips=cols_ips,
                                        props=self.interface_props[el.props]))

    # ---- state ----------------------------------------------------------
    def initial_state(self) -> SystemState:
        n = len(self.mesh.nodes)
        states = []
        for cache in self.line_cache:
            states.append([cz.CohesivePointState() for _ in cache["ips"]])
        for cache in self.area_cache:
            states.append([cz.CohesivePointState() for _ in range(3)])
        return SystemState(u=np.zeros(2 * n), n_nodes=n,
                           interface_states=states)

    def commit(self, state: SystemState, u, trial: Trial):
        state.u = u.copy()
        state.interface_states = trial.interface
        for line, seg_trials in zip(state.cracks, trial.cracks):
            for seg, states in zip(line.segments, seg_trials):
                seg.states = states

    def reaction(self, f_int, group) -> np.ndarray:
        """Sum of internal forces over the group's prescribed dofs (all
        dofs when the group carries no prescriptions, e.g. force control)."""
        nodes = self.mesh.groups[group]
        out = np.zeros(2)
        any_prescribed = any(2 * int(n) + c in self._prescribed
                             for n in nodes for c in (0, 1))
        for n in nodes:
            for c in (0, 1):
                dof = 2 * int(n) + c
                if dof >= len(f_int):
                    continue
                if not any_prescribed or dof in self._prescribed:
                    out[c] += f_int[dof]
        return out


@dataclass
class DamageSummary:
    dissipated: float = 0.0     # N/mm * mm (line) or N/mm * mm^2 (area)
    delaminated: float = 0.0    # integral of D over the interface
    cracked_damage: float = 0.0  # integral of D over crack segments
    max_damage: float = 0.0
    n_segments: int = 0


def measure_damage(model: FatigueModel, state: SystemState) -> DamageSummary:
    """Damage integrals of the committed state (history-based, no assembly)."""
    out = DamageSummary()
    caches = model.line_cache + model.area_cache
    for cache, states in zip(caches, state.interface_states):
        props = cache["props"]
        for st, w in zip(states, cache["wgeo"]):
            out.delaminated += st.damage * w
            out.dissipated += cz.dissipated_energy(st, props) * w
            out.max_damage = max(out.max_damage, st.damage)
    for line in state.cracks:
        props = model.crack_props[line.ply]
        for seg in line.segments:
            out.n_segments += 1
            for st, (_, wg) in zip(seg.states, SEGMENT_GAUSS):
                w = wg * seg.length
                out.cracked_damage += st.damage * w
                out.dissipated += cz.dissipated_energy(st, props) * w
                out.max_damage = max(out.max_damage, st.damage)
    return out


# ---- assembly ------------------------------------------------------------

def _map_points(model, func, items):
    if model.threads > 1 and len(items) > 8:
        with ThreadPoolExecutor(max_workers=model.threads) as pool:
            return list(pool.map(func, items))
    return [func(item) for item in items]


def assemble(model: FatigueModel, state: SystemState, u=None, dn=0.0):
    """Internal force vector, consistent sparse tangent and trial history.

    u defaults to the committed displacement of the state; Newton passes
    trial iterates explicitly."""
    if u is None:
        u = state.u
    ndof = 2 * state.n_nodes
    f = np.zeros(ndof)
    rows, cols, vals = [], [], []
    theta = model.theta
    fat = model.fatigue

    cracked = {}
    for line in state.cracks:
        for seg in line.segments:
            cracked[seg.element] = line

    for eid, cache in enumerate(model.bulk_cache):
        if eid in cracked:
            continue
        dofs = cache["dofs"]
        f[dofs] += cache["k"] @ u[dofs]
        rows.append(cache["rows"])
        cols.append(cache["cols"])
        vals.append(cache["flat"])

    trial = Trial()

    # phantom-node split elements + cohesive crack segments
    for line in state.cracks:
        props = model.crack_props[line.ply]
        seg_trials = []
        for seg in line.segments:
            cache = model.bulk_cache[seg.element]
            el_nodes = model.mesh.bulk[seg.element].nodes
            dofs_a = _interleave(seg.conn_a)
            dofs_b = _interleave(seg.conn_b)
            for dofs_s, area in ((dofs_a, seg.area_a), (dofs_b, seg.area_b)):
                k = cache["btcb"] * area
                f[dofs_s] += k @ u[dofs_s]
                rows.append(np.repeat(dofs_s, 6))
                cols.append(np.tile(dofs_s, 6))
                vals.append(k.ravel())
            phantom = [line.duplicates[n] for n in el_nodes]
            dofs_pair = np.concatenate([_interleave(el_nodes),
                                        _interleave(phantom)])
            u_pair = u[dofs_pair]
            ip_trials = []
            for ip, (xi, wg) in enumerate(SEGMENT_GAUSS):
                op = seg.rotation @ xfem.segment_jump_operator(
                    seg, cache["coords"], xi)
                jl = op @ u_pair + seg.shift
                tt = cz.update_traction(np.array([jl[0], jl[1], 0.0]),
                                        seg.states[ip], dn, theta, props, fat)
                if not np.all(np.isfinite(tt.traction)):
                    raise AssemblyError(
                        f"crack segment in element {seg.element}: "
                        "non-finite traction")
                w = wg * seg.length * model.mesh.thickness
                f[dofs_pair] += op.T @ tt.traction[:2] * w
                kmat = op.T @ tt.tangent[:2, :2] @ op * w
                rows.append(np.repeat(dofs_pair, 12))
                cols.append(np.tile(dofs_pair, 12))
                vals.append(kmat.ravel())
                ip_trials.append(tt.state)
            seg_trials.append(ip_trials)
        trial.cracks.append(seg_trials)

    # zero-thickness interfaces (line + area)
    ns_line = len(model.line_cache)

    def eval_line(idx):
        cache = model.line_cache[idx]
        ue = u[cache["dofs"]]
        out = []
        for ip, (op, w) in enumerate(cache["ips"]):
            jl = op @ ue
            tt = cz.update_traction(np.array([jl[0], jl[1], 0.0]),
                                    state.interface_states[idx][ip],
                                    dn, theta, cache["props"], fat)
            out.append((tt, op, w))
        return out

    def eval_area(idx):
        cache = model.area_cache[idx]
        dofs = cache["dofs"]
        out = []
        for ip in range(3):
            jx = u[dofs[6 + 2 * ip]] - u[dofs[2 * ip]]
            jy = u[dofs[7 + 2 * ip]] - u[dofs[2 * ip + 1]]
            tt = cz.update_traction(np.array([0.0, jx, jy]),
                                    state.interface_states[ns_line + idx][ip],
                                    dn, theta, cache["props"], fat)
            out.append(tt)
        return out

    line_results = _map_points(model, eval_line, list(range(ns_line)))
    for idx, result in enumerate(line_results):
        cache = model.line_cache[idx]
        dofs = cache["dofs"]
        ip_trials = []
        for tt, op, w in result:
            if not np.all(np.isfinite(tt.traction)):
                raise AssemblyError(f"line interface {idx}: non-finite traction")
            f[dofs] += op.T @ tt.traction[:2] * w
            kmat = op.T @ tt.tangent[:2, :2] @ op * w
            rows.append(cache["rows"])
            cols.append(cache["cols"])
            vals.append(kmat.ravel())
            ip_trials.append(tt.state)
        trial.interface.append(ip_trials)

    area_results = _map_points(model, eval_area,
                               list(range(len(model.area_cache))))
    for idx, result in enumerate(area_results):
        cache = model.area_cache[idx]
        dofs = cache["dofs"]
        w = cache["w"]
        ip_trials = []
        for ip, tt in enumerate(result):
            if not np.all(np.isfinite(tt.traction)):
                raise AssemblyError(f"area interface {idx}: non-finite traction")
            ts = tt.traction[1:3]
            bot = dofs[2 * ip:2 * ip + 2]
            top = dofs[6 + 2 * ip:6 + 2 * ip + 2]
            f[top] += ts * w
            f[bot] -= ts * w
            kb = (tt.tangent[1:3, 1:3] * w).ravel()
            rows.append(cache["rows_ips"][ip])
            cols.append(cache["cols_ips"][ip])
            vals.append(np.concatenate([kb, kb, -kb, -kb]))
            ip_trials.append(tt.state)
        trial.interface.append(ip_trials)

    if rows:
        k_global = sp.coo_matrix(
            (np.concatenate(vals),
             (np.concatenate(rows), np.concatenate(cols))),
            shape=(ndof, ndof)).tocsr()
    else:
        k_global = sp.csr_matrix((ndof, ndof))
    return f, k_global, trial


# ---- Newton solver --------------------------------------------------------

@dataclass
class SolveSettings:
    tol_rel: float = 1e-6
    tol_abs: float = 1e-8
    max_iter: int = 10


@dataclass
class NewtonResult:
    converged: bool
    iterations: int
    u: np.ndarray
    f_int: np.ndarray
    trial: Trial
    residual_norm: float
    history: list


def newton_solve(model: FatigueModel, state: SystemState, load_factor, dn,
                 settings: SolveSettings | None = None,
                 max_iter: int | None = None, u0=None) -> NewtonResult:
    """Full Newton with the consistent tangent under displacement or force
    control. Iteration count = number of linear solves; non-convergence is
    reported, not raised (the driver cuts the cycle increment).

    u0 overrides the initial guess (predictor continuation); the committed
    state is never touched here.
    """
    settings = settings or SolveSettings()
    cap = max_iter if max_iter is not None else settings.max_iter
    ndof = state.ndof
    u = state.u.copy() if u0 is None else u0.copy()
    presc_idx, presc_val = model.prescribed_arrays()
    u[presc_idx] = load_factor * presc_val
    f_ext = load_factor * model.force_pattern(ndof)
    free = np.ones(ndof, dtype=bool)
    free[presc_idx] = False
    free_idx = np.flatnonzero(free)

    tol = settings.tol_rel * state.reference_force + settings.tol_abs
    history = []

    def try_assemble():
        # a local damage root that cannot be resolved signals the driver
        # to cut the cycle increment rather than aborting the analysis
        try:
            return assemble(model, state, u, dn)
        except LocalSolverFailure:
            return None

    assembled = try_assemble()
    if assembled is None:
        empty = Trial()
        return NewtonResult(False, 0, u, np.zeros(ndof), empty, np.inf, [])
    f_int, k_global, trial = assembled
    for it in range(cap + 1):
        r = f_ext - f_int
        rn = float(np.linalg.norm(r[free_idx])) if len(free_idx) else 0.0
        history.append(rn)
        if not np.isfinite(rn):
            return NewtonResult(False, it, u, f_int, trial, rn, history)
        if rn <= tol:
            return NewtonResult(True, it, u, f_int, trial, rn, history)
        if it == cap:
            break
        k_ff = k_global[free_idx][:, free_idx]
        try:
            du = spla.spsolve(k_ff, r[free_idx])
        except RuntimeError:
            return NewtonResult(False, it + 1, u, f_int, trial, rn, history)
        if not np.all(np.isfinite(du)):
            return NewtonResult(False, it + 1, u, f_int, trial, rn, history)
        u[free_idx] += du
        assembled = try_assemble()
        if assembled is None:
            return NewtonResult(False, it + 1, u, f_int, trial, rn, history)
        f_int, k_global, trial = assembled
    return NewtonResult(False, cap, u, f_int, trial, history[-1], history)


# ---- crack insertion -------------------------------------------------------

def collect_insertion_candidates(model: FatigueModel, state: SystemState, u):
    """Failure indices of all crackable, uncracked bulk points."""
    if not model.xfem.enabled:
        return []
    cracked = {seg.element for line in state.cracks for seg in line.segments}
    out = []
    for eid, cache in enumerate(model.bulk_cache):
        el = model.mesh.bulk[eid]
        if cache["kind"] != "tri3" or not el.crackable or eid in cracked:
            continue
        sigma = cache["cb"] @ u[cache["dofs"]]
        props = model.crack_props[el.ply]
        f_i = xfem.insertion_index(sigma, cache["normal"], props,
                                   model.fatigue, model.xfem.squared_mixity)
        if f_i > 1.0:
            out.append(xfem.InsertionCandidate(
                element=eid, ply=el.ply, angle=el.angle,
                normal=cache["normal"], stress=sigma, f_index=f_i))
    return out


def insert_cracks(model: FatigueModel, state: SystemState, candidates,
                  max_per_step=None):
    """Insert crack segments for candidates with f_I > 1, best first.

    New lines respect the crack-spacing width l_c against same-orientation
    lines of the same ply; collinear candidates (perpendicular offset below
    same_line_tol) extend the existing line and reuse its phantom nodes.
    Returns (number inserted, event log).
    """
    cap = max_per_step if max_per_step is not None else model.xfem.max_per_step
    events = []
    inserted = 0
    for cand in sorted(candidates, key=lambda c: (-c.f_index, c.element)):
        if inserted >= cap:
            break
        el = model.mesh.bulk[cand.element]
        coords = model.bulk_cache[cand.element]["coords"]
        centroid = coords.mean(axis=0)
        join = None
        join_off = float("inf")
        blocked = False
        for ln in state.cracks:
            if ln.ply != cand.ply or abs(ln.angle - cand.angle) > 1e-9:
                continue
            off = abs(ln.offset_of(centroid))
            if off < model.xfem.same_line_tol and off < join_off:
                join, join_off = ln, off
            elif off < model.xfem.l_c:
                blocked = True
        if join is None and blocked:
            events.append(("spacing-skip", cand.element, cand.f_index,
                           cand.normal[0], cand.normal[1]))
            continue
        line = join if join is not None else xfem.CrackLine(
            ply=cand.ply, angle=cand.angle, point=centroid.copy(),
            normal=cand.normal.copy())

        created = []

        def duplicate_of(nid, _line=line, _created=created):
            if nid not in _line.duplicates:
                _line.duplicates[nid] = state.n_nodes
                _created.append(nid)
                state.n_nodes += 1
                state.u = np.concatenate(
                    [state.u, state.u[2 * nid:2 * nid + 2]])
            return _line.duplicates[nid]

        seg = xfem.build_segment(cand.element, el.nodes, coords, line,
                                 cand.stress, model.crack_props[cand.ply],
                                 model.fatigue, cand.f_index, duplicate_of)
        if seg is None:
            events.append(("degenerate-cut-skip", cand.element, cand.f_index,
                           cand.normal[0], cand.normal[1]))
            continue
        line.segments.append(seg)
        if join is None:
            state.cracks.append(line)
        inserted += 1
        events.append(("insert", cand.element, cand.f_index,
                       cand.normal[0], cand.normal[1]))
    return inserted, events
