"""Delimited output and figure rendering for analysis runs.

CSV files are RFC-4180 style with a mandatory header row, '.' decimal
separator and scientific notation at 9+ significant digits. Figures are
rendered with matplotlib to PNG files alongside the CSVs.
"""

from __future__ import annotations

import csv
import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from . import cohesive as cz

FMT = "%.9e"


def _fnum(x):
    return FMT % float(x)


def _writer(path):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    fh = open(path, "w", newline="")
    return fh, csv.writer(fh)


def write_steps_csv(path, records):
    fh, w = _writer(path)
    with fh:
        w.writerow(["step", "n_cycles", "dn", "n_iter", "load_factor",
                    "stiffness", "dissipated_energy", "n_cracks",
                    "delaminated", "max_damage", "reaction_x", "reaction_y"])
        for r in records:
            w.writerow([r.step, _fnum(r.n_cycles), _fnum(r.dn), r.n_iter,
                        _fnum(r.load_factor), _fnum(r.stiffness),
                        _fnum(r.dissipated), r.n_cracks,
                        _fnum(r.delaminated), _fnum(r.max_damage),
                        _fnum(r.reaction[0]), _fnum(r.reaction[1])])


def write_crack_log_csv(path, events):
    """One row per inserted segment: step, N, element, f_I, normal."""
    fh, w = _writer(path)
    with fh:
        w.writerow(["step", "n_cycles", "element", "f_index",
                    "normal_x", "normal_y"])
        for ev in events:
            if ev[0] != "insert":
                continue
            _, step, n_cycles, element, f_index, nx, ny = ev
            w.writerow([step, _fnum(n_cycles), element, _fnum(f_index),
                        _fnum(nx), _fnum(ny)])


def write_sn_csv(path, rows):
    fh, w = _writer(path)
    with fh:
        w.writerow(["stress_factor", "n_fail_sim", "n_fail_analytical",
                    "rel_err", "censored"])
        for r in rows:
            w.writerow([_fnum(r.stress_factor), _fnum(r.n_fail_sim),
                        _fnum(r.n_fail_analytical), _fnum(r.rel_err),
                        int(r.censored)])


def write_crack_history_csv(path, history):
    fh, w = _writer(path)
    with fh:
        w.writerow(["n_cycles", "a", "g_imax", "dadn", "f_max"])
        for h in history:
            w.writerow([_fnum(h.n_cycles), _fnum(h.a), _fnum(h.g_imax),
                        _fnum(h.dadn), _fnum(h.f_max)])


def write_paris_csv(path, g_norm, rates, fit=None):
    fh, w = _writer(path)
    with fh:
        w.writerow(["g_norm", "dadn"])
        for g, r in zip(g_norm, rates):
            w.writerow([_fnum(g), _fnum(r)])
    if fit is not None:
        base, ext = os.path.splitext(path)
        fh, w = _writer(base + "_fit" + ext)
        with fh:
            w.writerow(["slope", "intercept", "r_squared"])
            w.writerow([_fnum(fit[0]), _fnum(fit[1]), _fnum(fit[2])])


def write_field_snapshot(path, model, state, header=""):
    """Legacy visualization grid: one line per cohesive integration point.

    Grammar (documented in the README):
        # comment lines
        interface <element> <ip> <x> <y> <damage> <stiffness_damage> <weight>
        crack <element> <ip> <x> <y> <damage> <stiffness_damage> <weight>
    """
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    mesh = model.mesh
    with open(path, "w") as fh:
        fh.write("# fatiguecz field snapshot\n")
        if header:
            fh.write(f"# {header}\n")
        fh.write("# kind element ip x y damage stiffness_damage weight\n")
        n_line = len(model.line_cache)
        for idx, states in enumerate(state.interface_states):
            cache = (model.line_cache[idx] if idx < n_line
                     else model.area_cache[idx - n_line])
            if idx < n_line:
                el = mesh.line_interfaces[idx]
                p0, p1 = mesh.nodes[el.nodes[0]], mesh.nodes[el.nodes[1]]
                xs = [p0 + xi * (p1 - p0) for xi in (0.0, 0.5, 1.0)]
            else:
                el = mesh.area_interfaces[idx - n_line]
                xs = [mesh.nodes[n] for n in el.nodes[:3]]
            props = cache["props"]
            for ip, (st, x, wg) in enumerate(zip(states, xs, cache["wgeo"])):
                kin = cz.equivalent_kinematics(st.jump, props, st.damage)
                d = cz.stiffness_damage(st.damage, kin.delta0, kin.delta_f)
                fh.write(f"interface {idx} {ip} {_fnum(x[0])} {_fnum(x[1])} "
                         f"{_fnum(st.damage)} {_fnum(d)} {_fnum(wg)}\n")
        from .fem.elements import SEGMENT_GAUSS
        for line in state.cracks:
            props = model.crack_props[line.ply]
            for seg in line.segments:
                for ip, ((xi, wgauss), st) in enumerate(
                        zip(SEGMENT_GAUSS, seg.states)):
                    x = seg.p0 + xi * (seg.p1 - seg.p0)
                    kin = cz.equivalent_kinematics(st.jump, props, st.damage)
                    d = cz.stiffness_damage(st.damage, kin.delta0,
                                            kin.delta_f)
                    fh.write(f"crack {seg.element} {ip} {_fnum(x[0])} "
                             f"{_fnum(x[1])} {_fnum(st.damage)} {_fnum(d)} "
                             f"{_fnum(wgauss * seg.length)}\n")


def read_field_snapshot(path):
    """Parse a field snapshot back into a list of dict rows."""
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            kind, element, ip, x, y, damage, d, weight = line.split()
            rows.append(dict(kind=kind, element=int(element), ip=int(ip),
                             x=float(x), y=float(y), damage=float(damage),
                             stiffness_damage=float(d), weight=float(weight)))
    return rows


# ---- figures ---------------------------------------------------------------

def _save(fig, path):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)


def fig_sn_curve(path, rows, fat):
    from . import analysis
    fig, ax = plt.subplots(figsize=(5, 3.5))
    e = cz.relative_endurance(0.0, fat.stress_ratio, fat.epsilon)
    ss = np.linspace(max(e + 1e-3, 0.2), 0.999, 200)
    lives = [analysis.cycles_to_failure_for(fat, s) for s in ss]
    ax.loglog(lives, ss, "k--", label="analytical")
    sim = [r for r in rows if not r.censored]
    ax.loglog([r.n_fail_sim for r in sim], [r.stress_factor for r in sim],
              "bo", mfc="none", label="simulation")
    ax.set_xlabel("cycles to failure $N$")
    ax.set_ylabel(r"stress factor $\sigma^{max}/\sigma_c$")
    ax.legend()
    _save(fig, path)


def fig_stiffness(path, records, log_x=False):
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    cyc = [r for r in records if r.dn > 0]
    ax.plot([max(r.n_cycles, 1e-3) for r in cyc], [r.stiffness for r in cyc],
            "b.-", ms=3)
    if log_x:
        ax.set_xscale("log")
    ax.set_xlabel("cycles $N$")
    ax.set_ylabel("stiffness $F/u_p$ [N/mm]")
    _save(fig, path)


def fig_crack_extension(path, curves):
    """curves: {label: (n array, delta_a array)}"""
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    for label, (ns, das) in curves.items():
        ax.plot(ns, das, label=label)
    ax.set_xlabel("cycles $N$")
    ax.set_ylabel(r"crack extension $\Delta a$ [mm]")
    ax.legend()
    _save(fig, path)


def fig_paris(path, g_norm, rates, fit=None):
    fig, ax = plt.subplots(figsize=(4.5, 3.5))
    ax.loglog(g_norm, rates, "o", ms=3, mfc="none", label="simulation")
    if fit is not None and len(g_norm):
        gs = np.linspace(min(g_norm), max(g_norm), 50)
        ax.loglog(gs, 10.0 ** (fit[1]) * gs ** fit[0], "b-",
                  label=f"fit, slope {fit[0]:.1f}")
    ax.set_xlabel(r"$G_I^{max}(1-R)/G_{Ic}$")
    ax.set_ylabel("d$a$/d$N$ [mm/cycle]")
    ax.legend()
    _save(fig, path)


def fig_damage_map(path, model, state):
    """Interface damage (area elements) and crack segments, colored by D."""
    from matplotlib.collections import LineCollection, PolyCollection
    mesh = model.mesh
    fig, ax = plt.subplots(figsize=(6.5, 3.2))
    n_line = len(model.line_cache)
    polys, vals = [], []
    for idx, el in enumerate(mesh.area_interfaces):
        states = state.interface_states[n_line + idx]
        polys.append(mesh.nodes[list(el.nodes[:3])])
        vals.append(np.mean([s.damage for s in states]))
    if polys:
        pc = PolyCollection(polys, array=np.array(vals), cmap="Greys",
                            edgecolors="none")
        pc.set_clim(0.0, 1.0)
        ax.add_collection(pc)
        fig.colorbar(pc, ax=ax, label="interface damage")
    segments, svals = [], []
    for line in state.cracks:
        for seg in line.segments:
            segments.append([seg.p0, seg.p1])
            svals.append(np.mean([s.damage for s in seg.states]))
    if segments:
        lc = LineCollection(segments, array=np.array(svals), cmap="Reds",
                            linewidths=2)
        lc.set_clim(0.0, 1.0)
        ax.add_collection(lc)
    ax.autoscale()
    ax.set_aspect("equal")
    ax.set_xlabel("x [mm]")
    ax.set_ylabel("y [mm]")
    _save(fig, path)


def fig_interface_damage_profile(path, model, state):
    """Line-interface damage vs position (DCB process zone)."""
    fig, ax = plt.subplots(figsize=(5.5, 3.0))
    xs, ds = [], []
    for idx, el in enumerate(model.mesh.line_interfaces):
        p0 = model.mesh.nodes[el.nodes[0]]
        p1 = model.mesh.nodes[el.nodes[1]]
        for xi, st in zip((0.0, 0.5, 1.0), state.interface_states[idx]):
            xs.append(p0[0] + xi * (p1[0] - p0[0]))
            ds.append(st.damage)
    order = np.argsort(xs)
    ax.plot(np.array(xs)[order], np.array(ds)[order], "b-")
    ax.set_xlabel("x [mm]")
    ax.set_ylabel("damage $\\mathcal{D}$")
    ax.set_ylim(-0.02, 1.02)
    _save(fig, path)
