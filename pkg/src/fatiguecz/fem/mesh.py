"""Mesh container, structured generators and the plain-text mesh reader.

Node/element ids are 0-based. The text grammar is documented in the README
(`*nodes`, `*element`, `*interface`, `*group` blocks).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import MeshError

COINCIDENCE_TOL = 1e-9


@dataclass
class BulkElement:
    nodes: tuple
    kind: str                 # 'tri3' | 'quad4'
    material: str
    angle: float = 0.0        # ply fiber angle, degrees
    ply: int = 0
    thickness: float = 1.0
    crackable: bool = False


@dataclass
class LineInterface:
    nodes: tuple              # (b1, b2, t1, t2); b1-t1 and b2-t2 coincide
    props: str = "interface"


@dataclass
class AreaInterface:
    nodes: tuple              # (b1, b2, b3, t1, t2, t3) per coincident pair
    props: str = "interface"


@dataclass
class Mesh:
    nodes: np.ndarray
    bulk: list
    line_interfaces: list = field(default_factory=list)
    area_interfaces: list = field(default_factory=list)
    groups: dict = field(default_factory=dict)
    thickness: float = 1.0

    def validate(self):
        n = len(self.nodes)
        for eid, el in enumerate(self.bulk):
            want = 3 if el.kind == "tri3" else 4
            if len(el.nodes) != want or max(el.nodes) >= n or min(el.nodes) < 0:
                raise MeshError(f"bulk element {eid}: bad connectivity")
        for iid, el in enumerate(self.line_interfaces):
            if max(el.nodes) >= n:
                raise MeshError(f"line interface {iid}: node out of range")
            b1, b2, t1, t2 = el.nodes
            for a, b in ((b1, t1), (b2, t2)):
                if np.linalg.norm(self.nodes[a] - self.nodes[b]) > COINCIDENCE_TOL:
                    raise MeshError(
                        f"line interface {iid}: faces not coincident")
        for iid, el in enumerate(self.area_interfaces):
            if max(el.nodes) >= n:
                raise MeshError(f"area interface {iid}: node out of range")
            for a, b in zip(el.nodes[:3], el.nodes[3:]):
                if np.linalg.norm(self.nodes[a] - self.nodes[b]) > COINCIDENCE_TOL:
                    raise MeshError(
                        f"area interface {iid}: plies not coincident")
        for name, ids in self.groups.items():
            if len(ids) and (max(ids) >= n or min(ids) < 0):
                raise MeshError(f"group {name!r}: node out of range")
        return self


def bar_mesh(length=3.0, height=1.0, columns=3, material="ply"):
    """Uniaxial strip of tri3 elements; the middle column is crackable.

    Fibers run along y (angle 90 deg) so the crack normal is the loading
    direction. Groups: 'left', 'right', 'corner'.
    """
    xs = np.linspace(0.0, length, columns + 1)
    nodes = []
    for y in (0.0, height):
        for x in xs:
            nodes.append((x, y))
    nodes = np.array(nodes)
    bulk = []
    mid = columns // 2
    for j in range(columns):
        bl, br = j, j + 1
        tl, tr = columns + 1 + j, columns + 1 + j + 1
        crack = j == mid
        bulk.append(BulkElement((bl, br, tr), "tri3", material, angle=90.0,
                                crackable=crack))
        bulk.append(BulkElement((bl, tr, tl), "tri3", material, angle=90.0,
                                crackable=crack))
    groups = {
        "left": np.array([0, columns + 1]),
        "right": np.array([columns, 2 * columns + 1]),
        "corner": np.array([0]),
    }
    return Mesh(nodes=nodes, bulk=bulk, groups=groups).validate()


def single_interface_mesh(length=2.0, props="interface"):
    """One zero-thickness line interface with no bulk (element-level tests)."""
    nodes = np.array([[0.0, 0.0], [length, 0.0], [0.0, 0.0], [length, 0.0]])
    iface = [LineInterface((0, 1, 2, 3), props)]
    groups = {"bottom": np.array([0, 1]), "top": np.array([2, 3])}
    return Mesh(nodes=nodes, bulk=[], line_interfaces=iface,
                groups=groups).validate()


def dcb_mesh(a0=51.2, bonded=20.8, arm_height=1.472, ny_arm=4,
             dx_fine=0.2, dx_coarse=3.2, material="arm", props="interface"):
    """Double cantilever beam: two quad4 arms joined by line interface
    elements over the bonded region x in [a0, a0+bonded].

    Groups: 'load_top'/'load_bot' (arm-end mid-height nodes), 'tip'.
    """
    length = a0 + bonded
    fine_start = max(0.0, a0 - 16 * dx_fine)
    n_coarse = max(1, round(fine_start / dx_coarse))
    xs_coarse = np.linspace(0.0, fine_start, n_coarse + 1)
    n_fine = round((length - fine_start) / dx_fine)
    xs_fine = np.linspace(fine_start, length, n_fine + 1)
    xs = np.concatenate([xs_coarse[:-1], xs_fine])
    nx = len(xs) - 1

    ys_bot = np.linspace(-arm_height, 0.0, ny_arm + 1)
    ys_top = np.linspace(0.0, arm_height, ny_arm + 1)

    nodes = []
    bot_ids = np.zeros((ny_arm + 1, nx + 1), dtype=int)
    for r, y in enumerate(ys_bot):
        for cidx, x in enumerate(xs):
            bot_ids[r, cidx] = len(nodes)
            nodes.append((x, y))
    top_ids = np.zeros((ny_arm + 1, nx + 1), dtype=int)
    for r, y in enumerate(ys_top):
        for cidx, x in enumerate(xs):
            top_ids[r, cidx] = len(nodes)
            nodes.append((x, y))
    nodes = np.array(nodes)

    bulk = []
    for ids in (bot_ids, top_ids):
        for r in range(ny_arm):
            for cidx in range(nx):
                conn = (ids[r, cidx], ids[r, cidx + 1],
                        ids[r + 1, cidx + 1], ids[r + 1, cidx])
                bulk.append(BulkElement(conn, "quad4", material))

    interfaces = []
    for cidx in range(nx):
        if 0.5 * (xs[cidx] + xs[cidx + 1]) < a0:
            continue
        interfaces.append(LineInterface(
            (bot_ids[ny_arm, cidx], bot_ids[ny_arm, cidx + 1],
             top_ids[0, cidx], top_ids[0, cidx + 1]), props))

    mid = ny_arm // 2
    groups = {
        "load_top": np.array([top_ids[mid, 0]]),
        "load_bot": np.array([bot_ids[mid, 0]]),
        "tip": np.array([bot_ids[ny_arm, np.searchsorted(xs, a0)]]),
    }
    return Mesh(nodes=nodes, bulk=bulk, line_interfaces=interfaces,
                groups=groups).validate()


def open_hole_mesh(width=38.0, height=16.0, hole_diameter=6.4,
                   target=1.0, angles=(45.0, -45.0), ply_thickness=0.5,
                   material="ply", props="interface"):
    """Two coincident tri3 ply meshes of a rectangular plate with a central
    hole, tied by area interface elements.

    The hole is carved from a structured grid; nodes inside the circle are
    projected onto it. Elements touching the loaded edges (x = 0 and
    x = width) are not crackable. Groups: 'left', 'right', 'corner'.
    """
    nx = max(6, round(width / target))
    ny = max(4, round(height / target))
    xs = np.linspace(0.0, width, nx + 1)
    ys = np.linspace(0.0, height, ny + 1)
    grid = np.array([[x, y] for y in ys for x in xs])
    center = np.array([0.5 * width, 0.5 * height])
    radius = 0.5 * hole_diameter

    def nid(i, j):
        return j * (nx + 1) + i

    tris = []
    for j in range(ny):
        for i in range(nx):
            quad = [nid(i, j), nid(i + 1, j), nid(i + 1, j + 1), nid(i, j + 1)]
            # alternate the diagonal for a symmetric pattern
            if (i + j) % 2 == 0:
                cand = [(quad[0], quad[1], quad[2]), (quad[0], quad[2], quad[3])]
            else:
                cand = [(quad[0], quad[1], quad[3]), (quad[1], quad[2], quad[3])]
            for tri in cand:
                c = grid[list(tri)].mean(axis=0)
                if np.linalg.norm(c - center) > radius:
                    tris.append(tri)

    coords = grid.copy()
    for k in range(len(coords)):
        d = np.linalg.norm(coords[k] - center)
        if 1e-12 < d < radius:
            coords[k] = center + (coords[k] - center) * (radius / d)

    # drop slivers created by the projection, then compact node numbering
    def tri_area(tri):
        a, b, c = coords[list(tri)]
        return 0.5 * abs((b[0] - a[0]) * (c[1] - a[1])
                         - (c[0] - a[0]) * (b[1] - a[1]))

    cell = (width / nx) * (height / ny) * 0.5
    tris = [t for t in tris if tri_area(t) > 0.1 * cell]
    used = sorted({n for t in tris for n in t})
    remap = {old: new for new, old in enumerate(used)}
    base_nodes = coords[used]
    tris = [tuple(remap[n] for n in t) for t in tris]

    n_base = len(base_nodes)
    nodes = np.vstack([base_nodes, base_nodes])
    bulk = []
    interfaces = []
    edge_tol = 1e-9
    for ply, angle in enumerate(angles):
        off = ply * n_base
        for tri in tris:
            xs_t = base_nodes[list(tri), 0]
            on_edge = np.any(xs_t < edge_tol) or np.any(xs_t > width - edge_tol)
            bulk.append(BulkElement(tuple(n + off for n in tri), "tri3",
                                    material, angle=angle, ply=ply,
                                    thickness=ply_thickness,
                                    crackable=not on_edge))
    for tri in tris:
        interfaces.append(AreaInterface(
            tuple(tri) + tuple(n + n_base for n in tri), props))

    left = np.array([i for i in range(n_base) if base_nodes[i, 0] < edge_tol])
    right = np.array([i for i in range(n_base)
                      if base_nodes[i, 0] > width - edge_tol])
    groups = {
        "left": np.concatenate([left, left + n_base]),
        "right": np.concatenate([right, right + n_base]),
        "corner": np.array([int(left[np.argmin(base_nodes[left, 1])])]),
    }
    return Mesh(nodes=nodes, bulk=bulk, area_interfaces=interfaces,
                groups=groups).validate()


def read_mesh(path) -> Mesh:
    """Parse the plain-text node/element format (grammar in README)."""
    nodes = {}
    bulk = []
    line_ifaces = []
    area_ifaces = []
    groups = {}
    section = None
    meta = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.split("#", 1)[0].strip()
            if not text:
                continue
            if text.startswith("*"):
                parts = text.split()
                section = parts[0][1:].lower()
                meta = {}
                args = parts[1:]
                if section == "element":
                    if len(args) < 2:
                        raise MeshError(
                            f"{path}:{lineno}: *element needs kind and material")
                    meta["kind"], meta["material"] = args[0], args[1]
                    for extra in args[2:]:
                        key, _, value = extra.partition("=")
                        meta[key] = value
                elif section == "interface":
                    if len(args) < 1:
                        raise MeshError(
                            f"{path}:{lineno}: *interface needs line|area")
                    meta["shape"] = args[0]
                    meta["props"] = args[1] if len(args) > 1 else "interface"
                elif section == "group":
                    meta["name"] = args[0]
                    groups.setdefault(args[0], [])
                elif section != "nodes":
                    raise MeshError(f"{path}:{lineno}: unknown block *{section}")
                continue
            fields = text.split()
            try:
                if section == "nodes":
                    nodes[int(fields[0])] = (float(fields[1]), float(fields[2]))
                elif section == "element":
                    conn = tuple(int(f) for f in fields[1:])
                    bulk.append(BulkElement(
                        conn, meta["kind"], meta["material"],
                        angle=float(meta.get("angle", 0.0)),
                        ply=int(meta.get("ply", 0)),
                        thickness=float(meta.get("thickness", 1.0)),
                        crackable=meta.get("crackable", "0") in ("1", "true")))
                elif section == "interface":
                    conn = tuple(int(f) for f in fields[1:])
                    if meta["shape"] == "line":
                        line_ifaces.append(LineInterface(conn, meta["props"]))
                    else:
                        area_ifaces.append(AreaInterface(conn, meta["props"]))
                elif section == "group":
                    groups[meta["name"]].extend(int(f) for f in fields)
                else:
                    raise MeshError(f"{path}:{lineno}: data outside a block")
            except (ValueError, IndexError) as exc:
                raise MeshError(f"{path}:{lineno}: {exc}") from exc
    if not nodes:
        raise MeshError(f"{path}: no nodes")
    n = max(nodes) + 1
    if sorted(nodes) != list(range(n)):
        raise MeshError(f"{path}: node ids must be consecutive from 0")
    coords = np.array([nodes[i] for i in range(n)])
    groups = {k: np.array(v, dtype=int) for k, v in groups.items()}
    return Mesh(nodes=coords, bulk=bulk, line_interfaces=line_ifaces,
                area_interfaces=area_ifaces, groups=groups).validate()
