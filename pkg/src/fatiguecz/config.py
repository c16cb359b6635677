"""Analysis configuration: a single structured text file with [section]
headers and key = value lines. Unknown sections/keys are rejected with the
offending file:line; missing required keys are reported by name.

Units are N, mm, MPa, cycles throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import cohesive as cz
from . import driver, system
from .errors import ConfigError
from .fem import mesh as fm
from .fem.materials import BulkMaterial

_BOOL = {"true": True, "1": True, "yes": True,
         "false": False, "0": False, "no": False}

# key -> (type, required, default); None default means "absent"
SCHEMA = {
    "cohesive": {
        "k_n": ("float", True, None),
        "k_sh": ("float", False, None),
        "f_n": ("float", True, None),
        "f_sh": ("float", True, None),
        "g_ic": ("float", True, None),
        "g_iic": ("float", True, None),
        "eta_bk": ("float", True, None),
    },
    "fatigue": {
        "eta_brittle": ("float", True, None),
        "epsilon": ("float", True, None),
        "stress_ratio": ("float", True, None),
        "gamma": ("float", False, 1.0e7),
        "p_rule": ("str", False, "beta"),
    },
    "bulk": {   # wildcard: [bulk <name>]
        "e1": ("float", True, None),
        "e2": ("float", True, None),
        "g12": ("float", True, None),
        "nu12": ("float", True, None),
        "e3": ("float", False, None),
        "nu23": ("float", False, None),
        "g23": ("float", False, None),
        "formulation": ("str", False, "plane-stress"),
    },
    "geometry": {
        "case": ("str", True, None),
        "length": ("float", False, 3.0),
        "height": ("float", False, 1.0),
        "columns": ("int", False, 3),
        "a0": ("float", False, 51.2),
        "bonded": ("float", False, 20.8),
        "arm_height": ("float", False, 1.472),
        "ny_arm": ("int", False, 4),
        "dx_fine": ("float", False, 0.2),
        "dx_coarse": ("float", False, 3.2),
        "width": ("float", False, 38.0),
        "delta_cor": ("float", False, 6.2),
        "hole_diameter": ("float", False, 6.4),
        "target": ("float", False, 1.0),
        "angle1": ("float", False, 45.0),
        "angle2": ("float", False, -45.0),
        "ply_thickness": ("float", False, 0.5),
        "interface_k_sh": ("float", False, 22000.0),
        "path": ("str", False, None),
    },
    "load": {
        "control": ("str", True, None),
        "amplitude": ("float", True, None),
        "ramp_steps": ("int", False, 10),
        "max_cycles": ("float", False, 1.0e7),
        "stiffness_floor": ("float", False, 0.0),
        "stop_on_full_failure": ("bool", False, False),
        "group": ("str", False, None),
        "comp": ("str", False, None),
        "prescribe": ("str", False, None),
        "forces": ("str", False, None),
    },
    "stepping": {
        "theta": ("float", False, 0.5),
        "mode": ("str", False, "adaptive"),
        "dn": ("float", False, 10.0),
        "dn_init": ("float", False, 0.1),
        "dn_min": ("float", False, 1.0e-3),
        "dn_max": ("float", False, 1.0e6),
        "growth_base": ("float", False, 2.0),
        "smoothing": ("float", False, 2.0),
        "n_iter_opt": ("int", False, 4),
        "n_iter_max": ("int", False, 10),
        "cut_factor": ("float", False, 0.6),
        "tol_rel": ("float", False, 1.0e-6),
        "tol_abs": ("float", False, 1.0e-8),
    },
    "xfem": {
        "enabled": ("bool", False, False),
        "l_c": ("float", False, 1.0),
        "same_line_tol": ("float", False, 0.35),
        "max_per_step": ("int", False, 100),
        "mixity": ("str", False, "linear"),
    },
    "output": {
        "out_dir": ("str", False, "out"),
        "seed": ("int", False, 0),
    },
}

_REQUIRED_SECTIONS = ("cohesive", "fatigue", "geometry", "load")


@dataclass
class AnalysisConfig:
    sections: dict
    path: str = "<memory>"

    def get(self, section, key):
        return self.sections[section][key]

    def section(self, name):
        return self.sections[name]

    def bulk_names(self):
        return [s.split(" ", 1)[1] for s in self.sections
                if s.startswith("bulk ")]


def _convert(kind, raw, where):
    try:
        if kind == "float":
            return float(raw)
        if kind == "int":
            return int(raw)
        if kind == "bool":
            try:
                return _BOOL[raw.lower()]
            except KeyError:
                raise ValueError(f"not a boolean: {raw!r}")
        return raw
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def parse_config_text(text, path="<memory>") -> AnalysisConfig:
    sections = {}
    current = None
    schema_key = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip()
            schema_key = "bulk" if name.startswith("bulk ") else name
            if schema_key not in SCHEMA:
                raise ConfigError(f"{path}:{lineno}: unknown section [{name}]")
            if name in sections:
                raise ConfigError(f"{path}:{lineno}: duplicate section [{name}]")
            sections[name] = {}
            current = name
            continue
        if current is None:
            raise ConfigError(f"{path}:{lineno}: key outside any section")
        key, sep, value = (part.strip() for part in line.partition("="))
        if not sep or not key:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        if key not in SCHEMA[schema_key]:
            raise ConfigError(
                f"{path}:{lineno}: unknown key {key!r} in section [{current}]")
        if key in sections[current]:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        kind = SCHEMA[schema_key][key][0]
        sections[current][key] = _convert(kind, value, f"{path}:{lineno}")

    for name in _REQUIRED_SECTIONS:
        if name not in sections:
            raise ConfigError(f"{path}: missing required section [{name}]")
    for name, body in sections.items():
        schema = SCHEMA["bulk" if name.startswith("bulk ") else name]
        for key, (kind, required, default) in schema.items():
            if key not in body:
                if required:
                    raise ConfigError(
                        f"{path}: section [{name}] is missing required "
                        f"key {key!r}")
                if default is not None:
                    body[key] = default
    for name in ("stepping", "xfem", "output"):
        if name not in sections:
            sections[name] = {k: d for k, (_, _, d) in SCHEMA[name].items()
                              if d is not None}
    return AnalysisConfig(sections=sections, path=path)


def parse_config(path) -> AnalysisConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text, str(path))


def serialize_config(cfg: AnalysisConfig) -> str:
    lines = []
    for name, body in cfg.sections.items():
        lines.append(f"[{name}]")
        for key, value in body.items():
            if isinstance(value, bool):
                value = "true" if value else "false"
            elif isinstance(value, float):
                value = repr(value)
            lines.append(f"{key} = {value}")
        lines.append("")
    return "\n".join(lines)


# ---- builders --------------------------------------------------------------

def build_cohesive(cfg: AnalysisConfig) -> cz.CohesiveProperties:
    c = cfg.section("cohesive")
    return cz.CohesiveProperties(
        k_n=c["k_n"], f_n=c["f_n"], f_sh=c["f_sh"], g_ic=c["g_ic"],
        g_iic=c["g_iic"], eta_bk=c["eta_bk"],
        k_sh=c.get("k_sh", 0.0) or 0.0)


def parse_p_rule(rule: str):
    """'beta' -> coupled with offset 0; 'beta+0.915' -> coupled with offset;
    a plain number -> fixed exponent."""
    rule = rule.strip().lower().replace(" ", "")
    if rule == "beta":
        return 0.0, None
    if rule.startswith("beta+"):
        return float(rule[5:]), None
    if rule.startswith("beta-"):
        return -float(rule[5:]), None
    return 0.0, float(rule)


def build_fatigue(cfg: AnalysisConfig) -> cz.FatigueProperties:
    f = cfg.section("fatigue")
    offset, fixed = parse_p_rule(f["p_rule"])
    return cz.FatigueProperties(
        eta_brittle=f["eta_brittle"], epsilon=f["epsilon"],
        stress_ratio=f["stress_ratio"], gamma=f["gamma"],
        p_offset=offset, p_fixed=fixed)


def build_materials(cfg: AnalysisConfig) -> dict:
    out = {}
    for name in cfg.bulk_names():
        b = cfg.section(f"bulk {name}")
        out[name] = BulkMaterial(
            e1=b["e1"], e2=b["e2"], g12=b["g12"], nu12=b["nu12"],
            e3=b.get("e3"), nu23=b.get("nu23"), g23=b.get("g23"),
            formulation=b["formulation"])
    return out


def _xfem_settings(cfg: AnalysisConfig) -> system.XfemSettings:
    x = cfg.section("xfem")
    return system.XfemSettings(
        enabled=x["enabled"], l_c=x["l_c"],
        same_line_tol=x["same_line_tol"], max_per_step=x["max_per_step"],
        squared_mixity=x["mixity"] == "squared")


def _solve_settings(cfg: AnalysisConfig) -> system.SolveSettings:
    s = cfg.section("stepping")
    return system.SolveSettings(tol_rel=s["tol_rel"], tol_abs=s["tol_abs"],
                                max_iter=s["n_iter_max"])


def build_controller(cfg: AnalysisConfig) -> driver.CycleStepController:
    s = cfg.section("stepping")
    return driver.CycleStepController(
        growth_base=s["growth_base"], smoothing=s["smoothing"],
        n_iter_opt=s["n_iter_opt"], n_iter_max=s["n_iter_max"],
        cut_factor=s["cut_factor"], dn_init=s["dn_init"],
        dn_min=s["dn_min"], dn_max=s["dn_max"])


def _program_common(cfg: AnalysisConfig, **overrides) -> driver.LoadProgram:
    lo = cfg.section("load")
    st = cfg.section("stepping")
    kwargs = dict(
        control=lo["control"], amplitude=lo["amplitude"],
        ramp_steps=lo["ramp_steps"], max_cycles=lo["max_cycles"],
        stiffness_floor=lo["stiffness_floor"],
        stop_on_full_failure=lo["stop_on_full_failure"],
        adaptive=st["mode"] == "adaptive", dn_constant=st["dn"])
    kwargs.update(overrides)
    return driver.LoadProgram(**kwargs)


def _require_material(cfg, name):
    if f"bulk {name}" not in cfg.sections:
        raise ConfigError(f"missing material section [bulk {name}]")


def build_case(cfg: AnalysisConfig, amplitude_scale: float = 1.0):
    """Model + load program + step controller for the configured geometry.

    amplitude_scale multiplies the load amplitude (S-N sweeps reuse one
    config across stress factors).
    """
    theta = cfg.get("stepping", "theta")
    if not 0.0 <= theta <= 1.0:
        raise ConfigError(f"theta must be in [0, 1], got {theta}")
    case = cfg.get("geometry", "case").lower().replace("_", "-")
    if case == "bar":
        return _build_bar(cfg, amplitude_scale)
    if case == "dcb":
        return _build_dcb(cfg, amplitude_scale)
    if case == "open-hole":
        return _build_open_hole(cfg, amplitude_scale)
    if case == "file":
        return _build_from_file(cfg, amplitude_scale)
    raise ConfigError(f"unknown geometry case {case!r}")


def _build_bar(cfg, scale):
    _require_material(cfg, "ply")
    g = cfg.section("geometry")
    mesh = fm.bar_mesh(length=g["length"], height=g["height"],
                       columns=g["columns"])
    props = build_cohesive(cfg)
    fat = build_fatigue(cfg)
    model = system.FatigueModel(
        mesh, build_materials(cfg), fat, theta=cfg.get("stepping", "theta"),
        crack_props={0: props}, xfem_settings=_xfem_settings(cfg))
    sigma = cfg.get("load", "amplitude") * scale
    model.prescribe(mesh.groups["left"], 0, 0.0)
    model.prescribe(mesh.groups["corner"], 1, 0.0)
    model.add_force(mesh.groups["right"], 0, sigma * g["height"] / 2.0)
    program = _program_common(cfg, control="force", amplitude=sigma,
                              group="right", comp=0)
    return model, program, build_controller(cfg)


def _build_dcb(cfg, scale):
    _require_material(cfg, "arm")
    g = cfg.section("geometry")
    mesh = fm.dcb_mesh(a0=g["a0"], bonded=g["bonded"],
                       arm_height=g["arm_height"], ny_arm=g["ny_arm"],
                       dx_fine=g["dx_fine"], dx_coarse=g["dx_coarse"])
    props = build_cohesive(cfg)
    fat = build_fatigue(cfg)
    model = system.FatigueModel(
        mesh, build_materials(cfg), fat, theta=cfg.get("stepping", "theta"),
        interface_props={"interface": props})
    u_max = cfg.get("load", "amplitude") * scale
    model.prescribe(mesh.groups["load_top"], 1, 0.5 * u_max)
    model.prescribe(mesh.groups["load_bot"], 1, -0.5 * u_max)
    model.prescribe(mesh.groups["load_top"], 0, 0.0)
    model.prescribe(mesh.groups["load_bot"], 0, 0.0)
    program = _program_common(cfg, control="displacement", amplitude=u_max,
                              group="load_top", comp=1)
    return model, program, build_controller(cfg)


def _build_open_hole(cfg, scale):
    _require_material(cfg, "ply")
    g = cfg.section("geometry")
    mesh = fm.open_hole_mesh(width=g["width"], height=g["height"],
                             hole_diameter=g["hole_diameter"],
                             target=g["target"],
                             angles=(g["angle1"], g["angle2"]),
                             ply_thickness=g["ply_thickness"])
    crack_props = build_cohesive(cfg)
    delam_props = cz.CohesiveProperties.from_shear_stiffness(
        k_sh=g["interface_k_sh"], f_n=crack_props.f_n, f_sh=crack_props.f_sh,
        g_ic=crack_props.g_ic, g_iic=crack_props.g_iic,
        eta_bk=crack_props.eta_bk)
    fat = build_fatigue(cfg)
    model = system.FatigueModel(
        mesh, build_materials(cfg), fat, theta=cfg.get("stepping", "theta"),
        interface_props={"interface": delam_props},
        crack_props={0: crack_props, 1: crack_props},
        xfem_settings=_xfem_settings(cfg))
    u_max = cfg.get("load", "amplitude") * scale
    model.prescribe(mesh.groups["left"], 0, 0.0)
    model.prescribe(mesh.groups["corner"], 1, 0.0)
    model.prescribe(mesh.groups["right"], 0, u_max)
    program = _program_common(cfg, control="displacement", amplitude=u_max,
                              group="right", comp=0)
    return model, program, build_controller(cfg)


_COMP = {"x": 0, "y": 1}


def _parse_bc_list(spec, where):
    out = []
    for item in spec.split(","):
        item = item.strip()
        if not item:
            continue
        parts = item.split(":")
        if len(parts) != 3 or parts[1] not in _COMP:
            raise ConfigError(
                f"{where}: expected 'group:x|y:value', got {item!r}")
        out.append((parts[0], _COMP[parts[1]], float(parts[2])))
    return out


def _build_from_file(cfg, scale):
    g = cfg.section("geometry")
    if not g.get("path"):
        raise ConfigError("geometry case 'file' needs key 'path'")
    mesh = fm.read_mesh(g["path"])
    props = build_cohesive(cfg)
    fat = build_fatigue(cfg)
    plies = sorted({el.ply for el in mesh.bulk})
    model = system.FatigueModel(
        mesh, build_materials(cfg), fat, theta=cfg.get("stepping", "theta"),
        interface_props={"interface": props},
        crack_props={ply: props for ply in plies},
        xfem_settings=_xfem_settings(cfg))
    lo = cfg.section("load")
    amplitude = lo["amplitude"] * scale
    for group, comp, value in _parse_bc_list(lo.get("prescribe", "") or "",
                                             cfg.path):
        model.prescribe(mesh.groups[group], comp, value * scale)
    for group, comp, value in _parse_bc_list(lo.get("forces", "") or "",
                                             cfg.path):
        model.add_force(mesh.groups[group], comp, value * scale)
    group = lo.get("group") or next(iter(mesh.groups))
    comp = _COMP.get(lo.get("comp") or "y", 1)
    program = _program_common(cfg, amplitude=amplitude, group=group,
                              comp=comp)
    return model, program, build_controller(cfg)


def solve_settings(cfg: AnalysisConfig) -> system.SolveSettings:
    return _solve_settings(cfg)
