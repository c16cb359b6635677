"""Command-line interface.

Subcommands: run, verify-sn, dcb, tangent-check, open-hole. All write
delimited output plus rendered figures into the output directory. Exit
codes: 0 success, 2 config error, 3 mesh error, 4 solver failure,
5 analysis stalled, 6 verification failure, 1 unexpected error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from . import analysis, config, driver, report
from .errors import AnalysisStalled, ConfigError, FatigueCZError

log = logging.getLogger("fatiguecz")

EXIT_CODES = {
    "config-error": 2,
    "mesh-error": 3,
    "invalid-property": 2,
    "invalid-endurance": 2,
    "local-solver-failure": 4,
    "assembly-error": 4,
    "analysis-stalled": 5,
    "check-failed": 6,
    "error": 4,
}


def _out_dir(args, cfg):
    out = args.out_dir or cfg.get("output", "out_dir")
    os.makedirs(out, exist_ok=True)
    return out


def _write_run_outputs(out, model, result, cfg):
    report.write_steps_csv(os.path.join(out, "steps.csv"), result.records)
    report.write_crack_log_csv(os.path.join(out, "cracks.csv"), result.events)
    report.write_field_snapshot(
        os.path.join(out, "field_final.dat"), model, result.state,
        header=f"step {result.state.step} cycles {result.state.n_cycles!r}")
    report.fig_stiffness(os.path.join(out, "stiffness.png"), result.records)
    report.fig_stiffness(os.path.join(out, "stiffness_logn.png"),
                         result.records, log_x=True)
    log.info("run finished: %s after %d steps, N=%.6g",
             result.end_reason, len(result.records), result.state.n_cycles)


def cmd_run(args) -> int:
    cfg = config.parse_config(args.config)
    out = _out_dir(args, cfg)
    model, program, controller = config.build_case(cfg)
    solve = config.solve_settings(cfg)
    try:
        result = driver.run(model, program, controller, solve=solve,
                            max_steps=args.max_steps)
    except AnalysisStalled as exc:
        log.warning("analysis stalled: %s", exc)
        raise
    _write_run_outputs(out, model, result, cfg)
    if cfg.get("geometry", "case") == "open-hole":
        report.fig_damage_map(os.path.join(out, "damage_map.png"), model,
                              result.state)
    return 0


def cmd_verify_sn(args) -> int:
    cfg = config.parse_config(args.config)
    out = _out_dir(args, cfg)
    fat = config.build_fatigue(cfg)
    f_n = cfg.get("cohesive", "f_n")
    amplitude = cfg.get("load", "amplitude")
    factors = [float(f) for f in args.factors.split(",")]

    def build(stress_factor):
        return config.build_case(cfg, stress_factor * f_n / amplitude)

    rows = analysis.sn_sweep(build, factors, fat)
    report.write_sn_csv(os.path.join(out, "sn_curve.csv"), rows)
    report.fig_sn_curve(os.path.join(out, "sn_curve.png"), rows, fat)
    worst = 0.0
    for row in rows:
        status = "censored" if row.censored else f"err {row.rel_err:.3%}"
        log.info("factor %.3g: N_sim=%.6g N_analytical=%.6g (%s)",
                 row.stress_factor, row.n_fail_sim, row.n_fail_analytical,
                 status)
        if not row.censored:
            worst = max(worst, row.rel_err)
    if worst > args.tolerance:
        print(f"error: check-failed: S-N mismatch {worst:.3%} exceeds "
              f"{args.tolerance:.1%}", file=sys.stderr)
        return 6
    return 0


def cmd_dcb(args) -> int:
    cfg = config.parse_config(args.config)
    if args.explicit:
        cfg.sections["stepping"]["theta"] = 0.0
    if args.theta is not None:
        cfg.sections["stepping"]["theta"] = args.theta
    if args.dn is not None:
        cfg.sections["stepping"]["mode"] = "constant"
        cfg.sections["stepping"]["dn"] = args.dn
    out = _out_dir(args, cfg)
    model, program, controller = config.build_case(cfg)
    solve = config.solve_settings(cfg)
    result = driver.run(model, program, controller, solve=solve,
                        max_steps=args.max_steps)
    _write_run_outputs(out, model, result, cfg)
    geo = cfg.section("geometry")
    cyc = [r for r in result.records if r.dn > 0]
    history = analysis.dcb_crack_history(
        cyc, geo["a0"], 1.0, cfg.get("load", "amplitude"), geo["delta_cor"])
    report.write_crack_history_csv(os.path.join(out, "crack_history.csv"),
                                   history)
    g_norm, rates = analysis.paris_data(history, cfg.get("cohesive", "g_ic"),
                                        cfg.get("fatigue", "stress_ratio"),
                                        records=cyc)
    fit = analysis.fit_loglog(g_norm, rates) if len(g_norm) > 2 else None
    report.write_paris_csv(os.path.join(out, "paris.csv"), g_norm, rates, fit)
    report.fig_paris(os.path.join(out, "paris.png"), g_norm, rates, fit)
    curves = {f"dn={'adaptive' if program.adaptive else program.dn_constant}":
              (np.array([r.n_cycles for r in cyc]),
               np.array([r.delaminated for r in cyc]))}
    report.fig_crack_extension(os.path.join(out, "crack_extension.png"),
                               curves)
    report.fig_interface_damage_profile(
        os.path.join(out, "damage_profile.png"), model, result.state)
    return 0


def cmd_tangent_check(args) -> int:
    cfg = config.parse_config(args.config)
    out = _out_dir(args, cfg)
    props = config.build_cohesive(cfg)
    fat = config.build_fatigue(cfg)
    results = analysis.tangent_audit(props, fat, samples=args.samples,
                                     seed=cfg.get("output", "seed"))
    path = os.path.join(out, "tangent_check.csv")
    fh, w = report._writer(path)
    with fh:
        w.writerow(["branch", "max_rel_err", "samples"])
        for branch, (err, count) in results.items():
            w.writerow([branch, report._fnum(err), count])
    ok = True
    for branch, (err, count) in results.items():
        limit = 1e-12 if branch == "unloading" else 1e-4
        log.info("%s: max rel err %.3e over %d samples", branch, err, count)
        if err > limit or count == 0:
            ok = False
    if not ok:
        print("error: check-failed: tangent audit exceeded tolerance",
              file=sys.stderr)
        return 6
    return 0


def cmd_open_hole(args) -> int:
    cfg = config.parse_config(args.config)
    if cfg.get("geometry", "case") != "open-hole":
        raise ConfigError("open-hole subcommand needs geometry case "
                          "'open-hole'")
    return cmd_run(args)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fatiguecz",
        description="2D fatigue cohesive-zone / XFEM solver")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("config", help="analysis configuration file")
        p.add_argument("--out-dir", default=None,
                       help="output directory (default: from config)")
        p.add_argument("--max-steps", type=int, default=None,
                       help="stop after this many committed steps")
        p.add_argument("--log-level", default="info",
                       choices=["debug", "info", "warning", "error"])

    p = sub.add_parser("run", help="full analysis of the configured case")
    common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("verify-sn",
                       help="single-element S-N sweep vs the analytical life")
    common(p)
    p.add_argument("--factors", default="0.5,0.6,0.7,0.8,0.9")
    p.add_argument("--tolerance", type=float, default=0.03)
    p.set_defaults(func=cmd_verify_sn)

    p = sub.add_parser("dcb", help="DCB fatigue delamination run")
    common(p)
    p.add_argument("--dn", type=float, default=None,
                   help="constant cycle increment (default: adaptive)")
    p.add_argument("--theta", type=float, default=None,
                   help="time integration parameter")
    p.add_argument("--explicit", action="store_true",
                   help="explicit damage update (theta = 0)")
    p.set_defaults(func=cmd_dcb)

    p = sub.add_parser("tangent-check",
                       help="finite-difference audit of the material tangent")
    common(p)
    p.add_argument("--samples", type=int, default=100)
    p.set_defaults(func=cmd_tangent_check)

    p = sub.add_parser("open-hole", help="open-hole laminate demo")
    common(p)
    p.set_defaults(func=cmd_open_hole)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except FatigueCZError as exc:
        print(f"error: {exc.category}: {exc}", file=sys.stderr)
        return EXIT_CODES.get(exc.category, 4)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: unexpected: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
