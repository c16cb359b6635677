"""DCB-specific checks: static ramp against a refined reference, Newton
convergence quality, sweep edge cases, full decohesion of the bar."""

import numpy as np
import pytest

from fatiguecz import analysis, config, system
from fatiguecz import cohesive as cz
from fatiguecz.fem import mesh as fm
from fatiguecz.fem.materials import BulkMaterial


def ramp_dcb(ny_arm, dx_fine, u_max=5.0, steps=10):
    cfg = config.parse_config("configs/dcb.cfg")
    cfg.sections["geometry"]["ny_arm"] = ny_arm
    cfg.sections["geometry"]["dx_fine"] = dx_fine
    model, program, controller = config.build_case(cfg, 1.0)
    solve = system.SolveSettings(max_iter=25)
    state = model.initial_state()
    peak = 0.0
    histories = []
    for k in range(1, steps + 1):
        res = system.newton_solve(model, state, k / steps, 0.0, solve)
        assert res.converged
        histories.append(res.history)
        model.commit(state, res.u, res.trial)
        presc, _ = model.prescribed_arrays()
        state.reference_force = max(state.reference_force,
                                    float(np.linalg.norm(res.f_int[presc])))
        peak = max(peak, abs(model.reaction(res.f_int, "load_top")[1]))
    return peak, histories


class TestStaticRamp:
    def test_peak_load_close_to_refined_reference(self):
        peak, _ = ramp_dcb(ny_arm=4, dx_fine=0.2)
        peak_ref, _ = ramp_dcb(ny_arm=8, dx_fine=0.1)
        assert peak == pytest.approx(peak_ref, rel=0.05)

    def test_newton_terminal_contraction(self):
        # once the active branch set settles, the consistent tangent kills
        # the residual in a single quadratic step (piecewise-linear law)
        _, histories = ramp_dcb(ny_arm=4, dx_fine=0.2, steps=6)
        checked = 0
        for hist in histories:
            if len(hist) < 3 or hist[-2] <= 0.0:
                continue
            checked += 1
            assert hist[-1] / hist[-2] < 1e-6
        assert checked >= 3


@pytest.fixture(scope="module")
def sweep_builder():
    cfg = config.parse_config("configs/example_a.cfg")
    fat = config.build_fatigue(cfg)
    f_n = cfg.get("cohesive", "f_n")
    amp = cfg.get("load", "amplitude")

    def build(s):
        return config.build_case(cfg, s * f_n / amp)

    return build, fat


class TestSweepEdges:
    def test_factor_one_fails_at_ramp(self, sweep_builder):
        build, fat = sweep_builder
        rows = analysis.sn_sweep(build, [1.0], fat)
        assert not rows[0].censored
        assert rows[0].n_fail_sim < 5.0  # fails during/at the static ramp
        assert rows[0].n_fail_analytical == pytest.approx(0.0)

    def test_below_endurance_censored(self, sweep_builder):
        build, fat = sweep_builder
        rows = analysis.sn_sweep(build, [0.15], fat)
        assert rows[0].censored
        assert rows[0].n_fail_sim >= fat.gamma


class TestFullDecohesion:
    def test_bar_separates_under_displacement_control(self):
        # push the cracked bar past the final-failure jump: the two halves
        # separate and the transmitted load drops to the residual scale
        props = cz.CohesiveProperties(k_n=1.0e4, f_n=10.0, f_sh=10.0,
                                      g_ic=0.1, g_iic=0.1, eta_bk=1.0)
        fat = cz.FatigueProperties(eta_brittle=0.8, epsilon=0.2,
                                   stress_ratio=-1.0)
        ply = BulkMaterial(e1=5.0e4, e2=5.0e4, g12=2.0e4, nu12=0.25)
        mesh = fm.bar_mesh(columns=3)
        settings = system.XfemSettings(enabled=True, l_c=10.0,
                                       same_line_tol=0.4)
        model = system.FatigueModel(mesh, {"ply": ply}, fat, theta=0.5,
                                    crack_props={0: props},
                                    xfem_settings=settings)
        model.prescribe(mesh.groups["left"], 0, 0.0)
        model.prescribe(mesh.groups["corner"], 1, 0.0)
        model.prescribe(mesh.groups["right"], 0, 1.0)  # unit end displacement
        solve = system.SolveSettings(max_iter=30)
        state = model.initial_state()
        peak = 0.0
        final = None
        # uf_n = 0.02 mm; pull the end to 0.1 mm, far beyond full failure
        for u_end in np.linspace(0.0005, 0.1, 60):
            res = system.newton_solve(model, state, u_end, 0.0, solve)
            assert res.converged
            model.commit(state, res.u, res.trial)
            state.reference_force = max(state.reference_force, 1.0)
            n, _ = system.insert_cracks(
                model, state,
                system.collect_insertion_candidates(model, state, state.u))
            if n:
                res = system.newton_solve(model, state, u_end, 0.0, solve)
                assert res.converged
                model.commit(state, res.u, res.trial)
            force = abs(model.reaction(res.f_int, "right")[0])
            peak = max(peak, force)
            final = force
        assert peak > 5.0  # carried a real load near the strength
        assert final < 1e-6 * peak  # residual-stiffness scale after failure
        assert state.cracks and all(
            s.damage == 1.0 for s in state.cracks[0].segments[0].states)