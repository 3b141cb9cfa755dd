import math

import numpy as np
import pytest

from tiltwing.simulator import (
    AircraftParams,
    ConstraintReport,
    DEFAULT_REQUIREMENTS,
    Requirements,
    SimulationError,
    aero_forces,
    evaluate_constraints,
    hover_power,
    margins_from_scalars,
    momentum_thrust,
    propagate,
    propagate_batch,
    propulsion,
    step_euler,
    trajectory_summary,
)
from tiltwing.splines import ControlSchedule, N_CONTROL

import oracles

PARAMS = AircraftParams()


def ramp_schedule(t_f=30.0, power_hi=0.75, power_lo=0.35):
    """Hand-built plausible takeoff: wing tilts 90 -> 0, power eases off."""
    s = np.linspace(0.0, 1.0, N_CONTROL)
    wing = np.clip(1.0 - s * 1.15, 0.0, 1.0)
    power = power_hi - (power_hi - power_lo) * s ** 2
    return ControlSchedule(power, wing, t_f)


class TestMomentumTheory:
    def test_static_thrust_matches_closed_form(self):
        for power in (5e3, 40e3, 120e3, 300e3):
            t = momentum_thrust(power, 0.0, PARAMS)
            expected = oracles.static_thrust(power, PARAMS.rho, PARAMS.disk_area)
            assert abs(t - expected) / expected < 1e-9

    def test_power_balance_with_axial_inflow(self):
        rng = np.random.default_rng(5)
        power = rng.uniform(1e3, 300e3, size=200)
        va = rng.uniform(-5.0, 80.0, size=200)
        thrust = momentum_thrust(power, va, PARAMS)
        vi = oracles.induced_velocity(thrust, va, PARAMS.rho, PARAMS.disk_area)
        recovered = thrust * (va + vi)
        assert oracles.max_rel_err(recovered, power) < 1e-9

    def test_warm_start_matches_cold(self):
        power = np.full(8, 150e3)
        va = np.linspace(0.0, 60.0, 8)
        cold = momentum_thrust(power, va, PARAMS)
        warm = momentum_thrust(power, va, PARAMS, guess=cold * 1.3)
        assert oracles.max_rel_err(cold, warm) < 1e-9

    def test_zero_power_means_propellers_off(self):
        thrust, normal, vi = propulsion(20.0, 3.0, 0.0, 0.4, PARAMS)
        assert thrust == 0.0
        assert normal == 0.0
        assert vi == 0.0

    def test_thrust_monotone_in_power(self):
        powers = np.linspace(1e3, 300e3, 50)
        thrust = momentum_thrust(powers, 30.0, PARAMS)
        assert np.all(np.diff(thrust) > 0.0)

    def test_negative_power_rejected(self):
        with pytest.raises(ValueError):
            momentum_thrust(-1.0, 0.0, PARAMS)


class TestHover:
    def test_hover_power_balances_weight(self):
        p_hover = hover_power(PARAMS)
        assert p_hover == pytest.approx(
            oracles.hover_power(PARAMS.mass, PARAMS.g, PARAMS.rho,
                                PARAMS.disk_area))
        thrust = momentum_thrust(p_hover, 0.0, PARAMS)
        weight = PARAMS.mass * PARAMS.g
        assert abs(thrust - weight) / weight < 1e-9

    def test_hover_step_has_negligible_acceleration(self):
        p_hover = hover_power(PARAMS)
        _, _, _, _, diag = step_euler(0.0, 0.0, 0.0, 0.0, p_hover,
                                      math.pi / 2, 0.06, PARAMS)
        a_mag = math.hypot(float(diag["ax"]), float(diag["ay"]))
        assert a_mag < 1e-6 * PARAMS.g

    def test_params_must_admit_hover(self):
        with pytest.raises(ValueError):
            AircraftParams(p_max=50e3)


class TestAeroForces:
    def test_zero_inflow_means_zero_forces(self):
        lift, drag, alpha = aero_forces(0.0, 0.0, 0.3, 0.0, PARAMS)
        assert lift == 0.0
        assert drag == 0.0
        assert alpha == pytest.approx(0.3)

    def test_prestall_linear_lift(self):
        # fast level flight, tiny wing angle, no induced flow
        v = 70.0
        wing = math.radians(4.0)
        lift, drag, alpha = aero_forces(v, 0.0, wing, 0.0, PARAMS)
        q_s = 0.5 * PARAMS.rho * v * v * PARAMS.wing_area
        blend = 1.0 / (1.0 + math.exp(-(alpha - PARAMS.alpha_stall)
                                      / math.radians(5.0)))
        cl_lin = PARAMS.cl_alpha * alpha
        cl_fp = 2.0 * math.sin(alpha) * math.cos(alpha)
        assert alpha == pytest.approx(wing)
        assert lift == pytest.approx(q_s * ((1 - blend) * cl_lin + blend * cl_fp))
        assert drag > q_s * PARAMS.cd0 * 0.9

    def test_blend_midpoint_at_stall(self):
        # at alpha exactly at stall the blend weighs both regimes equally
        v = 50.0
        alpha = PARAMS.alpha_stall
        lift, _, got_alpha = aero_forces(v * math.cos(alpha),
                                         -v * math.sin(alpha) + 0.0,
                                         0.0, 0.0, PARAMS)
        # construct inflow so angle of attack equals stall exactly
        assert got_alpha == pytest.approx(alpha)
        q_s = 0.5 * PARAMS.rho * v * v * PARAMS.wing_area
        cl_lin = PARAMS.cl_alpha * alpha
        cl_fp = 2.0 * math.sin(alpha) * math.cos(alpha)
        assert lift == pytest.approx(q_s * 0.5 * (cl_lin + cl_fp), rel=1e-12)

    def test_slipstream_reduces_alpha(self):
        # slow flight, wing at 60 deg: induced flow along the chord keeps
        # the effective angle of attack small
        _, _, alpha_no_prop = aero_forces(8.0, 0.0, math.radians(60.0), 0.0,
                                          PARAMS)
        _, _, alpha_prop = aero_forces(8.0, 0.0, math.radians(60.0), 25.0,
                                       PARAMS)
        assert abs(alpha_prop) < abs(alpha_no_prop)

    def test_deep_stall_uses_flat_plate(self):
        v = 30.0
        wing = math.radians(50.0)
        lift, drag, alpha = aero_forces(v, 0.0, wing, 0.0, PARAMS)
        q_s = 0.5 * PARAMS.rho * v * v * PARAMS.wing_area
        assert alpha == pytest.approx(wing)
        assert lift == pytest.approx(q_s * 2 * math.sin(alpha) * math.cos(alpha),
                                     rel=0.02)
        assert drag == pytest.approx(q_s * 2 * math.sin(alpha) ** 2, rel=0.02)


class TestPropagate:
    def test_constant_power_energy_closed_form(self):
        sched = ControlSchedule(np.full(N_CONTROL, 0.5),
                                np.linspace(1.0, 0.0, N_CONTROL), 30.0)
        traj = propagate(sched, PARAMS)
        expected = 0.5 * PARAMS.p_max * sched.t_f / (PARAMS.eta * 3600.0)
        assert abs(traj.energy_wh - expected) / expected < 1e-9

    def test_series_shapes_and_scalar_consistency(self):
        traj = propagate(ramp_schedule(), PARAMS)
        assert traj.t.shape == (500,)
        assert traj.x_f == traj.x[-1]
        assert traj.y_f == traj.y[-1]
        assert traj.vx_f == traj.vx[-1]
        assert traj.y_min == traj.y.min()
        assert traj.a_max == traj.accel_g.max()
        assert np.array_equal(traj.accel_g,
                              np.hypot(traj.ax, traj.ay) / PARAMS.g)

    def test_ramp_schedule_takes_off(self):
        traj = propagate(ramp_schedule(), PARAMS)
        assert traj.x_f > 400.0
        assert traj.y_f > 50.0
        assert traj.vx_f > 40.0
        assert traj.y_min > -1.0
        assert traj.energy_wh > 500.0

    def test_dt_halving_changes_little(self):
        sched = ramp_schedule()
        coarse = propagate(sched, PARAMS, n_steps=500)
        fine = propagate(sched, PARAMS, n_steps=1000)
        for attr in ("energy_wh", "x_f", "y_f"):
            c = getattr(coarse, attr)
            f = getattr(fine, attr)
            assert abs(c - f) / max(abs(f), 1.0) < 0.02

    def test_eta_scales_energy_only(self):
        sched = ramp_schedule()
        lo = propagate(sched, AircraftParams(eta=0.81))
        hi = propagate(sched, AircraftParams(eta=0.99))
        assert lo.energy_wh > hi.energy_wh
        assert lo.energy_wh * 0.81 == pytest.approx(hi.energy_wh * 0.99)
        assert np.array_equal(lo.x, hi.x)
        assert np.array_equal(lo.vy, hi.vy)

    def test_batch_matches_scalar_path(self):
        scheds = [ramp_schedule(27.0), ramp_schedule(33.0, power_hi=0.8)]
        out = propagate_batch(
            np.stack([s.power_cp for s in scheds]),
            np.stack([s.wing_cp for s in scheds]),
            np.array([s.t_f for s in scheds]), PARAMS)
        assert np.all(out["ok"])
        for i, sched in enumerate(scheds):
            traj = propagate(sched, PARAMS)
            assert out["energy_wh"][i] == pytest.approx(traj.energy_wh, rel=1e-12)
            assert out["x_f"][i] == pytest.approx(traj.x_f, rel=1e-12)
            assert out["a_max"][i] == pytest.approx(traj.a_max, rel=1e-12)
            assert np.allclose(out["series"]["y"][i], traj.y, rtol=1e-12)

    def test_determinism(self):
        sched = ramp_schedule()
        a = propagate(sched, PARAMS)
        b = propagate(sched, PARAMS)
        assert np.array_equal(a.x, b.x)
        assert a.energy_wh == b.energy_wh

    def test_numeric_blowup_raises_with_step_index(self):
        params = AircraftParams(p_max=1e28)
        sched = ControlSchedule(np.ones(N_CONTROL),
                                np.full(N_CONTROL, 0.5), 35.0)
        with pytest.raises(SimulationError) as err:
            propagate(sched, params)
        assert err.value.step is not None

    def test_zero_power_free_fall(self):
        sched = ControlSchedule(np.zeros(N_CONTROL),
                                np.ones(N_CONTROL), 25.0)
        traj = propagate(sched, PARAMS)
        # pure ballistic drop: y = -g t^2 / 2 within Euler error
        assert traj.y_min < -100.0
        expected = -PARAMS.g * 25.0 * (25.0 - 25.0 / 500) / 2.0
        assert traj.y_f == pytest.approx(expected, rel=1e-9)
        assert abs(traj.x_f) < 1e-6
        assert traj.a_max == pytest.approx(1.0)


class TestConstraints:
    def test_margins_from_scalars(self):
        m = margins_from_scalars(910.0, 300.0, 68.0, 0.5, 0.25)
        assert m == pytest.approx([10.0, -5.0, 1.0, 0.5, 0.05])

    def test_exact_bounds_are_feasible(self):
        m = margins_from_scalars(900.0, 305.0, 67.0, 0.0, 0.3)
        assert np.all(m == 0.0)

    def test_report_feasibility_and_violation(self):
        traj = propagate(ramp_schedule(), PARAMS)
        report = evaluate_constraints(traj)
        assert isinstance(report, ConstraintReport)
        assert report.margins.shape == (5,)
        assert report.feasible == bool(np.all(report.margins >= 0))
        if not report.feasible:
            assert report.violation_pct > 0.0

    def test_violation_normalization(self):
        report = ConstraintReport(
            margins=np.array([0.0, 0.0, 0.0, 0.0, -0.03]),
            normalized=np.array([0.0, 0.0, 0.0, 0.0, -0.1]),
            feasible=False)
        assert report.violation_pct == pytest.approx(10.0)

    def test_requirements_scales(self):
        scales = Requirements().scales()
        assert scales == pytest.approx([900.0, 305.0, 67.0, 305.0, 0.3])
        assert DEFAULT_REQUIREMENTS.a_limit_g == 0.3


def test_summary_dict_round_trip():
    traj = propagate(ramp_schedule(), PARAMS)
    summary = trajectory_summary(traj)
    assert set(summary) == {"energy_wh", "x_f", "y_f", "vx_f", "y_min", "a_max"}
    assert summary["x_f"] == traj.x_f
