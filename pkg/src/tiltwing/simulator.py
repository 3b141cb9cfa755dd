"""2-DOF point-mass takeoff simulation of a tilt-wing aircraft.

The aircraft is a point mass in the vertical plane. Propellers and wing
tilt together: the thrust axis sits at ``wing_angle`` above horizontal
(90 deg = thrust straight up). Wing aerodynamics blend a linear pre-stall
model into flat-plate behaviour past stall, with the propeller slipstream
folded into the wing inflow. Propulsion follows actuator-disk momentum
theory: shaft power is the control, thrust comes from solving
P = T * (v_axial + v_i).

Force directions resolve along the flight path (drag anti-parallel to the
velocity, lift perpendicular to it, no aero force at zero velocity); the
slipstream-augmented inflow sets only the magnitudes and the angle of
attack. Integration is explicit Euler on a fixed grid of 500 steps.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from tiltwing import _fastpath
from tiltwing.splines import ControlSchedule, sample_curve
from tiltwing.validation import check_array, check_positive, check_scalar

N_STEPS = 500
STALL_BLEND_RAD = math.radians(5.0)

G_STANDARD = 9.81

#: Speeds past this are numerically meaningless for an aircraft; the
#: momentum solve treats them as a blown-up state rather than iterating
#: into floating-point cancellation.
V_ABSURD = 1e8


class SimulationError(RuntimeError):
    """Raised when the state stops being finite or a root solve fails."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


@dataclass(frozen=True)
class AircraftParams:
    """Physical parameters of the aircraft and its environment.

    Defaults describe a 725 kg tilt-wing aircraft with a combined 9 m^2
    wing and 9 m^2 of total disk area. ``eta`` is the electrical-to-shaft
    efficiency: the control curve commands shaft power, and dividing by
    ``eta`` gives the electrical power drawn from the battery.
    """

    mass: float = 725.0
    eta: float = 0.9
    g: float = G_STANDARD
    rho: float = 1.225
    cl_alpha: float = 2.0 * math.pi
    alpha_stall: float = math.radians(15.0)
    cd0: float = 0.02
    k_induced: float = 0.05
    wing_area: float = 9.0
    disk_area: float = 9.0
    p_max: float = 300e3

    def __post_init__(self):
        for name in ("mass", "g", "rho", "cl_alpha", "wing_area",
                     "disk_area", "p_max", "alpha_stall"):
            check_positive(getattr(self, name), name)
        check_scalar(self.cd0, "cd0", low=0.0)
        check_scalar(self.k_induced, "k_induced", low=0.0)
        if not 0.0 < self.eta <= 1.0:
            raise ValueError(f"eta must lie in (0, 1], got {self.eta}")
        if self.alpha_stall >= math.pi / 2:
            raise ValueError("alpha_stall must be below 90 degrees")
        if hover_power(self) > self.p_max:
            raise ValueError(
                f"p_max {self.p_max:.0f} W cannot hover a {self.mass:.0f} kg "
                f"aircraft (needs {hover_power(self):.0f} W)")

    def with_requirements(self, mass=None, eta=None):
        """Copy with mass and/or efficiency replaced."""
        return AircraftParams(
            mass=self.mass if mass is None else mass,
            eta=self.eta if eta is None else eta,
            g=self.g, rho=self.rho, cl_alpha=self.cl_alpha,
            alpha_stall=self.alpha_stall, cd0=self.cd0,
            k_induced=self.k_induced, wing_area=self.wing_area,
            disk_area=self.disk_area, p_max=self.p_max)


def hover_power(params):
    """Shaft power at which static thrust exactly balances weight."""
    weight = params.mass * params.g
    return weight * math.sqrt(weight / (2.0 * params.rho * params.disk_area))


def momentum_thrust(power, v_axial, params, guess=None,
                    max_iter=100, rel_tol=1e-13):
    """Solve actuator-disk momentum theory for thrust.

    Finds T >= 0 with T * (v_axial + v_i(T)) = power, where
    v_i = -v_axial/2 + sqrt((v_axial/2)^2 + T / (2 rho A)). Safeguarded
    Newton iteration, vectorized over the inputs; ``guess`` warm-starts
    the iteration (the previous step's thrust during propagation).

    Returns
    -------
    thrust : ndarray
        Same shape as the broadcast inputs. Exactly zero where power is
        zero (propellers off, producing no forces at all).
    """
    p_in, va_in = np.broadcast_arrays(np.asarray(power, dtype=float),
                                      np.asarray(v_axial, dtype=float))
    out_shape = p_in.shape
    p = np.atleast_1d(p_in).ravel()
    va = np.atleast_1d(va_in).ravel()
    if np.any(p < 0.0):
        raise ValueError("shaft power must be non-negative")

    two_rho_a = 2.0 * params.rho * params.disk_area
    finite_in = np.isfinite(p) & np.isfinite(va) & (np.abs(va) < V_ABSURD)
    thrust = np.where(finite_in, 0.0, np.nan)
    active = (p > 0.0) & finite_in
    if not np.any(active):
        return thrust.reshape(out_shape)

    p_a = p[active]
    va_a = va[active]
    static = (two_rho_a * p_a ** 2) ** (1.0 / 3.0)

    # Upper bracket: the residual at T=0 is -P < 0 and grows without
    # bound. For climbing inflow both the static closed form and P/va
    # overestimate the root, which keeps the bracket tight at any scale;
    # descending inflow needs expansion instead.
    hi = static * (1.0 + 1e-9)
    with np.errstate(divide="ignore", over="ignore"):
        asymptote = np.where(va_a > 0.0, p_a / np.where(va_a > 0.0, va_a, 1.0),
                             np.inf) * (1.0 + 1e-9)
    hi = np.minimum(hi, asymptote)
    descending = va_a < 0.0
    if np.any(descending):
        for _ in range(60):
            r_hi = hi * (va_a + _induced(hi, va_a, two_rho_a)) - p_a
            grow = descending & (r_hi < 0.0)
            if not np.any(grow):
                break
            hi = np.where(grow, hi * 4.0, hi)
    lo = np.zeros_like(hi)

    if guess is not None:
        g_in = np.broadcast_to(np.asarray(guess, float), out_shape)
        t = np.atleast_1d(g_in).ravel()[active]
        t = np.where((t > 0.0) & np.isfinite(t), t, hi)
    else:
        t = hi.copy()
    t = np.clip(t, lo, hi)
    scale = np.maximum(p_a, 1.0)
    converged = np.zeros(t.shape, dtype=bool)
    for _ in range(max_iter):
        half = 0.5 * va_a
        root = np.sqrt(half * half + t / two_rho_a)
        vi = -half + root
        resid = t * (va_a + vi) - p_a
        overflow = ~np.isfinite(resid)
        if np.any(overflow):
            t = np.where(overflow, np.nan, t)
        lo = np.where(resid < 0.0, t, lo)
        hi = np.where(resid >= 0.0, t, hi)
        converged = (np.abs(resid) <= rel_tol * scale) | overflow | ~np.isfinite(t)
        if np.all(converged):
            break
        deriv = va_a + vi + t / (two_rho_a * 2.0 * np.maximum(root, 1e-300))
        step = resid / np.where(deriv > 0.0, deriv, 1.0)
        t_new = t - step
        outside = (t_new <= lo) | (t_new >= hi) | (deriv <= 0.0)
        t_next = np.where(outside, 0.5 * (lo + hi), t_new)
        t = np.where(converged, t, t_next)  # hold converged entries
    else:
        worst = float(np.max(np.abs(resid[~converged]) / scale[~converged]))
        raise SimulationError(
            f"momentum-theory thrust solve did not converge in {max_iter} "
            f"iterations (worst relative residual {worst:.3e})")

    thrust[active] = t
    return thrust.reshape(out_shape)


def _induced(thrust, v_axial, two_rho_a):
    half = 0.5 * v_axial
    return -half + np.sqrt(half * half + thrust / two_rho_a)


def induced_velocity(thrust, v_axial, params):
    """Momentum-theory induced velocity at the disk."""
    return _induced(np.asarray(thrust, float), np.asarray(v_axial, float),
                    2.0 * params.rho * params.disk_area)


def aero_forces(vx, vy, wing_angle, induced_v, params):
    """Wing lift and drag magnitudes plus angle of attack.

    The wing sees the aircraft velocity augmented by the propeller-induced
    axial flow along the chord (the slipstream keeps the effective angle
    of attack low during slow transition). Pre-stall coefficients are the
    linear model CL = CL_alpha * alpha with a parabolic polar; past stall
    the wing acts as a flat plate. A sigmoid in |alpha| blends the two
    regimes around the stall angle.

    ``wing_angle`` is in radians here and throughout the force model.
    """
    vx, vy, wing_angle, induced_v = np.broadcast_arrays(
        np.asarray(vx, float), np.asarray(vy, float),
        np.asarray(wing_angle, float), np.asarray(induced_v, float))
    ax_x = np.cos(wing_angle)
    ax_y = np.sin(wing_angle)
    wx = vx + induced_v * ax_x
    wy = vy + induced_v * ax_y
    v2 = wx * wx + wy * wy
    alpha = wing_angle - np.arctan2(wy, wx)

    cl_pre = params.cl_alpha * alpha
    cd_pre = params.cd0 + params.k_induced * cl_pre * cl_pre
    sin_a = np.sin(alpha)
    cos_a = np.cos(alpha)
    cl_post = 2.0 * sin_a * cos_a
    cd_post = 2.0 * sin_a * sin_a
    blend = 1.0 / (1.0 + np.exp(-(np.abs(alpha) - params.alpha_stall)
                                / STALL_BLEND_RAD))
    cl = (1.0 - blend) * cl_pre + blend * cl_post
    cd = (1.0 - blend) * cd_pre + blend * cd_post

    q_s = 0.5 * params.rho * v2 * params.wing_area
    return q_s * cl, q_s * cd, alpha


def propulsion(vx, vy, shaft_power, wing_angle, params, thrust_guess=None):
    """Thrust, propeller normal force, and induced velocity.

    The normal force is the momentum-theory reaction to the inflow
    component perpendicular to the disk axis: N = mdot * v_perp with
    mdot = rho * A * (v_axial + v_i), applied so it opposes that
    component. Returned N is the signed magnitude along the +90 deg
    normal of the thrust axis; zero power means the propellers are off
    and every propulsion force is exactly zero.
    """
    vx = np.asarray(vx, dtype=float)
    vy = np.asarray(vy, dtype=float)
    wing_angle = np.asarray(wing_angle, dtype=float)
    power = np.asarray(shaft_power, dtype=float)
    if np.any(power > params.p_max * (1.0 + 1e-9)):
        raise ValueError("shaft power exceeds p_max")

    ax_x = np.cos(wing_angle)
    ax_y = np.sin(wing_angle)
    v_axial = vx * ax_x + vy * ax_y
    v_perp = -vx * ax_y + vy * ax_x

    thrust = momentum_thrust(power, v_axial, params, guess=thrust_guess)
    vi = induced_velocity(thrust, v_axial, params)
    on = np.asarray(power > 0.0, dtype=float)
    vi = vi * on
    mdot = params.rho * params.disk_area * (v_axial + vi) * on
    normal = mdot * v_perp
    return thrust, normal, vi


def step_euler(x, y, vx, vy, shaft_power, wing_angle, dt, params,
               thrust_guess=None):
    """One explicit Euler step; returns the new state plus diagnostics.

    Acceleration combines thrust along the tilt axis, lift perpendicular
    to the velocity, drag against it, the propeller normal force against
    the perpendicular inflow, and weight. Position advances with the old
    velocity.
    """
    thrust, normal, vi = propulsion(vx, vy, shaft_power, wing_angle, params,
                                    thrust_guess=thrust_guess)
    lift, drag, alpha = aero_forces(vx, vy, wing_angle, vi, params)

    speed = np.hypot(vx, vy)
    safe = np.where(speed > 0.0, speed, 1.0)
    ev_x = np.where(speed > 0.0, vx / safe, 0.0)
    ev_y = np.where(speed > 0.0, vy / safe, 0.0)
    ax_x = np.cos(wing_angle)
    ax_y = np.sin(wing_angle)

    fx = thrust * ax_x - drag * ev_x - lift * ev_y + normal * ax_y
    fy = thrust * ax_y - drag * ev_y + lift * ev_x - normal * ax_x
    acc_x = fx / params.mass
    acc_y = fy / params.mass - params.g

    new_x = x + vx * dt
    new_y = y + vy * dt
    new_vx = vx + acc_x * dt
    new_vy = vy + acc_y * dt
    diagnostics = {
        "thrust": thrust, "normal": normal, "induced_v": vi,
        "lift": lift, "drag": drag, "alpha": alpha,
        "ax": acc_x, "ay": acc_y,
    }
    return new_x, new_y, new_vx, new_vy, diagnostics


@dataclass(frozen=True)
class Trajectory:
    """Simulated takeoff: per-step series plus summary scalars.

    Series hold the state reached after each step (times dt..t_f) paired
    with the acceleration, forces, and power that produced it. Summary
    scalars are derived from the series: finals are the last entries,
    y_min the series minimum, a_max the largest total acceleration in g.
    Energy is the integrated electrical draw in watt-hours.
    """

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    vx: np.ndarray
    vy: np.ndarray
    ax: np.ndarray
    ay: np.ndarray
    accel_g: np.ndarray
    thrust: np.ndarray
    lift: np.ndarray
    drag: np.ndarray
    normal: np.ndarray
    wing_angle_deg: np.ndarray
    p_shaft: np.ndarray
    p_elec: np.ndarray
    energy_wh: float
    x_f: float
    y_f: float
    vx_f: float
    y_min: float
    a_max: float

    @property
    def n_steps(self):
        return self.t.size

    def series(self, name):
        return getattr(self, name)


#: Series the surrogate models learn, in canonical order.
SURROGATE_SERIES = ("x", "y", "vx", "vy", "accel_g")


def _propagate_arrays(power_w, wing_rad, t_f, params, checked=True):
    """Pure-numpy batched integration loop (the semantic reference).

    power_w, wing_rad: (batch, n_steps) control samples; t_f: (batch,).
    Returns a dict of (batch, n_steps) series and (batch,) scalars. In
    unchecked mode non-finite members are tolerated and reported through
    the ``ok`` mask instead of raising.
    """
    batch, n_steps = power_w.shape
    dt = t_f / n_steps

    x = np.zeros(batch)
    y = np.zeros(batch)
    vx = np.zeros(batch)
    vy = np.zeros(batch)
    series = {name: np.empty((batch, n_steps)) for name in
              ("x", "y", "vx", "vy", "ax", "ay", "thrust", "lift",
               "drag", "normal")}
    energy_j = np.zeros(batch)
    guess = None
    for i in range(n_steps):
        power_i = power_w[:, i]
        wing_i = wing_rad[:, i]
        x, y, vx, vy, diag = step_euler(x, y, vx, vy, power_i, wing_i, dt,
                                        params, thrust_guess=guess)
        guess = diag["thrust"]
        if checked and not (np.all(np.isfinite(vx)) and np.all(np.isfinite(vy))):
            raise SimulationError(f"state became non-finite at step {i}", step=i)
        series["x"][:, i] = x
        series["y"][:, i] = y
        series["vx"][:, i] = vx
        series["vy"][:, i] = vy
        series["ax"][:, i] = diag["ax"]
        series["ay"][:, i] = diag["ay"]
        series["thrust"][:, i] = diag["thrust"]
        series["lift"][:, i] = diag["lift"]
        series["drag"][:, i] = diag["drag"]
        series["normal"][:, i] = diag["normal"]
        energy_j += power_i * dt
    energy_j /= params.eta
    return _assemble_output(series, energy_j, params)


def _assemble_output(series, energy_j, params):
    with np.errstate(invalid="ignore", over="ignore"):
        accel_g = np.hypot(series["ax"], series["ay"]) / params.g
        ok = np.isfinite(series["x"][:, -1]) & np.isfinite(accel_g).all(axis=1) \
            & np.isfinite(energy_j)
        out = {
            "series": series,
            "accel_g": accel_g,
            "energy_wh": np.where(ok, energy_j / 3600.0, np.nan),
            "x_f": series["x"][:, -1],
            "y_f": series["y"][:, -1],
            "vx_f": series["vx"][:, -1],
            "y_min": series["y"].min(axis=1),
            "a_max": accel_g.max(axis=1),
            "ok": ok,
        }
    return out


def _run_batch(power_w, wing_rad, t_f, params, checked):
    """Dispatch to the compiled loop when available, numpy otherwise."""
    if _fastpath.takeoff_batch is not None:
        series, energy_j, fail_step = _fastpath.takeoff_batch(
            power_w, wing_rad, t_f, params, V_ABSURD)
        if checked and np.any(fail_step >= 0):
            step = int(fail_step[fail_step >= 0].min())
            raise SimulationError(
                f"state became non-finite at step {step}", step=step)
        return _assemble_output(series, energy_j, params)
    return _propagate_arrays(power_w, wing_rad, t_f, params, checked=checked)


def propagate(schedule, params=None, n_steps=N_STEPS):
    """Simulate one takeoff from rest at the origin.

    Parameters
    ----------
    schedule : ControlSchedule
        Power and wing-angle control points plus takeoff duration.
    params : AircraftParams, optional
        Defaults to the baseline aircraft.
    n_steps : int
        Fixed integration steps; dt = t_f / n_steps.
    """
    if params is None:
        params = AircraftParams()
    if not isinstance(schedule, ControlSchedule):
        raise TypeError("schedule must be a ControlSchedule")
    if n_steps < 2:
        raise ValueError("n_steps must be at least 2")

    power_w = schedule.power_fraction(n_steps)[None, :] * params.p_max
    wing_rad = np.radians(schedule.wing_angle_deg(n_steps))[None, :]
    out = _run_batch(power_w, wing_rad, np.array([schedule.t_f]),
                     params, checked=True)
    dt = schedule.t_f / n_steps
    s = out["series"]
    return Trajectory(
        t=dt * np.arange(1, n_steps + 1),
        x=s["x"][0], y=s["y"][0], vx=s["vx"][0], vy=s["vy"][0],
        ax=s["ax"][0], ay=s["ay"][0], accel_g=out["accel_g"][0],
        thrust=s["thrust"][0], lift=s["lift"][0], drag=s["drag"][0],
        normal=s["normal"][0],
        wing_angle_deg=schedule.wing_angle_deg(n_steps),
        p_shaft=power_w[0], p_elec=power_w[0] / params.eta,
        energy_wh=float(out["energy_wh"][0]),
        x_f=float(out["x_f"][0]), y_f=float(out["y_f"][0]),
        vx_f=float(out["vx_f"][0]), y_min=float(out["y_min"][0]),
        a_max=float(out["a_max"][0]))


def propagate_batch(power_cp, wing_cp, t_f, params=None, n_steps=N_STEPS):
    """Simulate many takeoffs at once; the optimizer/datagen hot path.

    power_cp, wing_cp: (batch, 20) control points in [0, 1]; t_f: (batch,)
    seconds. Returns the raw dict from the core loop (series, summary
    scalars, and an ``ok`` finite-state mask) without building Trajectory
    objects. Members that blow up numerically are flagged, not raised.
    """
    if params is None:
        params = AircraftParams()
    power_cp = check_array(power_cp, "power_cp", ndim=2)
    wing_cp = check_array(wing_cp, "wing_cp", ndim=2)
    t_f = check_array(t_f, "t_f", ndim=1)
    power_w = sample_curve(power_cp, n_steps) * params.p_max
    wing_rad = np.radians(90.0 * sample_curve(wing_cp, n_steps))
    with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
        return _run_batch(power_w, wing_rad, t_f, params, checked=False)


#: Takeoff requirements: minimum final range, altitude, forward speed,
#: the altitude floor, and the acceleration ceiling in g.
@dataclass(frozen=True)
class Requirements:
    x_f_min: float = 900.0
    y_f_min: float = 305.0
    vx_f_min: float = 67.0
    y_floor: float = 0.0
    a_limit_g: float = 0.3

    names = ("x_f", "y_f", "vx_f", "y_min", "a_max")

    def scales(self):
        """Magnitudes used to normalize margins and violations.

        The altitude floor sits at 0 m, so its violations are normalized
        by the final-altitude requirement instead (same axis and units).
        """
        return np.array([self.x_f_min, self.y_f_min, self.vx_f_min,
                         self.y_f_min, self.a_limit_g])


DEFAULT_REQUIREMENTS = Requirements()

#: Mission design box: vehicle mass varies +-15% around 725 kg and
#: powertrain efficiency +-10% around 0.90. Everything that samples or
#: standardizes (m, eta) pairs uses these bounds. DESIGN_CENTER is the
#: single mission point the framework comparison runs at.
MASS_RANGE = (616.25, 833.75)
ETA_RANGE = (0.81, 0.99)
DESIGN_CENTER = {"mass": 723.85, "eta": 0.893}


@dataclass(frozen=True)
class ConstraintReport:
    """Margins for one trajectory; positive margins mean satisfied."""

    margins: np.ndarray
    normalized: np.ndarray
    feasible: bool
    names: tuple = Requirements.names

    @property
    def violation_pct(self):
        """Worst violation as a percentage of its bound magnitude."""
        return float(np.max(np.maximum(0.0, -self.normalized)) * 100.0)

    def asdict(self):
        return {name: float(m) for name, m in zip(self.names, self.margins)}


def margins_from_scalars(x_f, y_f, vx_f, y_min, a_max,
                         requirements=DEFAULT_REQUIREMENTS):
    """Constraint margins from summary scalars; broadcasts over arrays.

    Order: final range, final altitude, final forward speed, altitude
    floor, acceleration ceiling. All are >= 0 when satisfied.
    """
    return np.stack(np.broadcast_arrays(
        np.asarray(x_f, float) - requirements.x_f_min,
        np.asarray(y_f, float) - requirements.y_f_min,
        np.asarray(vx_f, float) - requirements.vx_f_min,
        np.asarray(y_min, float) - requirements.y_floor,
        requirements.a_limit_g - np.asarray(a_max, float)), axis=-1)


def evaluate_constraints(traj, requirements=DEFAULT_REQUIREMENTS):
    """Constraint report for a simulated trajectory."""
    margins = margins_from_scalars(traj.x_f, traj.y_f, traj.vx_f,
                                   traj.y_min, traj.a_max, requirements)
    normalized = margins / requirements.scales()
    feasible = bool(np.all(margins >= 0.0))
    return ConstraintReport(margins=margins, normalized=normalized,
                            feasible=feasible)


def trajectory_to_csv(traj, path):
    """Write the per-step series as CSV with a fixed header."""
    header = "t,x,y,vx,vy,ax,ay,accel_g,thrust,lift,drag,normal,p_shaft,p_elec"
    cols = [traj.t, traj.x, traj.y, traj.vx, traj.vy, traj.ax, traj.ay,
            traj.accel_g, traj.thrust, traj.lift, traj.drag, traj.normal,
            traj.p_shaft, traj.p_elec]
    np.savetxt(path, np.column_stack(cols), delimiter=",", header=header,
               comments="", fmt="%.10g")


def trajectory_summary(traj):
    """Summary scalars as a plain dict (JSON-friendly)."""
    return {
        "energy_wh": traj.energy_wh,
        "x_f": traj.x_f,
        "y_f": traj.y_f,
        "vx_f": traj.vx_f,
        "y_min": traj.y_min,
        "a_max": traj.a_max,
    }
