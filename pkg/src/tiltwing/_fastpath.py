"""Optional numba kernel for the batched takeoff integration loop.

The numpy implementation in :mod:`tiltwing.simulator` defines the
semantics; this module reimplements the same step math as a compiled
per-trajectory loop for the optimizer/datagen hot path. Import failure
(or TILTWING_NO_NUMBA=1) simply disables the fast path — callers fall
back to the numpy loop, and the test suite checks the two paths agree.
"""

import math
import os

import numpy as np

HAVE_NUMBA = False
if not os.environ.get("TILTWING_NO_NUMBA"):
    try:
        from numba import njit
        HAVE_NUMBA = True
    except ImportError:  # pragma: no cover - depends on environment
        pass

if HAVE_NUMBA:

    @njit(cache=True)
    def _solve_thrust(power, v_axial, two_rho_a, guess):
        """Safeguarded Newton for T*(va + vi(T)) = P; mirrors the numpy
        solver including its bracketing and tolerance. Returns -1.0 when
        the iteration fails to converge."""
        static = (two_rho_a * power * power) ** (1.0 / 3.0)
        hi = static * (1.0 + 1e-9)
        if v_axial > 0.0:
            asym = power / v_axial * (1.0 + 1e-9)
            if asym < hi:
                hi = asym
        elif v_axial < 0.0:
            for _ in range(60):
                half = 0.5 * v_axial
                root = math.sqrt(half * half + hi / two_rho_a)
                if hi * (v_axial + (root - half)) - power >= 0.0:
                    break
                hi *= 4.0
        lo = 0.0
        t = guess if (guess > 0.0 and math.isfinite(guess)) else hi
        if t > hi:
            t = hi
        scale = power if power > 1.0 else 1.0
        for _ in range(100):
            half = 0.5 * v_axial
            root = math.sqrt(half * half + t / two_rho_a)
            vi = root - half
            resid = t * (v_axial + vi) - power
            if not math.isfinite(resid):
                return -1.0
            if resid < 0.0:
                lo = t
            else:
                hi = t
            if abs(resid) <= 1e-13 * scale:
                return t
            denom = root if root > 1e-300 else 1e-300
            deriv = v_axial + vi + t / (two_rho_a * 2.0 * denom)
            if deriv > 0.0:
                t_new = t - resid / deriv
            else:
                t_new = lo - 1.0
            if t_new <= lo or t_new >= hi:
                t_new = 0.5 * (lo + hi)
            t = t_new
        return -1.0

    @njit(cache=True)
    def _takeoff_loop(power_w, wing_rad, t_f, mass, eta, g, rho, cl_alpha,
                      alpha_stall, blend_rad, cd0, k_ind, wing_area,
                      disk_area, v_absurd,
                      out_x, out_y, out_vx, out_vy, out_ax, out_ay,
                      out_thrust, out_lift, out_drag, out_normal,
                      out_energy, fail_step):
        batch, n_steps = power_w.shape
        two_rho_a = 2.0 * rho * disk_area
        rho_a = rho * disk_area
        half_rho_s = 0.5 * rho * wing_area
        for b in range(batch):
            dt = t_f[b] / n_steps
            x = 0.0
            y = 0.0
            vx = 0.0
            vy = 0.0
            energy = 0.0
            t_guess = -1.0
            fail_step[b] = -1
            for i in range(n_steps):
                power = power_w[b, i]
                theta = wing_rad[b, i]
                ex = math.cos(theta)
                ey = math.sin(theta)
                va = vx * ex + vy * ey
                vp = -vx * ey + vy * ex

                if power > 0.0:
                    if abs(va) >= v_absurd or not math.isfinite(va):
                        fail_step[b] = i
                        break
                    thrust = _solve_thrust(power, va, two_rho_a, t_guess)
                    if thrust < 0.0:
                        fail_step[b] = i
                        break
                    half = 0.5 * va
                    vi = math.sqrt(half * half + thrust / two_rho_a) - half
                    mdot = rho_a * (va + vi)
                else:
                    thrust = 0.0
                    vi = 0.0
                    mdot = 0.0
                t_guess = thrust
                normal = mdot * vp

                wx = vx + vi * ex
                wy = vy + vi * ey
                v2 = wx * wx + wy * wy
                alpha = theta - math.atan2(wy, wx)
                cl_pre = cl_alpha * alpha
                cd_pre = cd0 + k_ind * cl_pre * cl_pre
                sin_a = math.sin(alpha)
                cos_a = math.cos(alpha)
                blend = 1.0 / (1.0 + math.exp(-(abs(alpha) - alpha_stall)
                                              / blend_rad))
                cl = (1.0 - blend) * cl_pre + blend * (2.0 * sin_a * cos_a)
                cd = (1.0 - blend) * cd_pre + blend * (2.0 * sin_a * sin_a)
                q_s = half_rho_s * v2
                lift = q_s * cl
                drag = q_s * cd

                speed = math.hypot(vx, vy)
                if speed > 0.0:
                    ev_x = vx / speed
                    ev_y = vy / speed
                else:
                    ev_x = 0.0
                    ev_y = 0.0

                fx = thrust * ex - drag * ev_x - lift * ev_y + normal * ey
                fy = thrust * ey - drag * ev_y + lift * ev_x - normal * ex
                acc_x = fx / mass
                acc_y = fy / mass - g

                x = x + vx * dt
                y = y + vy * dt
                vx = vx + acc_x * dt
                vy = vy + acc_y * dt
                if not (math.isfinite(vx) and math.isfinite(vy)):
                    fail_step[b] = i
                    break

                out_x[b, i] = x
                out_y[b, i] = y
                out_vx[b, i] = vx
                out_vy[b, i] = vy
                out_ax[b, i] = acc_x
                out_ay[b, i] = acc_y
                out_thrust[b, i] = thrust
                out_lift[b, i] = lift
                out_drag[b, i] = drag
                out_normal[b, i] = normal
                energy += power * dt
            if fail_step[b] >= 0:
                for j in range(fail_step[b], n_steps):
                    out_x[b, j] = np.nan
                    out_y[b, j] = np.nan
                    out_vx[b, j] = np.nan
                    out_vy[b, j] = np.nan
                    out_ax[b, j] = np.nan
                    out_ay[b, j] = np.nan
                    out_thrust[b, j] = np.nan
                    out_lift[b, j] = np.nan
                    out_drag[b, j] = np.nan
                    out_normal[b, j] = np.nan
                energy = np.nan
            out_energy[b] = energy / eta

    def takeoff_batch(power_w, wing_rad, t_f, params, v_absurd):
        """Run the compiled loop; returns (series dict, energy_j, fail_step)."""
        batch, n_steps = power_w.shape
        names = ("x", "y", "vx", "vy", "ax", "ay", "thrust", "lift",
                 "drag", "normal")
        series = {name: np.empty((batch, n_steps)) for name in names}
        energy_j = np.empty(batch)
        fail_step = np.empty(batch, dtype=np.int64)
        _takeoff_loop(power_w, wing_rad, t_f,
                      params.mass, params.eta, params.g, params.rho,
                      params.cl_alpha, params.alpha_stall,
                      _BLEND_RAD, params.cd0, params.k_induced,
                      params.wing_area, params.disk_area, v_absurd,
                      series["x"], series["y"], series["vx"], series["vy"],
                      series["ax"], series["ay"], series["thrust"],
                      series["lift"], series["drag"], series["normal"],
                      energy_j, fail_step)
        return series, energy_j, fail_step

    _BLEND_RAD = math.radians(5.0)
else:  # pragma: no cover - depends on environment
    takeoff_batch = None
