"""Independent reference implementations the tests check production code against.

Everything here is written from textbook definitions, deliberately not
sharing code paths with the package.
"""

import numpy as np


def deboor_point(control_points, s, knots, degree):
    """de Boor's point recurrence for a single parameter value."""
    n = len(control_points)
    if s >= knots[n]:
        span = n - 1
    else:
        span = int(np.searchsorted(knots, s, side="right") - 1)
    span = max(span, degree)
    d = [float(control_points[j]) for j in range(span - degree, span + 1)]
    for r in range(1, degree + 1):
        for j in range(degree, r - 1, -1):
            i = span - degree + j
            denom = knots[i + degree - r + 1] - knots[i]
            alpha = 0.0 if denom == 0.0 else (s - knots[i]) / denom
            d[j] = (1.0 - alpha) * d[j - 1] + alpha * d[j]
    return d[degree]


def cox_de_boor_basis(i, p, s, knots):
    """Recursive Cox-de Boor basis function N_{i,p}(s)."""
    if p == 0:
        last = len(knots) - 1
        if knots[i] <= s < knots[i + 1]:
            return 1.0
        # close the final span so the curve is defined at s = knots[-1]
        if s == knots[last] and knots[i] < knots[i + 1] == knots[last]:
            return 1.0
        return 0.0
    left = 0.0
    if knots[i + p] != knots[i]:
        left = (s - knots[i]) / (knots[i + p] - knots[i]) \
            * cox_de_boor_basis(i, p - 1, s, knots)
    right = 0.0
    if knots[i + p + 1] != knots[i + 1]:
        right = (knots[i + p + 1] - s) / (knots[i + p + 1] - knots[i + 1]) \
            * cox_de_boor_basis(i + 1, p - 1, s, knots)
    return left + right


def static_thrust(power, rho, disk_area):
    """Closed-form momentum-theory thrust at zero axial inflow."""
    return (2.0 * rho * disk_area * power ** 2) ** (1.0 / 3.0)


def hover_power(mass, g, rho, disk_area):
    """Shaft power for which static thrust exactly balances weight."""
    t = mass * g
    return t * np.sqrt(t / (2.0 * rho * disk_area))


def induced_velocity(thrust, v_axial, rho, disk_area):
    half = 0.5 * v_axial
    return -half + np.sqrt(half * half + thrust / (2.0 * rho * disk_area))


def naive_dense(x, w, b):
    """Triple-loop affine map, no vectorization on purpose."""
    n, fan_in = x.shape
    fan_out = w.shape[1]
    out = np.zeros((n, fan_out))
    for r in range(n):
        for c in range(fan_out):
            acc = b[c]
            for k in range(fan_in):
                acc += x[r, k] * w[k, c]
            out[r, c] = acc
    return out


def scalar_lstm_cell(x_t, h_prev, c_prev, w_i, w_f, w_o, w_c,
                     b_i, b_f, b_o, b_c):
    """One LSTM update, scalar loops straight from the gate equations."""
    def sig(v):
        return 1.0 / (1.0 + np.exp(-v))

    n = x_t.shape[0]
    hid = h_prev.shape[1]
    u = np.concatenate([h_prev, x_t], axis=1)
    h_t = np.zeros((n, hid))
    c_t = np.zeros((n, hid))
    for r in range(n):
        for j in range(hid):
            zi = b_i[j]
            zf = b_f[j]
            zo = b_o[j]
            zc = b_c[j]
            for k in range(u.shape[1]):
                zi += u[r, k] * w_i[k, j]
                zf += u[r, k] * w_f[k, j]
                zo += u[r, k] * w_o[k, j]
                zc += u[r, k] * w_c[k, j]
            c_new = sig(zf) * c_prev[r, j] + sig(zi) * np.tanh(zc)
            c_t[r, j] = c_new
            h_t[r, j] = sig(zo) * np.tanh(c_new)
    return h_t, c_t


def fd_gradient(f, x, h=1e-5):
    """Central-difference gradient of scalar f at x (mutates a copy of x)."""
    x = np.array(x, dtype=float)
    grad = np.zeros_like(x)
    flat = x.ravel()
    gflat = grad.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        f_plus = f(x)
        flat[i] = orig - h
        f_minus = f(x)
        flat[i] = orig
        gflat[i] = (f_plus - f_minus) / (2.0 * h)
    return grad


def max_rel_err(a, b, floor=1e-8):
    """Largest elementwise relative difference with an absolute floor."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / denom))
