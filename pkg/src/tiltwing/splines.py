"""Clamped cubic B-spline control curves.

Takeoff schedules are two curves (shaft power and wing angle), each a cubic
B-spline on 20 control points over a clamped uniform knot vector, so the
curve starts at the first control point and ends at the last one.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from tiltwing.validation import check_array, check_in_unit_box, check_scalar

DEGREE = 3
N_CONTROL = 20
T_BOUNDS = (25.0, 35.0)


def clamped_knots(n_points, degree=DEGREE):
    """Clamped uniform knot vector on [0, 1] for ``n_points`` control points."""
    if n_points < degree + 1:
        raise ValueError(f"need at least {degree + 1} control points, got {n_points}")
    interior = np.linspace(0.0, 1.0, n_points - degree + 1)
    return np.concatenate([np.zeros(degree), interior, np.ones(degree)])


def _find_spans(s, knots, n_points, degree):
    spans = np.searchsorted(knots, s, side="right") - 1
    return np.clip(spans, degree, n_points - 1)


def bspline_basis(s, n_points, degree=DEGREE):
    """Basis matrix B with B[i, j] = N_j(s[i]), shape (len(s), n_points).

    Uses the standard triangular recurrence over the nonzero local basis
    functions, vectorized over the evaluation sites.
    """
    s = check_array(np.atleast_1d(s), "s", ndim=1)
    if s.size and (s.min() < 0.0 or s.max() > 1.0):
        raise ValueError("curve parameter must lie in [0, 1]")
    knots = clamped_knots(n_points, degree)
    spans = _find_spans(s, knots, n_points, degree)

    n_eval = s.size
    local = np.zeros((degree + 1, n_eval))
    local[0] = 1.0
    left = np.zeros((degree + 1, n_eval))
    right = np.zeros((degree + 1, n_eval))
    for j in range(1, degree + 1):
        left[j] = s - knots[spans - j + 1]
        right[j] = knots[spans + j] - s
        saved = np.zeros(n_eval)
        for r in range(j):
            denom = right[r + 1] + left[j - r]
            term = local[r] / denom
            local[r] = saved + right[r + 1] * term
            saved = left[j - r] * term
        local[j] = saved

    basis = np.zeros((n_eval, n_points))
    rows = np.arange(n_eval)
    for r in range(degree + 1):
        basis[rows, spans - degree + r] = local[r]
    return basis


@lru_cache(maxsize=32)
def _cached_basis(n_samples, n_points, degree):
    s = np.linspace(0.0, 1.0, n_samples)
    basis = bspline_basis(s, n_points, degree)
    basis.setflags(write=False)
    return basis


def eval_curve(control_points, s, degree=DEGREE):
    """Evaluate the spline at parameters ``s``.

    ``control_points`` may be (n,) for a single curve or (..., n) for a
    batch; the result has the batch shape plus a final axis of len(s).
    """
    cp = check_array(control_points, "control_points")
    basis = bspline_basis(s, cp.shape[-1], degree)
    return cp @ basis.T


def sample_grid(n_samples):
    """Evaluation grid for a sampled schedule: n points pinned at both ends."""
    return np.linspace(0.0, 1.0, n_samples)


def sample_curve(control_points, n_samples, degree=DEGREE):
    """Evaluate the spline on the pinned uniform grid (cached basis)."""
    cp = check_array(control_points, "control_points")
    basis = _cached_basis(n_samples, cp.shape[-1], degree)
    return cp @ basis.T


@dataclass(frozen=True)
class ControlSchedule:
    """A takeoff schedule: normalized power and wing-angle control points
    plus the takeoff duration in seconds.

    Control points live in [0, 1]; power scales to [0, P_max] and wing
    angle to [0, 90] degrees at simulation time.
    """

    power_cp: np.ndarray
    wing_cp: np.ndarray
    t_f: float

    def __post_init__(self):
        object.__setattr__(self, "power_cp",
                           check_in_unit_box(self.power_cp, "power_cp"))
        object.__setattr__(self, "wing_cp",
                           check_in_unit_box(self.wing_cp, "wing_cp"))
        if self.power_cp.shape != (N_CONTROL,):
            raise ValueError(f"power_cp must have shape ({N_CONTROL},)")
        if self.wing_cp.shape != (N_CONTROL,):
            raise ValueError(f"wing_cp must have shape ({N_CONTROL},)")
        object.__setattr__(self, "t_f",
                           check_scalar(self.t_f, "t_f", *T_BOUNDS))

    @classmethod
    def from_vector(cls, x):
        """Build from a flat design vector: 20 power, 20 wing, t_f."""
        x = check_array(x, "design vector", shape=(2 * N_CONTROL + 1,))
        return cls(x[:N_CONTROL], x[N_CONTROL:2 * N_CONTROL], x[2 * N_CONTROL])

    def to_vector(self):
        return np.concatenate([self.power_cp, self.wing_cp, [self.t_f]])

    def power_fraction(self, n_samples):
        """Normalized power curve sampled on the pinned grid."""
        return sample_curve(self.power_cp, n_samples)

    def wing_angle_deg(self, n_samples):
        """Wing angle in degrees sampled on the pinned grid."""
        return 90.0 * sample_curve(self.wing_cp, n_samples)
