"""The compiled integration loop must match the numpy reference exactly."""

import numpy as np
import pytest

from tiltwing import _fastpath
from tiltwing.simulator import (
    AircraftParams,
    _propagate_arrays,
    propagate_batch,
)
from tiltwing.splines import sample_curve

pytestmark = pytest.mark.skipif(_fastpath.takeoff_batch is None,
                                reason="numba not available")


def _controls(batch, seed):
    rng = np.random.default_rng(seed)
    pcp = rng.uniform(0.0, 1.0, (batch, 20))
    wcp = rng.uniform(0.0, 1.0, (batch, 20))
    tf = rng.uniform(25.0, 35.0, batch)
    return pcp, wcp, tf


def test_matches_numpy_loop_on_random_controls():
    params = AircraftParams()
    pcp, wcp, tf = _controls(24, 42)
    fast = propagate_batch(pcp, wcp, tf, params)
    power_w = sample_curve(pcp, 500) * params.p_max
    wing_rad = np.radians(90.0 * sample_curve(wcp, 500))
    ref = _propagate_arrays(power_w, wing_rad, tf, params, checked=False)

    assert np.array_equal(fast["ok"], ref["ok"])
    for name in ("x", "y", "vx", "vy", "ax", "ay", "thrust", "lift",
                 "drag", "normal"):
        a = fast["series"][name]
        b = ref["series"][name]
        scale = max(np.nanmax(np.abs(b)), 1.0)
        assert np.nanmax(np.abs(a - b)) / scale < 1e-12, name
    for name in ("energy_wh", "x_f", "y_f", "vx_f", "y_min", "a_max"):
        scale = max(np.nanmax(np.abs(ref[name])), 1.0)
        assert np.nanmax(np.abs(fast[name] - ref[name])) / scale < 1e-12, name


def test_blown_member_is_flagged_not_fatal():
    params = AircraftParams(p_max=1e28)
    # member 0 flies on a sliver of power; member 1 blows up
    pcp = np.array([np.full(20, 1e-26), np.ones(20)])
    wcp = np.full((2, 20), 0.5)
    tf = np.array([30.0, 30.0])
    out = propagate_batch(pcp, wcp, tf, params)
    assert out["ok"][0]
    assert not out["ok"][1]
    assert np.isnan(out["energy_wh"][1])
