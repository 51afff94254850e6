"""Quasistatic solver: equilibrium, locking, and the tension sweep.

The independent oracle is the total potential: at equilibrium the
gradient of  0.5*sum K_j (theta_j - theta_j0)^2 - sum_t T_t * (-L_t)
must vanish, which ties the solved angles to the routing geometry
without going through the moment-arm code path.
"""

import math

import numpy as np
import pytest

from fingertps.equilibrium import (compute_state, residual,
                                   solve_equilibrium, tension_sweep)
from fingertps.geometry import tendon_length
from fingertps.study import build_configuration

RAD2DEG = 180.0 / math.pi


def _potential(config, theta, tensions, actives, betas):
    """Springs minus tendon work; contact sets pinned for differentiability."""
    v = 0.5 * sum(k * (t - t0) ** 2 for k, t, t0
                  in zip(config.finger.K, theta, config.finger.theta0))
    for route, t_route in zip(config.routes, tensions):
        # reeling tendon in (shorter path) releases work T * (-dL)
        v += t_route * tendon_length(config.finger, route, theta,
                                     force_active=actives[route.tendon],
                                     betas0=betas[route.tendon])
    return v


@pytest.mark.parametrize("name,overrides,ts", [
    ("C-C-C", {}, 3.0),
    ("C-D-P", {}, 5.0),
    ("C~D-C~D-C", {"e": "10e", "h_c": 2.0}, 4.0),
    ("C-C-", {}, 3.0),
])
def test_energy_gradient_vanishes_at_equilibrium(name, overrides, ts):
    cfg = build_configuration(name, overrides)
    t1, t2 = cfg.tensions(ts)
    state = solve_equilibrium(cfg, t1, t2)
    tensions = [t1 if r.tendon == "FDP" else t2 for r in cfg.routes]
    actives = {r.tendon: state.polylines[r.tendon].active for r in cfg.routes}
    betas = {r.tendon: state.polylines[r.tendon].betas for r in cfg.routes}
    h = 1e-6
    for j in range(3):
        tp = list(state.theta); tp[j] += h
        tm = list(state.theta); tm[j] -= h
        grad = (_potential(cfg, tp, tensions, actives, betas)
                - _potential(cfg, tm, tensions, actives, betas)) / (2 * h)
        assert grad == pytest.approx(0.0, abs=2e-5)


def test_small_tension_linear_response(ccc):
    """At vanishing tension theta_j ~ T * d_j(0) / K_j."""
    t = 1e-4
    state = solve_equilibrium(ccc, t, 0.0)
    ref = compute_state(ccc, (0.0, 0.0, 0.0), t, 0.0)
    for j in (1, 2, 3):
        expect = t * ref.d[(j, 1)] / ccc.finger.K[j - 1]
        assert state.theta[j - 1] == pytest.approx(expect, rel=1e-3)


def test_residual_zero_at_solution(ccc):
    state = solve_equilibrium(ccc, 4.0, 0.0)
    r = residual(state, ccc)
    assert np.max(np.abs(r)) <= 1e-8


def test_sweep_monotone_flexion_and_locking(ccc):
    trace = tension_sweep(ccc, t_max=8.0, n_steps=100)
    sums = [s.sum_deg for s in trace.steps]
    assert all(b >= a - 1e-9 for a, b in zip(sums, sums[1:]))
    assert trace.terminal == "max-tension"
    # MCP, PIP and DIP limits produce ordered lock events at distinct tensions
    joints = [ev.joint for ev in trace.events]
    assert len(joints) == len(set(joints))
    for ev in trace.events:
        limit = ccc.finger.theta_max[ev.joint - 1]
        assert ev.theta[ev.joint - 1] == pytest.approx(limit)
    # locked angles stay pinned afterwards
    final = trace.final
    for j in final.locked:
        assert final.theta[j - 1] == pytest.approx(ccc.finger.theta_max[j - 1])


def test_lock_events_resolve_cleanly(ccc):
    """At the lock-onset tension the pinned joint's own balance still holds."""
    trace = tension_sweep(ccc, t_max=8.0, n_steps=50)
    seen = frozenset()
    for ev in trace.events:
        t1, t2 = ccc.tensions(ev.ts)
        state = compute_state(ccc, ev.theta, t1, t2, locked=seen)
        assert np.max(np.abs(residual(state, ccc))) <= 1e-9
        seen = seen | {ev.joint}


def test_full_flexion_terminal():
    cfg = build_configuration("C~D-C~D-C", {"e": "10e", "h_c": 2.0, "w_a": 2.0})
    trace = tension_sweep(cfg, t_max=12.0, n_steps=120)
    assert trace.terminal == "all-locked"
    assert trace.final.sum_deg == pytest.approx(270.0)
    assert len(trace.events) == 3


def test_rof_interpolation(ccc):
    trace = tension_sweep(ccc, t_max=8.0, n_steps=40, with_metrics=False)
    assert trace.rof_at(0.0) == 0.0
    assert trace.rof_at(99.0) == trace.final.sum_deg
    mid = trace.rof_at(3.1)
    lo, hi = trace.rof_at(3.0), trace.rof_at(3.2)
    assert lo <= mid <= hi


def test_sweep_argument_validation(ccc):
    with pytest.raises(ValueError):
        tension_sweep(ccc, t_max=-1.0, n_steps=10)
    with pytest.raises(ValueError):
        tension_sweep(ccc, t_max=8.0, n_steps=0)
