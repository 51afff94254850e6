"""Quasistatic moment balance and the tension-sweep continuation.

The governing balance at each free joint j is

    K_j (theta_j - theta_j0) = sum_t T_t d_jt

with moment arms from the current tendon routing. Sweeps increment the
total tension T_s, warm-start each solve from the previous step, and pin
joints at their limits once they lock (the locked equation is dropped).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import metrics
from .dogleg import SolverError, dogleg_solve
from .geometry import joint_positions, moment_arm, tendon_polyline, wrap_angle
from .model import EquilibriumState, TPSConfiguration

RAD2DEG = 180.0 / math.pi

_OVERSHOOT_TOL = 1e-12
_BRACKET_TOL = 1e-6


def _route_caches(config: TPSConfiguration) -> dict:
    return {r.tendon: {"active": None, "betas": None} for r in config.routes}


def _build_polylines(config, theta, caches):
    out = {}
    for route in config.routes:
        cache = caches[route.tendon]
        pl = tendon_polyline(config.finger, route, theta,
                             active0=cache["active"], betas0=cache["betas"])
        cache["active"] = list(pl.active)
        cache["betas"] = list(pl.betas)
        out[route.tendon] = pl
    return out


def _frozen_polylines(config, theta, caches):
    """Polylines with the cached active sets pinned.

    Used inside Newton iterations: contact-set changes make the residual
    discontinuous, so the set is held fixed during a solve and refreshed
    between solves (see ``_activation_loop``)."""
    out = {}
    for route in config.routes:
        cache = caches[route.tendon]
        pl = tendon_polyline(config.finger, route, theta,
                             force_active=cache["active"], betas0=cache["betas"])
        cache["betas"] = list(pl.betas)
        out[route.tendon] = pl
    return out


def _refresh_active(config, theta, caches) -> bool:
    """Recompute activation freely at ``theta``; True if any set changed."""
    changed = False
    for route in config.routes:
        cache = caches[route.tendon]
        pl = tendon_polyline(config.finger, route, theta,
                             active0=cache["active"], betas0=cache["betas"])
        if list(pl.active) != cache["active"]:
            changed = True
        cache["active"] = list(pl.active)
        cache["betas"] = list(pl.betas)
    return changed


def _ensure_caches(config, theta, caches):
    if any(caches[r.tendon]["active"] is None for r in config.routes):
        _build_polylines(config, theta, caches)


def _activation_loop(config, caches, do_solve, theta_of, max_outer=30):
    """Alternate frozen-set solves with activation refreshes until the
    contact set is self-consistent. A repeated set (chattering exactly at
    an engagement boundary) accepts the current solution."""
    seen = set()
    for _ in range(max_outer):
        result = do_solve()
        key = tuple(tuple(caches[r.tendon]["active"]) for r in config.routes)
        if not _refresh_active(config, theta_of(result), caches):
            return result
        if key in seen:
            return result
        seen.add(key)
    raise SolverError("pulley activation sets failed to settle")


def _moment_arms(config, polylines, joints):
    d = {}
    for route in config.routes:
        pl = polylines[route.tendon]
        t = route.tension_index
        for j in (1, 2, 3):
            d[(j, t)] = moment_arm(j, pl, joints)
    return d


def compute_state(config: TPSConfiguration, theta, T1, T2,
                  locked=frozenset(), caches=None) -> EquilibriumState:
    """Assemble a full EquilibriumState (routing, moment arms) at given
    joint angles and tensions; no equilibrium is enforced here."""
    caches = caches if caches is not None else _route_caches(config)
    joints = joint_positions(config.finger, theta)
    polylines = _build_polylines(config, theta, caches)
    d = _moment_arms(config, polylines, joints)
    beta = {}
    active = {}
    for route in config.routes:
        pl = polylines[route.tendon]
        for i, p in enumerate(route.points):
            beta[(route.tendon, p.label)] = pl.betas[i]
            active[(route.tendon, p.label)] = pl.active[i]
    return EquilibriumState(theta=tuple(theta), locked=frozenset(locked),
                            T1=T1, T2=T2, beta=beta, active=active, d=d,
                            polylines=polylines)


def residual(state: EquilibriumState, config: TPSConfiguration) -> np.ndarray:
    """Residual vector at a given state: one scaled moment-balance entry
    per free joint, then one phi1-phi2 entry per active flexible pulley."""
    finger = config.finger
    tensions = {1: state.T1, 2: state.T2}
    comps = []
    for j in (1, 2, 3):
        if j in state.locked:
            continue
        m = finger.K[j - 1] * (state.theta[j - 1] - finger.theta0[j - 1])
        for route in config.routes:
            m -= tensions[route.tension_index] * state.d.get((j, route.tension_index), 0.0)
        comps.append(m / finger.K[0])
    for route in config.routes:
        pl = state.polylines.get(route.tendon)
        if pl is None:
            continue
        for i, p in enumerate(route.points):
            if p.kind == "flexible" and pl.active[i]:
                phi1, phi2 = pl.contact_angles_at(i)
                comps.append(wrap_angle(phi1 - phi2))
    return np.array(comps)


def _moment_residual(config, theta, T1, T2, free, caches):
    """Scaled moment residuals for the given free joints; flexible-pulley
    orientations are solved exactly inside the polyline assembly while the
    contact sets stay frozen at their cached values."""
    finger = config.finger
    joints = joint_positions(finger, theta)
    polylines = _frozen_polylines(config, theta, caches)
    d = _moment_arms(config, polylines, joints)
    tensions = {1: T1, 2: T2}
    out = np.empty(len(free))
    for k, j in enumerate(free):
        m = finger.K[j - 1] * (theta[j - 1] - finger.theta0[j - 1])
        for route in config.routes:
            m -= tensions[route.tension_index] * d[(j, route.tension_index)]
        out[k] = m / finger.K[0]
    return out


def solve_equilibrium(config: TPSConfiguration, T1, T2, theta_guess=None,
                      locked=frozenset(), caches=None,
                      tol=1e-9, max_iter=200, _depth=0) -> EquilibriumState:
    """Solve the free joint angles at fixed tensions."""
    finger = config.finger
    caches = caches if caches is not None else _route_caches(config)
    theta0 = list(theta_guess) if theta_guess is not None else list(finger.theta0)
    for j in locked:
        theta0[j - 1] = finger.theta_max[j - 1]
    free = [j for j in (1, 2, 3) if j not in locked]
    if free:
        _ensure_caches(config, theta0, caches)

        def fun(x):
            th = list(theta0)
            for k, j in enumerate(free):
                th[j - 1] = x[k]
            return _moment_residual(config, th, T1, T2, free, caches)

        def do_solve():
            return dogleg_solve(fun, np.array([theta0[j - 1] for j in free]),
                                tol=tol, max_iter=max_iter)

        def theta_of(x):
            # also warm-starts the next outer iteration
            for k, j in enumerate(free):
                theta0[j - 1] = float(x[k])
            return theta0

        try:
            x = _activation_loop(config, caches, do_solve, theta_of)
        except SolverError:
            if _depth >= 3:
                raise
            # cold starts far from equilibrium: ramp the tensions up in
            # a short homotopy, warm-starting each stage
            state = None
            for frac in (0.25, 0.5, 0.75, 1.0):
                state = solve_equilibrium(config, frac * T1, frac * T2,
                                          theta0, locked, caches,
                                          tol=tol, max_iter=max_iter,
                                          _depth=_depth + 1)
                theta0 = list(state.theta)
            return state
        for k, j in enumerate(free):
            theta0[j - 1] = float(x[k])
    return compute_state(config, theta0, T1, T2, locked, caches)


def solve_locking_tension(config: TPSConfiguration, candidate: int,
                          locked, theta_guess, ts_bracket, caches=None,
                          tol=1e-9) -> tuple[float, tuple]:
    """Exact-onset tension for joint ``candidate`` hitting its limit.

    Unknowns are the remaining free joint angles plus the total tension;
    the pinned joint's balance stays in the system (zero contact moment at
    onset). Returns (T_s, theta)."""
    finger = config.finger
    caches = caches if caches is not None else _route_caches(config)
    free = [j for j in (1, 2, 3) if j not in locked]
    others = [j for j in free if j != candidate]
    ts_lo, ts_hi = ts_bracket

    def fun(x):
        th = list(theta_guess)
        for j in locked:
            th[j - 1] = finger.theta_max[j - 1]
        th[candidate - 1] = finger.theta_max[candidate - 1]
        for k, j in enumerate(others):
            th[j - 1] = x[k]
        t1, t2 = config.tensions(x[-1])
        return _moment_residual(config, th, t1, t2, free, caches)

    th_start = list(theta_guess)
    for j in locked:
        th_start[j - 1] = finger.theta_max[j - 1]
    th_start[candidate - 1] = finger.theta_max[candidate - 1]
    _ensure_caches(config, th_start, caches)
    x0 = np.array([th_start[j - 1] for j in others] + [ts_hi])

    def do_solve():
        return dogleg_solve(fun, x0.copy(), tol=tol)

    def theta_of(x):
        th = list(th_start)
        for k, j in enumerate(others):
            th[j - 1] = float(x[k])
            x0[k] = float(x[k])
        x0[-1] = float(x[-1])
        return th

    x = _activation_loop(config, caches, do_solve, theta_of)
    ts = float(x[-1])
    if not (ts_lo - _BRACKET_TOL < ts <= ts_hi + _BRACKET_TOL):
        raise SolverError(
            f"lock tension {ts:.6f} N outside increment ({ts_lo:.6f}, {ts_hi:.6f}]",
            best_x=x)
    theta = list(theta_guess)
    for j in locked:
        theta[j - 1] = finger.theta_max[j - 1]
    theta[candidate - 1] = finger.theta_max[candidate - 1]
    for k, j in enumerate(others):
        theta[j - 1] = float(x[k])
    return ts, tuple(theta)


@dataclass
class LockEvent:
    joint: int
    ts: float
    theta: tuple


@dataclass
class SweepStep:
    ts: float
    T1: float
    T2: float
    theta: tuple
    locked: frozenset
    state: EquilibriumState
    bows: dict          # (joint, tension index) -> (B mm, case)
    stresses: list      # metrics.StressBreakdown

    @property
    def sum_deg(self) -> float:
        return sum(self.theta) * RAD2DEG


@dataclass
class SweepTrace:
    config: TPSConfiguration
    steps: list = field(default_factory=list)
    events: list = field(default_factory=list)
    terminal: str = "max-tension"
    failure: str | None = None

    def rof_at(self, ts: float) -> float:
        """Sum of joint angles (deg) at total tension ``ts``, linearly
        interpolated between recorded steps."""
        xs = [s.ts for s in self.steps]
        ys = [s.sum_deg for s in self.steps]
        if ts <= xs[0]:
            return ys[0]
        if ts >= xs[-1]:
            return ys[-1]
        return float(np.interp(ts, xs, ys))

    @property
    def final(self) -> SweepStep:
        return self.steps[-1]


def _make_step(config, state, ts, with_metrics=True):
    if with_metrics:
        bows = metrics.bowstring_map(config, state)
        stresses = metrics.stress_report(config, state.polylines, state.T1, state.T2)
    else:
        bows, stresses = {}, []
    return SweepStep(ts=ts, T1=state.T1, T2=state.T2, theta=state.theta,
                     locked=state.locked, state=state, bows=bows, stresses=stresses)


def tension_sweep(config: TPSConfiguration, t_max=None, n_steps=None,
                  with_metrics=True) -> SweepTrace:
    """Fig.-style continuation: increment T_s, solve, lock joints at their
    exact onset tensions, stop at T_s >= t_max or once all joints lock."""
    finger = config.finger
    t_max = t_max if t_max is not None else config.t_max
    n_steps = n_steps if n_steps is not None else config.n_steps
    if t_max < 0.0 or n_steps < 1:
        raise ValueError("need t_max >= 0 and n_steps >= 1")
    dts = t_max / n_steps if t_max > 0.0 else 0.0

    caches = _route_caches(config)
    trace = SweepTrace(config=config)
    locked: set[int] = set()
    theta = list(finger.theta0)

    state0 = compute_state(config, theta, 0.0, 0.0, locked, caches)
    trace.steps.append(_make_step(config, state0, 0.0, with_metrics))
    if t_max == 0.0:
        return trace

    ts_prev = 0.0
    for k in range(1, n_steps + 1):
        ts = k * dts
        t1, t2 = config.tensions(ts)
        while True:
            if len(locked) == 3:
                trace.terminal = "all-locked"
                return trace
            try:
                state = solve_equilibrium(config, t1, t2, theta, frozenset(locked),
                                          caches)
            except SolverError as err:
                trace.terminal = "solver-failure"
                trace.failure = str(err)
                return trace
            over = [j for j in (1, 2, 3) if j not in locked
                    and state.theta[j - 1] > finger.theta_max[j - 1] + _OVERSHOOT_TOL]
            if not over:
                break
            candidates = []
            for i in over:
                try:
                    ts_i, th_i = solve_locking_tension(
                        config, i, frozenset(locked), theta, (ts_prev, ts), caches)
                except SolverError as err:
                    trace.terminal = "solver-failure"
                    trace.failure = f"locking joint {i}: {err}"
                    return trace
                candidates.append((ts_i, i, th_i))
            ts_lock = min(c[0] for c in candidates)
            # ties within 1e-9 N: lock the more proximal joint first
            ties = [c for c in candidates if c[0] <= ts_lock + 1e-9]
            ts_lock, joint, th_lock = min(ties, key=lambda c: c[1])
            trace.events.append(LockEvent(joint=joint, ts=ts_lock, theta=th_lock))
            locked.add(joint)
            theta = list(th_lock)
            if len(locked) == 3:
                e1, e2 = config.tensions(ts_lock)
                final = compute_state(config, theta, e1, e2, locked, caches)
                trace.steps.append(_make_step(config, final, ts_lock, with_metrics))
                trace.terminal = "all-locked"
                return trace
        theta = list(state.theta)
        trace.steps.append(_make_step(config, state, ts, with_metrics))
        ts_prev = ts
    return trace
