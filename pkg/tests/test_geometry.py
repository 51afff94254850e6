"""Routing-geometry kernel: frames, distances, activation, flexible tilt.

The flexible-pulley orientation solver is checked against a symmetry
oracle (mirror-symmetric neighbours force an upright tilt) and against
its own defining property |phi1 - phi2| = 0.
"""

import cmath
import math

import numpy as np
import pytest

from fingertps.geometry import (STIFF_BETA, contact_angles, is_active,
                                joint_positions, moment_arm,
                                point_segment_distance, pulley_frame,
                                solve_flexible_beta, tendon_length,
                                tendon_polyline)
from fingertps.model import PulleySpec
from fingertps.study import build_configuration


def test_joint_positions_straight_and_flexed(finger):
    z = joint_positions(finger, (0.0, 0.0, 0.0))
    assert z == (0j, 42 + 0j, 69 + 0j)
    z = joint_positions(finger, (math.pi / 2, 0.0, 0.0))
    # MCP at 90 deg sends both distal joints straight down
    assert z[1] == pytest.approx(-42j)
    assert z[2] == pytest.approx(-69j)


def test_pulley_frame_upright_positions(finger):
    p = PulleySpec(label="A2", phalange=1, kind="stiff", x=21.0, h=0.5, w=1.0)
    fr = pulley_frame(finger, p, (0.0, 0.0, 0.0))
    assert fr.u == pytest.approx(21.0 - 3.5j)
    assert fr.r == pytest.approx(21.0 - 4.0j)   # base depth b plus height h
    assert fr.q == pytest.approx(20.5 - 4.0j)   # proximal corner, half a width back
    assert fr.s == pytest.approx(21.5 - 4.0j)


def test_pulley_frame_rotates_with_phalange(finger):
    p = PulleySpec(label="A4", phalange=2, kind="stiff", x=13.5)
    theta = (0.3, 0.4, 0.0)
    fr = pulley_frame(finger, p, theta)
    rot = cmath.exp(-1j * (theta[0] + theta[1]))
    z2 = joint_positions(finger, theta)[1]
    assert fr.u == pytest.approx(z2 + (13.5 - 3.5j) * rot)
    assert abs(fr.r - fr.u) == pytest.approx(p.h)
    assert abs(fr.s - fr.q) == pytest.approx(p.w)


def test_point_segment_distance_cases():
    d, a = point_segment_distance(1 + 1j, 0j, 2 + 0j)
    assert (d, a) == (1.0, 0.5)
    d, a = point_segment_distance(-1 + 1j, 0j, 2 + 0j)
    assert d == pytest.approx(math.sqrt(2)) and a == -0.5
    d, a = point_segment_distance(3 + 0j, 0j, 2 + 0j)
    assert d == pytest.approx(1.0) and a == 1.5


def test_contact_angles_symmetric_wrap(finger):
    p = PulleySpec(label="C", phalange=1, kind="stiff", x=21.0, h=2.0, w=1.0)
    fr = pulley_frame(finger, p, (0.0, 0.0, 0.0))
    phi1, phi2 = contact_angles(fr, fr.q + (-5 - 5j), fr.s + (5 - 5j))
    assert phi1 == pytest.approx(phi2)
    assert phi1 == pytest.approx(math.pi / 4)


def test_activation_rule():
    stiff = PulleySpec(label="A", phalange=1, kind="stiff", x=10.0, h=0.5)
    flex = PulleySpec(label="C", phalange=1, kind="flexible", x=10.0, h=2.0)
    u = 10.0 - 3.5j
    low = (0.0 - 4.0j, 20.0 - 4.0j)      # bypass hugging the bone: 0.5 mm lift
    high = (0.0 - 9.0j, 20.0 - 9.0j)     # bypass far off the bone
    # stiff pulleys are snug loops: engaged regardless of the bypass
    assert is_active(stiff, *low, u) and is_active(stiff, *high, u)
    # a loose strap only engages once the bypass lifts to its height
    assert not is_active(flex, *low, u)
    assert is_active(flex, *high, u)
    boundary = (0.0 - 5.5j, 20.0 - 5.5j)  # lift exactly h
    assert is_active(flex, *boundary, u)


def test_flexible_beta_symmetry_oracle(finger):
    p = PulleySpec(label="C1", phalange=1, kind="flexible", x=21.0, h=2.0, w=1.0)
    # mirror-symmetric neighbours about the pulley base force beta = -pi/2
    s_prev, q_next = 11.0 - 4.0j, 31.0 - 4.0j
    beta = solve_flexible_beta(finger, p, (0.0, 0.0, 0.0), s_prev, q_next)
    assert beta == pytest.approx(STIFF_BETA, abs=1e-9)
    # asymmetric neighbours: tilt changes but the bisector residual is zero
    beta = solve_flexible_beta(finger, p, (0.0, 0.0, 0.0), 16.0 - 4.0j, 31.0 - 9.0j)
    fr = pulley_frame(finger, p, (0.0, 0.0, 0.0), beta)
    phi1, phi2 = contact_angles(fr, 16.0 - 4.0j, 31.0 - 9.0j)
    assert abs(phi1 - phi2) <= 1e-10
    assert beta != pytest.approx(STIFF_BETA, abs=1e-3)


def test_polyline_straight_pose(ccc):
    route = ccc.routes[0]
    pl = tendon_polyline(ccc.finger, route, (0.0, 0.0, 0.0))
    assert all(pl.active)
    # every interior vertex sits at tip depth b + h below the bone axis
    for v in pl.vertices[1:]:
        assert v.imag == pytest.approx(-4.0)
    assert pl.vertices[0] == complex(-7.5, -5.0)
    # the attachment contributes a single terminal vertex: its proximal corner
    tap_frame = pl.frames[-1]
    assert pl.vertices[-1] == tap_frame.q
    assert tap_frame.q != tap_frame.s


def test_bowstring_trivial_depth(ccc):
    # straight pose: the segment crossing DIP runs at tip depth b + h
    pl = tendon_polyline(ccc.finger, ccc.routes[0], (0.0, 0.0, 0.0))
    joints = joint_positions(ccc.finger, (0.0, 0.0, 0.0))
    d, _ = point_segment_distance(joints[2], *pl.crossing_segment(3))
    assert d == pytest.approx(4.0)


@pytest.mark.parametrize("name,overrides", [
    ("C-C-C", {}),
    ("C~D-C~D-C", {"e": "10e", "h_c": 2.0}),
    ("C-D-", {}),
])
def test_excursion_moment_arm_duality(name, overrides, rng):
    """d_jt equals -dL/dtheta_j (flexion reels tendon in) with the
    contact set held fixed."""
    cfg = build_configuration(name, overrides)
    route = cfg.routes[0]
    for _ in range(12):
        theta = rng.uniform(0.1, 1.2, size=3)
        pl = tendon_polyline(cfg.finger, route, theta)
        joints = joint_positions(cfg.finger, theta)
        h = 1e-5
        for j in (1, 2, 3):
            if pl.crossing_segment(j) is None:
                continue
            d = moment_arm(j, pl, joints)
            tp = theta.copy(); tp[j - 1] += h
            tm = theta.copy(); tm[j - 1] -= h
            dL = (tendon_length(cfg.finger, route, tp, force_active=pl.active,
                                betas0=pl.betas)
                  - tendon_length(cfg.finger, route, tm, force_active=pl.active,
                                  betas0=pl.betas)) / (2 * h)
            assert d == pytest.approx(-dL, abs=1e-4)


def test_polyline_warm_start_consistency(ccc, rng):
    """Warm-started assembly agrees with a cold assembly."""
    route = ccc.routes[0]
    active, betas = None, None
    for _ in range(8):
        theta = rng.uniform(0.0, 1.4, size=3)
        warm = tendon_polyline(ccc.finger, route, theta,
                               active0=active, betas0=betas)
        cold = tendon_polyline(ccc.finger, route, theta)
        assert warm.active == cold.active
        assert np.allclose(warm.vertices, cold.vertices)
        active, betas = warm.active, warm.betas
