"""Figures of merit: range of flexion, bowstringing, and pulley stress."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .geometry import TendonPolyline, point_segment_distance
from .model import PulleySpec, TPSConfiguration

JOINT_NAMES = {1: "MCP", 2: "PIP", 3: "DIP"}

RAD2DEG = 180.0 / math.pi


class DegeneratePulleyError(ValueError):
    """Stress requested on a pulley with zero width or depth."""


def range_of_flexion(theta) -> float:
    """Sum of joint angles, in degrees."""
    return sum(theta) * RAD2DEG


def bowstringing(joint: int, polyline: TendonPolyline, joint_pos: complex):
    """Joint-to-tendon separation (mm) on the segment crossing ``joint``.

    Returns (B, case) where case is 'interior', 'proximal' (clamped to the
    segment start) or 'distal'. None when the route ends before the joint.
    """
    seg = polyline.crossing_segment(joint)
    if seg is None:
        return None
    dist, alpha = point_segment_distance(joint_pos, seg[0], seg[1])
    if alpha <= 0.0:
        case = "proximal"
    elif alpha >= 1.0:
        case = "distal"
    else:
        case = "interior"
    return dist, case


def bowstring_map(config: TPSConfiguration, state) -> dict:
    """All B_jt values for a solved state, keyed by (joint, tension index)."""
    from .geometry import joint_positions  # local import to avoid cycle noise

    joints = joint_positions(config.finger, state.theta)
    out = {}
    for route in config.routes:
        pl = state.polylines[route.tendon]
        for j in (1, 2, 3):
            res = bowstringing(j, pl, joints[j - 1])
            if res is not None:
                out[(j, route.tension_index)] = res
    return out


@dataclass(frozen=True)
class StressBreakdown:
    pulley: str
    sigma_axial: float    # MPa
    sigma_bending: float  # MPa
    sigma_net: float      # MPa
    phi1: float           # rad
    phi2: float           # rad
    T1_eff: float         # N
    T2_eff: float         # N


def _stress_terms(pulley: PulleySpec, phi1: float, phi2: float, t_total: float):
    if pulley.w <= 0.0 or pulley.D <= 0.0:
        raise DegeneratePulleyError(
            f"pulley {pulley.label}: stress needs positive width and depth")
    sigma_axial = t_total * (math.cos(phi1) + math.cos(phi2)) / (pulley.w * pulley.D)
    inertia = pulley.D * pulley.w ** 3 / 12.0
    sigma_bending = (pulley.h * t_total * (math.sin(phi1) - math.sin(phi2))
                     * (pulley.w / 2.0) / inertia)
    return sigma_axial, sigma_bending


def pulley_stress(pulley: PulleySpec, polyline: TendonPolyline,
                  T1: float, T2: float) -> StressBreakdown:
    """Base stress of one active pulley from its tendon wrap angles.

    ``T1``/``T2`` must already be the effective tensions for this pulley
    (zero for a tendon that terminates proximally to it)."""
    if pulley.kind not in ("stiff", "flexible"):
        raise DegeneratePulleyError(f"{pulley.label}: not a stress-bearing pulley")
    try:
        index = next(i for i, p in enumerate(polyline.route.points) if p is pulley)
    except StopIteration:
        raise DegeneratePulleyError(f"{pulley.label}: not on this route") from None
    phi1, phi2 = polyline.contact_angles_at(index)
    sa, sb = _stress_terms(pulley, phi1, phi2, T1 + T2)
    return StressBreakdown(pulley=pulley.label, sigma_axial=sa, sigma_bending=sb,
                           sigma_net=abs(sa) + abs(sb), phi1=phi1, phi2=phi2,
                           T1_eff=T1, T2_eff=T2)


def stress_report(config: TPSConfiguration, polylines: dict,
                  T1: float, T2: float) -> list[StressBreakdown]:
    """Stress of every stress-bearing pulley in the configuration.

    Pulleys shared by both tendons carry T1 + T2; a pulley missing from a
    tendon's route sees zero tension from that tendon. Inactive pulleys
    report zero stress.
    """
    fdp = config.route("FDP")
    fds = config.route("FDS")
    seen: list[PulleySpec] = []
    for route in config.routes:
        for p in route.points:
            if p.kind in ("stiff", "flexible") and not any(p is q for q in seen):
                seen.append(p)
    out = []
    for p in seen:
        on_fdp = fdp is not None and any(p is q for q in fdp.points)
        on_fds = fds is not None and any(p is q for q in fds.points)
        t1_eff = T1 if on_fdp else 0.0
        t2_eff = T2 if on_fds else 0.0
        # wrap angles from whichever route carries the pulley (identical
        # over the shared proximal portion when both do)
        route = fdp if on_fdp else fds
        pl = polylines[route.tendon]
        index = next(i for i, q in enumerate(route.points) if q is p)
        if not pl.active[index]:
            out.append(StressBreakdown(pulley=p.label, sigma_axial=0.0,
                                       sigma_bending=0.0, sigma_net=0.0,
                                       phi1=float("nan"), phi2=float("nan"),
                                       T1_eff=t1_eff, T2_eff=t2_eff))
            continue
        phi1, phi2 = pl.contact_angles_at(index)
        sa, sb = _stress_terms(p, phi1, phi2, t1_eff + t2_eff)
        out.append(StressBreakdown(pulley=p.label, sigma_axial=sa, sigma_bending=sb,
                                   sigma_net=abs(sa) + abs(sb), phi1=phi1, phi2=phi2,
                                   T1_eff=t1_eff, T2_eff=t2_eff))
    return out


def critical_values(bows: dict, stresses: list, exclude_joints=()):
    """Maxima with argmax labels: ((B_w, joint), (PS, pulley)).

    ``exclude_joints`` filters joints (by name, e.g. 'MCP') from the
    bowstringing maximum, mirroring the per-figure reporting conventions.
    """
    bw, bw_joint = 0.0, ""
    for (j, _t), (val, _case) in bows.items():
        name = JOINT_NAMES[j]
        if name in exclude_joints:
            continue
        if val > bw:
            bw, bw_joint = val, name
    ps, ps_pulley = 0.0, ""
    for s in stresses:
        if s.sigma_net > ps:
            ps, ps_pulley = s.sigma_net, s.pulley
    return (bw, bw_joint), (ps, ps_pulley)
