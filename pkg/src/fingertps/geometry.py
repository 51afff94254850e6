"""Planar tendon-routing geometry.

All kinematics are done with complex numbers. Flexion angles are positive
and rotate phalanges clockwise (toward the tendon side at -y), so a
phalange carrying total proximal flexion ``phi`` is rotated by
``exp(-1j*phi)`` relative to the straight pose.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

from .model import FingerModel, PulleySpec, TendonRoute

TWO_PI = 2.0 * math.pi
STIFF_BETA = -0.5 * math.pi

# activation distance ties count as engaged
_ACT_TOL = 1e-9


class DegenerateGeometryError(ValueError):
    """Zero-length segment or unsolvable flexible-pulley orientation."""


class ActivationError(RuntimeError):
    """Pulley activation fixed point failed to settle."""

    def __init__(self, msg, last_sets=None):
        super().__init__(msg)
        self.last_sets = last_sets


def wrap_angle(a: float) -> float:
    """Wrap to [-pi, pi)."""
    return (a + math.pi) % TWO_PI - math.pi


def joint_positions(finger: FingerModel, theta) -> tuple[complex, complex, complex]:
    """Joint centers z1, z2, z3 for flexion angles ``theta`` (rad)."""
    z1 = 0.0 + 0.0j
    z2 = z1 + finger.l[0] * cmath.exp(-1j * theta[0])
    z3 = z2 + finger.l[1] * cmath.exp(-1j * (theta[0] + theta[1]))
    return (z1, z2, z3)


@dataclass(frozen=True)
class PulleyFrame:
    """Pulley base point ``u``, tip midpoint ``r`` and tip corners.

    ``q`` is the proximal (tendon entry) corner, ``s`` the distal (exit)
    corner; for zero-width points q == r == s.
    """

    u: complex
    r: complex
    q: complex
    s: complex
    beta: float


def pulley_frame(finger: FingerModel, pulley: PulleySpec, theta,
                 beta: float = STIFF_BETA, joints=None) -> PulleyFrame:
    """Place a pulley on its (possibly rotated) phalange."""
    if pulley.kind == "ground":
        g = finger.ground
        return PulleyFrame(u=g, r=g, q=g, s=g, beta=beta)
    j = pulley.phalange
    z = (joints or joint_positions(finger, theta))[j - 1]
    rot = cmath.exp(-1j * sum(theta[:j]))
    u = z + (pulley.x - 1j * finger.b[j - 1]) * rot
    r = u + pulley.h * cmath.exp(1j * beta) * rot
    if pulley.w == 0.0:
        return PulleyFrame(u=u, r=r, q=r, s=r, beta=beta)
    tip = 0.5 * pulley.w * cmath.exp(1j * (beta + 0.5 * math.pi)) * rot
    return PulleyFrame(u=u, r=r, q=r - tip, s=r + tip, beta=beta)


def foot_of_perpendicular(z: complex, s: complex, q: complex) -> tuple[complex, float]:
    """Foot of the perpendicular from ``z`` onto the line through s -> q.

    Returns ``(n, alpha)`` with ``n = (1-alpha)*s + alpha*q``.
    """
    d = q - s
    den = abs(d) ** 2
    if den == 0.0:
        raise DegenerateGeometryError("zero-length segment")
    alpha = ((z - s).real * d.real + (z - s).imag * d.imag) / den
    return s + alpha * d, alpha


def point_segment_distance(z: complex, s: complex, q: complex) -> tuple[float, float]:
    """Shortest distance from ``z`` to segment s-q, plus the foot parameter.

    ``alpha`` is the unclamped line parameter; the distance uses the
    clamped endpoint whenever alpha falls outside (0, 1).
    """
    if s == q:
        return abs(z - s), 0.0
    n, alpha = foot_of_perpendicular(z, s, q)
    if alpha <= 0.0:
        return abs(z - s), alpha
    if alpha >= 1.0:
        return abs(z - q), alpha
    return abs(z - n), alpha


def contact_angles(frame: PulleyFrame, prev_pt: complex, next_pt: complex) -> tuple[float, float]:
    """Angles phi1/phi2 of the adjacent tendon segments with the pulley
    axis u -> r (proximal segment runs q -> prev, distal s -> next)."""
    axis = frame.r - frame.u
    left = prev_pt - frame.q
    right = next_pt - frame.s
    if axis == 0 or left == 0 or right == 0:
        raise DegenerateGeometryError("coincident tendon/pulley points")
    phi1 = cmath.phase(axis / left)
    phi2 = cmath.phase(right / axis)
    return phi1, phi2


def is_active(pulley: PulleySpec, s_prev: complex, q_next: complex, u: complex) -> bool:
    """Engagement test. Stiff pulleys and attachments are snug loops that
    pin the tendon at their tips in every pose. A flexible strap is slack
    until the bypass segment (strap skipped) has lifted off the bone by at
    least the strap height; exact equality counts as engaged."""
    if pulley.kind != "flexible":
        return True
    dist, _ = point_segment_distance(u, s_prev, q_next)
    return dist >= pulley.h - _ACT_TOL


def _beta_mismatch(finger, pulley, theta, beta, s_prev, q_next, joints):
    fr = pulley_frame(finger, pulley, theta, beta, joints)
    phi1, phi2 = contact_angles(fr, s_prev, q_next)
    return wrap_angle(phi1 - phi2)


def solve_flexible_beta(finger: FingerModel, pulley: PulleySpec, theta,
                        s_prev: complex, q_next: complex,
                        beta0: float = STIFF_BETA, joints=None) -> float:
    """Zero-bending-moment orientation of an active flexible pulley.

    Root of phi1 - phi2 over beta in (-pi, 0); bracketed bisection with a
    golden-section fallback on |phi1 - phi2| when no sign change exists.
    """
    if pulley.kind != "flexible":
        raise DegenerateGeometryError(f"{pulley.label}: only flexible pulleys reorient")
    joints = joints or joint_positions(finger, theta)

    def g(beta):
        return _beta_mismatch(finger, pulley, theta, beta, s_prev, q_next, joints)

    eps = 1e-3
    lo, hi = -math.pi + eps, -eps
    # warm bracket around the previous solution first
    a = max(lo, beta0 - 0.35)
    b = min(hi, beta0 + 0.35)
    ga, gb = g(a), g(b)
    if ga * gb <= 0.0:
        m, gm = _bisect_beta(g, a, b, ga, gb)
        if abs(gm) <= 1e-6:
            return m
    # coarse scan of the full interval; a sign change may also mark the
    # +/-pi branch jump of the mismatch, so verify each converged root
    # and keep the genuine one closest to the warm start
    n = 48
    grid = [lo + (hi - lo) * k / n for k in range(n + 1)]
    vals = [g(x) for x in grid]
    best = None
    for k in range(n):
        if vals[k] == 0.0:
            return grid[k]
        if vals[k] * vals[k + 1] < 0.0:
            m, gm = _bisect_beta(g, grid[k], grid[k + 1], vals[k], vals[k + 1])
            if abs(gm) <= 1e-6 and (best is None
                                    or abs(m - beta0) < abs(best - beta0)):
                best = m
    if best is not None:
        return best
    return _golden_min_beta(g, lo, hi)


def _bisect_beta(g, a, b, ga, gb):
    """Bisection to 1e-12 on beta; returns (root, mismatch at root)."""
    for _ in range(60):
        m = 0.5 * (a + b)
        gm = g(m)
        if gm == 0.0 or (b - a) < 1e-12:
            return m, gm
        if ga * gm < 0.0:
            b, gb = m, gm
        else:
            a, ga = m, gm
    m = 0.5 * (a + b)
    return m, g(m)


def _golden_min_beta(g, lo, hi):
    """Golden-section minimization of |g| when no sign change brackets a root."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = abs(g(c)), abs(g(d))
    for _ in range(120):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = abs(g(c))
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = abs(g(d))
        if b - a < 1e-12:
            break
    beta = 0.5 * (a + b)
    if abs(g(beta)) > 1e-8:
        raise DegenerateGeometryError(
            f"no zero-moment orientation (residual {abs(g(beta)):.2e} rad)")
    return beta


@dataclass
class TendonPolyline:
    """Fixed-point-consistent routing of one tendon.

    ``points`` mirrors the route order; inactive pulleys contribute no
    vertices. Vertices are tagged with their phalange index (ground=0) so
    the segment crossing a joint can be picked out directly.
    """

    route: TendonRoute
    frames: list[PulleyFrame]
    active: list[bool]
    betas: list[float]
    vertices: list[complex]
    vert_phalange: list[int]

    def crossing_segment(self, joint: int):
        """Endpoints (proximal, distal) of the segment spanning ``joint``,
        or None when the route ends before that joint."""
        idx = None
        for i, ph in enumerate(self.vert_phalange):
            if ph < joint:
                idx = i
            else:
                break
        if idx is None or idx + 1 >= len(self.vertices):
            return None
        if self.vert_phalange[idx + 1] < joint:
            return None
        return self.vertices[idx], self.vertices[idx + 1]

    def length(self) -> float:
        return sum(abs(b - a) for a, b in zip(self.vertices, self.vertices[1:]))

    def contact_angles_at(self, index: int) -> tuple[float, float]:
        """phi1/phi2 for the route point ``index`` (must be active)."""
        if not self.active[index]:
            raise DegenerateGeometryError("inactive pulley has no contact angles")
        prev_pt = self._exit_point(self._prev_active(index))
        next_pt = self._entry_point(self._next_active(index))
        return contact_angles(self.frames[index], prev_pt, next_pt)

    # -- internal helpers -------------------------------------------------

    def _prev_active(self, index):
        for k in range(index - 1, -1, -1):
            if self.active[k]:
                return k
        raise DegenerateGeometryError("no active point proximal to index")

    def _next_active(self, index):
        for k in range(index + 1, len(self.active)):
            if self.active[k]:
                return k
        raise DegenerateGeometryError("no active point distal to index")

    def _exit_point(self, index) -> complex:
        return self.frames[index].s

    def _entry_point(self, index) -> complex:
        return self.frames[index].q


def tendon_polyline(finger: FingerModel, route: TendonRoute, theta,
                    active0=None, betas0=None, force_active=None,
                    max_iter: int = 50) -> TendonPolyline:
    """Assemble the tendon polyline with a self-consistent active set and
    flexible-pulley orientations.

    ``active0``/``betas0`` warm-start the fixed point; ``force_active``
    pins the active flags (used by finite-difference oracles that must
    hold the contact regime fixed).
    """
    pts = route.points
    n = len(pts)
    joints = joint_positions(finger, theta)

    if force_active is not None:
        active = list(force_active)
    elif active0 is not None and len(active0) == n:
        active = list(active0)
    else:
        active = [True] * n
    active[0] = active[-1] = True

    betas = list(betas0) if betas0 is not None and len(betas0) == n else [STIFF_BETA] * n
    frames = [pulley_frame(finger, p, theta, betas[i], joints) for i, p in enumerate(pts)]

    def prev_active(i, skip=None):
        for k in range(i - 1, -1, -1):
            if active[k] and k != skip:
                return k
        return 0

    def next_active(i, skip=None):
        for k in range(i + 1, n):
            if active[k] and k != skip:
                return k
        return n - 1

    history = []
    for _ in range(max_iter):
        # orient active flexible pulleys (Gauss-Seidel over couplings)
        for _pass in range(30):
            moved = 0.0
            for i in range(1, n - 1):
                if not active[i] or pts[i].kind != "flexible":
                    continue
                pa, na = prev_active(i), next_active(i)
                b = solve_flexible_beta(finger, pts[i], theta,
                                        frames[pa].s, frames[na].q,
                                        beta0=betas[i], joints=joints)
                moved = max(moved, abs(b - betas[i]))
                betas[i] = b
                frames[i] = pulley_frame(finger, pts[i], theta, b, joints)
            if moved < 1e-11:
                break

        if force_active is not None:
            break

        new_active = list(active)
        for i in range(1, n - 1):
            pa, na = prev_active(i, skip=i), next_active(i, skip=i)
            new_active[i] = is_active(pts[i], frames[pa].s, frames[na].q, frames[i].u)
        if new_active == active:
            break
        history.append(tuple(active))
        active = new_active
    else:
        raise ActivationError(
            f"activation fixed point did not settle for {route.tendon}",
            last_sets=history[-2:])

    vertices: list[complex] = []
    phal: list[int] = []
    for i, p in enumerate(pts):
        if not active[i]:
            continue
        fr = frames[i]
        if p.kind == "attachment":
            # the tendon terminates at the strap's proximal corner
            vertices.append(fr.q)
            phal.append(p.phalange)
        elif p.w > 0.0:
            vertices.extend([fr.q, fr.s])
            phal.extend([p.phalange, p.phalange])
        else:
            vertices.append(fr.r)
            phal.append(p.phalange)
    # drop exact duplicates (co-located zero-width points)
    keep_v, keep_p = [vertices[0]], [phal[0]]
    for v, ph in zip(vertices[1:], phal[1:]):
        if v != keep_v[-1]:
            keep_v.append(v)
            keep_p.append(ph)

    return TendonPolyline(route=route, frames=frames, active=active,
                          betas=betas, vertices=keep_v, vert_phalange=keep_p)


def moment_arm(joint: int, polyline: TendonPolyline, joints) -> float:
    """Moment arm d_jt: distance from the joint center to the line through
    the segment crossing the joint (0 when the route ends proximally)."""
    seg = polyline.crossing_segment(joint)
    if seg is None:
        return 0.0
    n, _ = foot_of_perpendicular(joints[joint - 1], seg[0], seg[1])
    return abs(joints[joint - 1] - n)


def tendon_length(finger: FingerModel, route: TendonRoute, theta,
                  force_active=None, betas0=None) -> float:
    """Total polyline length (excursion oracle helper)."""
    pl = tendon_polyline(finger, route, theta, force_active=force_active, betas0=betas0)
    return pl.length()
