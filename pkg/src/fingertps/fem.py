"""Independent cross-check: geometrically nonlinear planar frame model.

The finger is remeshed as 2D co-rotational beam elements (axial + Euler-
Bernoulli bending in the rotated frame), with the compliant joints as
short flexure segments and the phalanges/pulley posts as near-rigid
members. The tendon becomes a follower string load: at every pulley-post
tip the string pulls along the current chord directions with constant
tension, including the analytic load-stiffness contribution.

This model shares no kinematics with the pseudo-rigid-body solver (no
complex-plane joint chain, no torsional springs, no moment arms), so
agreement of the tension-flexion curves is a genuine cross-validation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .equilibrium import tension_sweep
from .model import FingerModel, TPSConfiguration

RAD2DEG = 180.0 / math.pi


def wrap_angle(a: float) -> float:
    return (a + math.pi) % (2.0 * math.pi) - math.pi


@dataclass
class BeamElement:
    n1: int
    n2: int
    EA: float
    EI: float
    L0: float
    t0: float       # initial element orientation


@dataclass
class FrameMesh:
    X: np.ndarray                      # (N, 2) reference coordinates
    elements: list = field(default_factory=list)
    fixed: list = field(default_factory=list)   # constrained dof indices
    string_nodes: list = field(default_factory=list)   # post-tip node ids, arc order
    string_origin: tuple = (0.0, 0.0)  # fixed proximal anchor of the string
    tip_node: int = -1                 # distal axis node (rotation read-out)

    @property
    def ndof(self) -> int:
        return 3 * len(self.X)

    def free_dofs(self) -> np.ndarray:
        mask = np.ones(self.ndof, dtype=bool)
        mask[self.fixed] = False
        return np.nonzero(mask)[0]

    def deformed(self, u: np.ndarray) -> np.ndarray:
        return self.X + u.reshape(-1, 3)[:, :2]


def _add_beam(mesh: FrameMesh, nodes, EA, EI):
    X = mesh.X
    for a, b in zip(nodes[:-1], nodes[1:]):
        d = X[b] - X[a]
        L0 = float(np.hypot(*d))
        mesh.elements.append(BeamElement(a, b, EA, EI, L0,
                                         math.atan2(d[1], d[0])))


def build_finger_mesh(config: TPSConfiguration, n_flex: int = 20,
                      axial_factor: float = 1000.0,
                      rigid_factor: float = 1000.0) -> FrameMesh:
    """Mesh a single-tendon, all-stiff configuration.

    Flexure EI is chosen so the cantilever-equivalent rotational stiffness
    matches the lumped joint constant: EI_j = K_j * lf. The axis is meshed
    with flexure segments centred at each joint; pulley posts hang from the
    axis down to the tendon line at depth b + h.
    """
    if len(config.routes) != 1:
        raise ValueError("frame mesh supports single-tendon configurations")
    route = config.routes[0]
    finger = config.finger
    lf = finger.lf
    cum = [0.0, finger.l[0], finger.l[0] + finger.l[1], sum(finger.l)]

    # axis breakpoints: piece boundaries plus pulley abscissae
    pieces = []     # (x_start, x_end, kind, joint)
    pieces.append((-lf / 2.0, lf / 2.0, "flex", 1))
    pieces.append((lf / 2.0, cum[1] - lf / 2.0, "rigid", 0))
    pieces.append((cum[1] - lf / 2.0, cum[1] + lf / 2.0, "flex", 2))
    pieces.append((cum[1] + lf / 2.0, cum[2] - lf / 2.0, "rigid", 0))
    pieces.append((cum[2] - lf / 2.0, cum[2] + lf / 2.0, "flex", 3))
    pieces.append((cum[2] + lf / 2.0, cum[3], "rigid", 0))

    pulleys = []    # (x_global, spec) excluding the ground anchor
    for p in route.points:
        if p.kind == "ground":
            continue
        if p.kind == "flexible":
            raise ValueError("frame mesh supports stiff pulleys only")
        pulleys.append((cum[p.phalange - 1] + p.x, p))

    xs = [-lf / 2.0]
    node_ids = {}

    def add_axis_node(x):
        key = round(x, 9)
        if key in node_ids:
            return node_ids[key]
        xs.append(x)
        node_ids[key] = len(xs) - 1
        return node_ids[key]

    node_ids[round(xs[0], 9)] = 0
    coords = None  # filled after all axis nodes exist

    EI_flex = [finger.K[j] * lf for j in range(3)]
    EA_flex = [axial_factor * EI / lf ** 2 for EI in EI_flex]
    EI_rigid = rigid_factor * max(EI_flex)
    EA_rigid = rigid_factor * max(EA_flex)

    mesh = FrameMesh(X=np.zeros((0, 2)))
    spans = []      # (node list, EA, EI) resolved after coords exist
    for x0, x1, kind, joint in pieces:
        if kind == "flex":
            pts = np.linspace(x0, x1, n_flex + 1)
            EA, EI = EA_flex[joint - 1], EI_flex[joint - 1]
        else:
            inner = sorted({round(xg, 9) for xg, _p in pulleys if x0 < xg < x1})
            brk = [x0] + inner + [x1]
            pts = []
            for a, b in zip(brk[:-1], brk[1:]):
                pts.extend(np.linspace(a, b, 3)[:-1])
            pts.append(x1)
            pts = np.array(pts)
            EA, EI = EA_rigid, EI_rigid
        ids = [add_axis_node(float(x)) for x in pts]
        spans.append((ids, EA, EI))

    axis_nodes = len(xs)
    coords = [(x, 0.0) for x in xs]

    string_nodes = []
    post_spans = []
    for xg, p in pulleys:
        top = node_ids[round(xg, 9)]
        drop = finger.b[p.phalange - 1] + p.h
        mid = len(coords)
        coords.append((xg, -drop / 2.0))
        tip = len(coords)
        coords.append((xg, -drop))
        post_spans.append(([top, mid, tip], EA_rigid, EI_rigid))
        string_nodes.append(tip)

    mesh.X = np.array(coords)
    for ids, EA, EI in spans + post_spans:
        _add_beam(mesh, ids, EA, EI)
    mesh.fixed = [0, 1, 2]                      # clamp the proximal end
    mesh.string_nodes = string_nodes
    mesh.string_origin = (finger.ground.real, finger.ground.imag)
    mesh.tip_node = axis_nodes - 1
    return mesh


def assemble_internal(mesh: FrameMesh, u: np.ndarray):
    """Internal force vector and consistent tangent (material + geometric)."""
    n = mesh.ndof
    f = np.zeros(n)
    K = np.zeros((n, n))
    for el in mesh.elements:
        i1, i2 = 3 * el.n1, 3 * el.n2
        x1 = mesh.X[el.n1] + u[i1:i1 + 2]
        x2 = mesh.X[el.n2] + u[i2:i2 + 2]
        r1, r2 = u[i1 + 2], u[i2 + 2]
        dx, dy = x2 - x1
        Ln = math.hypot(dx, dy)
        c, s = dx / Ln, dy / Ln
        beta = math.atan2(dy, dx)
        rigid = beta - el.t0
        tb1 = wrap_angle(r1 - rigid)
        tb2 = wrap_angle(r2 - rigid)

        N = el.EA * (Ln - el.L0) / el.L0
        M1 = 2.0 * el.EI / el.L0 * (2.0 * tb1 + tb2)
        M2 = 2.0 * el.EI / el.L0 * (tb1 + 2.0 * tb2)

        rv = np.array([-c, -s, 0.0, c, s, 0.0])
        zv = np.array([s, -c, 0.0, -s, c, 0.0])
        b1 = np.array([-s / Ln, c / Ln, 1.0, s / Ln, -c / Ln, 0.0])
        b2 = np.array([-s / Ln, c / Ln, 0.0, s / Ln, -c / Ln, 1.0])

        fel = N * rv + M1 * b1 + M2 * b2
        B = np.vstack([rv, b1, b2])
        C = np.array([[el.EA / el.L0, 0.0, 0.0],
                      [0.0, 4.0 * el.EI / el.L0, 2.0 * el.EI / el.L0],
                      [0.0, 2.0 * el.EI / el.L0, 4.0 * el.EI / el.L0]])
        Kel = (B.T @ C @ B
               + (N / Ln) * np.outer(zv, zv)
               + ((M1 + M2) / Ln ** 2) * (np.outer(rv, zv) + np.outer(zv, rv)))

        idx = [i1, i1 + 1, i1 + 2, i2, i2 + 1, i2 + 2]
        f[idx] += fel
        K[np.ix_(idx, idx)] += Kel
    return f, K


def assemble_follower(mesh: FrameMesh, u: np.ndarray, T: float):
    """External string load and its analytic displacement tangent.

    The string runs origin -> tip_1 -> ... -> tip_m and terminates at the
    last tip (single-sided pull there). Each segment pulls both endpoints
    together with tension T along the current chord.
    """
    n = mesh.ndof
    f = np.zeros(n)
    dK = np.zeros((n, n))       # d f_ext / d u
    pts = [np.asarray(mesh.string_origin, dtype=float)]
    ids = [None]
    xy = mesh.deformed(u)
    for nd in mesh.string_nodes:
        pts.append(xy[nd])
        ids.append(nd)
    for (pa, na), (pb, nb) in zip(zip(pts[:-1], ids[:-1]), zip(pts[1:], ids[1:])):
        d = pb - pa
        L = float(np.hypot(*d))
        e = d / L
        P = (np.eye(2) - np.outer(e, e)) / L
        if na is not None:
            f[3 * na:3 * na + 2] += T * e
        if nb is not None:
            f[3 * nb:3 * nb + 2] -= T * e
        # d e / d u = P (d pb - d pa)
        if na is not None:
            ia = slice(3 * na, 3 * na + 2)
            dK[ia, ia] += -T * P
            if nb is not None:
                ib = slice(3 * nb, 3 * nb + 2)
                dK[ia, ib] += T * P
                dK[ib, ia] += T * P
                dK[ib, ib] += -T * P
        elif nb is not None:
            ib = slice(3 * nb, 3 * nb + 2)
            dK[ib, ib] += -T * P
    return f, dK


def newton_solve(mesh: FrameMesh, T: float, u0: np.ndarray | None = None,
                 tol: float = 1e-8, max_iter: int = 50) -> np.ndarray:
    """Equilibrium at string tension T; full Newton with load-stiffness."""
    u = np.zeros(mesh.ndof) if u0 is None else u0.copy()
    free = mesh.free_dofs()
    for _ in range(max_iter):
        f_int, K_int = assemble_internal(mesh, u)
        f_ext, dK_ext = assemble_follower(mesh, u, T)
        g = f_int - f_ext
        ref = max(1.0, float(np.max(np.abs(f_ext))) if T > 0 else 1.0)
        if float(np.max(np.abs(g[free]))) <= tol * ref:
            return u
        Kt = K_int - dK_ext
        du = np.linalg.solve(Kt[np.ix_(free, free)], -g[free])
        # the rigid-member penalty stiffness puts a floating-point floor on
        # the residual; a vanishing update means we are sitting on it
        if float(np.max(np.abs(du))) <= 1e-12 * max(1.0, float(np.max(np.abs(u)))):
            u[free] += du
            return u
        # full Newton step; halve only when the update is non-finite or
        # leaves the basin entirely (the rigid-member penalty makes the
        # residual spike transiently, so a monotone line search would stall)
        scale = 1.0
        for _cut in range(8):
            u_try = u.copy()
            u_try[free] += scale * du
            f_i, _ = assemble_internal(mesh, u_try)
            f_e, _ = assemble_follower(mesh, u_try, T)
            g1 = float(np.linalg.norm((f_i - f_e)[free]))
            if np.isfinite(g1):
                break
            scale *= 0.5
        u = u_try
    raise RuntimeError(f"frame Newton failed to converge at T={T}")


def sweep_fem(mesh: FrameMesh, t_max: float, n_steps: int,
              tol: float = 1e-8, max_bisect: int = 5):
    """Ramp the string tension; returns [(T, u)] including T=0.

    Failed steps are bisected (up to ``max_bisect`` levels) so the sweep
    can follow strongly nonlinear stretches of the response.
    """
    out = [(0.0, np.zeros(mesh.ndof))]
    targets = list(np.linspace(0.0, t_max, n_steps + 1)[1:])
    u = out[0][1]
    t_cur = 0.0
    while targets:
        t_next = targets[0]
        try:
            u_next = newton_solve(mesh, t_next, u, tol=tol)
        except RuntimeError:
            if max_bisect <= 0 or (t_next - t_cur) < 1e-6 * max(t_max, 1.0):
                raise
            targets.insert(0, 0.5 * (t_cur + t_next))
            max_bisect -= 1
            continue
        out.append((t_next, u_next))
        u, t_cur = u_next, t_next
        targets.pop(0)
    return out


def tip_flexion_deg(mesh: FrameMesh, u: np.ndarray) -> float:
    """Total flexion = minus the distal axis node rotation, degrees."""
    return -u[3 * mesh.tip_node + 2] * RAD2DEG


def equivalent_joint_stiffness(E: float, width: float, thickness: float,
                               lf: float, n_el: int = 20) -> float:
    """Rotational stiffness (N*mm/deg) of one flexure strip loaded by an
    end moment, from the frame model itself: K = M / theta_tip."""
    EI = E * width * thickness ** 3 / 12.0
    EA = E * width * thickness
    mesh = FrameMesh(X=np.array([[x, 0.0] for x in np.linspace(0.0, lf, n_el + 1)]))
    _add_beam(mesh, list(range(n_el + 1)), EA, EI)
    mesh.fixed = [0, 1, 2]
    free = mesh.free_dofs()
    M = 1e-3 * EI / lf          # small end moment, linear regime
    u = np.zeros(mesh.ndof)
    for _ in range(30):
        f_int, K = assemble_internal(mesh, u)
        g = f_int.copy()
        g[3 * n_el + 2] -= M
        if float(np.max(np.abs(g[free]))) <= 1e-12 * max(M, 1.0):
            break
        u[free] += np.linalg.solve(K[np.ix_(free, free)], -g[free])
    theta = u[3 * n_el + 2]
    return (M / theta) * math.pi / 180.0


@dataclass
class FemComparison:
    sum_deg: np.ndarray       # common flexion grid (deg)
    t_fem: np.ndarray
    t_prbm: np.ndarray
    rel_gap: np.ndarray

    @property
    def max_rel_gap(self) -> float:
        return float(np.max(self.rel_gap)) if self.rel_gap.size else 0.0


def compare_with_prbm(config: TPSConfiguration, t_max: float = 8.0,
                      n_steps: int = 80, sum_limit_deg: float = 120.0,
                      sum_min_deg: float = 5.0) -> FemComparison:
    """Tension-at-equal-flexion comparison of the two models.

    Both models are swept over the same tension ramp; the lumped-model
    tension is then interpolated onto the frame model's flexion samples
    and compared relatively for flexion angles up to ``sum_limit_deg``.
    """
    trace = tension_sweep(config, t_max=t_max, n_steps=n_steps,
                          with_metrics=False)
    ts_p = np.array([s.ts for s in trace.steps])
    sum_p = np.array([s.sum_deg for s in trace.steps])

    mesh = build_finger_mesh(config)
    fem = sweep_fem(mesh, t_max, n_steps)
    sum_f = np.array([tip_flexion_deg(mesh, u) for _t, u in fem])
    ts_f = np.array([t for t, _u in fem])

    hi = min(sum_limit_deg, sum_p[-1], sum_f[-1])
    mask = (sum_f >= sum_min_deg) & (sum_f <= hi)
    grid = sum_f[mask]
    t_fem = ts_f[mask]
    t_prbm = np.interp(grid, sum_p, ts_p)
    rel = np.abs(t_fem - t_prbm) / np.where(t_prbm > 0, t_prbm, 1.0)
    return FemComparison(sum_deg=grid, t_fem=t_fem, t_prbm=t_prbm, rel_gap=rel)
