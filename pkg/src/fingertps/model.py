"""Domain types for the planar finger flexor tendon-pulley model.

Conventions used throughout the package:

* lengths in mm, forces in N, stresses in MPa (N/mm^2)
* angles stored in radians; joint stiffnesses converted to N*mm/rad at
  construction time (inputs are N*mm/deg)
* the finger extends along +x when straight, the tendon side is -y, and
  flexion (theta >= 0) curls the finger toward -y
* 2D points are Python complex numbers (x + 1j*y)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

DEG = math.pi / 180.0

# Table-1 style defaults shared by the configuration builder.
DEFAULT_H0 = 0.5    # pulley height, mm
DEFAULT_W0 = 1.0    # pulley width, mm
DEFAULT_T0 = 10.0   # out-of-plane depth, mm
DEFAULT_E0 = 4.0    # pulley offset from joint, mm


class ConfigError(ValueError):
    """Invalid finger/pulley/route configuration."""


@dataclass(frozen=True)
class FingerModel:
    """Three-phalange planar finger with torsional-spring joints.

    ``K`` is stored in N*mm/rad. Use :meth:`from_deg_stiffness` (or
    :meth:`default`) when starting from per-degree values.
    """

    l: tuple[float, float, float]          # phalange lengths, mm
    b: tuple[float, float, float]          # bone half-widths, mm
    K: tuple[float, float, float]          # joint stiffnesses, N*mm/rad
    theta0: tuple[float, float, float]     # neutral angles, rad
    theta_max: tuple[float, float, float]  # joint limits, rad
    lf: float                              # flexure length, mm
    ground: complex                        # ground pulley point (X_g + i Y_g)

    def __post_init__(self):
        for j in range(3):
            if not (self.l[j] > self.lf > 0.0):
                raise ConfigError(f"need l[{j}] > lf > 0, got l={self.l[j]}, lf={self.lf}")
            if self.b[j] <= 0.0:
                raise ConfigError(f"bone half-width b[{j}] must be positive")
            if self.K[j] <= 0.0:
                raise ConfigError(f"joint stiffness K[{j}] must be positive")
            if self.theta_max[j] <= self.theta0[j]:
                raise ConfigError(f"joint limit theta_max[{j}] must exceed theta0[{j}]")

    @classmethod
    def from_deg_stiffness(cls, l, b, K_deg, theta0, theta_max, lf, ground) -> "FingerModel":
        K_rad = tuple(k * 180.0 / math.pi for k in K_deg)
        return cls(tuple(l), tuple(b), K_rad, tuple(theta0), tuple(theta_max), lf, ground)

    @classmethod
    def default(cls) -> "FingerModel":
        """Index-finger data set: l=(42, 27, 19.5) mm, 2b=7 mm,
        K=(0.95, 0.60, 0.60) N*mm/deg, limits (90, 100, 80) deg,
        lf=5 mm, ground at (-7.5, -5.0) mm."""
        return cls.from_deg_stiffness(
            l=(42.0, 27.0, 19.5),
            b=(3.5, 3.5, 3.5),
            K_deg=(0.95, 0.60, 0.60),
            theta0=(0.0, 0.0, 0.0),
            theta_max=(90.0 * DEG, 100.0 * DEG, 80.0 * DEG),
            lf=5.0,
            ground=complex(-7.5, -5.0),
        )

    def stiffness_deg(self) -> tuple[float, float, float]:
        """Joint stiffnesses back in N*mm/deg (reporting only)."""
        return tuple(k * math.pi / 180.0 for k in self.K)


PULLEY_KINDS = ("stiff", "flexible", "attachment", "ground")


@dataclass(frozen=True)
class PulleySpec:
    """One pulley or tendon attachment point (TAP) on a phalange.

    ``phalange`` is 1..3 (0 for the ground point); ``x`` is measured along
    the phalange from its proximal joint center.
    """

    label: str
    phalange: int
    kind: str
    x: float
    h: float = DEFAULT_H0
    w: float = DEFAULT_W0
    D: float = DEFAULT_T0

    def __post_init__(self):
        if self.kind not in PULLEY_KINDS:
            raise ConfigError(f"unknown pulley kind {self.kind!r}")
        if self.kind == "ground":
            if self.phalange != 0 or self.w != 0.0 or self.h != 0.0:
                raise ConfigError("ground pulley must sit on phalange 0 with w=h=0")
        else:
            if self.phalange not in (1, 2, 3):
                raise ConfigError(f"pulley {self.label}: phalange must be 1..3")
            if self.w < 0.0 or self.h < 0.0:
                raise ConfigError(f"pulley {self.label}: negative width/height")


def ground_pulley(label: str = "G") -> PulleySpec:
    return PulleySpec(label=label, phalange=0, kind="ground", x=0.0, h=0.0, w=0.0, D=0.0)


@dataclass(frozen=True)
class TendonRoute:
    """Ordered pulley sequence for one tendon, ground pulley first,
    attachment point last."""

    tendon: str                       # "FDP" or "FDS"
    points: tuple[PulleySpec, ...]

    def __post_init__(self):
        if self.tendon not in ("FDP", "FDS"):
            raise ConfigError(f"unknown tendon {self.tendon!r}")
        pts = self.points
        if len(pts) < 2:
            raise ConfigError("route needs at least ground and attachment")
        if pts[0].kind != "ground":
            raise ConfigError("route must start with the ground pulley")
        if pts[-1].kind != "attachment":
            raise ConfigError("route must end with an attachment point")
        for p in pts[1:-1]:
            if p.kind not in ("stiff", "flexible"):
                raise ConfigError(f"interior route point {p.label} must be a pulley")
        # arc order: phalange ascending, x strictly increasing within a phalange
        prev = None
        for p in pts[1:]:
            key = (p.phalange, p.x)
            if prev is not None and key <= prev:
                raise ConfigError(f"route points out of arc order at {p.label}")
            prev = key
        if self.tendon == "FDS" and any(p.phalange >= 3 for p in pts):
            raise ConfigError("FDS route may not touch the distal phalange")

    @property
    def tension_index(self) -> int:
        """1 for FDP, 2 for FDS (matching T1/T2)."""
        return 1 if self.tendon == "FDP" else 2

    def validate_against(self, finger: FingerModel) -> None:
        for p in self.points:
            if p.kind == "ground":
                continue
            if not (0.0 < p.x < finger.l[p.phalange - 1]):
                raise ConfigError(
                    f"pulley {p.label}: x={p.x} outside phalange {p.phalange} "
                    f"(length {finger.l[p.phalange - 1]})")


@dataclass(frozen=True)
class TPSConfiguration:
    """A finger plus one or two tendon routes with their tension split."""

    finger: FingerModel
    routes: tuple[TendonRoute, ...]
    gamma: float                      # T2 / Ts
    name: str
    t_max: float = 8.0                # default sweep ceiling, N
    n_steps: int = 200

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError("gamma must lie in [0, 1]")
        tendons = [r.tendon for r in self.routes]
        if len(self.routes) not in (1, 2) or len(set(tendons)) != len(tendons):
            raise ConfigError("need one FDP and/or one FDS route")
        if len(self.routes) == 1:
            want = 0.0 if tendons[0] == "FDP" else 1.0
            if self.gamma != want:
                raise ConfigError(
                    f"gamma must be {want} for a {tendons[0]}-only configuration")
        for r in self.routes:
            r.validate_against(self.finger)

    def route(self, tendon: str) -> TendonRoute | None:
        for r in self.routes:
            if r.tendon == tendon:
                return r
        return None

    def tensions(self, t_s: float) -> tuple[float, float]:
        """(T1, T2) for a total tension ``t_s``."""
        return ((1.0 - self.gamma) * t_s, self.gamma * t_s)

    def with_gamma(self, gamma: float) -> "TPSConfiguration":
        return replace(self, gamma=gamma)


@dataclass
class EquilibriumState:
    """Solved quasistatic state at one tension level."""

    theta: tuple[float, float, float]           # rad
    locked: frozenset[int]                      # subset of {1,2,3}
    T1: float
    T2: float
    beta: dict = field(default_factory=dict)    # (tendon, label) -> rad
    active: dict = field(default_factory=dict)  # (tendon, label) -> bool
    d: dict = field(default_factory=dict)       # (joint, tension index) -> mm
    polylines: dict = field(default_factory=dict)  # tendon -> TendonPolyline

    @property
    def sum_theta(self) -> float:
        return sum(self.theta)


def read_params(path) -> dict:
    """Read a flat ``key = value`` override file (UTF-8, '#' comments).

    Values are parsed as float when possible, otherwise kept as strings.
    """
    out: dict = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, val = (part.strip() for part in line.split("=", 1))
            if not key:
                raise ConfigError(f"{path}:{lineno}: empty key")
            try:
                out[key] = float(val)
            except ValueError:
                out[key] = val
    return out
