"""Configuration-name grammar, grid enumeration, and the parametric
study harness.

Naming convention: three character groups (one per phalange) separated by
'-' (single tendon) or '=' before the last group (both tendons). Within a
group the first character places the A-pulley (or the TAP), an optional
second character places a C-pulley, with '~' marking it flexible.
Characters: P (x = e), C (x = l/2), D (x = l - e).
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field

from .equilibrium import tension_sweep
from .metrics import critical_values
from .model import (DEFAULT_E0, DEFAULT_H0, DEFAULT_T0, DEFAULT_W0, ConfigError,
                    FingerModel, PulleySpec, TendonRoute, TPSConfiguration,
                    ground_pulley)

_GROUP_RE = re.compile(r"^([PCD])(?:(~?)([PCD]))?$")

KNOWN_OVERRIDES = {"h_a", "h_c", "w_a", "w_c", "e", "gamma", "t_max", "steps",
                   "e_custom"}


@dataclass(frozen=True)
class ConfigName:
    """Parsed configuration string."""

    a2: str                      # A2 position (FDP/FDS proximal pulley)
    c1: tuple | None             # (position, flexible) on the proximal phalange
    mid: str                     # A4 position, or the FDS-TAP for FDS-only
    c3: tuple | None             # (position, flexible) on the intermediate phalange
    tap: str | None              # FDP-TAP position (None for FDS-only)
    both: bool                   # both tendons actuated

    @property
    def tendons(self) -> tuple[str, ...]:
        if self.both:
            return ("FDP", "FDS")
        return ("FDP",) if self.tap is not None else ("FDS",)

    def format(self) -> str:
        def group(first, second):
            if second is None:
                return first
            pos, flex = second
            return first + ("~" if flex else "") + pos
        g1 = group(self.a2, self.c1)
        g2 = group(self.mid, self.c3)
        g3 = self.tap or ""
        sep2 = "=" if self.both else "-"
        return f"{g1}-{g2}{sep2}{g3}"


def parse_config_name(text: str) -> ConfigName:
    if not text:
        raise ConfigError("empty configuration name")
    parts = re.split(r"([-=])", text)
    if len(parts) != 5:
        raise ConfigError(f"{text!r}: expected three groups with two separators")
    g1, sep1, g2, sep2, g3 = parts
    if sep1 == "=":
        raise ConfigError(f"{text!r}: '=' may only precede the last group")
    both = sep2 == "="
    m1 = _GROUP_RE.match(g1)
    m2 = _GROUP_RE.match(g2)
    if not m1 or not m2:
        raise ConfigError(f"{text!r}: bad pulley group")
    if g3 and not re.fullmatch(r"[PCD]", g3):
        raise ConfigError(f"{text!r}: last group must be one of P/C/D or empty")
    if both and not g3:
        raise ConfigError(f"{text!r}: '=' requires an FDP-TAP group")
    c1 = (m1.group(3), m1.group(2) == "~") if m1.group(3) else None
    c3 = (m2.group(3), m2.group(2) == "~") if m2.group(3) else None
    name = ConfigName(a2=m1.group(1), c1=c1, mid=m2.group(1), c3=c3,
                      tap=g3 or None, both=both)
    if not both and name.tap is None and c3 is not None:
        # FDS-only with a C3: allowed by the grammar, position-checked later
        pass
    return name


def ten_e(finger: FingerModel, j: int) -> float:
    """Ten-percent-of-bone-length offset for phalange j (1..3)."""
    return (finger.l[j - 1] - finger.lf) / 10.0 + finger.lf / 2.0


def position_of(code: str, j: int, e_j: float, finger: FingerModel) -> float:
    """Map a P/C/D code to an x position on phalange j."""
    l = finger.l[j - 1]
    if not 0.0 < e_j < l / 2.0:
        raise ConfigError(f"offset e={e_j} out of range for phalange {j}")
    if code == "P":
        return e_j
    if code == "C":
        return l / 2.0
    if code == "D":
        return l - e_j
    raise ConfigError(f"unknown position code {code!r}")


def _resolve_offsets(finger, overrides):
    mode = overrides.get("e", "e0")
    if mode in ("e0", None):
        return "e0", [DEFAULT_E0] * 3
    if mode in ("10e", "^10e"):
        return "10e", [ten_e(finger, j) for j in (1, 2, 3)]
    try:
        val = float(mode)
    except (TypeError, ValueError):
        raise ConfigError(f"unknown offset mode {mode!r}") from None
    return mode, [val] * 3


def build_configuration(name: str, overrides: dict | None = None,
                        finger: FingerModel | None = None) -> TPSConfiguration:
    """Resolve a configuration string plus parameter overrides into a full
    TPSConfiguration with Table-1 defaults everywhere else."""
    overrides = dict(overrides or {})
    unknown = set(overrides) - KNOWN_OVERRIDES
    if unknown:
        raise ConfigError(f"unknown override keys: {sorted(unknown)}")
    cn = parse_config_name(name)
    finger = finger or FingerModel.default()

    h_a = float(overrides.get("h_a", DEFAULT_H0))
    h_c = float(overrides.get("h_c", DEFAULT_H0))
    w_a = float(overrides.get("w_a", DEFAULT_W0))
    w_c = float(overrides.get("w_c", DEFAULT_W0))
    e_mode, e = _resolve_offsets(finger, overrides)
    e_custom = overrides.get("e_custom") or {}

    if "gamma" in overrides and not cn.both:
        raise ConfigError("gamma override is meaningless for a single-tendon "
                          "configuration")
    gamma = float(overrides.get("gamma", 0.5 if cn.both else
                                (0.0 if "FDP" in cn.tendons else 1.0)))

    def xpos(label, code, j):
        e_j = e_custom.get(label, e[j - 1])
        return position_of(code, j, e_j, finger)

    def a_pulley(label, code, j):
        return PulleySpec(label=label, phalange=j, kind="stiff",
                          x=xpos(label, code, j), h=h_a, w=w_a, D=DEFAULT_T0)

    def c_pulley(label, spec, j):
        pos, flexible = spec
        return PulleySpec(label=label, phalange=j,
                          kind="flexible" if flexible else "stiff",
                          x=xpos(label, pos, j), h=h_c, w=w_c, D=DEFAULT_T0)

    def tap(label, code, j):
        return PulleySpec(label=label, phalange=j, kind="attachment",
                          x=xpos(label, code, j), h=DEFAULT_H0, w=DEFAULT_W0,
                          D=DEFAULT_T0)

    routes = []
    if "FDP" in cn.tendons:
        pts = [a_pulley("A2", cn.a2, 1)]
        if cn.c1:
            pts.append(c_pulley("C1", cn.c1, 1))
        a4 = a_pulley("A4", cn.mid, 2)
        pts.append(a4)
        if cn.c3:
            pts.append(c_pulley("C3", cn.c3, 2))
        pts.append(tap("TAP", cn.tap, 3))
        pts.sort(key=lambda p: (p.phalange, p.x))
        routes.append(TendonRoute("FDP", (ground_pulley(),) + tuple(pts)))
        if cn.both:
            # FDS terminates at the A4 location (shared proximal pulleys)
            shared = [p for p in pts if (p.phalange, p.x) < (a4.phalange, a4.x)]
            fds_tap = PulleySpec(label="FDS-TAP", phalange=2, kind="attachment",
                                 x=a4.x, h=DEFAULT_H0, w=DEFAULT_W0, D=DEFAULT_T0)
            routes.append(TendonRoute(
                "FDS", (ground_pulley(),) + tuple(shared) + (fds_tap,)))
    else:
        pts = [a_pulley("A2", cn.a2, 1)]
        if cn.c1:
            pts.append(c_pulley("C1", cn.c1, 1))
        if cn.c3:
            pts.append(c_pulley("C3", cn.c3, 2))
        pts.append(tap("FDS-TAP", cn.mid, 2))
        pts.sort(key=lambda p: (p.phalange, p.x))
        routes.append(TendonRoute("FDS", (ground_pulley(),) + tuple(pts)))

    t_max = float(overrides.get("t_max", 8.0))
    n_steps = int(overrides.get("steps", 200))
    return TPSConfiguration(finger=finger, routes=tuple(routes), gamma=gamma,
                            name=cn.format(), t_max=t_max, n_steps=n_steps)


def enumerate_grid(a2_codes=("C", "D", "P"), mid_codes=("C", "D", "P"),
                   tap_codes=("C", "D", "P"), tendon="FDP",
                   finger: FingerModel | None = None) -> list[TPSConfiguration]:
    """Cartesian product of pulley/TAP placements, lexicographic in the
    position codes. FDP grids span (A2, A4, TAP); FDS grids span
    (A2, FDS-TAP) and ignore ``tap_codes``."""
    configs = []
    if tendon == "FDP":
        for a2 in sorted(a2_codes):
            for mid in sorted(mid_codes):
                for tp in sorted(tap_codes):
                    configs.append(build_configuration(f"{a2}-{mid}-{tp}",
                                                       finger=finger))
    elif tendon == "FDS":
        for a2 in sorted(a2_codes):
            for mid in sorted(mid_codes):
                configs.append(build_configuration(f"{a2}-{mid}-", finger=finger))
    else:
        raise ConfigError(f"unknown tendon {tendon!r}")
    return configs


# ---------------------------------------------------------------------------
# Published-results harness
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StudyRowSpec:
    """One harness row: a configuration plus its reporting conventions."""

    name: str
    overrides: dict = field(default_factory=dict)
    exclude_mcp: bool = False     # drop MCP from the B_w maximum
    dagger: bool = False          # both tendons, report at 6.4 N each


@dataclass
class StudyRow:
    spec: StudyRowSpec
    rof5: float = 0.0
    rof8: float = 0.0
    bw: float = 0.0
    bw_joint: str = ""
    ps: float = 0.0
    ps_pulley: str = ""
    status: str = "ok"


def _ten(**kw):
    kw.setdefault("e", "10e")
    return kw


# Rows of the published study table, top to bottom. ``exclude_mcp`` follows
# the reporting convention of the figures each row belongs to.
TABLE2_ROWS: tuple[StudyRowSpec, ...] = (
    StudyRowSpec("C~D-C~D=C", _ten(h_c=2.0, w_a=2.0), dagger=True),
    StudyRowSpec("C~D-C~D=D", _ten(h_c=2.0, w_a=2.0), dagger=True),
    StudyRowSpec("C~D-C~D-C", _ten(h_c=2.0), exclude_mcp=True),
    StudyRowSpec("C~D-C~D-C", _ten(h_c=2.0, w_a=2.0)),
    StudyRowSpec("C~D-C~D-D", _ten(h_c=2.0, w_a=2.0)),
    StudyRowSpec("C~D-C~D-C", {"h_c": 4.5}, exclude_mcp=True),
    StudyRowSpec("C-C-C", {"w_a": 8.0}),
    StudyRowSpec("C-C-C", {"w_a": 2.0}),
    StudyRowSpec("C-C-D", {}),
    StudyRowSpec("C-C-C", {}),
    StudyRowSpec("C-C-C", {"w_a": 0.5}),
    StudyRowSpec("C-C-C", {"h_a": 2.0}, exclude_mcp=True),
    StudyRowSpec("C-C-C", {"h_a": 3.5}, exclude_mcp=True),
    StudyRowSpec("C~D-C~D-C", _ten(h_a=2.0, h_c=2.0), exclude_mcp=True),
    StudyRowSpec("C~P-C~D-C", _ten(h_c=2.0)),
    StudyRowSpec("C~D-C~D-C", _ten(w_a=8.0)),
    StudyRowSpec("CD-CD-C", _ten(h_c=2.0), exclude_mcp=True),
    StudyRowSpec("C~D-C~D-C", _ten(h_a=3.5, h_c=2.0), exclude_mcp=True),
    StudyRowSpec("C-D-P", {}),
    StudyRowSpec("C~D-C~D-C", _ten(w_a=2.0)),
    StudyRowSpec("C~D-C~D-C", _ten(w_a=0.5)),
    StudyRowSpec("C-D-C", {}),
    StudyRowSpec("C-C-P", {}),
    StudyRowSpec("C-D-D", {}),
    StudyRowSpec("C~D-C-", _ten(h_c=2.0, w_a=2.0)),
    StudyRowSpec("C-C-", {}),
    StudyRowSpec("C-D-", {}),
    StudyRowSpec("C~D-D-", _ten(h_c=2.0, w_a=2.0)),
)

DAGGER_PER_TENDON = 6.4   # N in each tendon for dagger rows
DAGGER_TS = 2 * DAGGER_PER_TENDON


def evaluate_row(spec: StudyRowSpec, n_steps: int = 200) -> StudyRow:
    row = StudyRow(spec=spec)
    try:
        config = build_configuration(spec.name, spec.overrides)
        if spec.dagger:
            trace = tension_sweep(config, t_max=DAGGER_TS, n_steps=n_steps)
            row.rof5 = trace.rof_at(2 * 5.0)    # 5 N in each tendon
            row.rof8 = trace.rof_at(DAGGER_TS)
        else:
            trace = tension_sweep(config, t_max=8.0, n_steps=n_steps)
            row.rof5 = trace.rof_at(5.0)
            row.rof8 = trace.final.sum_deg
        if trace.terminal == "solver-failure":
            row.status = f"failed: {trace.failure}"
            return row
        step = trace.final
        exclude = ("MCP",) if spec.exclude_mcp else ()
        (row.bw, row.bw_joint), (row.ps, row.ps_pulley) = critical_values(
            step.bows, step.stresses, exclude_joints=exclude)
    except Exception as err:  # per-row failures must not abort the study
        row.status = f"failed: {err}"
    return row


def run_study(rows=TABLE2_ROWS, n_steps: int = 200, workers: int = 1,
              sort: bool = True) -> list[StudyRow]:
    """Evaluate study rows (optionally in parallel) and merge
    deterministically, descending in ROF at the high-tension point."""
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(evaluate_row, rows))
    else:
        out = [evaluate_row(r, n_steps) for r in rows]
    if sort:
        out.sort(key=lambda r: (-round(r.rof8, 6), r.spec.name))
    return out


STUDY_CSV_COLUMNS = ("name", "rof5_deg", "rof8_deg", "bw_mm", "bw_joint",
                     "ps_mpa", "ps_pulley", "e_mode", "h_a", "h_c", "w_a",
                     "w_c", "status")


def write_study_csv(rows: list[StudyRow], path) -> None:
    """Study CSV: angles to 0.1 deg, lengths to 0.01 mm, stress to 0.01 MPa."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(STUDY_CSV_COLUMNS)
        for r in rows:
            o = r.spec.overrides
            writer.writerow([
                r.spec.name,
                f"{r.rof5:.1f}", f"{r.rof8:.1f}",
                f"{r.bw:.2f}", r.bw_joint,
                f"{r.ps:.2f}", r.ps_pulley,
                o.get("e", "e0"),
                f"{float(o.get('h_a', DEFAULT_H0)):.2f}",
                f"{float(o.get('h_c', DEFAULT_H0)):.2f}",
                f"{float(o.get('w_a', DEFAULT_W0)):.2f}",
                f"{float(o.get('w_c', DEFAULT_W0)):.2f}",
                r.status,
            ])


# ---------------------------------------------------------------------------
# Figure presets
# ---------------------------------------------------------------------------

def _curve(cid, name, overrides=None, t_max=8.0, steps=200, legend=""):
    return {"id": cid, "name": name, "overrides": overrides or {},
            "t_max": t_max, "steps": steps, "legend": legend}


def _grid_curves(tendon):
    curves = []
    if tendon == "FDP":
        for a2 in "CDP":
            for a4 in "CDP":
                for tp in "CDP":
                    nm = f"{a2}-{a4}-{tp}"
                    curves.append(_curve(nm.replace("-", "_").lower(), nm,
                                         legend=f"A2={a2} A4={a4} TAP={tp}"))
    else:
        for a2 in "CDP":
            for tp in "CDP":
                nm = f"{a2}-{tp}-"
                curves.append(_curve(f"{a2}_{tp}".lower(), nm,
                                     legend=f"A2={a2} FDS-TAP={tp}"))
    return curves


def _literature_curves():
    finger = FingerModel.default()
    # case (iv): pulley offsets from metaphysis fractions of (l_j - lf)
    frac = (0.21, 0.31, 0.25, 0.21, 0.27)
    labels = ("A2", "C1", "A4", "C3", "TAP")
    e_iv = {}
    for k, (x, label) in enumerate(zip(frac, labels), start=1):
        j = math.ceil(k / 2)
        e_iv[label] = x * (finger.l[j - 1] - finger.lf) + finger.lf / 2.0
    return [
        _curve("case_i", "C-C-C", {"w_a": 4.0}, t_max=10.0, legend="case i, w_a=4"),
        _curve("case_ii", "D-D-C", {"w_a": 2.0}, t_max=10.0, legend="case ii, w_a=2"),
        _curve("case_iii", "PD-PD-C", {"w_a": 2.0}, t_max=10.0,
               legend="case iii, stiff C, e=e0, w_a=2"),
        _curve("case_iv", "PD-PD-P",
               {"w_a": 2.0, "w_c": 2.0, "e_custom": e_iv}, t_max=10.0,
               legend="case iv, metaphysis offsets, w_a=w_c=2"),
        _curve("case_v", "C~D-C~D-C", _ten(h_c=2.0, w_a=2.0), t_max=10.0,
               legend="case v, flexible C, 10% offsets, w_a=2"),
    ]


def figure_preset(preset: str) -> list[dict]:
    """Curve bundles matching the published figures, one sweep per curve."""
    if preset in ("fdp-tension", "fdp-bw", "fdp-ps"):
        return _grid_curves("FDP")
    if preset == "fds-all":
        return _grid_curves("FDS")
    if preset == "c-height":
        curves = [_curve("baseline", "C-C-C", legend="no C-pulleys")]
        for h in (2.0, 4.5):
            curves.append(_curve(f"stiff_h{h}", "CD-CD-C", {"h_c": h},
                                 legend=f"stiff C, h_c={h}"))
        for h in (2.0, 4.5):
            curves.append(_curve(f"flex_h{h}", "C~D-C~D-C", {"h_c": h},
                                 legend=f"flexible C, h_c={h}"))
        return curves
    if preset == "c-location":
        return [
            _curve("flex_e0", "C~D-C~D-C", {"h_c": 2.0}, legend="flexible C, e=e0"),
            _curve("flex_10e", "C~D-C~D-C", _ten(h_c=2.0),
                   legend="flexible C, e=10e"),
            _curve("stiff_e0", "CD-CD-C", {"h_c": 2.0}, legend="stiff C, e=e0"),
            _curve("stiff_10e", "CD-CD-C", _ten(h_c=2.0), legend="stiff C, e=10e"),
        ]
    if preset == "a-width":
        curves = []
        for w in (0.5, 2.0, 8.0):
            curves.append(_curve(f"plain_w{w}", "C-C-C", {"w_a": w},
                                 legend=f"no C-pulleys, w_a={w}"))
        for w in (0.5, 2.0, 8.0):
            curves.append(_curve(f"flex_w{w}", "C~D-C~D-C", _ten(w_a=w),
                                 legend=f"flexible C, w_a={w}"))
        return curves
    if preset == "a-height":
        curves = []
        for h in (0.5, 2.0, 3.5):
            curves.append(_curve(f"plain_h{h}", "C-C-C", {"h_a": h},
                                 legend=f"no C-pulleys, h_a={h}"))
        for h in (0.5, 2.0, 3.5):
            curves.append(_curve(f"flex_h{h}", "C~D-C~D-C", _ten(h_a=h, h_c=2.0),
                                 legend=f"flexible C, h_a={h}"))
        return curves
    if preset == "combined":
        curves = []
        base = _ten(h_c=2.0, w_a=2.0)
        for tp in ("C", "D"):
            curves.append(_curve(f"fdp_{tp.lower()}", f"C~D-C~D-{tp}", dict(base),
                                 t_max=14.0, legend=f"FDP only, TAP={tp}"))
            curves.append(_curve(f"fds_{tp.lower()}", f"C~D-{tp}-", dict(base),
                                 t_max=14.0, legend=f"FDS only, TAP={tp}"))
            curves.append(_curve(f"both_{tp.lower()}", f"C~D-C~D={tp}",
                                 dict(base, gamma=0.5), t_max=14.0,
                                 legend=f"both tendons, gamma=0.5, TAP={tp}"))
        return curves
    if preset == "literature":
        return _literature_curves()
    raise ConfigError(f"unknown figure preset {preset!r}")


FIGURE_PRESETS = ("fdp-tension", "fdp-bw", "fdp-ps", "c-height", "c-location",
                  "a-width", "a-height", "fds-all", "combined", "literature")
