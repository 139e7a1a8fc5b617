"""Scenario configuration: INI files with one section per concern.

Schema (``key = value``; lists are comma separated)::

    [equation]          n, lambda (-1, 0 or 1)
    [geometry]          kind (full | radial), points, extent, order (radial: 4 | 2)
    [initial_condition] kind plus kind-specific keys, see IC_KEYS
    [time]              t_end, dt_max, dt_min, snapshot_every, adaptive,
                        c_phase, c_curv, sup_threshold_factor, dealias
    [probe <name>]      kind (defaults to <name>) plus kind-specific keys
    [checks]            run-level acceptance checks, see CHECK_KEYS
    [output]            directory, formats (json, csv, checkpoint)

``extent`` is the half width L of the periodic box ``[-L, L)^n`` for full
grids and ``r_max`` for radial ones.  Every value is validated before a run
starts; errors name the file, line, section and key.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional


class ConfigError(ValueError):
    def __init__(self, message: str, section: str = "", key: str = "", source: str = "<config>",
                 line: Optional[int] = None):
        where = source
        if line is not None:
            where += f":{line}"
        if section:
            where += f" [{section}]"
        if key:
            where += f" {key}"
        super().__init__(f"{where}: {message}")
        self.section = section
        self.key = key
        self.line = line


# ---------------------------------------------------------------------------
# value parsers


def _float(s: str) -> float:
    v = float(s)
    if math.isnan(v):
        raise ValueError("NaN is not allowed")
    return v


def _pos(s: str) -> float:
    v = _float(s)
    if not v > 0:
        raise ValueError(f"must be positive, got {v}")
    return v


def _nonneg(s: str) -> float:
    v = _float(s)
    if not v >= 0:
        raise ValueError(f"must be nonnegative, got {v}")
    return v


def _int(s: str) -> int:
    f = float(s)
    if f != int(f):
        raise ValueError(f"expected an integer, got {s!r}")
    return int(f)


def _posint(s: str) -> int:
    v = _int(s)
    if v < 1:
        raise ValueError(f"must be a positive integer, got {v}")
    return v


def _bool(s: str) -> bool:
    t = s.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {s!r}")


def _floats(s: str) -> tuple:
    return tuple(_float(p) for p in s.split(",") if p.strip())


def _ints(s: str) -> tuple:
    return tuple(_int(p) for p in s.split(",") if p.strip())


def _words(s: str) -> tuple:
    return tuple(p.strip() for p in s.split(",") if p.strip())


def _choice(*options):
    def parse(s: str) -> str:
        t = s.strip()
        if t not in options:
            raise ValueError(f"expected one of {', '.join(options)}; got {t!r}")
        return t
    return parse


REQUIRED = object()

# one complex array at this size is 256 MiB; a run holds several plus snapshots
MAX_GRID_POINTS = 2**24

Schema = dict  # key -> (parser, default)

EQUATION_KEYS: Schema = {"n": (_posint, REQUIRED), "lambda": (_float, REQUIRED)}
GEOMETRY_KEYS: Schema = {
    "kind": (_choice("full", "radial"), "full"),
    "points": (_posint, REQUIRED),
    "extent": (_pos, REQUIRED),
    "order": (_int, 4),
}
TIME_KEYS: Schema = {
    "t_end": (_nonneg, REQUIRED),
    "dt_max": (_pos, 1e-3),
    "dt_min": (_pos, 1e-12),
    "snapshot_every": (_posint, 10),
    "adaptive": (_bool, False),
    "c_phase": (_pos, 0.05),
    "c_curv": (_pos, 0.5),
    "sup_threshold_factor": (_pos, 100.0),
    "dealias": (_bool, True),
    "mass_abort": (_pos, 1e-6),
}
OUTPUT_KEYS: Schema = {"directory": (str, REQUIRED), "formats": (_words, ("json", "csv", "checkpoint"))}
FORMATS = ("json", "csv", "checkpoint")

_BOOST = {"boost": (_float, 0.0), "direction": (_floats, None), "mass": (_pos, None)}
IC_KEYS: dict[str, Schema] = {
    "gaussian": {"width": (_pos, 1.0), "amplitude": (_pos, 1.0), "center": (_floats, None), **_BOOST},
    "boosted_gaussian": {"width": (_pos, 1.0), "amplitude": (_pos, 1.0), "center": (_floats, None),
                         **_BOOST, "boost": (_float, REQUIRED)},
    "ground_state_scaled": {"mass_multiple": (_nonneg, 1.0), **_BOOST},
    "pure_mode": {"mode": (_ints, REQUIRED), "amplitude": (_pos, 1.0)},
    "near_delta": {"K": (_pos, 1.0)},
    "band": {"N": (_pos, REQUIRED)},
    "random_smooth": {"seed": (_int, 0), "bandwidth": (_pos, 2.0), "window": (_pos, None), **_BOOST},
    "from_checkpoint": {"path": (str, REQUIRED)},
}

PROBE_KEYS: dict[str, Schema] = {
    "decay": {"t_start": (_pos, REQUIRED), "t_stop": (_pos, REQUIRED), "samples": (_posint, 24),
              "slope_tol": (_pos, 0.05)},
    "band_decay": {"t_start": (_pos, REQUIRED), "t_stop": (_pos, REQUIRED), "samples": (_posint, 16),
                   "slope_tol": (_pos, 0.1)},
    "refined_strichartz": {"T": (_pos, REQUIRED), "h": (_pos, 2.0), "n_times": (_posint, 65),
                           "rescale_tol": (_pos, 1e-2), "refine_tol": (_pos, 0.25)},
    "scattering": {"eps": (_pos, 1e-3), "expect": (_choice("fire", "no_fire", "any"), "any")},
    "standing_wave": {"tol": (_pos, 1e-6)},
    "duhamel": {"t0": (_nonneg, REQUIRED), "t1": (_pos, REQUIRED),
                "method": (_choice("filon", "simpson"), "filon"), "tol": (_pos, 1e-4)},
    "z_norm": {"fit_from": (_nonneg, None), "fit_to": (_pos, None), "min_r2": (_pos, 0.9999),
               "window": (_pos, None)},
    "blowup_fit": {"beta": (_float, 0.25), "beta_tol": (_pos, 0.1), "min_r2": (_pos, 0.98),
                   "min_decades": (_pos, 1.0)},
    "virial": {"R": (_pos, REQUIRED), "direction": (_floats, None), "max_defect": (_pos, 2e-2),
               "normalization": (_choice("rhs", "terms"), "rhs"), "compare_half": (_bool, True),
               "noise": (_nonneg, 0.1)},
    "mass_moment": {"R": (_pos, REQUIRED), "direction": (_floats, None), "max_defect": (_pos, 2e-2)},
    "symmetry": {"h": (_pos, 2.0), "mass_tol": (_pos, 1e-8), "covariance_tol": (_pos, 1e-4),
                 "z_tol": (_pos, 1e-4)},
    "groundstate_table": {"full_dims": (_ints, (1,)), "full_points": (_ints, (1024, 2048)),
                          "full_extent": (_pos, 20.0), "radial_dims": (_ints, (5,)),
                          "radial_points": (_ints, (512, 1024)), "radial_extent": (_pos, 30.0),
                          "residual_tol": (_pos, 1e-8), "pohozaev_tol": (_pos, 1e-6),
                          "refine_tol": (_pos, 1e-4), "gn_tol": (_pos, 1e-3)},
}

# probes that only make sense on full periodic grids
FULL_ONLY = {"decay", "band_decay", "refined_strichartz", "virial", "mass_moment", "symmetry"}

CHECK_KEYS: Schema = {
    "mass_drift": (_pos, None),
    "momentum_drift": (_pos, None),
    "energy_drift": (_pos, None),
    "expect_outcome": (_words, None),
    "forbid_blowup": (_bool, False),
    "max_h2_ratio": (_pos, None),
}


# ---------------------------------------------------------------------------
# config objects


@dataclass(frozen=True)
class ProbeSpec:
    name: str
    kind: str
    params: dict


@dataclass(frozen=True)
class SimulationConfig:
    equation: dict
    geometry: dict
    initial_condition: dict
    time: dict
    probes: tuple = ()
    checks: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)
    source: str = "<config>"

    @property
    def n(self) -> int:
        return self.equation["n"]

    def probe(self, name: str) -> ProbeSpec:
        for p in self.probes:
            if p.name == name:
                return p
        raise KeyError(name)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("source")
        return d

    def to_ini(self) -> str:
        """Canonical INI text; parsing it gives back an equal config."""
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        for sec in ("equation", "geometry", "initial_condition", "time"):
            cp[sec] = _render(getattr(self, sec))
        for p in self.probes:
            cp[f"probe {p.name}"] = _render({"kind": p.kind, **p.params})
        if self.checks:
            cp["checks"] = _render(self.checks)
        cp["output"] = _render(self.output)
        lines = []
        for sec in cp.sections():
            lines.append(f"[{sec}]")
            lines.extend(f"{k} = {v}" for k, v in cp[sec].items())
            lines.append("")
        return "\n".join(lines)


def _render(d: dict) -> dict:
    out = {}
    for k, v in d.items():
        if v is None:
            continue
        if isinstance(v, bool):
            out[k] = "true" if v else "false"
        elif isinstance(v, (tuple, list)):
            out[k] = ", ".join(repr(x) if isinstance(x, float) else str(x) for x in v)
        elif isinstance(v, float):
            out[k] = repr(v)
        else:
            out[k] = str(v)
    return out


# ---------------------------------------------------------------------------
# parsing


def _line_index(text: str) -> dict:
    """(section, key) -> line number, for error messages."""
    idx, sec = {}, None
    for i, raw in enumerate(text.splitlines(), 1):
        s = raw.strip()
        if not s or s[0] in "#;":
            continue
        if s.startswith("[") and s.endswith("]"):
            sec = s[1:-1].strip()
            idx[(sec, None)] = i
        elif sec is not None and ("=" in s or ":" in s):
            key = s.split("=", 1)[0].split(":", 1)[0].strip()
            idx[(sec, key)] = i
    return idx


class _Reader:
    def __init__(self, source: str, lines: dict):
        self.source = source
        self.lines = lines

    def error(self, message: str, section: str = "", key: str = "") -> ConfigError:
        line = self.lines.get((section, key if key else None))
        if line is None and section:
            line = self.lines.get((section, None))
        return ConfigError(message, section, key, self.source, line)

    def parse(self, section: str, raw: dict, schema: Schema, skip=()) -> dict:
        unknown = sorted(set(raw) - set(schema) - set(skip))
        if unknown:
            raise self.error(f"unknown key (allowed: {', '.join(sorted(schema))})", section, unknown[0])
        out = {}
        for key, (parser, default) in schema.items():
            if key in raw:
                try:
                    out[key] = parser(raw[key])
                except (ValueError, TypeError) as exc:
                    raise self.error(str(exc), section, key) from None
            elif default is REQUIRED:
                raise self.error("required key is missing", section, key)
            else:
                out[key] = default
        return out


def parse_config(text: str, source: str = "<config>") -> SimulationConfig:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    rd = _Reader(source, _line_index(text))
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"malformed INI: {exc}", source=source) from None
    sections = {s: dict(cp[s]) for s in cp.sections()}
    return _build(sections, rd)


def load_config(path) -> SimulationConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", source=str(path)) from None
    return parse_config(text, str(path))


def config_from_sections(sections: dict, source: str = "<config>") -> SimulationConfig:
    """Build from ``{section: {key: str}}`` (as produced by presets)."""
    text = "\n".join(f"[{s}]\n" + "\n".join(f"{k} = {v}" for k, v in kv.items()) for s, kv in sections.items())
    return parse_config(text, source)


def apply_overrides(config: SimulationConfig, overrides) -> SimulationConfig:
    """Apply ``section.key=value`` overrides (probe sections: ``probe <name>.key=value``)."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    cp.read_string(config.to_ini())
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override {item!r} is not of the form section.key=value", source="<overrides>")
        lhs, value = item.split("=", 1)
        section, key = lhs.rsplit(".", 1)
        section, key = section.strip(), key.strip()
        if not cp.has_section(section):
            cp.add_section(section)
        cp[section][key] = value.strip()
    text = "\n".join(f"[{s}]\n" + "\n".join(f"{k} = {v}" for k, v in cp[s].items()) for s in cp.sections())
    return parse_config(text, config.source + " + overrides")


def _build(sections: dict, rd: _Reader) -> SimulationConfig:
    known = {"equation", "geometry", "initial_condition", "time", "checks", "output"}
    for s in sections:
        if s not in known and not s.startswith("probe "):
            raise rd.error("unknown section (expected equation, geometry, initial_condition, time, "
                           "probe <name>, checks, output)", s)
    for s in ("equation", "geometry", "initial_condition", "time", "output"):
        if s not in sections:
            raise rd.error(f"missing section [{s}]")

    eq = rd.parse("equation", sections["equation"], EQUATION_KEYS)
    if eq["lambda"] not in (-1.0, 0.0, 1.0):
        raise rd.error(f"must be -1, 0 or 1, got {eq['lambda']:g}", "equation", "lambda")
    eq["lambda"] = int(eq["lambda"])
    n = eq["n"]

    geo = rd.parse("geometry", sections["geometry"], GEOMETRY_KEYS)
    P = geo["points"]
    if geo["kind"] == "full":
        if n not in (1, 2, 3):
            raise rd.error(f"full periodic grids support n in {{1, 2, 3}}, got n={n}", "equation", "n")
        if P < 16 or P & (P - 1):
            raise rd.error(f"points per axis must be a power of two >= 16, got {P}", "geometry", "points")
        if P**n > MAX_GRID_POINTS:
            raise rd.error(f"{P}^{n} grid points exceed the limit of {MAX_GRID_POINTS} (2^24)", "geometry", "points")
    else:
        if n < 2:
            raise rd.error("radial geometry needs n >= 2", "equation", "n")
        if not 8 <= P <= 4096:
            raise rd.error(f"radial node count must be in [8, 4096], got {P}", "geometry", "points")
    if geo["order"] not in (2, 4):
        raise rd.error(f"radial discretization order must be 2 or 4, got {geo['order']}", "geometry", "order")

    ic_raw = sections["initial_condition"]
    kind = ic_raw.get("kind")
    if kind is None:
        raise rd.error("required key is missing", "initial_condition", "kind")
    if kind not in IC_KEYS:
        raise rd.error(f"unknown initial condition (allowed: {', '.join(IC_KEYS)})", "initial_condition", "kind")
    ic = {"kind": kind, **rd.parse("initial_condition", ic_raw, IC_KEYS[kind], skip=("kind",))}
    radial = geo["kind"] == "radial"
    if radial and kind not in ("gaussian", "ground_state_scaled", "from_checkpoint"):
        raise rd.error(f"{kind!r} is not available on radial grids", "initial_condition", "kind")
    if radial and ic.get("boost"):
        raise rd.error("boosts need a full grid", "initial_condition", "boost")
    for key in ("direction", "center", "mode"):
        v = ic.get(key)
        if v is not None and len(v) != n:
            raise rd.error(f"needs {n} components, got {len(v)}", "initial_condition", key)
    if ic.get("direction") is not None and not any(ic["direction"]):
        raise rd.error("direction must be nonzero", "initial_condition", "direction")

    tm = rd.parse("time", sections["time"], TIME_KEYS)
    if tm["dt_min"] > tm["dt_max"]:
        raise rd.error("dt_min exceeds dt_max", "time", "dt_min")

    probes = []
    for s, raw in sections.items():
        if not s.startswith("probe "):
            continue
        name = s[len("probe "):].strip()
        if not name or not name.replace("_", "").isalnum():
            raise rd.error("probe names must be alphanumeric (underscores allowed)", s)
        pkind = raw.get("kind", name)
        if pkind not in PROBE_KEYS:
            raise rd.error(f"unknown probe kind (allowed: {', '.join(PROBE_KEYS)})", s, "kind")
        params = rd.parse(s, raw, PROBE_KEYS[pkind], skip=("kind",))
        if radial and pkind in FULL_ONLY:
            raise rd.error(f"probe kind {pkind!r} needs a full grid", s, "kind")
        if params.get("direction") is not None and len(params["direction"]) != n:
            raise rd.error(f"needs {n} components", s, "direction")
        for lo, hi in (("t_start", "t_stop"), ("t0", "t1"), ("fit_from", "fit_to")):
            if params.get(lo) is not None and params.get(hi) is not None and params[lo] >= params[hi]:
                raise rd.error(f"{lo} must be below {hi}", s, lo)
        if pkind == "standing_wave" and (ic["kind"] != "ground_state_scaled" or eq["lambda"] != -1
                                         or ic["mass_multiple"] != 1.0 or ic["boost"] or ic["mass"]):
            raise rd.error("standing_wave compares against exp(-it) Q and needs focusing data "
                           "u0 = Q (ground_state_scaled, mass_multiple 1, no boost)", s, "kind")
        if pkind == "band_decay" and ic["kind"] != "band":
            raise rd.error("band_decay needs a band initial condition", s, "kind")
        if pkind == "refined_strichartz" and n not in (1, 2):
            raise rd.error("refined_strichartz supports n in {1, 2}", s, "kind")
        probes.append(ProbeSpec(name, pkind, params))

    checks = rd.parse("checks", sections.get("checks", {}), CHECK_KEYS)
    if checks["expect_outcome"] is not None:
        from ..evolution import OUTCOMES

        for o in checks["expect_outcome"]:
            if o not in OUTCOMES:
                raise rd.error(f"unknown outcome {o!r} (allowed: {', '.join(OUTCOMES)})", "checks", "expect_outcome")
    out = rd.parse("output", sections["output"], OUTPUT_KEYS)
    for f in out["formats"]:
        if f not in FORMATS:
            raise rd.error(f"unknown format {f!r} (allowed: {', '.join(FORMATS)})", "output", "formats")
    d = out["directory"]
    if not d or Path(d).is_absolute() or ".." in Path(d).parts:
        raise rd.error("directory must be a relative path inside the output root", "output", "directory")

    return SimulationConfig(eq, geo, ic, tm, tuple(probes), checks, out, rd.source)
