"""Execute a configured scenario and write its artifacts."""

from __future__ import annotations

import logging
import math
import os
from pathlib import Path
from typing import Optional

import numpy as np

from ..conserved import drift_report
from ..diagnostics import validity_window
from ..evolution import EquationParams, NumericalInvalidRun, RunControls, evolve
from ..fields import ComplexField, boost, gaussian, lp_norm, random_smooth_field, with_mass
from ..grid import make_grid, make_radial_grid
from ..ground_state import scaled_profile, solve_ground_state
from ..linear import band_state, near_delta
from .checkpoint import check_geometry, load_checkpoint, save_checkpoint
from .config import SimulationConfig
from .probes import Check, Context, at_most, build_probe, compare
from .report import (CONFIG_FILE, SERIES_FILE, RunReport, emit_report, load_report, make_report, read_series,
                     series_columns, series_rows, write_series)

log = logging.getLogger(__name__)

OUTPUT_ROOT_ENV = "MC4NLS_OUTPUT_ROOT"
INITIAL_CHECKPOINT = "initial.ckpt"
FINAL_CHECKPOINT = "final.ckpt"


def output_root(root=None) -> Path:
    if root is not None:
        return Path(root)
    return Path(os.environ.get(OUTPUT_ROOT_ENV, "runs"))


def build_geometry(config: SimulationConfig):
    g = config.geometry
    if g["kind"] == "radial":
        return make_radial_grid(config.n, g["points"], g["extent"], g["order"])
    return make_grid(config.n, g["points"], g["extent"])


def _resolve(path: str, root: Path) -> Path:
    p = Path(path)
    if p.is_absolute() or p.exists():
        return p
    return root / p


def build_initial(config: SimulationConfig, geometry, root: Path, ground_state=None) -> ComplexField:
    ic = config.initial_condition
    kind = ic["kind"]
    if kind in ("gaussian", "boosted_gaussian"):
        f = gaussian(geometry, ic["width"], ic["amplitude"], ic["center"])
    elif kind == "ground_state_scaled":
        f = scaled_profile(ground_state, ic["mass_multiple"])
    elif kind == "pure_mode":
        k = np.asarray(ic["mode"], dtype=float) * geometry.dk
        phase = sum(kj * x for kj, x in zip(k, geometry.coordinates()))
        f = ComplexField(geometry, ic["amplitude"] * np.exp(1j * phase), 0.0)
    elif kind == "near_delta":
        f = near_delta(geometry, ic["K"])
    elif kind == "band":
        f = band_state(geometry, ic["N"])
    elif kind == "random_smooth":
        f = random_smooth_field(geometry, np.random.default_rng(ic["seed"]), ic["bandwidth"], ic["window"])
    elif kind == "from_checkpoint":
        ck = load_checkpoint(_resolve(ic["path"], root))
        g = config.geometry
        check_geometry(ck, g["kind"], config.n, g["points"], g["extent"], g["order"])
        return ck.field
    else:  # pragma: no cover - the config validator rejects this
        raise ValueError(kind)
    if ic.get("mass") is not None:
        f = with_mass(f, ic["mass"])
    if ic.get("boost"):
        f = boost(f, ic["boost"], ic["direction"])
    return f


def needs_ground_state(config: SimulationConfig) -> bool:
    return config.initial_condition["kind"] == "ground_state_scaled"


def run_controls(config: SimulationConfig, initial: ComplexField) -> RunControls:
    tm = config.time
    return RunControls(
        t_end=tm["t_end"], dt_max=tm["dt_max"], dt_min=tm["dt_min"], snapshot_every=tm["snapshot_every"],
        adaptive=tm["adaptive"], c_phase=tm["c_phase"], c_curv=tm["c_curv"],
        sup_threshold=tm["sup_threshold_factor"] * lp_norm(initial, math.inf),
        mass_abort=tm["mass_abort"], dealias=tm["dealias"],
    )


def _drift(record) -> tuple[dict, dict]:
    cs = record.conserved_series
    s0 = cs[0]
    n_est = (2.0 * s0.kinetic) ** 0.25 / s0.mass**0.25 if s0.mass > 0 else 0.0
    scales = {"mass": abs(s0.mass), "energy": max(abs(s0.energy), s0.kinetic),
              "momentum": max(float(np.linalg.norm(s0.momentum)), s0.mass * n_est)}
    if len(cs) < 2:
        return {"mass": 0.0, "energy": 0.0, "momentum": 0.0}, scales
    return drift_report(record), scales


def run_checks(config: SimulationConfig, record, drift: dict) -> list:
    c = config.checks
    out = []
    for key in ("mass", "momentum", "energy"):
        lim = c.get(f"{key}_drift")
        if lim is not None:
            out.append(at_most(f"{key}_drift", drift[key], lim))
    if c.get("expect_outcome"):
        ok = record.outcome in c["expect_outcome"]
        out.append(Check("outcome", ok, None, " | ".join(c["expect_outcome"]), f"got {record.outcome}"))
    if c.get("forbid_blowup"):
        trig = [e[0] for e in record.events if e[0].startswith("blowup")]
        out.append(Check("no_blowup_trigger", not trig, None, "no trigger", ", ".join(trig) or "none fired"))
    if c.get("max_h2_ratio") is not None:
        h2 = record.column("h2_seminorm")
        ratio = float(h2.max() / h2[0]) if h2[0] > 0 else math.inf
        out.append(at_most("h2_bounded", ratio, c["max_h2_ratio"], "max ||Delta u|| / initial"))
    return out


def _prefixed(probe, checks: list) -> list:
    if probe.name == probe.kind:
        return checks
    return [Check(f"{probe.name}.{c.name}", c.passed, c.value, c.threshold, c.detail, c.op, c.limit)
            for c in checks]


def run_scenario(config: SimulationConfig, root=None, write: bool = True, name: Optional[str] = None) -> RunReport:
    """Run the scenario and, if ``write``, store artifacts under ``root / output.directory``.

    Artifacts: ``report.json``, ``series.csv``, ``config.ini`` and the
    initial and final checkpoints.  A mass-drift abort writes what was
    computed and re-raises :class:`NumericalInvalidRun`.
    """
    root = output_root(root)
    outdir = root / config.output["directory"]
    formats = config.output["formats"]
    name = name or config.output["directory"]
    params = EquationParams(config.n, config.equation["lambda"])
    geometry = build_geometry(config)
    Q = solve_ground_state(config.n, geometry) if needs_ground_state(config) else None
    initial = build_initial(config, geometry, root, Q)
    ctx = Context(config, params, geometry, initial, Q)
    probes = [build_probe(p) for p in config.probes]
    columns_fn = {}
    for pr in probes:
        fn = pr.column(ctx)
        if fn is not None:
            columns_fn[pr.name] = fn
    columns = series_columns(config.n, list(columns_fn))
    controls = run_controls(config, initial)
    log.info("running %s: n=%d lambda=%d t_end=%g", name, params.n, params.lam, controls.t_end)

    if write:
        outdir.mkdir(parents=True, exist_ok=True)
        (outdir / CONFIG_FILE).write_text(config.to_ini())
        if "checkpoint" in formats:
            save_checkpoint(initial, outdir / INITIAL_CHECKPOINT)
    try:
        record = evolve(initial, params, controls, columns_fn)
    except NumericalInvalidRun as exc:
        if write and "csv" in formats:
            write_series(outdir / SERIES_FILE, columns, series_rows(exc.record, columns))
        raise
    ctx.record = record

    drift, scales = _drift(record)
    checks = run_checks(config, record, drift)
    results, caveats = {}, []
    t0, tw = validity_window(record)
    t_last = record.final.time_tag
    if t_last > tw * (1 + 1e-9):
        caveats.append(f"run extends to t={t_last:.6g}, past the wraparound validity window t <= {tw:.6g}")
    for pr in probes:
        res, chk = pr.evaluate(ctx)
        w = pr.window(ctx)
        if w is not None:
            res["outside_validity_window"] = bool(w[1] > tw * (1 + 1e-9))
            if res["outside_validity_window"]:
                caveats.append(f"probe {pr.name} reads t up to {w[1]:.6g}, past the validity window t <= {tw:.6g}")
        results[pr.name] = res
        checks.extend(_prefixed(pr, chk))

    report = make_report(name, config, record, results, checks, caveats, (t0, tw), columns, drift, scales)
    if write:
        arts = [CONFIG_FILE]
        if "checkpoint" in formats:
            save_checkpoint(record.final, outdir / FINAL_CHECKPOINT, record.diagnostic_series[-1]["dt"])
            arts += [INITIAL_CHECKPOINT, FINAL_CHECKPOINT]
        if "csv" in formats:
            arts.append(SERIES_FILE)
        if "json" in formats:
            arts.append("report.json")
        report.artifacts = sorted(arts)
        emit_report(report, outdir, formats, series_rows(record, columns))
    return report


# ---------------------------------------------------------------------------
# verify


def verify_run(run_dir) -> list:
    """Re-derive the verdicts of a stored run from its artifacts.

    Returns ``(name, passed, detail)`` tuples.  Conserved-quantity drifts are
    recomputed from the CSV with the stored scales, threshold checks are
    re-applied to stored probe values, and the final checkpoint must agree
    with the last CSV row.  Verdicts without a plain threshold are taken
    as stored.
    """
    run_dir = Path(run_dir)
    rep = load_report(run_dir)
    out = []
    csv_path = run_dir / SERIES_FILE
    recomputed = {}
    if csv_path.exists():
        header, data = read_series(csv_path)
        out.append(("csv_columns", header == rep.columns, f"{len(header)} columns"))
        col = {h: data[:, i] for i, h in enumerate(header)}
        sc = rep.drift_scales
        if data.shape[0] >= 2:
            recomputed["mass"] = float(np.max(np.abs(col["mass"] - col["mass"][0])) / sc["mass"]) if sc["mass"] else 0.0
            recomputed["energy"] = (float(np.max(np.abs(col["energy"] - col["energy"][0])) / sc["energy"])
                                    if sc["energy"] else 0.0)
            moms = np.stack([v for k, v in col.items() if k.startswith("mom_")], axis=1)
            recomputed["momentum"] = (float(np.max(np.linalg.norm(moms - moms[0], axis=1)) / sc["momentum"])
                                      if sc["momentum"] else 0.0)
            for k, v in recomputed.items():
                stored = rep.drift[k]
                ok = abs(v - stored) <= 1e-9 * max(abs(stored), 1e-300) or v == stored
                out.append((f"drift_{k}_matches_csv", ok, f"csv {v:.6e} vs report {stored:.6e}"))
        ck = run_dir / FINAL_CHECKPOINT
        if ck.exists():
            from ..conserved import mass

            f = load_checkpoint(ck).field
            m = mass(f)
            ok = abs(m - col["mass"][-1]) <= 1e-12 * max(m, 1e-300) and f.time_tag == col["t"][-1]
            out.append(("final_checkpoint_matches_csv", ok, f"mass {m:.15g} at t={f.time_tag:.15g}"))
    for c in rep.checks:
        name = c["name"]
        value = c["value"]
        base = name.rsplit(".", 1)[-1]
        if base.endswith("_drift") and base[:-6] in recomputed:
            value = recomputed[base[:-6]]
        if c["op"] is not None:
            v = None if isinstance(value, str) or value is None else float(value)
            passed = compare(v, c["op"], c["limit"])
            if passed != c["passed"]:
                out.append((f"{name}_verdict_consistent", False, "stored verdict disagrees with stored value"))
        else:
            passed = c["passed"]
        out.append((name, passed, c["threshold"]))
    return out
