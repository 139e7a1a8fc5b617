"""Probes a scenario can register.

A probe may contribute one per-snapshot column to the CSV time series and
always contributes a summary (``evaluate``) plus acceptance checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ..conserved import mass
from ..diagnostics import (CUTOFF_MOMENT_CONSTANT, VirialProbe, fit_blowup_rate, mass_moment,
                           mass_moment_rate_check, scattering_probe, tau_rescale, validity_window,
                           virial_action, virial_rate_check, z_norm_accumulate)
from ..evolution import RunControls, duhamel_residual, evolve
from ..fields import ComplexField, lp_power, rescale_g
from ..grid import make_grid
from ..ground_state import GroundState, solve_ground_state
from ..linear import band_decay_probe, decay_probe, propagate_linear, strichartz_terms


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    value: Optional[float]
    threshold: str
    detail: str = ""
    # comparison re-applied by ``verify``; None for verdicts that are not a
    # plain threshold on ``value``
    op: Optional[str] = None
    limit: Optional[float] = None

    def as_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "value": self.value, "threshold": self.threshold,
                "detail": self.detail, "op": self.op, "limit": self.limit}

    @classmethod
    def from_dict(cls, d: dict) -> "Check":
        return cls(**d)


def compare(value, op: str, limit: float) -> bool:
    if value is None or not math.isfinite(value):
        return False
    return value <= limit if op == "<=" else value >= limit


def at_most(name: str, value, limit: float, detail: str = "") -> Check:
    v = None if value is None else float(value)
    return Check(name, compare(v, "<=", limit), v, f"<= {limit:g}", detail, "<=", float(limit))


def at_least(name: str, value, limit: float, detail: str = "") -> Check:
    v = None if value is None else float(value)
    return Check(name, compare(v, ">=", limit), v, f">= {limit:g}", detail, ">=", float(limit))


@dataclass
class Context:
    """What a probe may look at: the config, the initial data and the run."""

    config: object
    params: object
    geometry: object
    initial: ComplexField
    ground_state: Optional[GroundState] = None
    record: object = None


class Probe:
    kind = ""
    column_name: Optional[str] = None

    def __init__(self, name: str, params: dict):
        self.name = name
        self.p = params

    def column(self, ctx: Context) -> Optional[Callable[[ComplexField], float]]:
        return None

    def window(self, ctx: Context) -> Optional[tuple]:
        """Time interval the probe reads, for the validity-window caveat."""
        return None

    def evaluate(self, ctx: Context) -> tuple[dict, list]:
        raise NotImplementedError


def _log_times(a: float, b: float, k: int) -> np.ndarray:
    return np.geomspace(a, b, k)


class DecayProbe(Probe):
    kind = "decay"
    exponent = 0.25  # sup |u(t)| ~ t^{-n/4}
    slope_name = "decay_slope"

    def column(self, ctx):
        e = self.exponent * ctx.params.n

        def compensated(f):
            return (f.time_tag ** e if f.time_tag > 0 else math.nan) * np.abs(f.values).max()
        return compensated

    def window(self, ctx):
        return (self.p["t_start"], self.p["t_stop"])

    def _fit(self, ctx, times):
        return decay_probe(ctx.initial, times)

    def evaluate(self, ctx):
        times = _log_times(self.p["t_start"], self.p["t_stop"], self.p["samples"])
        fit = self._fit(ctx, times)
        target = -self.exponent * ctx.params.n
        res = {"slope": fit.fitted_slope, "target": target, "r2": fit.r2, "valid": fit.valid,
               "prefactor": fit.prefactor, "window": list(fit.window),
               "max_boundary_mass": fit.max_boundary_mass}
        err = abs(fit.fitted_slope - target)
        chk = at_most(self.slope_name, err, self.p["slope_tol"], f"slope {fit.fitted_slope:.4f} vs {target:g}")
        if not fit.valid:
            chk = Check(chk.name, False, chk.value, chk.threshold, chk.detail + "; fit flagged invalid")
        return res, [chk]


class BandDecayProbe(DecayProbe):
    kind = "band_decay"
    exponent = 0.5
    slope_name = "band_decay_slope"

    def _fit(self, ctx, times):
        return band_decay_probe(ctx.geometry, ctx.config.initial_condition["N"], times)


class RefinedStrichartzProbe(Probe):
    kind = "refined_strichartz"

    def window(self, ctx):
        return (0.0, self.p["T"])

    def evaluate(self, ctx):
        T, h = self.p["T"], self.p["h"]
        f = ctx.initial.replace(ctx.initial.values, 0.0)
        base = strichartz_terms(f, T, self.p["n_times"])
        scaled = strichartz_terms(rescale_g(f, h), T / h**4, self.p["n_times"])
        g = ctx.geometry
        P, n = g.points_per_axis, g.dim
        # dx halved: same box, twice the points, by spectral interpolation
        g2 = make_grid(n, 2 * P, g.half_width)
        c = np.fft.fftshift(np.fft.fftn(f.values))
        v2 = np.fft.ifftn(np.fft.ifftshift(np.pad(c, [(P // 2, P // 2)] * n))) * 2**n
        fine = strichartz_terms(ComplexField(g2, v2, 0.0), T, self.p["n_times"])
        # dk halved: same samples in a box twice as wide, padded with zeros at
        # the edges (x = 0 sits at index P/2 of both grids)
        g3 = make_grid(n, 2 * P, 2 * g.half_width)
        v3 = np.pad(f.values, [(P // 2, P // 2)] * n)
        wide = strichartz_terms(ComplexField(g3, v3, 0.0), T, self.p["n_times"])
        r = base.ratio
        rescale_dev = abs(scaled.ratio / r - 1.0)
        refine_dev = abs(fine.ratio / r - 1.0)
        box_dev = abs(wide.ratio / r - 1.0)
        res = {"ratio": r, "band_level": base.band_level, "z_norm": base.z_norm, "l2_norm": base.l2_norm,
               "band_sup": base.band_sup, "rescaled_ratio": scaled.ratio, "refined_ratio": fine.ratio,
               "wide_box_ratio": wide.ratio, "rescale_deviation": rescale_dev, "refine_deviation": refine_dev,
               "box_deviation": box_dev}
        checks = [Check("strichartz_ratio_finite", bool(math.isfinite(r) and r > 0), r, "finite, > 0"),
                  at_most("strichartz_rescale_invariance", rescale_dev, self.p["rescale_tol"]),
                  at_most("strichartz_refinement_stability", refine_dev, self.p["refine_tol"], "dx halved"),
                  at_most("strichartz_box_stability", box_dev, self.p["refine_tol"], "dk halved")]
        return res, checks


class ScatteringProbe(Probe):
    kind = "scattering"

    def column(self, ctx):
        u0 = ctx.initial
        t0 = 0.0 if u0.time_tag is None else u0.time_tag
        w0 = propagate_linear(u0, -t0)
        norm0 = math.sqrt(lp_power(u0, 2)) or 1.0

        def profile_drift(f):
            w = propagate_linear(f, -f.time_tag)
            return math.sqrt(lp_power(w.replace(w.values - w0.values), 2)) / norm0
        return profile_drift

    def evaluate(self, ctx):
        expect = self.p["expect"]
        try:
            rep = scattering_probe(ctx.record, self.p["eps"])
        except ValueError as exc:
            res = {"fired": False, "cauchy_defect": None, "caveat": str(exc)}
            ok = expect != "fire"
            return res, [Check("scattering_" + expect, ok, None, expect, str(exc))]
        res = {"fired": rep.fired, "cauchy_defect": rep.cauchy_defect, "eps": rep.eps,
               "window": list(rep.window), "caveat": rep.caveat}
        ok = {"fire": rep.fired, "no_fire": not rep.fired, "any": True}[expect]
        return res, [Check("scattering_" + expect, bool(ok), rep.cauchy_defect, f"eps={rep.eps:g}",
                           "fired" if rep.fired else "did not fire")]


class StandingWaveProbe(Probe):
    kind = "standing_wave"

    def _error(self, ctx, f):
        Q = ctx.initial
        ref = np.exp(-1j * f.time_tag) * Q.values
        return math.sqrt(lp_power(f.replace(f.values - ref), 2) / lp_power(Q, 2))

    def column(self, ctx):
        return lambda f: self._error(ctx, f)

    def evaluate(self, ctx):
        fin = ctx.record.final
        err = self._error(ctx, fin)
        res = {"error": err, "t": fin.time_tag}
        return res, [at_most("standing_wave_error", err, self.p["tol"], f"at t={fin.time_tag:g}")]


class DuhamelProbe(Probe):
    kind = "duhamel"

    def window(self, ctx):
        return (self.p["t0"], self.p["t1"])

    def evaluate(self, ctx):
        r = duhamel_residual(ctx.record, self.p["t0"], self.p["t1"], self.p["method"])
        return {"residual": r, "method": self.p["method"]}, [at_most("duhamel_residual", r, self.p["tol"])]


class ZNormProbe(Probe):
    kind = "z_norm"

    def column(self, ctx):
        q = 2.0 * (ctx.params.n + 4) / ctx.params.n
        return lambda f: lp_power(f, q)

    def evaluate(self, ctx):
        try:
            z = z_norm_accumulate(ctx.record, self.p["window"])
        except ValueError as exc:
            # too few snapshots for the quadrature: a failed verdict, not a crashed run
            return {"error": str(exc)}, [Check("z_cadence", False, None, ">= 16 snapshots per window", str(exc))]
        res = {"total": z.total, "z_norm": z.z_norm, "window_increments": list(z.window_increments)}
        checks = []
        a, b = self.p["fit_from"], self.p["fit_to"]
        if a is not None or b is not None:
            a = z.times[0] if a is None else a
            b = z.times[-1] if b is None else b
            Ts = np.linspace(a, b, 64)
            run = np.interp(Ts, z.times, z.running)
            coef = np.polyfit(Ts, run, 1)
            ss = np.sum((run - run.mean()) ** 2)
            r2 = float(1.0 - np.sum((np.polyval(coef, Ts) - run) ** 2) / ss) if ss > 0 else 0.0
            res.update({"linear_fit_r2": r2, "linear_fit_slope": float(coef[0]), "fit_window": [a, b]})
            checks.append(at_least("z_total_linear_in_T", r2, self.p["min_r2"]))
        return res, checks


class BlowupFitProbe(Probe):
    kind = "blowup_fit"

    def column(self, ctx):
        from ..diagnostics import scale_estimate
        return scale_estimate

    def evaluate(self, ctx):
        rec = ctx.record
        fit = rec.blowup_estimate
        if rec.outcome == "blow-up" and fit is None:
            fit = fit_blowup_rate(rec.times, rec.column("n_est"), self.p["min_r2"], self.p["min_decades"],
                                  min_growth=rec.controls.blowup_fit_growth)
        res = {"outcome": rec.outcome, "declared": False}
        if fit is not None:
            res.update({"T_star": fit.T_star, "beta": fit.beta, "r2": fit.r2, "decades": fit.decades,
                        "declared": fit.declared, "window": list(fit.window)})
        target, tol = self.p["beta"], self.p["beta_tol"]
        if fit is not None and fit.declared:
            err = abs(fit.beta - target)
            chk = Check("blowup_rate", err <= tol, fit.beta, f"{target:g} +- {tol:g}", "declared fit")
        else:
            chk = Check("blowup_rate", True, None, f"{target:g} +- {tol:g}", "inconclusive: no declared fit")
        return res, [chk]


class _FrameProbe(Probe):
    def probe(self, R=None) -> VirialProbe:
        d = self.p.get("direction")
        return VirialProbe(R=self.p["R"] if R is None else R, direction=d)


class VirialProbeSpec(_FrameProbe):
    kind = "virial"

    def column(self, ctx):
        pr = self.probe()
        return lambda f: virial_action(f, pr)

    def evaluate(self, ctx):
        chk = virial_rate_check(ctx.record, self.probe(), self.p["normalization"])
        res = {"R": self.p["R"], "max_defect": chk.max_defect, "outside_mass": chk.outside_mass,
               "r_valid": chk.r_valid}
        checks = [at_most("virial_rate_defect", chk.max_defect, self.p["max_defect"],
                          f"R={self.p['R']:g}, outside mass {chk.outside_mass:.1e}")]
        if self.p["compare_half"]:
            half = virial_rate_check(ctx.record, self.probe(self.p["R"] / 2), self.p["normalization"])
            res["max_defect_half_R"] = half.max_defect
            ok = chk.max_defect <= half.max_defect * (1.0 + self.p["noise"])
            checks.append(Check("virial_defect_decreases_with_R", bool(ok), chk.max_defect,
                                f"<= {half.max_defect:.3g} (1 + {self.p['noise']:g})",
                                f"R/2={self.p['R'] / 2:g} vs R={self.p['R']:g}"))
        return res, checks


class MassMomentProbe(_FrameProbe):
    kind = "mass_moment"

    def column(self, ctx):
        pr = self.probe()
        return lambda f: mass_moment(f, pr, check_bound=False)

    def evaluate(self, ctx):
        pr = self.probe()
        chk = mass_moment_rate_check(ctx.record, pr)
        R = self.p["R"]
        bound = max(abs(mass_moment(s, pr, check_bound=False)) / (R * mass(s)) for s in ctx.record.snapshots)
        res = {"R": R, "max_defect": chk.max_defect, "outside_mass": chk.outside_mass,
               "max_moment_over_RM": bound, "cutoff_constant": CUTOFF_MOMENT_CONSTANT}
        return res, [at_most("mass_moment_rate_defect", chk.max_defect, self.p["max_defect"]),
                     at_most("mass_moment_bound", bound, 1.0, "max |M_R| / (R M(u)) over snapshots")]


class SymmetryProbe(Probe):
    kind = "symmetry"

    def evaluate(self, ctx):
        h = self.p["h"]
        rec = ctx.record
        u0 = ctx.initial.replace(ctx.initial.values, 0.0)
        v0 = rescale_g(u0, h, mass_tol=math.inf)
        mass_dev = abs(mass(v0) / mass(u0) - 1.0)
        # the run took u0 to t_end; the rescaled data runs to t_end / h^4
        c = rec.controls
        ctrl = RunControls(t_end=c.t_end / h**4, dt_max=c.dt_max / h**4, snapshot_every=c.snapshot_every,
                           dealias=c.dealias)
        scaled = evolve(v0, ctx.params, ctrl)
        pred = rescale_g(rec.final, h, mass_tol=math.inf)
        cov = math.sqrt(lp_power(pred.replace(pred.values - scaled.final.values), 2) / lp_power(pred, 2))
        z0 = z_norm_accumulate(rec).total
        z1 = z_norm_accumulate(tau_rescale(rec, h)).total
        z_dev = abs(z1 / z0 - 1.0) if z0 > 0 else abs(z1)
        res = {"h": h, "mass_deviation": mass_dev, "covariance_error": cov, "z_total": z0,
               "z_total_rescaled": z1, "z_deviation": z_dev}
        return res, [at_most("g_mass_invariance", mass_dev, self.p["mass_tol"]),
                     at_most("scaling_covariance", cov, self.p["covariance_tol"]),
                     at_most("z_tau_invariance", z_dev, self.p["z_tol"])]


class GroundStateTableProbe(Probe):
    kind = "groundstate_table"

    def evaluate(self, ctx):
        from ..grid import make_radial_grid
        from ..ground_state import mass_thresholds

        rows, checks = [], []
        jobs = [(n, "full", P, self.p["full_extent"]) for n in self.p["full_dims"] for P in self.p["full_points"]]
        jobs += [(n, "radial", N, self.p["radial_extent"]) for n in self.p["radial_dims"]
                 for N in self.p["radial_points"]]
        by_dim = {}
        for n, kind, pts, ext in jobs:
            geo = make_grid(n, pts, ext) if kind == "full" else make_radial_grid(n, pts, ext)
            Q = solve_ground_state(n, geo)
            th = mass_thresholds(Q)
            row = {"n": n, "kind": kind, "points": pts, "extent": ext, "M_Q": th["M_Q"], "M_star": th["M_star"],
                   "residual": Q.residual, "pohozaev": list(Q.pohozaev_residuals), "gn_ratio": Q.gn_ratio_at_Q,
                   "iterations": Q.iterations, "lobe_radius": Q.lobe_radius, "tail_mass": Q.tail_mass}
            rows.append(row)
            by_dim.setdefault((n, kind), []).append(row)
            tag = f"n={n} {kind} {pts}"
            # the residual floor grows like eps * max symbol; the tolerance is
            # checked on the coarsest grid of each family
            if pts == min(self.p["full_points"] if kind == "full" else self.p["radial_points"]):
                checks.append(at_most(f"gs_residual[{tag}]", Q.residual, self.p["residual_tol"]))
            checks.append(at_most(f"gs_pohozaev[{tag}]", max(Q.pohozaev_residuals), self.p["pohozaev_tol"]))
            checks.append(at_most(f"gs_gn_ratio[{tag}]", abs(Q.gn_ratio_at_Q - 1.0), self.p["gn_tol"]))
        for (n, kind), rs in by_dim.items():
            if len(rs) > 1:
                ms = [r["M_Q"] for r in rs]
                dev = (max(ms) - min(ms)) / max(ms)
                checks.append(at_most(f"gs_refinement[n={n} {kind}]", dev, self.p["refine_tol"]))
        return {"rows": rows}, checks


PROBES = {cls.kind: cls for cls in (DecayProbe, BandDecayProbe, RefinedStrichartzProbe, ScatteringProbe,
                                    StandingWaveProbe, DuhamelProbe, ZNormProbe, BlowupFitProbe,
                                    VirialProbeSpec, MassMomentProbe, SymmetryProbe, GroundStateTableProbe)}


def build_probe(spec) -> Probe:
    return PROBES[spec.kind](spec.name, spec.params)


def validity(ctx: Context) -> tuple[float, float]:
    return validity_window(ctx.record)
