"""Probes evaluated along trajectories.

Records are duck-typed: anything with ``snapshots`` (fields carrying time
tags) and ``params`` works, so this module does not import the integrator.
The virial and mass-moment identities are checked in a fixed frame:

* ``A_R = 2 Im int a(z1/R) z1 d1u conj(u)`` with
  ``dA_R/dt = -16 int (1/2 |d1 grad u|^2 + lam/(2(n+4)) |u|^{2(n+4)/n})``
  up to cutoff error;
* ``M_R = int a(z1/R) z1 |u|^2`` with ``dM_R/dt = -4 Im int d1(conj u) Delta u``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import cumulative_simpson, simpson
from scipy.optimize import least_squares

from .fields import (ComplexField, bump, directional_derivative, laplacian, lp_power,
                     sobolev_seminorm, _unit)
from .grid import RadialGrid


def _params(record):
    return record.params


# ---------------------------------------------------------------------------
# Z norm


@dataclass(frozen=True)
class ZAccumulation:
    times: np.ndarray
    integrand: np.ndarray  # ||u(t)||_q^q
    running: np.ndarray    # int_0^t ||u||_q^q
    total: float
    window_increments: tuple

    @property
    def z_norm(self) -> float:
        return self.total ** (1.0 / self.q) if self.total > 0 else 0.0

    q: float = 2.0


def z_norm_accumulate(record, window: Optional[float] = None, min_nodes: int = 16) -> ZAccumulation:
    """Space-time integral of ``|u|^{2(n+4)/n}`` over the stored snapshots.

    Uses composite Simpson on the snapshot times.  ``window`` splits the run
    into consecutive windows of that length and reports the increment of each;
    every window (or the whole run) needs ``min_nodes`` snapshots.
    """
    snaps = record.snapshots
    n = _params(record).n
    q = 2.0 * (n + 4) / n
    t = np.array([s.time_tag for s in snaps], dtype=float)
    if t.size < min_nodes:
        raise ValueError(f"cadence too coarse: {t.size} snapshots, need at least {min_nodes}")
    vals = np.array([lp_power(s, q) for s in snaps])
    running = np.concatenate([[0.0], cumulative_simpson(vals, x=t)])
    total = float(simpson(vals, x=t))
    incs = []
    if window is not None:
        edges = np.arange(t[0], t[-1] + 0.5 * window, window)
        for a, b in zip(edges[:-1], edges[1:]):
            sel = (t >= a - 1e-12) & (t <= b + 1e-12)
            if sel.sum() < min_nodes:
                raise ValueError(f"cadence too coarse: window [{a:g}, {b:g}] has {sel.sum()} nodes")
            incs.append(float(simpson(vals[sel], x=t[sel])))
    return ZAccumulation(t, vals, running, total, tuple(incs), q)


@dataclass(frozen=True)
class SnapshotRun:
    """Minimal record: equation parameters plus time-tagged snapshots."""

    params: object
    snapshots: list


def tau_rescale(record, h: float) -> SnapshotRun:
    """Apply ``u(t, x) -> h^{n/2} u(h^4 t, h x)`` to a whole run.

    Each snapshot is rescaled with :func:`rescale_g` and retagged ``t / h^4``.
    The Z integral is invariant, so this is a check on the quadrature and
    the interpolation.
    """
    from .fields import rescale_g

    snaps = []
    for s in record.snapshots:
        r = rescale_g(s, h)
        snaps.append(r.replace(r.values, s.time_tag / h**4))
    return SnapshotRun(_params(record), snaps)


# ---------------------------------------------------------------------------
# scale


def scale_estimate(f: ComplexField) -> float:
    """``N_est = (||Delta u|| / ||u||)^{1/2}``, a proxy for the frequency scale."""
    m = lp_power(f, 2)
    if m == 0:
        raise ValueError("scale estimate is undefined for the zero field")
    return float(math.sqrt(sobolev_seminorm(f, 2) / math.sqrt(m)))


@dataclass(frozen=True)
class BlowupFit:
    T_star: float
    beta: float
    log_prefactor: float
    r2: float
    decades: float
    declared: bool
    window: tuple

    def as_tuple(self):
        return (self.T_star, self.beta)


@dataclass(frozen=True)
class ScaleTrack:
    times: np.ndarray
    n_est: np.ndarray
    fitted_blowup: Optional[BlowupFit] = None

    @classmethod
    def from_record(cls, record) -> "ScaleTrack":
        t = np.array([s.time_tag for s in record.snapshots])
        n = np.array([scale_estimate(s) for s in record.snapshots])
        return cls(t, n, fit_blowup_rate(t, n))


def fit_blowup_rate(times: Sequence[float], n_est: Sequence[float], min_r2: float = 0.98,
                    min_decades: float = 1.0, t_from: Optional[float] = None,
                    min_growth: float = 1.0) -> Optional[BlowupFit]:
    """Fit ``log N = c - beta log(T* - t)`` jointly in ``(c, beta, T*)``.

    Returns a :class:`BlowupFit` (with ``declared`` False when the fit fails
    the R^2 or the decade criterion), or None when there is nothing to fit.
    The decade criterion asks ``(T* - t_first) / (T* - t_last) >= 10**min_decades``.
    ``min_growth`` restricts the fit to samples with ``N >= min_growth * N[0]``,
    which drops the initial transient before the self-similar regime.
    """
    t = np.asarray(times, dtype=float)
    N = np.asarray(n_est, dtype=float)
    sel = np.isfinite(N) & (N > 0)
    if t_from is not None:
        sel &= t >= t_from
    if sel.any():
        sel &= N >= min_growth * N[np.argmax(sel)]
    t, N = t[sel], N[sel]
    if t.size < 5:
        return None
    y = np.log(N)
    t_last = t[-1]
    span = t_last - t[0]
    if not span > 0:
        return None

    def linfit(Ts):
        X = np.log(Ts - t)
        A = np.vstack([np.ones_like(X), -X]).T
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        return coef, np.sum((A @ coef - y) ** 2)

    # profile the residual over T* to seed the joint fit
    offsets = span * np.geomspace(1e-8, 1e3, 221)
    best = min(offsets, key=lambda o: linfit(t_last + o)[1])
    (c0, b0), _ = linfit(t_last + best)

    def resid(p):
        c, b, lo = p
        return c - b * np.log(t_last + np.exp(lo) - t) - y

    sol = least_squares(resid, x0=[c0, b0, np.log(best)], method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15)
    c, beta, lo = sol.x
    T_star = float(t_last + np.exp(lo))
    ss = np.sum((y - y.mean()) ** 2)
    r2 = float(1.0 - np.sum(sol.fun**2) / ss) if ss > 0 else 0.0
    decades = float(np.log10((T_star - t[0]) / (T_star - t_last)))
    declared = bool(r2 >= min_r2 and decades >= min_decades and beta > 0 and np.isfinite(T_star))
    return BlowupFit(T_star, float(beta), float(c), r2, decades, declared, (float(t[0]), float(t_last)))


# ---------------------------------------------------------------------------
# virial action and mass moment


def cutoff_a(s: np.ndarray) -> np.ndarray:
    """Even cutoff: 1 on |s| <= 1, 0 on |s| >= 2, nonincreasing in |s|."""
    return bump(s)


# max over s of s a(s); the sharp constant in |M_R| <= C R M(u)
CUTOFF_MOMENT_CONSTANT = float(np.max(np.linspace(0, 2, 200001) * bump(np.linspace(0, 2, 200001))))


@dataclass(frozen=True)
class VirialProbe:
    R: float
    direction: Optional[Sequence[float]] = None
    center: Optional[Sequence[float]] = None

    def __post_init__(self):
        if not self.R > 0:
            raise ValueError("R must be positive")

    def frame(self, f: ComplexField):
        if f.is_radial:
            raise ValueError("virial and mass-moment probes need a full periodic grid")
        g = f.geometry
        e = _unit(self.direction, g.dim)
        c = np.zeros(g.dim) if self.center is None else np.asarray(self.center, dtype=float)
        z1 = sum(e[ax] * (x - c[ax]) for ax, x in enumerate(g.coordinates()))
        return e, z1 * np.ones(g.shape)


def virial_action(f: ComplexField, probe: VirialProbe) -> float:
    e, z1 = probe.frame(f)
    d1 = directional_derivative(f, e)
    w = cutoff_a(z1 / probe.R) * z1
    return float(2.0 * np.imag(np.sum(w * d1 * np.conj(f.values))) * f.geometry.cell_volume)


def virial_rhs_terms(f: ComplexField, lam: float, probe: VirialProbe) -> tuple[float, float]:
    """``(-8 ||d1 grad u||^2, -16 lam/(2(n+4)) ||u||_q^q)``."""
    e, _ = probe.frame(f)
    g = f.geometry
    n = g.dim
    u_hat = np.fft.fftn(f.values)
    sym_e = sum(e[ax] * g.wavenumber(ax) for ax in range(n))
    grad_d1 = float(np.sum(g.xi2 * sym_e**2 * np.abs(u_hat) ** 2) * g.cell_volume / u_hat.size)
    pot = lp_power(f, 2.0 * (n + 4) / n) if lam != 0 else 0.0
    return -8.0 * grad_d1, -16.0 * lam / (2.0 * (n + 4)) * pot


def mass_moment(f: ComplexField, probe: VirialProbe, check_bound: bool = True) -> float:
    """``M_R = int a(z1/R) z1 |u|^2``.

    ``|M_R| <= C R M(u)`` with ``C = max_s s a(s)`` (slightly above 1) is
    asserted as a sanity bound.
    """
    _, z1 = probe.frame(f)
    val = float(np.sum(cutoff_a(z1 / probe.R) * z1 * np.abs(f.values) ** 2) * f.geometry.cell_volume)
    if check_bound:
        bound = CUTOFF_MOMENT_CONSTANT * probe.R * lp_power(f, 2)
        if abs(val) > bound * (1 + 1e-12) + 1e-12:
            raise ArithmeticError(f"|M_R|={abs(val):.6g} exceeds C R M(u)={bound:.6g}")
    return val


def mass_moment_rate(f: ComplexField, probe: VirialProbe) -> float:
    """``-4 Im int d1(conj u) Delta u``."""
    e, _ = probe.frame(f)
    d1 = directional_derivative(f, e)
    return float(-4.0 * np.imag(np.sum(np.conj(d1) * laplacian(f))) * f.geometry.cell_volume)


@dataclass(frozen=True)
class RateCheck:
    times: np.ndarray
    fd_rate: np.ndarray
    predicted: np.ndarray
    defects: np.ndarray
    max_defect: float
    outside_mass: float
    r_valid: bool


def _outside_mass(snaps, probe: VirialProbe) -> float:
    worst = 0.0
    for s in snaps:
        _, z1 = probe.frame(s)
        dens = np.abs(s.values) ** 2
        tot = dens.sum()
        if tot > 0:
            worst = max(worst, float(dens[np.abs(z1) > probe.R].sum() / tot))
    return worst


def _centered_rate(t: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Second-order derivative at interior nodes (nonuniform three-point formula)."""
    h0 = t[1:-1] - t[:-2]
    h1 = t[2:] - t[1:-1]
    return (-h1 / (h0 * (h0 + h1)) * a[:-2] + (h1 - h0) / (h0 * h1) * a[1:-1] + h0 / (h1 * (h0 + h1)) * a[2:])


def _rate_check(record, probe, observable, predicted, scale, outside_tol) -> RateCheck:
    snaps = record.snapshots
    if len(snaps) < 3:
        raise ValueError("need at least three snapshots for a centered difference")
    t = np.array([s.time_tag for s in snaps])
    obs = np.array([observable(s) for s in snaps])
    fd = _centered_rate(t, obs)
    pred = np.array([predicted(s) for s in snaps[1:-1]])
    sc = np.array([scale(s) for s in snaps[1:-1]])
    defects = np.abs(fd - pred) / np.where(sc > 0, sc, 1.0)
    out = _outside_mass(snaps, probe)
    return RateCheck(t[1:-1], fd, pred, defects, float(defects.max()), out, out <= outside_tol)


def virial_rate_check(record, probe: VirialProbe, normalization: str = "rhs",
                      outside_tol: float = 1e-3) -> RateCheck:
    """Compare a centered difference of ``A_R`` with the fixed-frame rate.

    ``normalization="rhs"`` divides the defect by ``|RHS|``; ``"terms"``
    divides by the sum of the two terms' magnitudes, which is the meaningful
    scale when they cancel (standing waves).  ``r_valid`` is False when more
    than ``outside_tol`` of the mass lies in ``|z1| > R`` at any snapshot.
    """
    lam = _params(record).lam
    if normalization not in ("rhs", "terms"):
        raise ValueError("normalization must be 'rhs' or 'terms'")

    def pred(s):
        return sum(virial_rhs_terms(s, lam, probe))

    def scale(s):
        a, b = virial_rhs_terms(s, lam, probe)
        return abs(a + b) if normalization == "rhs" else abs(a) + abs(b)

    return _rate_check(record, probe, lambda s: virial_action(s, probe), pred, scale, outside_tol)


def mass_moment_rate_check(record, probe: VirialProbe, outside_tol: float = 1e-3) -> RateCheck:
    return _rate_check(record, probe, lambda s: mass_moment(s, probe), lambda s: mass_moment_rate(s, probe),
                       lambda s: abs(mass_moment_rate(s, probe)), outside_tol)


# ---------------------------------------------------------------------------
# scattering


@dataclass(frozen=True)
class ScatteringReport:
    profile_plus: Optional[ComplexField]
    profile_minus: Optional[ComplexField]
    cauchy_defect: float
    fired: bool
    eps: float
    window: tuple
    caveat: str


def effective_frequency(f: ComplexField, tail: float = 1e-6) -> float:
    """Smallest |xi| containing all but ``tail`` of the spectral mass."""
    g = f.geometry
    if isinstance(g, RadialGrid):
        c = g.to_eigenbasis(f.values)
        k = np.sqrt(np.sqrt(np.maximum(g.eigenvalues, 0.0)))
        p = np.abs(c) ** 2
    else:
        k = g.xi_abs.reshape(-1)
        p = np.abs(np.fft.fftn(f.values)).reshape(-1) ** 2
    tot = p.sum()
    if tot == 0:
        return 0.0
    order = np.argsort(k)
    cum = np.cumsum(p[order]) / tot
    idx = int(np.searchsorted(cum, 1.0 - tail))
    return float(k[order][min(idx, k.size - 1)])


def validity_window(record, tail: float = 1e-6) -> tuple[float, float]:
    """``[t0, t0 + L / (4 xi_eff^3)]``: fastest significant wave has not yet crossed the box."""
    u0 = record.snapshots[0]
    g = u0.geometry
    L = g.r_max if isinstance(g, RadialGrid) else g.half_width
    xi = effective_frequency(u0, tail)
    t0 = float(u0.time_tag)
    return t0, (math.inf if xi == 0 else t0 + L / (4.0 * xi**3))


def scattering_probe(record, eps: float = 1e-3, tail: float = 1e-6) -> ScatteringReport:
    """Cauchy test for ``w(t) = exp(-i t Delta^2) u(t)`` over the last quarter
    of the run inside its wraparound validity window.

    The defect is the largest pairwise ``||w(t1) - w(t2)||`` relative to
    ``||u(t0)||``.
    """
    from .linear import propagate_linear

    snaps = record.snapshots
    t = np.array([s.time_tag for s in snaps])
    w0, w1 = validity_window(record, tail)
    hi = min(t[-1], w1)
    inside = t <= hi + 1e-12
    lo = t[0] + 0.75 * (hi - t[0])
    sel = np.nonzero(inside & (t >= lo - 1e-12))[0]
    if sel.size < 4:
        raise ValueError(f"scattering window [{lo:g}, {hi:g}] holds {sel.size} snapshots, need at least 4")
    ws = [propagate_linear(snaps[i], -snaps[i].time_tag) for i in sel]
    norm0 = math.sqrt(lp_power(snaps[0], 2))
    if norm0 == 0:
        return ScatteringReport(ws[-1], None, 0.0, True, eps, (w0, w1), "zero field")
    worst = 0.0
    for i in range(len(ws)):
        for j in range(i + 1, len(ws)):
            worst = max(worst, math.sqrt(lp_power(ws[i].replace(ws[i].values - ws[j].values), 2)))
    defect = worst / norm0
    caveat = f"periodic box: probe valid for t <= {w1:.6g}"
    if t[-1] > w1:
        caveat += f"; snapshots after t={w1:.6g} ignored"
    return ScatteringReport(ws[-1], None, defect, bool(defect <= eps), eps, (w0, w1), caveat)
