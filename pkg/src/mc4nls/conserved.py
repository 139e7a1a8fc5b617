"""Mass, momentum and energy, their drift along runs, and the boost polynomial.

Sign convention: ``momentum(u) = Im int u grad(conj u) dx``.  For
``u = exp(i k x) g`` with real ``g`` this equals ``-k M(g)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .fields import ComplexField, directional_derivative, laplacian, lp_power, partial, sobolev_seminorm, _unit


@dataclass(frozen=True)
class ConservedSnapshot:
    t: float
    mass: float
    momentum: np.ndarray
    energy: float
    kinetic: float  # 1/2 ||Delta u||^2, the natural scale for energy drift
    radial: bool = False

    def as_row(self) -> dict:
        row = {"t": self.t, "mass": self.mass, "energy": self.energy}
        for i, m in enumerate(self.momentum, 1):
            row[f"mom_{i}"] = float(m)
        return row


def mass(f: ComplexField) -> float:
    return lp_power(f, 2)


def momentum(f: ComplexField) -> np.ndarray:
    """``Im int u grad(conj u)``; the zero vector on radial geometries."""
    if f.is_radial:
        return np.zeros(f.dim)
    g = f.geometry
    out = np.empty(g.dim)
    for ax in range(g.dim):
        du = partial(f, ax)
        out[ax] = np.imag(np.sum(f.values * np.conj(du))) * g.cell_volume
    return out


def potential_coefficient(n: int, lam: float) -> float:
    return n * lam / (2.0 * (n + 4))


def energy_parts(f: ComplexField, lam: float, n: int | None = None):
    """``(1/2 ||Delta u||^2, n lam / (2(n+4)) ||u||_q^q)`` with ``q = 2(n+4)/n``."""
    n = f.dim if n is None else n
    kin = 0.5 * sobolev_seminorm(f, 2) ** 2
    pot = 0.0
    if lam != 0:
        pot = potential_coefficient(n, lam) * lp_power(f, 2.0 * (n + 4) / n)
    return kin, pot


def energy(f: ComplexField, lam: float, n: int | None = None) -> float:
    kin, pot = energy_parts(f, lam, n)
    return kin + pot


def snapshot(f: ComplexField, lam: float, t: float | None = None) -> ConservedSnapshot:
    kin, pot = energy_parts(f, lam)
    t = f.time_tag if t is None else t
    return ConservedSnapshot(float(t if t is not None else 0.0), mass(f), momentum(f), kin + pot, kin, f.is_radial)


def drift_report(series: Sequence[ConservedSnapshot] | object, floor: float = 1e-300) -> dict:
    """Max relative drift ``|Q(t) - Q(0)| / max(|Q(0)|, scale)`` per quantity.

    ``series`` is a list of snapshots or anything with a ``conserved_series``
    attribute.  Energy uses the initial kinetic energy as its minimum scale
    (the ground state has zero energy); momentum uses ``M(0) N_est(0)``.
    """
    series = getattr(series, "conserved_series", series)
    if len(series) < 2:
        raise ValueError("drift report needs at least two snapshots")
    s0 = series[0]
    m = np.array([s.mass for s in series])
    e = np.array([s.energy for s in series])
    p = np.array([s.momentum for s in series])

    def rel(vals, ref, scale):
        den = max(abs(ref), scale, floor)
        return float(np.max(np.abs(vals - ref)) / den)

    n_est = (2.0 * s0.kinetic) ** 0.25 / s0.mass**0.25 if s0.mass > 0 else 0.0
    p_scale = max(float(np.linalg.norm(s0.momentum)), s0.mass * n_est, floor)
    p_drift = float(np.max(np.linalg.norm(p - s0.momentum, axis=1)) / p_scale) if p.size else 0.0
    if s0.mass == 0:
        return {"mass": rel(m, 0.0, 0.0) if np.any(m) else 0.0,
                "energy": 0.0 if not np.any(e) else rel(e, 0.0, 0.0),
                "momentum": 0.0 if not np.any(p) else p_drift}
    return {"mass": rel(m, s0.mass, 0.0), "energy": rel(e, s0.energy, s0.kinetic), "momentum": p_drift}


# ---------------------------------------------------------------------------
# boost polynomial


@dataclass(frozen=True)
class BoostPolynomial:
    """``P(X) = c0 + c1 X + c2 X^2 + c3 X^3 + c4 X^4 = 2 E(exp(i X e.x) u)``.

    ``c0 = 2E``, ``c1 = -4 C1`` with ``C1 = Im int Delta(conj u) d_e u``,
    ``c2 = 2 ||grad u||^2 + 4 ||d_e u||^2``, ``c3 = -4 e.Mom(u)``, ``c4 = M(u)``.
    """

    c0: float
    c1: float
    c2: float
    c3: float
    c4: float
    direction: np.ndarray
    kinetic2: float  # ||Delta u||^2
    mass: float

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([self.c0, self.c1, self.c2, self.c3, self.c4])

    def __call__(self, X):
        return np.polynomial.polynomial.polyval(X, self.coefficients)

    def gap(self, X, kappa: float):
        """``kappa P(X) - (1 - kappa)(||Delta u||^2 - 2E)``; nonnegative when GN applies."""
        return kappa * self(X) - (1.0 - kappa) * (self.kinetic2 - self.c0)


def boost_polynomial(f: ComplexField, lam: float, direction=None) -> BoostPolynomial:
    if f.is_radial:
        raise ValueError("boost polynomial requires a full periodic grid")
    g = f.geometry
    e = _unit(direction, g.dim)
    u = f.values
    dv = g.cell_volume
    lap = laplacian(f)
    de = directional_derivative(f, e)
    C1 = float(np.imag(np.sum(np.conj(lap) * de)) * dv)
    grad2 = sobolev_seminorm(f, 1) ** 2
    de2 = float(np.sum(np.abs(de) ** 2) * dv)
    m_e = float(np.imag(np.sum(u * np.conj(de))) * dv)
    M = mass(f)
    kin2 = float(np.sum(np.abs(lap) ** 2) * dv)
    E = energy(f, lam)
    return BoostPolynomial(2 * E, -4 * C1, 2 * grad2 + 4 * de2, -4 * m_e, M, e, kin2, M)


def gn_kappa(mass_u: float, mass_Q: float, n: int) -> float:
    """``(M(u) / M(Q))^{4/n}``, the sharp Gagliardo-Nirenberg factor."""
    return (mass_u / mass_Q) ** (4.0 / n)
