"""Complex fields on a grid and the fixed-time functionals acting on them."""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Optional, Union

import numpy as np

from .grid import RadialGrid, SpectralGrid

Geometry = Union[SpectralGrid, RadialGrid]

LP_KINDS = ("at", "leq", "gt", "geq", "lt")


class NonFiniteFieldError(ArithmeticError):
    """A field operation produced NaN or Inf values."""


@dataclass(frozen=True, eq=False)
class ComplexField:
    geometry: Geometry
    values: np.ndarray
    time_tag: Optional[float] = None

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.complex128)
        if vals.shape != self.geometry.shape:
            raise ValueError(f"values shape {vals.shape} does not match geometry shape {self.geometry.shape}")
        if not np.all(np.isfinite(vals)):
            raise NonFiniteFieldError("field contains non-finite values")
        object.__setattr__(self, "values", vals)

    @property
    def is_radial(self) -> bool:
        return isinstance(self.geometry, RadialGrid)

    @property
    def dim(self) -> int:
        return self.geometry.dim

    def replace(self, values: np.ndarray, time_tag: Optional[float] = "keep") -> "ComplexField":
        t = self.time_tag if time_tag == "keep" else time_tag
        return ComplexField(self.geometry, values, t)

    def spectrum(self) -> np.ndarray:
        """Raw DFT coefficients (``numpy.fft.fftn`` layout); full grids only."""
        _require_full(self, "spectrum")
        return np.fft.fftn(self.values)


def _require_full(f: ComplexField, what: str) -> SpectralGrid:
    if f.is_radial:
        raise ValueError(f"{what} is only available on full periodic grids")
    return f.geometry


# ---------------------------------------------------------------------------
# smooth cutoff


def _smooth_tail(t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(t, dtype=float)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def bump(r: np.ndarray) -> np.ndarray:
    """C-infinity radial cutoff: 1 on |r| <= 1, 0 on |r| >= 2, monotone between.

    On 1 < r < 2 with s = r - 1 it equals ``f(1-s) / (f(1-s) + f(s))`` with
    ``f(t) = exp(-1/t)`` for t > 0 and 0 otherwise.
    """
    r = np.abs(np.asarray(r, dtype=float))
    s = np.clip(r - 1.0, 0.0, 1.0)
    a = _smooth_tail(1.0 - s)
    b = _smooth_tail(s)
    return a / (a + b)


@dataclass(frozen=True)
class LittlewoodPaleyBank:
    """Dyadic frequency projectors built from :func:`bump`."""

    levels: tuple = dc_field(default_factory=tuple)

    @staticmethod
    def cutoff(xi: np.ndarray) -> np.ndarray:
        return bump(xi)

    @classmethod
    def for_grid(cls, grid: SpectralGrid) -> "LittlewoodPaleyBank":
        lo = int(np.floor(np.log2(grid.dk))) - 1
        hi = int(np.ceil(np.log2(grid.xi_abs.max()))) + 1
        return cls(tuple(2.0**k for k in range(lo, hi + 1)))

    def symbol(self, xi_abs: np.ndarray, N: float, kind: str) -> np.ndarray:
        if kind == "leq":
            return bump(xi_abs / N)
        if kind == "gt":
            return 1.0 - bump(xi_abs / N)
        if kind == "at":
            return bump(xi_abs / N) - bump(2.0 * xi_abs / N)
        if kind == "lt":
            return bump(2.0 * xi_abs / N)
        if kind == "geq":
            return 1.0 - bump(2.0 * xi_abs / N)
        raise ValueError(f"unknown projection kind {kind!r}; expected one of {LP_KINDS}")


# ---------------------------------------------------------------------------
# norms


def lp_norm(f: ComplexField, p: float) -> float:
    """L^p norm with the geometry's R^n measure; ``p = inf`` gives the max modulus."""
    if not p >= 1:
        raise ValueError(f"p must be >= 1, got {p}")
    a = np.abs(f.values)
    if np.isinf(p):
        return float(a.max())
    if f.is_radial:
        g = f.geometry
        return float((g.area * np.sum(g.weight * a**p)) ** (1.0 / p))
    return float((np.sum(a**p) * f.geometry.cell_volume) ** (1.0 / p))


def lp_power(f: ComplexField, p: float) -> float:
    """``||f||_p^p`` without the final root."""
    a = np.abs(f.values)
    if f.is_radial:
        g = f.geometry
        return float(g.area * np.sum(g.weight * a**p))
    return float(np.sum(a**p) * f.geometry.cell_volume)


def l2_inner(f: ComplexField, g: ComplexField) -> complex:
    if f.is_radial:
        return complex(f.geometry.inner(f.values, g.values))
    return complex(np.sum(np.conj(f.values) * g.values) * f.geometry.cell_volume)


def laplacian(f: ComplexField) -> np.ndarray:
    if f.is_radial:
        return f.geometry.laplacian_matrix @ f.values
    g = f.geometry
    return np.fft.ifftn(-g.xi2 * np.fft.fftn(f.values))


def partial(f: ComplexField, axis: int) -> np.ndarray:
    g = _require_full(f, "partial derivatives")
    return np.fft.ifftn(1j * g.wavenumber(axis) * np.fft.fftn(f.values))


def directional_derivative(f: ComplexField, direction) -> np.ndarray:
    g = _require_full(f, "directional derivatives")
    e = _unit(direction, g.dim)
    sym = sum(e[ax] * g.wavenumber(ax) for ax in range(g.dim))
    return np.fft.ifftn(1j * sym * np.fft.fftn(f.values))


def _unit(direction, dim: int) -> np.ndarray:
    if direction is None:
        e = np.zeros(dim)
        e[0] = 1.0
        return e
    e = np.asarray(direction, dtype=float).reshape(-1)
    if e.shape != (dim,):
        raise ValueError(f"direction must have {dim} components")
    nrm = np.linalg.norm(e)
    if not nrm > 0:
        raise ValueError("direction must be nonzero")
    return e / nrm


def sobolev_seminorm(f: ComplexField, s: float) -> float:
    """``|| |grad|^s u ||_2`` via the Fourier multiplier |xi|^s.

    Radial geometries support only s in {0, 1, 2}, through the discrete
    Laplacian.
    """
    if f.is_radial:
        g = f.geometry
        if s == 0:
            return lp_norm(f, 2)
        if s == 1:
            val = g.area * np.real(np.vdot(f.values, g.stiffness @ f.values))
            return float(np.sqrt(max(val, 0.0)))
        if s == 2:
            return lp_norm(f.replace(laplacian(f)), 2)
        raise ValueError(f"radial geometry supports s in {{0, 1, 2}}, got s={s}")
    if s < 0:
        raise ValueError("negative s is not supported")
    g = f.geometry
    u_hat = np.fft.fftn(f.values)
    mult = g.xi_abs**s if s != 0 else 1.0
    # Parseval for the raw DFT: sum |u|^2 dx^n = sum |U|^2 dx^n / P^n
    val = np.sum(np.abs(mult * u_hat) ** 2) * g.cell_volume / u_hat.size
    return float(np.sqrt(val))


# ---------------------------------------------------------------------------
# Littlewood-Paley projections


def lp_project(f: ComplexField, N: float, kind: str = "at") -> ComplexField:
    """Smooth Littlewood-Paley projection at dyadic scale ``N``.

    ``gt`` is formed as ``u_hat - psi u_hat`` and ``leq`` as ``u_hat - gt`` so that
    the two spectra add back to the input exactly.
    """
    g = _require_full(f, "Littlewood-Paley projections")
    if not N > 0:
        raise ValueError(f"N must be positive, got {N}")
    if kind not in LP_KINDS:
        raise ValueError(f"unknown projection kind {kind!r}; expected one of {LP_KINDS}")
    u_hat = np.fft.fftn(f.values)
    return f.replace(np.fft.ifftn(lp_project_spectrum(u_hat, g, N, kind)))


def lp_project_spectrum(u_hat: np.ndarray, grid: SpectralGrid, N: float, kind: str) -> np.ndarray:
    bank = LittlewoodPaleyBank()
    if kind in ("leq", "gt"):
        high = u_hat - bank.symbol(grid.xi_abs, N, "leq") * u_hat
        return high if kind == "gt" else u_hat - high
    return bank.symbol(grid.xi_abs, N, kind) * u_hat


# ---------------------------------------------------------------------------
# symmetries


def _interp_matrix(grid: SpectralGrid, y: np.ndarray) -> np.ndarray:
    """Rows evaluate the trigonometric interpolant of DFT data at points ``y``.

    Points outside ``[-L, L)`` get zero rows: the box stands in for R^n, so
    periodic images are not part of the field.
    """
    xi = grid.wavenumber_axes[0]
    P = grid.points_per_axis
    E = np.exp(1j * np.outer(y + grid.half_width, xi)) / P
    nyq = P // 2
    E[:, nyq] = np.cos(xi[nyq] * (y + grid.half_width)) / P
    outside = (y < -grid.half_width) | (y >= grid.half_width)
    E[outside] = 0.0
    return E


def rescale_g(f: ComplexField, h: float, x0=None, mass_tol: float = 1e-8) -> ComplexField:
    """``h^{n/2} u(h (x - x0))`` by exact trigonometric interpolation.

    Raises ``ValueError`` if the relative mass change exceeds ``mass_tol``
    (aliasing or support leaving the box).
    """
    g = _require_full(f, "rescale_g")
    if not h > 0:
        raise ValueError(f"h must be positive, got {h}")
    x0 = np.zeros(g.dim) if x0 is None else np.asarray(x0, dtype=float).reshape(-1)
    if x0.shape != (g.dim,):
        raise ValueError(f"x0 must have {g.dim} components")
    if h == 1.0 and not np.any(x0):
        return f.replace(f.values.copy())
    out = f.values
    for ax in range(g.dim):
        E = _interp_matrix(g, h * (g.x_axis - x0[ax]))
        spec = np.fft.fft(out, axis=ax)
        out = np.moveaxis(np.tensordot(E, np.moveaxis(spec, ax, 0), axes=(1, 0)), 0, ax)
    out = h ** (g.dim / 2) * out
    res = f.replace(out)
    m0 = lp_power(f, 2)
    m1 = lp_power(res, 2)
    if m0 > 0 and abs(m1 - m0) > mass_tol * m0:
        raise ValueError(
            f"rescale_g changed the mass by {abs(m1 - m0) / m0:.3e} (tolerance {mass_tol:.1e}); "
            "the rescaled field is under-resolved or leaves the box"
        )
    return res


def boost(f: ComplexField, X: float, direction=None) -> ComplexField:
    """Multiply by ``exp(i X e.x)``."""
    g = _require_full(f, "boost")
    if abs(X) >= 0.5 * g.nyquist:
        raise ValueError(f"|X|={abs(X)} is too large for the grid (limit {0.5 * g.nyquist})")
    if X == 0:
        return f.replace(f.values.copy())
    e = _unit(direction, g.dim)
    phase = sum(e[ax] * c for ax, c in enumerate(g.coordinates()))
    return f.replace(np.exp(1j * X * phase) * f.values)


# ---------------------------------------------------------------------------
# nonlinearity


def dealias_mask(grid: SpectralGrid) -> np.ndarray:
    """2/3-rule mask: keeps modes with |k_j| < P/3 on every axis."""
    cut = grid.points_per_axis / 3.0 * grid.dk
    mask = np.ones(grid.shape, dtype=bool)
    for ax in range(grid.dim):
        mask &= np.abs(grid.wavenumber(ax)) < cut
    return mask


def power_modulus(values: np.ndarray, p: float) -> np.ndarray:
    """|u|^p with |u| = 0 mapped to 0."""
    return np.power(np.abs(values), p)


def nonlinearity(f: ComplexField, lam: float, n: Optional[int] = None, dealias: bool = False) -> ComplexField:
    """Pointwise ``lam |u|^{8/n} u``, optionally 2/3-rule dealiased."""
    n = f.dim if n is None else n
    out = lam * power_modulus(f.values, 8.0 / n) * f.values
    if dealias:
        g = _require_full(f, "dealiasing")
        out = np.fft.ifftn(np.fft.fftn(out) * dealias_mask(g))
    return f.replace(out)


# ---------------------------------------------------------------------------
# initial data helpers


def gaussian(geometry: Geometry, width: float = 1.0, amplitude: float = 1.0, center=None,
             time_tag: Optional[float] = 0.0) -> ComplexField:
    if isinstance(geometry, RadialGrid):
        vals = amplitude * np.exp(-geometry.nodes**2 / (2 * width**2))
        return ComplexField(geometry, vals.astype(complex), time_tag)
    c = np.zeros(geometry.dim) if center is None else np.asarray(center, dtype=float)
    r2 = sum((x - c[ax]) ** 2 for ax, x in enumerate(geometry.coordinates()))
    vals = amplitude * np.exp(-r2 / (2 * width**2)) * np.ones(geometry.shape)
    return ComplexField(geometry, vals.astype(complex), time_tag)


def with_mass(f: ComplexField, target: float) -> ComplexField:
    m = lp_power(f, 2)
    if m == 0:
        raise ValueError("cannot rescale a zero field to a target mass")
    return f.replace(f.values * np.sqrt(target / m))


def random_smooth_field(grid: SpectralGrid, rng: np.random.Generator, bandwidth: float = 2.0,
                        window: Optional[float] = None, complex_valued: bool = True,
                        time_tag: Optional[float] = 0.0) -> ComplexField:
    """Random band-limited field localized by a Gaussian window.

    The spectrum is white noise shaped by ``exp(-|xi|^2 / (2 bandwidth^2))``;
    the window (default ``L / 8``) keeps the result negligible at the box edge.
    """
    window = grid.half_width / 8.0 if window is None else window
    noise = rng.standard_normal(grid.shape)
    if complex_valued:
        noise = noise + 1j * rng.standard_normal(grid.shape)
    spec = np.fft.fftn(noise) * np.exp(-grid.xi2 / (2 * bandwidth**2))
    vals = np.fft.ifftn(spec)
    if not complex_valued:
        vals = vals.real
    r2 = sum(x**2 for x in grid.coordinates())
    vals = vals * np.exp(-r2 / (2 * window**2))
    vals = vals / np.max(np.abs(vals))
    return ComplexField(grid, vals.astype(complex), time_tag)
