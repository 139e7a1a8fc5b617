"""Ground states of ``Delta^2 Q + Q = |Q|^{8/n} Q`` by Petviashvili iteration.

Two Pohozaev identities serve as an independent oracle.  With
``D = ||Delta Q||^2``, ``M = ||Q||^2`` and ``W = int |Q|^{2(n+4)/n}``:

* testing against Q gives ``D + M = W``;
* testing against ``x . grad Q`` gives
  ``(4 - n)/2 D - n/2 M + n^2 / (2(n+4)) W = 0``.

Together they force ``D = n M / 4``, ``W = (n+4) M / 4`` and ``E(Q) = 0``.

The computed profile is positive on a central lobe and then oscillates
with small, exponentially decaying amplitude, as is usual for fourth-order
ground states; only the central lobe is checked for positivity and
monotonicity.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np

from .conserved import mass
from .fields import ComplexField, Geometry, lp_power, sobolev_seminorm
from .grid import RadialGrid


class GroundStateError(RuntimeError):
    def __init__(self, reason: str, message: str):
        super().__init__(message)
        self.reason = reason


@dataclass(frozen=True)
class GroundStateControls:
    max_iter: int = 500
    step_tol: float = 1e-12
    # None: max(1e-8, 4 eps max|symbol|), the roundoff floor of the residual
    residual_tol: Optional[float] = None
    seed_width: float = 1.0
    seed_factors: tuple = (1.0, 0.5, 2.0)
    tail_tol: float = 1e-10
    stall_window: int = 20


@dataclass(frozen=True)
class GroundState:
    profile: ComplexField
    n: int
    mass_Q: float
    threshold_Mstar: float
    residual: float
    pohozaev_residuals: tuple
    gn_ratio_at_Q: float
    iterations: int
    gamma_history: np.ndarray = dc_field(repr=False)
    seed_width: float = 1.0
    lobe_radius: float = float("nan")
    tail_mass: float = 0.0

    @property
    def geometry(self) -> Geometry:
        return self.profile.geometry


def _radius(geometry: Geometry) -> np.ndarray:
    if isinstance(geometry, RadialGrid):
        return geometry.nodes
    return geometry.radius()


def _operator(geometry: Geometry):
    """(apply (Delta^2 + 1), apply (Delta^2 + 1)^{-1}, inner) for real arrays."""
    if isinstance(geometry, RadialGrid):
        mu1 = geometry.eigenvalues + 1.0
        w = geometry.weight
        area = geometry.area

        def fwd(q):
            return geometry.from_eigenbasis(mu1 * geometry.to_eigenbasis(q))

        def inv(q):
            return geometry.from_eigenbasis(geometry.to_eigenbasis(q) / mu1)

        def inner(a, b):
            return float(area * np.sum(w * a * b))

        return fwd, inv, inner

    sym = geometry.xi4 + 1.0
    dv = geometry.cell_volume

    def fwd(q):
        return np.real(np.fft.ifftn(sym * np.fft.fftn(q)))

    def inv(q):
        return np.real(np.fft.ifftn(np.fft.fftn(q) / sym))

    def inner(a, b):
        return float(np.sum(a * b) * dv)

    return fwd, inv, inner


def elliptic_residual(f: ComplexField, n: Optional[int] = None) -> float:
    """``||Delta^2 Q + Q - |Q|^{8/n} Q||_2 / ||Q||_2``."""
    n = f.dim if n is None else n
    g = f.geometry
    q = f.values
    if isinstance(g, RadialGrid):
        lin = g.biharmonic_matrix @ q + q
    else:
        lin = np.fft.ifftn((g.xi4 + 1.0) * np.fft.fftn(q))
    res = lin - np.abs(q) ** (8.0 / n) * q
    return float(np.sqrt(lp_power(f.replace(res), 2) / lp_power(f, 2)))


def _petviashvili(geometry: Geometry, n: int, seed: np.ndarray, controls: GroundStateControls):
    fwd, inv, inner = _operator(geometry)
    p = 8.0 / n
    theta = (1.0 + p) / p
    Q = seed.copy()
    norm0 = np.sqrt(inner(Q, Q))
    steps, gammas = [], []
    for k in range(1, controls.max_iter + 1):
        NQ = np.abs(Q) ** p * Q
        den = inner(NQ, Q)
        if not den > 0:
            raise GroundStateError("collapse", "nonlinear pairing vanished; iterate collapsed")
        gamma = inner(fwd(Q), Q) / den
        Qn = gamma**theta * inv(NQ)
        nrm = np.sqrt(inner(Qn, Qn))
        if not np.isfinite(nrm):
            raise GroundStateError("divergence", "iterate became non-finite")
        if nrm < 1e-8 * norm0:
            raise GroundStateError("collapse", f"iterate collapsed to zero after {k} iterations")
        d = np.sqrt(inner(Qn - Q, Qn - Q)) / nrm
        Q = Qn
        steps.append(d)
        gammas.append(gamma)
        if d <= controls.step_tol:
            return Q, k, np.array(gammas)
        w = controls.stall_window
        if k >= 2 * w and min(steps[-w:]) >= min(steps[-2 * w:-w]):
            raise GroundStateError("oscillation", f"no progress over {w} iterations (step {d:.2e})")
    raise GroundStateError("max_iter", f"not converged after {controls.max_iter} iterations (step {steps[-1]:.2e})")


def _central_lobe(geometry: Geometry, Q: np.ndarray) -> tuple[float, bool]:
    """Radius of the first sign change and whether Q decreases on the lobe.

    Lattice points at the same radius are averaged first; the tolerance
    covers roundoff and the iteration's step tolerance, which leave nearby
    radii a few 1e-12 (relative) apart.
    """
    r = _radius(geometry).reshape(-1)
    q = Q.reshape(-1)
    order = np.argsort(r, kind="stable")
    r, q = r[order], q[order]
    neg = np.nonzero(q <= 0)[0]
    end = neg[0] if neg.size else q.size
    shells, start = np.unique(np.round(r[:end] / r[-1], 12), return_index=True)
    sums = np.add.reduceat(q[:end], start) if end else np.zeros(0)
    means = sums / np.diff(np.append(start, end)) if end else sums
    monotone = bool(np.all(np.diff(means) <= 1e-9 * q.max()))
    return float(r[end]) if end < r.size else float("inf"), monotone


def solve_ground_state(n: int, geometry: Geometry, controls: Optional[GroundStateControls] = None) -> GroundState:
    """Petviashvili fixed point ``Q <- gamma^theta (Delta^2 + 1)^{-1} |Q|^p Q``.

    ``p = 8/n``, ``theta = (1 + p)/p`` and
    ``gamma = <(Delta^2+1) Q, Q> / <|Q|^p Q, Q>``.  Seeds are unit-mass
    Gaussians; failed attempts are retried with the widths in
    ``controls.seed_factors``.
    """
    controls = controls or GroundStateControls()
    if geometry.dim != n:
        raise ValueError(f"geometry dimension {geometry.dim} does not match n={n}")
    r = _radius(geometry)
    res_tol = controls.residual_tol
    if res_tol is None:
        top = geometry.eigenvalues.max() if isinstance(geometry, RadialGrid) else geometry.xi4.max()
        res_tol = max(1e-8, 4 * np.finfo(float).eps * top)
    errors = []
    for factor in controls.seed_factors:
        width = controls.seed_width * factor
        seed = np.exp(-(r**2) / (2 * width**2))
        seed = seed / np.sqrt(lp_power(ComplexField(geometry, seed), 2))
        try:
            Q, iters, gammas = _petviashvili(geometry, n, seed, controls)
        except GroundStateError as exc:
            errors.append(exc)
            continue
        if Q[np.unravel_index(np.argmin(r), r.shape)] < 0:
            Q = -Q
        prof = ComplexField(geometry, Q.astype(complex), 0.0)
        res = elliptic_residual(prof, n)
        if res > res_tol:
            errors.append(GroundStateError("residual", f"residual {res:.2e} above {res_tol:.1e}"))
            continue
        M = mass(prof)
        tail = lp_power(prof.replace(np.where(geometry.boundary_mask(), Q, 0.0)), 2) / M
        if tail > controls.tail_tol:
            raise GroundStateError("resolution", f"tail mass {tail:.2e} exceeds {controls.tail_tol:.1e}; enlarge the domain")
        lobe, monotone = _central_lobe(geometry, Q)
        if not monotone:
            raise GroundStateError("shape", "profile is not nonincreasing on its central lobe")
        return GroundState(
            profile=prof,
            n=n,
            mass_Q=M,
            threshold_Mstar=threshold_mstar(M, n),
            residual=res,
            pohozaev_residuals=pohozaev_check(prof, n),
            gn_ratio_at_Q=gn_ratio(prof, M, n),
            iterations=iters,
            gamma_history=gammas,
            seed_width=width,
            lobe_radius=lobe,
            tail_mass=tail,
        )
    last = errors[-1]
    raise GroundStateError(last.reason, "; ".join(str(e) for e in errors))


def pohozaev_check(Q, n: Optional[int] = None) -> tuple[float, float]:
    """Relative defects of the two Pohozaev identities (see module docstring)."""
    f = Q.profile if isinstance(Q, GroundState) else Q
    n = f.dim if n is None else n
    M = mass(f)
    if M == 0:
        raise ValueError("Pohozaev defects are 0/0 for the zero field")
    D = sobolev_seminorm(f, 2) ** 2
    W = lp_power(f, 2.0 * (n + 4) / n)
    first = abs(D + M - W) / W
    terms = ((4 - n) / 2 * D, -n / 2 * M, n**2 / (2 * (n + 4)) * W)
    second = abs(sum(terms)) / sum(abs(t) for t in terms)
    return float(first), float(second)


def gn_ratio(f: ComplexField, mass_Q: float, n: Optional[int] = None) -> float:
    """``||f||_q^q / ((n+4)/n (M(f)/M(Q))^{4/n} ||Delta f||^2)``, ``q = 2(n+4)/n``.

    The sharp Gagliardo-Nirenberg inequality says this is at most 1, with
    equality at the ground state.  The mass enters with exponent 4/n, the only
    choice that makes both sides scale alike under ``f -> a f``.
    """
    n = f.dim if n is None else n
    M = mass(f)
    if M == 0:
        raise ValueError("GN ratio is undefined for the zero field")
    D = sobolev_seminorm(f, 2) ** 2
    if D == 0:
        raise ValueError("GN ratio is undefined when Delta f = 0")
    W = lp_power(f, 2.0 * (n + 4) / n)
    return float(W / ((n + 4) / n * (M / mass_Q) ** (4.0 / n) * D))


def threshold_mstar(mass_Q: float, n: int) -> float:
    return (0.25) ** (n / 8.0) * mass_Q


def mass_thresholds(Q: GroundState) -> dict:
    return {"M_Q": Q.mass_Q, "M_star": threshold_mstar(Q.mass_Q, Q.n)}


def scaled_profile(Q: GroundState, mass_multiple: float, time_tag: float = 0.0) -> ComplexField:
    """``sqrt(mass_multiple) Q``: initial data with mass ``mass_multiple * M(Q)``."""
    if mass_multiple < 0:
        raise ValueError("mass multiple must be nonnegative")
    return ComplexField(Q.geometry, np.sqrt(mass_multiple) * Q.profile.values, time_tag)
