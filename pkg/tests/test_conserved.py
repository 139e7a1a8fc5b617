import math

import numpy as np
import pytest

from mc4nls.conserved import (ConservedSnapshot, boost_polynomial, drift_report, energy, energy_parts, gn_kappa,
                              mass, momentum, potential_coefficient, snapshot)
from mc4nls.fields import ComplexField, boost, gaussian, random_smooth_field, with_mass
from mc4nls.grid import make_grid, make_radial_grid


@pytest.fixture(scope="module")
def g1():
    return make_grid(1, 512, 20.0)


def test_potential_coefficient():
    assert potential_coefficient(1, -1) == pytest.approx(-0.1)
    assert potential_coefficient(2, 1) == pytest.approx(1 / 6)
    assert potential_coefficient(5, -1) == pytest.approx(-5 / 18)


def test_gaussian_energy_1d(g1):
    # 1/2 ||g''||^2 = 3 sqrt(pi) / 8 and ||g||_10^10 = sqrt(2 pi / 10)
    f = gaussian(g1)
    kin, pot = energy_parts(f, -1)
    assert kin == pytest.approx(3 * math.sqrt(math.pi) / 8, rel=1e-12)
    assert pot == pytest.approx(-0.1 * math.sqrt(math.pi / 5), rel=1e-12)
    assert energy(f, -1) == pytest.approx(kin + pot)
    assert energy_parts(f, 0)[1] == 0.0


def test_constant_field_energy():
    g = make_grid(1, 64, 3.0)
    A = 0.7
    f = ComplexField(g, np.full(64, A, complex))
    assert energy(f, 1) == pytest.approx(0.1 * A**10 * 6.0, rel=1e-12)
    assert np.allclose(momentum(f), 0.0)


def test_gaussian_energy_2d():
    g = make_grid(2, 128, 12.0)
    f = gaussian(g, amplitude=0.5)
    # 1/2 ||Delta g||^2 = pi A^2 Gamma(3) / 2 ; ||g||_6^6 = A^6 pi / 3
    kin, pot = energy_parts(f, 1)
    assert kin == pytest.approx(0.5 * 0.25 * 2 * math.pi, rel=1e-12)
    assert pot == pytest.approx(1 / 6 * 0.5**6 * math.pi / 3, rel=1e-12)


def test_momentum_of_modulated_gaussian(g1):
    f = gaussian(g1, width=1.5)
    for k in (0.4, -1.1):
        assert momentum(boost(f, k))[0] == pytest.approx(-k * mass(f), rel=1e-12)


def test_snapshot_and_radial_flag(g1):
    f = gaussian(g1, amplitude=0.9)
    s = snapshot(f, -1, 2.5)
    assert s.t == 2.5 and not s.radial
    assert s.kinetic == pytest.approx(energy_parts(f, -1)[0])
    row = s.as_row()
    assert set(row) == {"t", "mass", "energy", "mom_1"}
    r = snapshot(gaussian(make_radial_grid(5, 64, 8.0)), -1)
    assert r.radial and np.all(r.momentum == 0) and r.momentum.shape == (5,)


def _series(values):
    return [ConservedSnapshot(float(i), m, np.array([p]), e, 1.0) for i, (m, p, e) in enumerate(values)]


def test_drift_report_values():
    s = _series([(2.0, 0.5, 3.0), (2.0 + 2e-10, 0.5, 3.0 - 6e-9), (2.0 - 4e-10, 0.5 + 1e-9, 3.0)])
    d = drift_report(s)
    assert d["mass"] == pytest.approx(2e-10)
    assert d["energy"] == pytest.approx(2e-9)
    # momentum scale: max(|p0|, M0 N_est) with N_est = (2 * kinetic / M0)^{1/4} = 1
    assert d["momentum"] == pytest.approx(1e-9 / 2.0)
    with pytest.raises(ValueError):
        drift_report(s[:1])


def test_drift_report_zero_energy_uses_kinetic_scale():
    s = [ConservedSnapshot(0.0, 1.0, np.zeros(1), 0.0, 4.0), ConservedSnapshot(1.0, 1.0, np.zeros(1), 1e-8, 4.0)]
    assert drift_report(s)["energy"] == pytest.approx(2.5e-9)


# ---------------------------------------------------------------------------
# boost polynomial


@pytest.mark.parametrize("n", [1, 2])
@pytest.mark.parametrize("lam", [-1, 1])
def test_boost_polynomial_identity(n, lam, rng):
    g = make_grid(n, 256 if n == 1 else 64, 12.0 if n == 1 else 8.0)
    f = random_smooth_field(g, rng, bandwidth=1.5)
    direction = None if n == 1 else [0.6, 0.8]
    P = boost_polynomial(f, lam, direction)
    for X in (-1.3, -0.2, 0.5, 2.0):
        direct = 2 * energy(boost(f, X, direction), lam)
        assert P(X) == pytest.approx(direct, rel=1e-10, abs=1e-12)
    assert P.c0 == pytest.approx(2 * energy(f, lam))
    assert P.c4 == pytest.approx(mass(f))


def test_real_field_has_even_polynomial(g1):
    P = boost_polynomial(gaussian(g1, width=1.3), -1)
    assert abs(P.c1) < 1e-12 and abs(P.c3) < 1e-12
    assert P.c2 > 0


def test_gn_kappa():
    assert gn_kappa(0.5, 2.0, 1) == pytest.approx(0.25**4)
    assert gn_kappa(0.5, 2.0, 4) == pytest.approx(0.25)
    assert gn_kappa(3.0, 3.0, 2) == 1.0


def test_gap_nonnegative_below_threshold(ground_state_1d, rng):
    g = ground_state_1d.geometry
    MQ = ground_state_1d.mass_Q
    X = np.linspace(-3, 3, 61)
    worst = np.inf
    for _ in range(20):
        f = with_mass(random_smooth_field(g, rng, bandwidth=2.0, window=2.0), 0.8 * MQ)
        P = boost_polynomial(f, -1)
        kappa = gn_kappa(mass(f), MQ, 1)
        gap = P.gap(X, kappa)
        worst = min(worst, float(gap.min() / P.kinetic2))
        # consequence at X = 0: E >= 1/2 (1 - kappa) ||Delta u||^2
        assert energy(f, -1) >= 0.5 * (1 - kappa) * P.kinetic2 * (1 - 1e-9)
    assert worst >= -1e-9


def test_boost_polynomial_radial_rejected():
    with pytest.raises(ValueError):
        boost_polynomial(gaussian(make_radial_grid(3, 32, 5.0)), 1)
