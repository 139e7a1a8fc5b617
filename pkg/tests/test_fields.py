import math

import numpy as np
import pytest

from mc4nls.conserved import mass, momentum
from mc4nls.fields import (ComplexField, LittlewoodPaleyBank, NonFiniteFieldError, boost, bump, dealias_mask,
                           gaussian, l2_inner, laplacian, lp_norm, lp_power, lp_project, nonlinearity,
                           random_smooth_field, rescale_g, sobolev_seminorm, with_mass)
from mc4nls.grid import make_grid, make_radial_grid


@pytest.fixture(scope="module")
def g1():
    return make_grid(1, 512, 20.0)


@pytest.fixture(scope="module")
def g2():
    return make_grid(2, 128, 12.0)


def test_field_validation(g1):
    with pytest.raises(ValueError):
        ComplexField(g1, np.zeros(10))
    bad = np.zeros(512, complex)
    bad[3] = np.nan
    with pytest.raises(NonFiniteFieldError):
        ComplexField(g1, bad)
    f = ComplexField(g1, np.ones(512), 1.5)
    assert f.values.dtype == np.complex128
    assert f.replace(f.values * 2).time_tag == 1.5
    assert f.replace(f.values, None).time_tag is None


@pytest.mark.parametrize("n", [1, 2])
def test_gaussian_norms(n):
    # |exp(-|x|^2/2)|^2 integrates to pi^{n/2}; |xi|^4 exp(-|xi|^2) to |S^{n-1}| Gamma((n+4)/2) / 2
    g = make_grid(n, 512 if n == 1 else 128, 12.0)
    f = gaussian(g)
    area = 2 * math.pi ** (n / 2) / math.gamma(n / 2)
    assert lp_power(f, 2) == pytest.approx(math.pi ** (n / 2), rel=1e-12)
    assert sobolev_seminorm(f, 2) ** 2 == pytest.approx(area * math.gamma((n + 4) / 2) / 2, rel=1e-12)
    assert sobolev_seminorm(f, 1) ** 2 == pytest.approx(area * math.gamma((n + 2) / 2) / 2, rel=1e-12)
    # ||g||_p^p = (2 pi / p)^{n/2}
    assert lp_power(f, 3.0) == pytest.approx((2 * math.pi / 3) ** (n / 2), rel=1e-12)
    assert lp_norm(f, math.inf) == pytest.approx(1.0)


def test_one_dimensional_h2_value(g1):
    assert sobolev_seminorm(gaussian(g1), 2) ** 2 == pytest.approx(3 * math.sqrt(math.pi) / 4, rel=1e-12)


def test_laplacian_of_gaussian(g2):
    X, Y = g2.coordinates()
    r2 = X**2 + Y**2
    assert np.max(np.abs(laplacian(gaussian(g2)) - (r2 - 2) * np.exp(-r2 / 2))) < 1e-10


def test_radial_norms_match_full():
    rg = make_radial_grid(3, 512, 12.0)
    f = gaussian(rg)
    assert mass(f) == pytest.approx(math.pi**1.5, rel=1e-10)
    # |S^2| Gamma(7/2) / 2 = 15 pi^{3/2} / 4
    assert sobolev_seminorm(f, 2) ** 2 == pytest.approx(15 * math.pi**1.5 / 4, rel=1e-6)
    assert sobolev_seminorm(f, 1) ** 2 == pytest.approx(3 * math.pi**1.5 / 2, rel=1e-6)
    with pytest.raises(ValueError):
        sobolev_seminorm(f, 0.5)


def test_lp_norm_rejects_small_p(g1):
    with pytest.raises(ValueError):
        lp_norm(gaussian(g1), 0.5)


def test_inner_product(g1):
    f = gaussian(g1)
    assert l2_inner(f, f) == pytest.approx(mass(f))


# ---------------------------------------------------------------------------
# Littlewood-Paley


def test_bump_profile():
    r = np.linspace(0, 3, 301)
    b = bump(r)
    assert np.all(b[r <= 1] == 1.0)
    assert np.all(b[r >= 2] == 0.0)
    assert np.all(np.diff(b) <= 0)
    assert bump(np.array([1.5]))[0] == pytest.approx(0.5)


def test_lp_partition_exact(g2, rng):
    f = random_smooth_field(g2, rng, bandwidth=4.0)
    lo = lp_project(f, 2.0, "leq")
    hi = lp_project(f, 2.0, "gt")
    assert np.max(np.abs(lo.values + hi.values - f.values)) < 1e-15
    # telescoping: sum of P_N over dyadic N plus the lowest piece is the identity
    bank = LittlewoodPaleyBank.for_grid(g2)
    total = lp_project(f, bank.levels[0], "leq").values.copy()
    for N in bank.levels[1:]:
        total += lp_project(f, N, "at").values
    assert np.allclose(total, f.values, atol=1e-12)


def test_lp_errors(g1):
    f = gaussian(g1)
    with pytest.raises(ValueError):
        lp_project(f, 0.0)
    with pytest.raises(ValueError):
        lp_project(f, 1.0, "between")
    with pytest.raises(ValueError):
        lp_project(gaussian(make_radial_grid(3, 64, 5.0)), 1.0)


@pytest.mark.parametrize("N", [1.0, 4.0])
def test_bernstein_bounds(g2, rng, N):
    # P_N f has spectrum in N/2 <= |xi| <= 2N
    f = random_smooth_field(g2, rng, bandwidth=8.0, window=1.5)
    p = lp_project(f, N, "at")
    m = lp_norm(p, 2)
    grad = sobolev_seminorm(p, 1)
    assert N / 2 * m <= grad * (1 + 1e-12)
    assert grad <= 2 * N * m * (1 + 1e-12)
    # sup bound through Cauchy-Schwarz on the support, |B(0, 2N)| = pi (2N)^2
    assert lp_norm(p, math.inf) <= (2 * math.pi) ** -1 * math.sqrt(math.pi * (2 * N) ** 2) * m


# ---------------------------------------------------------------------------
# symmetries


@pytest.mark.parametrize("h", [0.5, 2.0])
def test_rescale_preserves_mass_and_inverts(g1, h):
    f = gaussian(g1, width=1.5)
    r = rescale_g(f, h)
    assert mass(r) == pytest.approx(mass(f), rel=1e-10)
    back = rescale_g(r, 1.0 / h)
    assert np.max(np.abs(back.values - f.values)) < 1e-9
    # a Gaussian of width w becomes one of width w / h
    assert np.max(np.abs(r.values - h**0.5 * gaussian(g1, width=1.5 / h).values)) < 1e-9


def test_rescale_translation_and_errors(g1):
    f = gaussian(g1, width=1.0)
    moved = rescale_g(f, 1.0, x0=[2.0])
    assert np.max(np.abs(moved.values - gaussian(g1, center=[2.0]).values)) < 1e-9
    with pytest.raises(ValueError):
        rescale_g(f, 0.0)
    with pytest.raises(ValueError):
        rescale_g(gaussian(g1, width=6.0), 0.1)  # support leaves the box
    with pytest.raises(ValueError):
        rescale_g(f, 1.0, x0=[1.0, 2.0])


def test_rescale_2d(g2):
    f = gaussian(g2, width=1.5)
    r = rescale_g(f, 2.0)
    assert np.max(np.abs(r.values - 2.0 * gaussian(g2, width=0.75).values)) < 1e-9


def test_boost_modulus_and_momentum(g2):
    f = gaussian(g2, width=1.5)
    b = boost(f, 0.8, [1.0, 1.0])
    assert np.allclose(np.abs(b.values), np.abs(f.values))
    # Im int u grad(u bar) for exp(i X e.x) g is -X e M
    e = np.array([1.0, 1.0]) / math.sqrt(2)
    assert np.allclose(momentum(b), -0.8 * e * mass(f), rtol=1e-10, atol=1e-12)
    with pytest.raises(ValueError):
        boost(f, 0.9 * g2.nyquist)


# ---------------------------------------------------------------------------
# nonlinearity and helpers


def test_nonlinearity_values(g1):
    f = gaussian(g1, amplitude=0.7)
    for n in (1, 2):
        out = nonlinearity(f, -1, n)
        assert np.allclose(out.values, -(0.7 * np.exp(-g1.x_axis**2 / 2)) ** (1 + 8 / n))
    z = ComplexField(g1, np.zeros(512))
    assert np.all(nonlinearity(z, 1).values == 0)


def test_dealiasing(g1):
    mask = dealias_mask(g1)
    assert mask.sum() == 2 * (512 // 3) + 1
    f = gaussian(g1, width=0.05)
    spec = np.fft.fft(nonlinearity(f, 1, dealias=True).values)
    assert np.max(np.abs(spec[~mask])) < 1e-12


def test_with_mass(g1):
    f = with_mass(gaussian(g1), 3.0)
    assert mass(f) == pytest.approx(3.0)
    with pytest.raises(ValueError):
        with_mass(ComplexField(g1, np.zeros(512)), 1.0)


def test_random_field_deterministic(g2):
    a = random_smooth_field(g2, np.random.default_rng(7))
    b = random_smooth_field(g2, np.random.default_rng(7))
    c = random_smooth_field(g2, np.random.default_rng(8))
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)
    assert lp_norm(a, math.inf) == pytest.approx(1.0)
    assert mass(ComplexField(g2, a.values * g2.boundary_mask(0.125))) < 1e-12 * mass(a)
