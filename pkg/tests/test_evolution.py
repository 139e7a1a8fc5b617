import math

import numpy as np
import pytest

from mc4nls.conserved import drift_report, mass
from mc4nls.evolution import (EquationParams, NumericalInvalidRun, RunControls, adapt_dt, classify_outcome,
                              duhamel_residual, evolve, nonlinear_potential, step)
from mc4nls.fields import gaussian, lp_norm, sobolev_seminorm, with_mass
from mc4nls.grid import make_grid, make_radial_grid
from mc4nls.ground_state import scaled_profile
from mc4nls.linear import propagate_linear


@pytest.fixture(scope="module")
def g1():
    return make_grid(1, 256, 20.0)


def test_parameter_validation():
    with pytest.raises(ValueError):
        EquationParams(0, 1)
    with pytest.raises(ValueError):
        EquationParams(1, 2)
    assert EquationParams(2, -1).nonlinear_exponent == 4.0
    for bad in ({"t_end": -1}, {"t_end": 1, "dt_min": 1.0, "dt_max": 0.1}, {"t_end": 1, "snapshot_every": 0},
                {"t_end": 1, "c_phase": 0}, {"t_end": 1, "mass_abort": 0}):
        with pytest.raises(ValueError):
            RunControls(**bad)


def test_free_step_is_linear_flow(g1):
    f = gaussian(g1, amplitude=0.7)
    a = step(f, 0.05, EquationParams(1, 0))
    # the step runs in double, the standalone propagator in extended precision
    assert np.max(np.abs(a.values - propagate_linear(f, 0.05).values)) <= 1e-15
    with pytest.raises(ValueError):
        step(f, 0.0, EquationParams(1, 1))


@pytest.mark.parametrize("dealias", [True, False])
def test_step_conserves_mass(g1, dealias):
    f = gaussian(g1, width=0.8, amplitude=1.2)
    out = f
    for _ in range(50):
        out = step(out, 1e-3, EquationParams(1, -1), dealias)
    assert mass(out) == pytest.approx(mass(f), rel=1e-13)


def test_time_reversal(g1):
    # conj . S(dt) . conj = S(-dt) and Strang is symmetric
    p = EquationParams(1, -1)
    f = gaussian(g1, amplitude=0.9)
    f = f.replace(f.values * np.exp(0.3j * g1.x_axis))
    fwd = step(step(f, 0.01, p), 0.01, p)
    back = step(step(fwd.replace(np.conj(fwd.values)), 0.01, p), 0.01, p)
    assert np.max(np.abs(np.conj(back.values) - f.values)) < 1e-12


def test_strang_second_order(g1):
    # asymptotic once dt |xi|^4 is small on the modes carrying the error
    # (dt <~ 5e-4 here); coarser steps are pre-asymptotic
    p = EquationParams(1, -1)
    f = gaussian(g1, width=1.0, amplitude=0.8)
    T = 0.2

    def run(k):
        u = f
        for _ in range(k):
            u = step(u, T / k, p)
        return u.values

    ref = run(12800)
    errs = [np.sqrt(mass(f.replace(run(k) - ref))) for k in (800, 1600, 3200)]
    rates = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert all(1.9 < r < 2.2 for r in rates), rates


def test_nonlinear_potential_real_and_filtered(g1):
    f = gaussian(g1, width=0.2)
    V = nonlinear_potential(f.values, g1, EquationParams(1, 1), True)
    assert V.dtype == float
    V0 = nonlinear_potential(f.values, g1, EquationParams(1, 1), False)
    assert np.allclose(V0, np.abs(f.values) ** 8)


def test_adapt_dt(g1):
    f = gaussian(g1, amplitude=2.0)
    c = RunControls(t_end=1.0, dt_max=1.0, c_phase=0.05, c_curv=0.5, adaptive=True)
    expected = min(1.0, 0.05 / 2.0**8, 0.5 / sobolev_seminorm(f, 2) ** 2)
    assert adapt_dt(f, EquationParams(1, -1), c) == pytest.approx(expected)
    tiny = RunControls(t_end=1.0, dt_max=1.0, dt_min=0.5, c_phase=1e-9)
    assert adapt_dt(f, EquationParams(1, -1), tiny) == 0.5


# ---------------------------------------------------------------------------
# driver


def test_fixed_steps_land_on_t_end(g1):
    c = RunControls(t_end=0.1, dt_max=0.03, snapshot_every=2)
    rec = evolve(gaussian(g1, amplitude=0.5), EquationParams(1, 1), c)
    assert rec.steps == 4
    assert rec.times[-1] == pytest.approx(0.1, abs=1e-15)
    assert list(rec.times) == pytest.approx([0.0, 0.05, 0.1])
    assert rec.diagnostic_series[1]["dt"] == pytest.approx(0.025)
    assert rec.outcome in ("scattering", "soliton-like", "blow-up", "inconclusive")
    assert len(rec.conserved_series) == len(rec.snapshots) == len(rec.diagnostic_series)


def test_evolve_from_nonzero_time(g1):
    f = gaussian(g1, amplitude=0.5, time_tag=1.0)
    rec = evolve(f, EquationParams(1, 1), RunControls(t_end=1.2, dt_max=0.05, snapshot_every=1))
    assert rec.times[0] == 1.0 and rec.times[-1] == pytest.approx(1.2)
    with pytest.raises(ValueError):
        evolve(f, EquationParams(1, 1), RunControls(t_end=0.5))
    with pytest.raises(ValueError):
        evolve(f, EquationParams(2, 1), RunControls(t_end=1.5))


def test_probe_columns_and_z_increment(g1):
    f = gaussian(g1, amplitude=0.5)
    rec = evolve(f, EquationParams(1, 1), RunControls(t_end=0.02, dt_max=0.01, snapshot_every=1),
                 {"mass_probe": mass})
    assert rec.probe_names == ("mass_probe",)
    assert rec.column("mass_probe") == pytest.approx(rec.column("mass_probe")[0])
    q = rec.column("lq_power")
    assert rec.diagnostic_series[0]["z_increment"] == 0.0
    assert rec.diagnostic_series[1]["z_increment"] == pytest.approx(0.005 * (q[0] + q[1]))


def test_mass_abort_raises_with_partial_record(g1):
    c = RunControls(t_end=0.1, dt_max=0.01, mass_abort=1e-300)
    with pytest.raises(NumericalInvalidRun) as e:
        evolve(gaussian(g1, amplitude=0.8), EquationParams(1, -1), c)
    assert len(e.value.record.snapshots) >= 2


def test_sup_trigger_reports_blowup(ground_state_1d):
    f = scaled_profile(ground_state_1d, 1.44)
    c = RunControls(t_end=1.0, dt_max=1e-3, dt_min=1e-9, adaptive=True, snapshot_every=20,
                    sup_threshold=2.0 * lp_norm(f, math.inf))
    rec = evolve(f, EquationParams(1, -1), c)
    assert rec.outcome == "blow-up"
    assert rec.events[-1][0] == "blowup_sup"
    assert rec.final.time_tag < 1.0
    assert lp_norm(rec.final, math.inf) > 2.0 * lp_norm(f, math.inf)
    assert rec.blowup_estimate is not None


def test_standing_wave_is_soliton_like(ground_state_1d):
    Q = ground_state_1d.profile
    rec = evolve(Q, EquationParams(1, -1), RunControls(t_end=0.5, dt_max=1e-3, snapshot_every=10))
    assert rec.outcome == "soliton-like"
    # exp(-i t) Q up to the splitting error
    err = np.sqrt(mass(Q.replace(rec.final.values - np.exp(-0.5j) * Q.values)) / mass(Q))
    assert err < 1e-3
    assert drift_report(rec)["mass"] < 1e-12


def test_small_defocusing_data_scatters():
    g = make_grid(1, 1024, 160.0)
    f = with_mass(gaussian(g, width=4.0), 1e-2)
    rec = evolve(f, EquationParams(1, 1), RunControls(t_end=50, dt_max=1e-2, snapshot_every=250))
    assert rec.outcome == "scattering"


def test_radial_run_conserves_mass():
    rg = make_radial_grid(5, 256, 15.0)
    f = gaussian(rg, amplitude=0.6)
    rec = evolve(f, EquationParams(5, -1), RunControls(t_end=0.5, dt_max=1e-3, snapshot_every=100))
    assert drift_report(rec)["mass"] < 1e-10
    assert np.all(rec.conserved_series[-1].momentum == 0)


def test_record_helpers(g1):
    rec = evolve(gaussian(g1, amplitude=0.5), EquationParams(1, 1),
                 RunControls(t_end=0.1, dt_max=0.01, snapshot_every=1))
    sub = rec.subsample(3)
    assert list(sub.times) == pytest.approx(list(rec.times[::3]) + [0.1])
    assert len(sub.diagnostic_series) == len(sub.snapshots)
    with pytest.raises(RuntimeError):
        rec.set_outcome("blow-up")
    rec.outcome = None
    with pytest.raises(ValueError):
        rec.set_outcome("exploded")
    assert classify_outcome(rec)[0] in ("scattering", "soliton-like", "inconclusive")


# ---------------------------------------------------------------------------
# Duhamel


@pytest.fixture(scope="module")
def duhamel_run():
    g = make_grid(1, 512, 40.0)
    f = gaussian(g, width=3.0, amplitude=0.5)
    return evolve(f, EquationParams(1, -1), RunControls(t_end=4.0, dt_max=1e-3, snapshot_every=125))


def test_duhamel_filon(duhamel_run):
    assert duhamel_residual(duhamel_run, 0.0, 4.0, "filon") < 1e-4


def test_duhamel_simpson_converges(duhamel_run):
    # 9, 17 and 33 nodes
    errs = [duhamel_residual(duhamel_run.subsample(k), 0.0, 4.0, "simpson") for k in (4, 2, 1)]
    assert errs[0] / errs[1] > 3 and errs[1] / errs[2] > 3


def test_duhamel_errors(duhamel_run):
    with pytest.raises(ValueError):
        duhamel_residual(duhamel_run, 0.0, 4.0, "trapezoid")
    with pytest.raises(ValueError):
        duhamel_residual(duhamel_run, 0.01, 4.0)
    with pytest.raises(ValueError):
        duhamel_residual(duhamel_run, 0.0, 0.5)


def test_duhamel_linear_run_is_exact(g1):
    rec = evolve(gaussian(g1), EquationParams(1, 0), RunControls(t_end=0.4, dt_max=0.05, snapshot_every=1))
    assert duhamel_residual(rec, 0.0, 0.4) < 1e-13
