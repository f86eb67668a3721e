from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.signal import find_peaks

from trps import threecavity as tc
from trps.analytic import (
    CorrelatorGrid,
    ResolutionWarning,
    analytic_spectrum,
    analytic_trps,
    analytic_trps_for_model,
    correlator_steps,
    default_tau_max,
    output_indices,
    rabi_period,
    trapezoid_weights,
    two_time_correlator,
)
from trps.quantum import ShapeError, TimeGrid, assemble_generator, dag, ladder_operators, projector, propagate
from trps.sensor import sensor_spectrum

KAPPA, OMEGA_C = 20.0, 30.0
(CAV,) = ladder_operators(1)


def cavity_generator():
    return assemble_generator(OMEGA_C * dag(CAV) @ CAV, [(CAV, KAPPA)])


def model_correlator(schedule, duration, n_delays, substeps=8):
    fine = tc.time_grid(schedule, tc.DEFAULT_PARAMS, duration, multiple_of=substeps)
    grid = TimeGrid(0.0, fine.t1, fine.dt * substeps)
    gen = tc.build_time_dependent_generator(schedule)
    return two_time_correlator(gen, tc.initial_state("e"), tc.SIGMA, grid, n_delays, substeps=substeps)


def fwhm(freqs, values):
    """Full width at half maximum with linear interpolation of the crossings."""
    half = values.max() / 2
    above = np.flatnonzero(values >= half)
    lo, hi = above[0], above[-1]
    left = np.interp(half, [values[lo - 1], values[lo]], [freqs[lo - 1], freqs[lo]])
    right = np.interp(half, [values[hi + 1], values[hi]], [freqs[hi + 1], freqs[hi]])
    return right - left


def test_zero_delay_column_is_population():
    s = tc.DetuningSchedule("step", 480.0, 0.0, t_switch=0.03)
    corr = model_correlator(s, 0.06, 20)
    fine = tc.time_grid(s, tc.DEFAULT_PARAMS, 0.06, multiple_of=8)
    pop = tc.populations(propagate(tc.initial_state("e"), tc.build_time_dependent_generator(s), fine))
    assert np.allclose(corr.values[:, 0].real, pop["sigma"][::8], atol=1e-14)
    assert np.max(np.abs(corr.values[:, 0].imag)) < 1e-14


def test_damped_cavity_correlator_closed_form():
    grid = TimeGrid(0.0, 0.3, 1e-4)
    corr = two_time_correlator(cavity_generator(), projector(2, 1), CAV, grid, 500)
    t, tau = np.meshgrid(corr.times, corr.delays, indexing="ij")
    exact = np.exp(1j * OMEGA_C * tau) * np.exp(-KAPPA * (2 * t - tau) / 2)
    assert np.max(np.abs(np.where(corr.valid, corr.values - exact, 0))) < 1e-6
    # entries with t' < tau are outside the window
    assert not np.any(corr.valid & (tau > t + 1e-12))


def test_correlator_depends_only_on_elapsed_time_for_static_system():
    gen = cavity_generator()
    a = two_time_correlator(gen, projector(2, 1), CAV, TimeGrid(0.0, 0.05, 1e-4), 100)
    b = two_time_correlator(gen, projector(2, 1), CAV, TimeGrid(0.2, 0.25, 1e-4), 100)
    assert np.allclose(a.values, b.values, atol=1e-14)


@pytest.mark.filterwarnings("ignore::trps.analytic.ResolutionWarning")
def test_zero_correlator_gives_zero_spectrum():
    times = np.linspace(0, 0.1, 101)
    delays = times[:50] - times[0]
    corr = CorrelatorGrid(times, delays, np.zeros((101, 50), complex), np.ones((101, 50), bool))
    m = analytic_trps(corr, np.linspace(-50, 50, 11), None, 200.0)
    assert np.all(m.intensities == 0.0)


@pytest.mark.parametrize("delta_s", [5.0, 20.0, 50.0])
def test_time_integrated_lorentzian_width(delta_s):
    om = np.linspace(-170, 230, 401)
    m = analytic_spectrum(
        cavity_generator(), projector(2, 1), CAV, om, TimeGrid(0, 2.5, 1e-3), delta_s, 10 / delta_s, substeps=10
    )
    s = m.time_integrated()
    assert om[np.argmax(s)] == pytest.approx(OMEGA_C)
    assert fwhm(om, s) == pytest.approx(KAPPA + delta_s, rel=0.05)


def test_agrees_with_sensor_method_on_damped_cavity():
    om = np.linspace(-170, 230, 81)
    gen = cavity_generator()
    analytic = analytic_spectrum(gen, projector(2, 1), CAV, om, TimeGrid(0, 0.6, 1e-3), 20.0, 0.5, substeps=10)
    sensor = sensor_spectrum(gen, projector(2, 1), CAV, om, TimeGrid(0, 0.6, 1e-4), 20.0, stride=10)
    scale = analytic.intensities.max()
    assert np.max(np.abs(analytic.intensities - sensor.intensities)) < 1e-3 * scale


def cauchy_schwarz_excess(substeps):
    n_delays = 1600 // substeps
    corr = model_correlator(tc.DetuningSchedule("step", 480.0, 0.0, t_switch=0.05), 0.1, n_delays, substeps)
    pop = corr.values[:, 0].real
    n = corr.times.size
    excess = 0.0
    for j in range(1, corr.delays.size):
        lhs = np.abs(corr.values[j:, j]) ** 2
        excess = max(excess, float(np.max(lhs - pop[j:] * pop[: n - j])))
    return excess


def test_cauchy_schwarz_bound():
    """|C(t', tau)|^2 <= n(t') n(t' - tau) up to RK4 truncation, which must
    shrink at fourth order as the correlator grid is refined."""
    coarse, fine = cauchy_schwarz_excess(8), cauchy_schwarz_excess(4)
    assert coarse < 1e-7
    assert fine < coarse / 8


def test_short_horizon_warns():
    corr = model_correlator(tc.DetuningSchedule.constant(480.0), 0.02, 10)
    with pytest.warns(ResolutionWarning):
        analytic_trps(corr, [0.0], None, 50.0)


@pytest.mark.filterwarnings("ignore::trps.analytic.ResolutionWarning")
def test_spectrum_is_causal():
    """A later switch cannot change the spectrum before it happens."""
    om = np.linspace(-100, 100, 21)
    fine = tc.time_grid(tc.DetuningSchedule("step", 480.0, 0.0, 0.06), tc.DEFAULT_PARAMS, 0.1, multiple_of=8)
    grid = TimeGrid(0.0, fine.t1, fine.dt * 8)
    maps = [
        analytic_trps_for_model(s, tc.DEFAULT_PARAMS, "sigma", om, grid, 50.0, substeps=8)
        for s in (tc.DetuningSchedule.constant(480.0), tc.DetuningSchedule("step", 480.0, 0.0, 0.06))
    ]
    before = maps[0].times <= 0.06 + 1e-12
    assert np.array_equal(maps[0].intensities[before], maps[1].intensities[before])
    assert not np.allclose(maps[0].intensities[~before], maps[1].intensities[~before])


@pytest.mark.filterwarnings("ignore::trps.analytic.ResolutionWarning")
def test_doublet_develops_after_first_rabi_cycle():
    s = tc.DetuningSchedule.constant(480.0)
    fine = tc.time_grid(s, tc.DEFAULT_PARAMS, 0.15, multiple_of=8)
    grid = TimeGrid(0.0, fine.t1, fine.dt * 8)
    om = np.linspace(-100, 100, 201)
    m = analytic_trps_for_model(s, tc.DEFAULT_PARAMS, "sigma", om, grid, 20.0, substeps=8, tau_max=0.5)
    early = m.intensities[m.time_index(0.02)]
    late = m.intensities[m.time_index(0.15)]
    peaks_early, _ = find_peaks(early, prominence=0.02 * early.max())
    peaks_late, _ = find_peaks(late, prominence=0.02 * late.max())
    assert list(om[peaks_early]) == [0.0]
    top = om[peaks_late[np.argsort(late[peaks_late])[-2:]]]
    assert sorted(np.sign(top)) == [-1.0, 1.0]
    assert late[m.frequency_index(0.0)] < 0.8 * late.max()


@pytest.mark.slow
def test_quadrature_converged_on_gaussian_fall():
    t_s = tc.switch_phase_time("first-valley", 480.0)
    s = tc.DetuningSchedule("gaussian-fall", 480.0, 0.0, t_s, 0.003)
    fine = tc.time_grid(s, tc.DEFAULT_PARAMS, 0.2, multiple_of=8)
    om = np.linspace(-150, 150, 31)
    maps = []
    for substeps in (8, 4):
        grid = TimeGrid(0.0, fine.t1, fine.dt * substeps)
        m = analytic_trps_for_model(s, tc.DEFAULT_PARAMS, "b", om, grid, 50.0, substeps=substeps)
        maps.append(m.intensities)
    coarse, finer = maps[0], maps[1][::2]
    assert np.max(np.abs(coarse - finer)) < 5e-3 * finer.max()


@pytest.mark.filterwarnings("ignore::trps.analytic.ResolutionWarning")
def test_counters_match_correlator_cost():
    counter = {}
    fine = tc.time_grid(tc.DetuningSchedule.constant(480.0), tc.DEFAULT_PARAMS, 0.03, multiple_of=8)
    grid = TimeGrid(0.0, fine.t1, fine.dt * 8)
    om = np.linspace(-50, 50, 7)
    m = analytic_trps_for_model(
        tc.DetuningSchedule.constant(480.0), tc.DEFAULT_PARAMS, "b", om, grid, 50.0, substeps=8, counter=counter, tau_max=0.2
    )
    n_t = len(grid)
    n_tau = min(n_t, int(math.ceil(0.2 / grid.dt - 1e-9)) + 1)
    assert counter["correlator_steps"] == correlator_steps(n_t, n_tau)
    assert counter["correlator_steps"] == sum(n_t - j for j in range(1, min(n_tau, n_t)))
    assert counter["quadrature_evals"] == n_t * n_tau * om.size
    assert m.intensities.shape == (n_t, om.size)


def test_trapezoid_weights_cover_valid_delays():
    corr = model_correlator(tc.DetuningSchedule.constant(480.0), 0.01, 5)
    w = trapezoid_weights(corr)
    dt = corr.dt
    assert w[0].sum() == 0.0
    assert w[1].sum() == pytest.approx(dt)
    assert w[-1].sum() == pytest.approx(4 * dt)


def test_output_index_selection():
    times = np.arange(10) * 0.1
    assert list(output_indices(times, times[::3])) == [0, 3, 6, 9]
    with pytest.raises(ValueError):
        output_indices(times, [0.05])


def test_argument_validation():
    gen = cavity_generator()
    grid = TimeGrid(0.0, 0.01, 1e-3)
    with pytest.raises(ShapeError):
        two_time_correlator(gen, projector(2, 1), np.eye(3), grid, 3)
    with pytest.raises(ValueError):
        two_time_correlator(gen, projector(2, 1), CAV, grid, [0.0, 0.0015])
    with pytest.raises(ValueError):
        two_time_correlator(gen, projector(2, 1), CAV, grid, 0)
    corr = two_time_correlator(gen, projector(2, 1), CAV, grid, 3)
    with pytest.raises(ValueError):
        analytic_trps(corr, [0.0], None, 0.0)


def test_default_horizon_and_period():
    assert default_tau_max(50.0, 0.1) == pytest.approx(0.3)
    g_eff = tc.effective_coupling(480.0, 400.0, 50.0)
    assert rabi_period(tc.DetuningSchedule.constant(480.0), tc.DEFAULT_PARAMS) == pytest.approx(math.pi / g_eff)
    assert rabi_period(tc.DetuningSchedule.constant(0.0), tc.DEFAULT_PARAMS) == pytest.approx(math.pi / 50.0)
