"""Reference TRPS from two-time correlators and an explicit double integral.

The correlator ``C(t', tau) = <O^dag(t') O(t' - tau)>`` follows from the
quantum regression theorem: the operator ``O rho(s)`` taken at ``s = t' - tau``
is propagated with the system generator from ``s`` to ``t'`` and traced
against ``O^dag``. Then

    S(omega, t) = (delta_s / pi) int_{t0}^{t} dt' exp(-delta_s (t - t'))
                  Re int_0^{tau_max} dtau exp(-delta_s tau / 2 - i omega tau) C(t', tau)

with the trapezoidal rule on both axes. Before ``t0`` nothing is excited, so
starting the outer integral at ``t0`` loses nothing.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass

import numpy as np

from . import threecavity as tc
from .quantum import (
    LindbladGenerator,
    ShapeError,
    Stepper,
    TimeGrid,
    dag,
    propagate,
    rk4_step,
    state_violations,
)
from .sensor import DEFAULT_EPSILON, TRPSMap, sensor_trps


# frequencies per kernel block in the delay quadrature
OMEGA_BLOCK = 64


class ResolutionWarning(UserWarning):
    """Delay horizon too short for the requested spectral resolution."""


@dataclass
class CorrelatorGrid:
    """``values[i, j] = C(times[i], delays[j])``; cells with ``delays[j] > times[i] - t0`` are
    outside the domain and hold 0 with ``valid`` False."""

    times: np.ndarray
    delays: np.ndarray
    values: np.ndarray
    valid: np.ndarray
    steps: int = 0

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])


def default_tau_max(delta_s: float, rabi_period: float) -> float:
    """Delay horizon where the resolution kernel has fallen below e^-5, plus one Rabi period."""
    return 10.0 / delta_s + rabi_period


def correlator_steps(n_times: int, n_delays: int) -> int:
    """Single-step propagations the correlator needs on an ``n_times`` x ``n_delays`` grid."""
    k = min(n_delays, n_times) - 1
    return k * n_times - k * (k + 1) // 2


def _advance_shifted(
    gen: LindbladGenerator,
    stepper: Stepper,
    x: np.ndarray,
    starts: np.ndarray,
    stage_h: tuple[np.ndarray, np.ndarray, np.ndarray] | None,
    first_step: int,
) -> np.ndarray:
    """Advance member ``m`` of ``x`` by one step starting at ``starts[m]``.

    ``starts`` increases with ``m``. Piecewise-static generators are applied
    segment by segment; otherwise ``stage_h`` holds effective Hamiltonians
    for every grid step and member ``m`` uses step ``first_step + m``.
    """
    dt = stepper.dt
    if gen.piecewise_static:
        out = np.empty_like(x)
        # group runs of members sharing a segment; straddling steps go alone
        keys = [
            None if stepper.straddles(float(t)) else gen.segment(float(t) + stepper._tol)
            for t in starts
        ]
        lo = 0
        while lo < len(x):
            hi = lo + 1
            while hi < len(x) and keys[hi] == keys[lo] and keys[lo] is not None:
                hi += 1
            out[lo:hi] = stepper.step(float(starts[lo]), x[lo:hi])
            lo = hi
        return out
    hs, hm, he = stage_h
    sl = slice(first_step, first_step + len(x))
    return rk4_step(gen, hs[sl], hm[sl], he[sl], x, dt)


def two_time_correlator(
    gen: LindbladGenerator,
    rho0: np.ndarray,
    observable: np.ndarray,
    t_grid: TimeGrid,
    delays: int | np.ndarray,
    *,
    substeps: int = 1,
    check_states: bool = True,
) -> CorrelatorGrid:
    """``<O^dag(t') O(t' - tau)>`` for every t' in ``t_grid`` and tau in ``delays``.

    ``delays`` is a count (multiples of ``t_grid.dt`` from 0) or an array of
    such multiples. The forward pass for ``rho(s)`` runs on a grid
    ``substeps`` times finer than ``t_grid`` and is sampled on ``t_grid``.
    """
    observable = np.asarray(observable, dtype=complex)
    if observable.shape != (gen.dim, gen.dim):
        raise ShapeError(f"observable shape {observable.shape} != {(gen.dim, gen.dim)}")
    dt = t_grid.dt
    if np.isscalar(delays):
        n_delays = int(delays)
    else:
        delays = np.asarray(delays, dtype=float)
        idx = delays / dt
        if delays[0] != 0 or np.any(np.abs(idx - np.arange(delays.size)) > 1e-9):
            raise ValueError("delays must be 0, dt, 2 dt, ... on the time grid")
        n_delays = delays.size
    if n_delays < 1:
        raise ValueError("need at least the zero delay")

    fine = TimeGrid(t_grid.t0, t_grid.t1, dt / substeps)
    states = propagate(rho0, gen, fine)
    problems = state_violations(states) if check_states else []
    if problems:
        warnings.warn("forward pass: " + "; ".join(problems), RuntimeWarning, stacklevel=2)
    states = states[::substeps]
    times = t_grid.times
    n_times = times.size

    values = np.zeros((n_times, n_delays), dtype=complex)
    valid = np.zeros((n_times, n_delays), dtype=bool)
    o_dag = dag(observable)
    x = observable @ states
    values[:, 0] = np.einsum("ij,mji->m", o_dag, x)
    valid[:, 0] = True

    stepper = Stepper(gen, dt)
    stage_h = None
    if not gen.piecewise_static:
        staged = [stepper.stage_times(float(t)) for t in times[:-1]]
        stage_h = tuple(
            np.stack([gen.effective_hamiltonian(st[k]) for st in staged]) for k in range(3)
        )
    steps = 0
    for j in range(1, min(n_delays, n_times)):
        members = n_times - j
        x = x[:members]
        x = _advance_shifted(gen, stepper, x, times[j - 1 : j - 1 + members], stage_h, j - 1)
        steps += members
        values[j:, j] = np.einsum("ij,mji->m", o_dag, x)
        valid[j:, j] = True
    return CorrelatorGrid(times, dt * np.arange(n_delays), values, valid, steps)


def trapezoid_weights(corr: CorrelatorGrid) -> np.ndarray:
    """Per-row trapezoid weights over each row's valid delays."""
    dt = corr.dt
    w = np.where(corr.valid, dt, 0.0)
    last = corr.valid.sum(axis=1) - 1
    rows = np.arange(w.shape[0])
    w[:, 0] = 0.5 * dt
    w[rows, last] = np.where(last > 0, 0.5 * dt, 0.0)
    return w


def output_indices(corr_times: np.ndarray, t_grid) -> np.ndarray:
    """Positions of the requested output times on the correlator grid."""
    if t_grid is None:
        return np.arange(corr_times.size)
    wanted = t_grid.times if isinstance(t_grid, TimeGrid) else np.asarray(t_grid, dtype=float)
    dt = corr_times[1] - corr_times[0]
    idx = np.rint((wanted - corr_times[0]) / dt).astype(int)
    if np.any(idx < 0) or np.any(idx >= corr_times.size) or np.any(
        np.abs(corr_times[np.clip(idx, 0, corr_times.size - 1)] - wanted) > 1e-6 * dt
    ):
        raise ValueError("output times must lie on the correlator time grid")
    return idx


def analytic_trps(
    corr: CorrelatorGrid,
    omega_grid,
    t_grid=None,
    delta_s: float = 50.0,
    *,
    label: str = "O",
    counter: dict | None = None,
) -> TRPSMap:
    """Double-integral TRPS from a correlator grid.

    ``t_grid`` (a TimeGrid or array) selects output times, which must be
    correlator times; None keeps them all. The outer integral always runs
    over the full correlator grid.
    """
    if not delta_s > 0:
        raise ValueError(f"resolution must be positive, got {delta_s}")
    omegas = np.asarray(omega_grid, dtype=float)
    tau = corr.delays
    tau_max = float(tau[-1]) if tau.size else 0.0
    if tau_max < 5 * (2 / delta_s):
        warnings.warn(
            f"delay horizon {tau_max:.3g} ns is short for delta_s={delta_s:g} GHz "
            f"(want >= {10 / delta_s:.3g} ns)",
            ResolutionWarning,
            stacklevel=2,
        )
    weighted = corr.values * trapezoid_weights(corr)
    damping = np.exp(-0.5 * delta_s * tau)
    inner = np.empty((corr.times.size, omegas.size))
    for lo in range(0, omegas.size, OMEGA_BLOCK):
        block = omegas[lo : lo + OMEGA_BLOCK]
        kernel = damping[:, None] * np.exp(-1j * np.outer(tau, block))
        inner[:, lo : lo + block.size] = np.real(weighted @ kernel)

    # outer trapezoid of exp(-delta_s (t - t')) * inner(t') as a running sum
    dt = corr.dt
    decay = math.exp(-delta_s * dt)
    acc = np.zeros(omegas.size)
    outer = np.empty_like(inner)
    outer[0] = 0.0
    for n in range(1, corr.times.size):
        acc = decay * acc + 0.5 * dt * (decay * inner[n - 1] + inner[n])
        outer[n] = acc
    if counter is not None:
        counter["quadrature_evals"] = (
            counter.get("quadrature_evals", 0) + corr.values.size * omegas.size
        )
    spectrum = (delta_s / math.pi) * outer
    keep = output_indices(corr.times, t_grid)
    return TRPSMap(
        observable=label,
        resolution=delta_s,
        times=corr.times[keep],
        frequencies=omegas,
        intensities=spectrum[keep],
        method="analytic",
    )


def analytic_spectrum(
    gen: LindbladGenerator,
    rho0: np.ndarray,
    observable: np.ndarray,
    omega_grid,
    t_grid: TimeGrid,
    delta_s: float,
    tau_max: float,
    *,
    substeps: int = 1,
    label: str = "O",
    stride: int = 1,
    counter: dict | None = None,
) -> TRPSMap:
    n_delays = min(len(t_grid), int(math.ceil(tau_max / t_grid.dt - 1e-9)) + 1)
    corr = two_time_correlator(gen, rho0, observable, t_grid, n_delays, substeps=substeps)
    if counter is not None:
        counter["correlator_steps"] = counter.get("correlator_steps", 0) + corr.steps
    out_times = corr.times[::stride]
    return analytic_trps(corr, omega_grid, out_times, delta_s, label=label, counter=counter)


def analytic_trps_for_model(
    schedule: tc.DetuningSchedule,
    params: tc.ModelParams,
    observable,
    omega_grid,
    t_grid: TimeGrid,
    delta_s: float,
    *,
    substeps: int = 1,
    tau_max: float | None = None,
    initial: str = "e",
    label: str | None = None,
    stride: int = 1,
    counter: dict | None = None,
) -> TRPSMap:
    """Analytic TRPS of the three-cavity model on the correlator grid ``t_grid``."""
    gen = tc.build_time_dependent_generator(schedule, params)
    if tau_max is None:
        tau_max = default_tau_max(delta_s, rabi_period(schedule, params))
    name = label or (observable if isinstance(observable, str) else repr(dict(observable)))
    return analytic_spectrum(
        gen,
        tc.initial_state(initial),
        tc.mode_operator(observable),
        omega_grid,
        t_grid,
        delta_s,
        tau_max,
        substeps=substeps,
        label=name,
        stride=stride,
        counter=counter,
    )


def rabi_period(schedule: tc.DetuningSchedule, params: tc.ModelParams) -> float:
    """``pi / g_eff`` at the initial detuning, or ``pi / g`` when g_eff vanishes."""
    g_eff = abs(tc.effective_coupling(schedule.delta_initial, params.eta, params.g))
    return math.pi / (g_eff if g_eff > 1e-9 * params.g else params.g)


def no_switch_case(n_times: int, dt: float | None = None):
    """Static resonant three-cavity system with an ``n_times``-point grid."""
    schedule = tc.DetuningSchedule.constant(1.2 * tc.DEFAULT_PARAMS.eta)
    step = tc.default_step(schedule, tc.DEFAULT_PARAMS, 64) if dt is None else dt
    grid = TimeGrid(0.0, (n_times - 1) * step, step)
    return schedule, tc.DEFAULT_PARAMS, grid


def runtime_profile(
    method: str,
    n_t: int,
    n_tau: int,
    n_omega: int,
    *,
    delta_s: float = 50.0,
    counter: dict | None = None,
    chunk: int | None = None,
) -> float:
    """Wall-clock seconds for one full TRPS evaluation of the no-switch case.

    ``n_t`` counts time points at a fixed step, so the window grows with it;
    the sensor method ignores ``n_tau``.
    """
    sizes = (n_t, n_tau, n_omega) if method == "analytic" else (n_t, n_omega)
    if min(sizes) < 16:
        raise ValueError(f"grid sizes must be >= 16, got {sizes}")
    schedule, params, grid = no_switch_case(n_t)
    omegas = np.linspace(-700.0, 700.0, n_omega)
    with warnings.catch_warnings():
        # benchmark grids are sized for cost, not spectral accuracy
        warnings.simplefilter("ignore", ResolutionWarning)
        return _timed_run(method, schedule, params, grid, n_tau, omegas, delta_s, counter, chunk)


def _timed_run(method, schedule, params, grid, n_tau, omegas, delta_s, counter, chunk) -> float:
    start = time.perf_counter()
    if method == "analytic":
        gen = tc.build_time_dependent_generator(schedule, params)
        corr = two_time_correlator(
            gen, tc.initial_state("e"), tc.SIGMA, grid, n_tau, check_states=False
        )
        if counter is not None:
            counter["correlator_steps"] = counter.get("correlator_steps", 0) + corr.steps
        analytic_trps(corr, omegas, None, delta_s, counter=counter)
    elif method == "sensor":
        sensor_trps(
            schedule,
            params,
            "sigma",
            omegas,
            grid,
            delta_s,
            DEFAULT_EPSILON,
            check_states=False,
            counter=counter,
            chunk=chunk,
        )
    else:
        raise ValueError(f"unknown method {method!r}; expected 'analytic' or 'sensor'")
    return time.perf_counter() - start
