"""Time-resolved physical spectra from weakly coupled damped sensor modes.

A sensor is one extra bosonic mode ``zeta`` at frequency ``omega_k`` with
linewidth ``Gamma`` that hops excitations to and from the observed system
operator ``O`` with strength ``epsilon``. Starting from an empty sensor, its
population obeys

    <n_k(t)> = 2 epsilon^2 pi / Gamma * S_O(omega_k, t, Gamma)

to leading order in epsilon, so one propagation per frequency yields one
column of the spectrum. Frequencies are propagated together as a batch of
independent joint systems; nothing is shared between batch members.
"""

from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import threecavity as tc
from .quantum import (
    LindbladGenerator,
    ShapeError,
    Stepper,
    TimeGrid,
    assemble_generator,
    check_step,
    dag,
    state_violations,
)

log = logging.getLogger(__name__)

DEFAULT_EPSILON = 1e-3


class WeakCouplingWarning(UserWarning):
    """Sensor coupling not small against the system scales."""


class PropagationError(RuntimeError):
    def __init__(self, omega_k: float, reason: str):
        super().__init__(f"propagation failed at omega_k={omega_k:g} GHz: {reason}")
        self.omega_k = omega_k


@dataclass(frozen=True)
class SensorConfig:
    omega_k: float
    linewidth: float
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        if not self.linewidth > 0:
            raise ValueError(f"sensor linewidth must be positive, got {self.linewidth}")
        if not self.epsilon >= 0:
            raise ValueError(f"sensor coupling must be nonnegative, got {self.epsilon}")

    @property
    def normalization(self) -> float:
        """Factor turning sensor population into spectral intensity."""
        return self.linewidth / (2 * self.epsilon**2 * math.pi)


def weak_coupling_message(epsilon: float, linewidth: float, system_scale: float) -> str | None:
    """Explain why ``epsilon`` is too strong, or return None if it is fine."""
    limit = 1e-3 * min(system_scale, linewidth)
    if epsilon > limit:
        return (
            f"sensor coupling epsilon={epsilon:g} GHz exceeds 1e-3*min(g, Gamma)={limit:g} GHz; "
            "the sensor may perturb the dynamics"
        )
    return None


@dataclass
class TRPSMap:
    """Spectral intensity ``S_O(omega, t, delta_s)`` on a (time, frequency) grid.

    ``intensities[i, k]`` belongs to ``times[i]`` and ``frequencies[k]``.
    ``raw`` holds sensor populations when the map came from sensors.
    """

    observable: str
    resolution: float
    times: np.ndarray
    frequencies: np.ndarray
    intensities: np.ndarray
    method: str = "sensor"
    epsilon: float | None = None
    raw: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.frequencies = np.asarray(self.frequencies, dtype=float)
        self.intensities = np.asarray(self.intensities, dtype=float)
        if self.intensities.shape != (self.times.size, self.frequencies.size):
            raise ShapeError(
                f"intensities {self.intensities.shape} do not match grids "
                f"({self.times.size}, {self.frequencies.size})"
            )

    def time_integrated(self) -> np.ndarray:
        """Spectrum a spectrometer would accumulate over the whole window."""
        return np.trapezoid(self.intensities, self.times, axis=0)

    def frequency_integrated(self) -> np.ndarray:
        return np.trapezoid(self.intensities, self.frequencies, axis=1)

    def time_index(self, t: float) -> int:
        return int(np.argmin(np.abs(self.times - t)))

    def frequency_index(self, omega: float) -> int:
        return int(np.argmin(np.abs(self.frequencies - omega)))


def _pad(op: np.ndarray, extra: int = 1) -> np.ndarray:
    d = op.shape[-1]
    out = np.zeros(op.shape[:-2] + (d + extra, d + extra), dtype=complex)
    out[..., :d, :d] = op
    return out


def sensor_operator(system_dim: int) -> np.ndarray:
    """Sensor lowering operator on the joint space; the sensor is the last level."""
    zeta = np.zeros((system_dim + 1, system_dim + 1), dtype=complex)
    zeta[0, system_dim] = 1.0
    return zeta


def attach_sensors(
    gen: LindbladGenerator,
    observable: np.ndarray,
    omegas: Sequence[float] | float,
    linewidth: float,
    epsilon: float = DEFAULT_EPSILON,
) -> LindbladGenerator:
    """Joint generator for a batch of independent one-sensor systems.

    The Hamiltonian returns shape ``(len(omegas), dim + 1, dim + 1)``.
    """
    observable = np.asarray(observable, dtype=complex)
    if observable.shape != (gen.dim, gen.dim):
        raise ShapeError(f"observable shape {observable.shape} != {(gen.dim, gen.dim)}")
    SensorConfig(0.0, linewidth, epsilon)
    omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
    dim = gen.dim + 1
    zeta = sensor_operator(gen.dim)
    obs = _pad(observable)
    # O^dag zeta rather than zeta O^dag: inside the truncated space the hop
    # must empty the sensor before filling the system.
    coupling = epsilon * (dag(obs) @ zeta + dag(zeta) @ obs)
    number = dag(zeta) @ zeta
    static_part = omegas[:, None, None] * number + coupling
    system_h = gen.hamiltonian

    def hamiltonian(t):
        return _pad(np.asarray(system_h(t)))[None] + static_part

    dissipators = [(_pad(op), rate) for op, rate in gen.dissipators]
    dissipators.append((zeta, linewidth))
    joint = assemble_generator(
        hamiltonian,
        dissipators,
        piecewise_static=gen.piecewise_static,
        breakpoints=gen.breakpoints,
    )
    assert joint.dim == dim
    return joint


def attach_sensor(gen: LindbladGenerator, observable: np.ndarray, cfg: SensorConfig) -> LindbladGenerator:
    """Single-sensor joint generator, Hamiltonian of shape ``(dim+1, dim+1)``."""
    batched = attach_sensors(gen, observable, [cfg.omega_k], cfg.linewidth, cfg.epsilon)
    return assemble_generator(
        lambda t: batched.hamiltonian(t)[0],
        batched.dissipators,
        piecewise_static=gen.piecewise_static,
        breakpoints=gen.breakpoints,
    )


def joint_initial_state(rho0: np.ndarray) -> np.ndarray:
    """System state with the sensor in vacuum."""
    return _pad(np.asarray(rho0, dtype=complex))


def sensor_population(states: np.ndarray, cfg: SensorConfig | None = None) -> np.ndarray:
    """``<zeta^dag zeta>`` from joint states, sensor being the last level."""
    return np.real(np.asarray(states)[..., -1, -1])


def reduced_system(states: np.ndarray) -> np.ndarray:
    """System marginal of joint single-excitation states.

    The sensor excitation moves into the system vacuum population, which is
    what tracing out the sensor mode does in the single-excitation space.
    """
    states = np.asarray(states)
    sys = states[..., :-1, :-1].copy()
    sys[..., 0, 0] += states[..., -1, -1]
    return sys


def _run_batch(
    gen: LindbladGenerator,
    rho0: np.ndarray,
    observable: np.ndarray,
    omegas: np.ndarray,
    grid: TimeGrid,
    linewidth: float,
    epsilon: float,
    stride: int,
    check_states: bool,
) -> tuple[np.ndarray, list[str]]:
    joint = attach_sensors(gen, observable, omegas, linewidth, epsilon)
    stepper = Stepper(joint, grid.dt)
    rho = np.broadcast_to(joint_initial_state(rho0), (omegas.size, joint.dim, joint.dim)).copy()
    times = grid.times
    out = [sensor_population(rho)]
    problems: list[str] = []
    for n in range(grid.n_steps):
        rho = stepper.step(float(times[n]), rho)
        if (n + 1) % stride == 0:
            out.append(sensor_population(rho))
            if check_states:
                problems.extend(state_violations(rho))
    bad = ~np.all(np.isfinite(rho.reshape(omegas.size, -1)), axis=1)
    if np.any(bad):
        raise PropagationError(float(omegas[np.argmax(bad)]), "non-finite state")
    return np.array(out), problems


def sensor_spectrum(
    gen: LindbladGenerator,
    rho0: np.ndarray,
    observable: np.ndarray,
    omega_grid: Sequence[float],
    grid: TimeGrid,
    delta_s: float,
    epsilon: float = DEFAULT_EPSILON,
    *,
    label: str = "O",
    stride: int = 1,
    chunk: int | None = None,
    threads: int = 1,
    check_states: bool = True,
    counter: dict | None = None,
) -> TRPSMap:
    """Sensor-method TRPS of ``observable`` for an arbitrary system generator.

    Frequencies are split into chunks of at most ``chunk`` sensors; chunks
    run on up to ``threads`` worker threads. Output times are every
    ``stride``-th grid point.
    """
    omegas = np.asarray(omega_grid, dtype=float)
    if omegas.size == 0:
        raise ValueError("omega_grid is empty")
    if not delta_s > 0:
        raise ValueError(f"resolution must be positive, got {delta_s}")
    if grid.n_steps % stride:
        raise ValueError(f"stride {stride} does not divide {grid.n_steps} steps")
    check_step(attach_sensors(gen, observable, omegas[[0, -1]], delta_s, epsilon), grid)
    size = omegas.size if chunk is None else max(1, int(chunk))
    pieces = [omegas[i : i + size] for i in range(0, omegas.size, size)]

    def job(piece):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return _run_batch(
                gen, rho0, observable, piece, grid, delta_s, epsilon, stride, check_states
            )

    if threads > 1 and len(pieces) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(job, pieces))
    else:
        results = [job(piece) for piece in pieces]
    raw = np.concatenate([r[0] for r in results], axis=1)
    problems = sorted({p for r in results for p in r[1]})
    if counter is not None:
        counter["propagation_steps"] = counter.get("propagation_steps", 0) + grid.n_steps * omegas.size
    norm = SensorConfig(0.0, delta_s, epsilon).normalization
    return TRPSMap(
        observable=label,
        resolution=delta_s,
        times=grid.times[::stride],
        frequencies=omegas,
        intensities=norm * raw,
        method="sensor",
        epsilon=epsilon,
        raw=raw,
        diagnostics={"state_violations": problems},
    )


def sensor_trps(
    schedule,
    params,
    observable,
    omega_grid: Sequence[float],
    time_grid: TimeGrid,
    delta_s: float,
    epsilon: float = DEFAULT_EPSILON,
    *,
    initial: str = "e",
    label: str | None = None,
    **kwargs,
) -> TRPSMap:
    """Sensor-method TRPS of the three-cavity model under a detuning schedule.

    ``observable`` is a mode name (``sigma``, ``a``, ``b``, ``c``) or a
    ``{mode: coefficient}`` mapping.
    """
    message = weak_coupling_message(epsilon, delta_s, params.g)
    if message:
        warnings.warn(message, WeakCouplingWarning, stacklevel=2)
    gen = tc.build_time_dependent_generator(schedule, params)
    op = tc.mode_operator(observable)
    name = label or (observable if isinstance(observable, str) else repr(dict(observable)))
    return sensor_spectrum(
        gen,
        tc.initial_state(initial),
        op,
        omega_grid,
        time_grid,
        delta_s,
        epsilon,
        label=name,
        **kwargs,
    )
