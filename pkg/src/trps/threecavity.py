"""Two-level emitter in the middle of three coupled cavities.

Basis order on the 5-dimensional space: ``vac, e, a, b, c`` where ``e`` is the
excited emitter and ``a``, ``b``, ``c`` hold one photon in the left, middle
and right cavity. The lateral cavities sit at ``omega0 + delta`` (left) and
``omega0 - delta`` (right); the emitter and middle cavity at ``omega0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .quantum import (
    LindbladGenerator,
    DEFAULT_POINTS_PER_PERIOD,
    TimeGrid,
    assemble_generator,
    default_dt,
    ladder_operators,
    projector,
)

BASIS = ("vac", "e", "a", "b", "c")
MODES = ("sigma", "a", "b", "c")
DIM = len(BASIS)

SIGMA, A, B, C = ladder_operators(len(MODES))
LOWERING = dict(zip(MODES, (SIGMA, A, B, C)))


@dataclass(frozen=True)
class ModelParams:
    """Couplings and decay rates in GHz (angular)."""

    g: float = 50.0
    eta: float = 400.0
    gamma: float = 1.0
    kappa: float = 20.0
    omega0: float = 0.0

    def __post_init__(self):
        if not (self.g > 0 and self.eta > 0):
            raise ValueError(f"g and eta must be positive, got g={self.g}, eta={self.eta}")
        if not (self.gamma >= 0 and self.kappa >= 0):
            raise ValueError(
                f"gamma and kappa must be nonnegative, got {self.gamma}, {self.kappa}"
            )


DEFAULT_PARAMS = ModelParams()


@dataclass(frozen=True)
class SupermodeSet:
    """Eigensystem of the three-cavity block, ordered (lower, zero, upper)."""

    frequencies: tuple[float, float, float]
    vectors: np.ndarray  # rows are v-, v0, v+
    l_minus: float
    l_plus: float

    @property
    def matrix(self) -> np.ndarray:
        """Eigenvectors as columns."""
        return self.vectors.T


def cavity_block(delta: float, eta: float, omega0: float = 0.0) -> np.ndarray:
    return np.array(
        [
            [omega0 + delta, eta, 0.0],
            [eta, omega0, eta],
            [0.0, eta, omega0 - delta],
        ]
    )


def hamiltonian(delta: float, p: ModelParams = DEFAULT_PARAMS) -> np.ndarray:
    """System Hamiltonian on ``vac, e, a, b, c``; the vacuum row is zero."""
    h = np.zeros((DIM, DIM), dtype=complex)
    h[1, 1] = p.omega0
    h[2:, 2:] = cavity_block(delta, p.eta, p.omega0)
    h[1, 3] = h[3, 1] = p.g
    return h


def supermodes(delta: float, eta: float, omega0: float = 0.0) -> SupermodeSet:
    if not eta > 0:
        raise ValueError(f"eta must be positive, got {eta}")
    root = math.sqrt(delta**2 + 2 * eta**2)
    ratio = delta / eta
    v0 = np.array([-1.0, ratio, 1.0]) / math.sqrt(2 + ratio**2)
    # delta^2 + eta^2 -/+ delta*root, written without cancellation
    big = delta**2 + eta**2 + abs(delta) * root
    small = eta**4 / big
    first_minus, first_plus = (small, big) if delta >= 0 else (big, small)
    raw_minus = np.array([first_minus / eta**2, (delta - root) / eta, 1.0])
    raw_plus = np.array([first_plus / eta**2, (delta + root) / eta, 1.0])
    l_minus = math.sqrt(2 * root**2 * first_minus) / eta**2
    l_plus = math.sqrt(2 * root**2 * first_plus) / eta**2
    vectors = np.stack([raw_minus / l_minus, v0, raw_plus / l_plus])
    return SupermodeSet((omega0 - root, omega0, omega0 + root), vectors, l_minus, l_plus)


def effective_coupling(delta: float, eta: float, g: float) -> float:
    """Emitter coupling to the zero-energy supermode."""
    ratio = delta / eta
    return g * ratio / math.sqrt(2 + ratio**2)


def transformation(delta: float, eta: float) -> np.ndarray:
    """4x4 change of basis from (e, v-, v0, v+) to (e, a, b, c)."""
    p = np.eye(4)
    p[1:, 1:] = supermodes(delta, eta).matrix
    return p


def diagonalized_hamiltonian(delta: float, p: ModelParams = DEFAULT_PARAMS) -> np.ndarray:
    """Excited-block Hamiltonian in the (emitter, supermode) basis, closed form."""
    modes = supermodes(delta, p.eta, p.omega0)
    h = np.diag([p.omega0, *modes.frequencies]).astype(float)
    h[0, 1:] = h[1:, 0] = p.g * modes.vectors[:, 1]
    return h


class DetuningSchedule:
    """Lateral-cavity detuning as a function of time.

    ``kind`` is ``"constant"``, ``"step"`` or ``"gaussian-fall"``. The step
    is right-continuous at ``t_switch``; the Gaussian fall uses
    ``fall_width`` as the standard deviation of
    ``exp(-(t - t_switch)^2 / (2 fall_width^2))``.
    """

    KINDS = ("constant", "step", "gaussian-fall")

    def __init__(
        self,
        kind: str,
        delta_initial: float,
        delta_final: float | None = None,
        t_switch: float = 0.0,
        fall_width: float | None = None,
    ):
        if kind not in self.KINDS:
            raise ValueError(f"unknown schedule kind {kind!r}; expected one of {self.KINDS}")
        if kind != "constant" and delta_final is None:
            raise ValueError(f"{kind} schedule needs delta_final")
        if kind == "gaussian-fall" and not (fall_width is not None and fall_width > 0):
            raise ValueError(f"gaussian-fall needs fall_width > 0, got {fall_width}")
        self.kind = kind
        self.delta_initial = float(delta_initial)
        self.delta_final = float(delta_initial if delta_final is None else delta_final)
        self.t_switch = float(t_switch)
        self.fall_width = None if fall_width is None else float(fall_width)

    @classmethod
    def constant(cls, delta: float) -> "DetuningSchedule":
        return cls("constant", delta)

    def __repr__(self):
        return (
            f"DetuningSchedule({self.kind!r}, {self.delta_initial}, {self.delta_final}, "
            f"t_switch={self.t_switch}, fall_width={self.fall_width})"
        )

    def __eq__(self, other):
        return isinstance(other, DetuningSchedule) and self.as_dict() == other.as_dict()

    def __hash__(self):
        return hash(tuple(self.as_dict().items()))

    def as_dict(self) -> dict:
        return {
            "kind": self.kind,
            "delta_initial": self.delta_initial,
            "delta_final": self.delta_final,
            "t_switch": self.t_switch,
            "fall_width": self.fall_width,
        }

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return () if self.kind == "constant" else (self.t_switch,)

    def extremes(self) -> tuple[float, float]:
        return self.delta_initial, self.delta_final

    def __call__(self, t: float) -> float:
        if self.kind == "constant" or t < self.t_switch:
            return self.delta_initial
        if self.kind == "step":
            return self.delta_final
        x = (t - self.t_switch) / self.fall_width
        return self.delta_final + (self.delta_initial - self.delta_final) * math.exp(-0.5 * x * x)


def evaluate_schedule(s: DetuningSchedule, t: float) -> float:
    return s(t)


def system_dissipators(p: ModelParams) -> list[tuple[np.ndarray, float]]:
    return [(SIGMA, p.gamma), (A, p.kappa), (B, p.kappa), (C, p.kappa)]


def build_time_dependent_generator(
    s: DetuningSchedule, p: ModelParams = DEFAULT_PARAMS
) -> LindbladGenerator:
    base = hamiltonian(0.0, p)
    base.setflags(write=False)
    detuning_axis = np.diag([0, 0, 1.0, 0, -1.0]).astype(complex)

    def h(t):
        return base + s(t) * detuning_axis

    return assemble_generator(
        h,
        system_dissipators(p),
        piecewise_static=s.kind != "gaussian-fall",
        breakpoints=s.breakpoints,
    )


def max_frequency(s: DetuningSchedule, p: ModelParams) -> float:
    """Largest |eigenvalue| of the Hamiltonian over the detuning range of s."""
    deltas = {*s.extremes(), 0.0}
    return max(float(np.max(np.abs(np.linalg.eigvalsh(hamiltonian(d, p))))) for d in deltas)


# accumulated RK4 truncation allowed over a run without dissipation
UNDAMPED_ERROR_BUDGET = 1e-9


def default_step(
    s: DetuningSchedule,
    p: ModelParams,
    points_per_period: int = DEFAULT_POINTS_PER_PERIOD,
    duration: float | None = None,
) -> float:
    """Default RK4 step for the model under schedule ``s``.

    Without dissipation nothing damps integrator error, which then grows
    like ``n_steps * (omega_max dt)^5 / 120``; given the run ``duration``
    the points per period are doubled until that stays within
    ``UNDAMPED_ERROR_BUDGET``.
    """
    omega = max_frequency(s, p)
    rate = max(p.gamma, p.kappa)
    dt = default_dt(omega, rate, points_per_period)
    if rate == 0 and duration is not None:
        while duration / dt * (omega * dt) ** 5 / 120 > UNDAMPED_ERROR_BUDGET:
            dt /= 2
    return dt


def time_grid(
    s: DetuningSchedule,
    p: ModelParams,
    duration: float,
    dt: float | None = None,
    t0: float = 0.0,
    multiple_of: int = 1,
) -> TimeGrid:
    """Grid over at least ``[t0, t0 + duration]`` with the switch on a grid point.

    With ``multiple_of=k`` every k-th point also forms an aligned grid, so
    outputs and coarser correlator grids can be taken by striding.
    """
    step = default_step(s, p, duration=duration) if dt is None else dt
    coarse = TimeGrid.covering(t0, t0 + duration, step * multiple_of, align=s.breakpoints)
    return TimeGrid(t0, coarse.t1, coarse.dt / multiple_of)


def initial_state(label: str = "e") -> np.ndarray:
    """Pure basis state by label (``vac``, ``e``, ``a``, ``b``, ``c``).

    ``e000`` is accepted as an alias for the excited emitter.
    """
    aliases = {"e000": "e", "sigma": "e", "tls": "e", "g000": "vac"}
    key = aliases.get(label, label)
    if key not in BASIS:
        raise ValueError(f"unknown basis label {label!r}; expected one of {BASIS}")
    return projector(DIM, BASIS.index(key))


def mode_operator(spec) -> np.ndarray:
    """Lowering operator for a mode name or a ``{mode: coefficient}`` mapping."""
    if isinstance(spec, str):
        key = {"tls": "sigma", "e": "sigma"}.get(spec, spec)
        if key not in LOWERING:
            raise ValueError(f"unknown mode {spec!r}; expected one of {MODES}")
        return LOWERING[key].copy()
    op = np.zeros((DIM, DIM), dtype=complex)
    for name, coeff in dict(spec).items():
        op = op + float(coeff) * mode_operator(name)
    return op


def populations(rhos: np.ndarray) -> dict[str, np.ndarray]:
    """Excitation probability of the emitter and of each cavity."""
    diag = np.real(np.diagonal(rhos, axis1=-2, axis2=-1))
    return {name: diag[..., i + 1] for i, name in enumerate(MODES)}


SWITCH_PHASES = ("first-valley", "first-peak")


def _parabolic_vertex(times: np.ndarray, y: np.ndarray, i: int) -> float:
    """Vertex of the parabola through samples ``i-1, i, i+1`` of a uniform series."""
    h = times[1] - times[0]
    denom = y[i - 1] - 2 * y[i] + y[i + 1]
    if denom == 0:
        return float(times[i])
    return float(times[i] + 0.5 * h * (y[i - 1] - y[i + 1]) / denom)


def switch_phase_time(
    phase: str,
    delta: float,
    p: ModelParams = DEFAULT_PARAMS,
    initial: str = "e",
) -> float:
    """Time of the first TLS population valley or peak without switching.

    The extremum is taken from a constant-detuning reference run and refined
    with a parabola through the three samples around it.
    """
    from .quantum import propagate

    if phase not in SWITCH_PHASES:
        raise ValueError(f"unknown switch phase {phase!r}; expected one of {SWITCH_PHASES}")
    g_eff = abs(effective_coupling(delta, p.eta, p.g))
    if g_eff < 1e-6 * p.g:
        raise ValueError(f"no Rabi oscillation to phase-lock at delta={delta:g} GHz")
    schedule = DetuningSchedule.constant(delta)
    grid = time_grid(schedule, p, 2.5 * math.pi / g_eff)
    rhos = propagate(initial_state(initial), build_time_dependent_generator(schedule, p), grid)
    pop = populations(rhos)["sigma"]
    times = grid.times
    inner = np.arange(1, pop.size - 1)
    if phase == "first-valley":
        hits = inner[(pop[inner] <= pop[inner - 1]) & (pop[inner] < pop[inner + 1])]
    else:
        hits = inner[(pop[inner] >= pop[inner - 1]) & (pop[inner] > pop[inner + 1])]
    if hits.size == 0:
        raise ValueError(f"no {phase} found within {times[-1]:.3g} ns at delta={delta:g} GHz")
    return _parabolic_vertex(times, pop, int(hits[0]))
