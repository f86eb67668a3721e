"""Dense Lindblad dynamics on small single-excitation Hilbert spaces.

Conventions
-----------
- Frequencies and rates are angular, in GHz (rad/ns); times are in ns.
- Basis index 0 is the global vacuum; index ``j + 1`` holds one excitation in
  mode ``j``.
- Density matrices may carry leading batch axes, ``(..., dim, dim)``. A
  Hamiltonian function may likewise return a batch of matrices, which is how
  independent sensor frequencies are propagated side by side.

The integrator is the classical fourth-order Runge-Kutta scheme with a fixed
step. Stage times are clamped into the half-open step interval so that a
discontinuity placed exactly on a grid point is seen from the correct side.
"""

from __future__ import annotations

import bisect
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np
from numpy.typing import NDArray

ComplexArray = NDArray[np.complex128]


class ShapeError(ValueError):
    """Operators or states with incompatible dimensions."""


class DomainError(ValueError):
    """Argument outside its physical domain (negative rate, dt <= 0, ...)."""


class StabilityWarning(RuntimeWarning):
    """Step size too coarse for the explicit integrator."""


# steps per shortest period; keeps RK4 positivity error below 1e-8
DEFAULT_POINTS_PER_PERIOD = 512

# |z| bound of the RK4 stability region along the imaginary axis
RK4_IMAG_STABILITY = 2.0 * math.sqrt(2.0)


def ladder_operators(mode_count: int) -> list[ComplexArray]:
    """Lowering operators on the vacuum + single-excitation space.

    Operator ``j`` maps ``|1_j>`` to ``|vac>`` and annihilates every other
    basis state, so products of two lowering operators vanish identically.
    """
    if int(mode_count) != mode_count or mode_count < 1:
        raise ShapeError(f"mode_count must be a positive integer, got {mode_count!r}")
    dim = mode_count + 1
    ops = []
    for j in range(mode_count):
        op = np.zeros((dim, dim), dtype=complex)
        op[0, j + 1] = 1.0
        op.setflags(write=False)
        ops.append(op)
    return ops


def dag(op: ComplexArray) -> ComplexArray:
    return np.conj(np.swapaxes(op, -1, -2))


def projector(dim: int, index: int) -> ComplexArray:
    rho = np.zeros((dim, dim), dtype=complex)
    rho[index, index] = 1.0
    return rho


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t0, t0 + dt, ..., t1``."""

    t0: float
    t1: float
    dt: float

    def __post_init__(self):
        if not self.dt > 0:
            raise DomainError(f"dt must be positive, got {self.dt}")
        if not self.t1 > self.t0:
            raise DomainError(f"t1 must exceed t0, got [{self.t0}, {self.t1}]")
        ratio = (self.t1 - self.t0) / self.dt
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            raise DomainError(
                f"(t1 - t0)/dt = {ratio!r} is not an integer; use TimeGrid.covering"
            )

    @classmethod
    def covering(
        cls,
        t0: float,
        t1: float,
        max_dt: float,
        align: Sequence[float] = (),
    ) -> "TimeGrid":
        """Finest-needed grid with step <= max_dt reaching at least t1.

        If ``align`` holds times inside ``(t0, t1)``, the first one is made an
        exact grid point by shrinking dt; the end point is then rounded up to
        a whole number of steps.
        """
        if not max_dt > 0:
            raise DomainError(f"dt must be positive, got {max_dt}")
        dt = max_dt
        inner = [t for t in align if t0 < t < t1]
        if inner:
            n_switch = math.ceil((inner[0] - t0) / max_dt - 1e-12)
            dt = (inner[0] - t0) / n_switch
        n = max(1, math.ceil((t1 - t0) / dt - 1e-9))
        return cls(t0, t0 + n * dt, dt)

    @property
    def n_steps(self) -> int:
        return int(round((self.t1 - self.t0) / self.dt))

    @property
    def times(self) -> NDArray[np.float64]:
        return self.t0 + self.dt * np.arange(self.n_steps + 1)

    def __len__(self) -> int:
        return self.n_steps + 1


@dataclass(frozen=True)
class LindbladGenerator:
    """Time-dependent Hamiltonian plus a list of ``(collapse operator, rate)``.

    ``hamiltonian(t)`` returns either a ``(dim, dim)`` matrix or a batch
    ``(..., dim, dim)``. ``breakpoints`` lists times where the Hamiltonian may
    jump. With ``piecewise_static=True`` the Hamiltonian is constant between
    consecutive breakpoints (right-continuous), which lets the propagator
    reuse one step operator per segment.
    """

    hamiltonian: Callable[[float], ComplexArray]
    dissipators: tuple[tuple[ComplexArray, float], ...]
    dim: int
    piecewise_static: bool = False
    breakpoints: tuple[float, ...] = ()
    _decay: ComplexArray = field(init=False, repr=False, compare=False)
    _jump: ComplexArray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        decay = np.zeros((self.dim, self.dim), dtype=complex)
        jump = np.zeros((self.dim**2, self.dim**2), dtype=complex)
        for op, rate in self.dissipators:
            decay += rate * (dag(op) @ op)
            # row-major vec(C rho C^dag) = (C kron C*) vec(rho)
            jump += rate * np.kron(op, op.conj())
        object.__setattr__(self, "_decay", decay)
        object.__setattr__(self, "_jump", jump)
        object.__setattr__(self, "breakpoints", tuple(sorted(self.breakpoints)))

    @property
    def static(self) -> bool:
        return self.piecewise_static and not self.breakpoints

    def segment(self, t: float) -> int:
        """Index of the constant-Hamiltonian segment containing t."""
        return bisect.bisect_right(self.breakpoints, t)

    def effective_hamiltonian(self, t: float) -> ComplexArray:
        """Non-Hermitian ``H(t) - (i/2) sum_j r_j C_j^dag C_j``."""
        return self.hamiltonian(t) - 0.5j * self._decay

    def apply(self, heff: ComplexArray, rho: ComplexArray) -> ComplexArray:
        """Generator action given a precomputed effective Hamiltonian."""
        out = -1j * (heff @ rho - rho @ dag(heff))
        if self.dissipators:
            flat = rho.reshape(rho.shape[:-2] + (self.dim**2,))
            out = out + (flat @ self._jump.T).reshape(rho.shape)
        return out

    def derivative(self, t: float, rho: ComplexArray) -> ComplexArray:
        """``d rho / dt`` at time t."""
        return self.apply(self.effective_hamiltonian(t), rho)

    def superoperator(self, t: float) -> ComplexArray:
        """Row-major vectorized Liouvillian; batches follow the Hamiltonian."""
        heff = self.effective_hamiltonian(t)
        eye = np.eye(self.dim)
        return -1j * (_kron(heff, eye) - _kron(eye, heff.conj())) + self._jump

    def rk4_superoperator(self, t: float, dt: float) -> ComplexArray:
        """One RK4 step of a constant generator as a matrix on vec(rho).

        For time-independent L the four stages collapse to the degree-4 Taylor
        polynomial of ``dt L``.
        """
        step = dt * self.superoperator(t)
        eye = np.eye(self.dim**2)
        poly = eye + step / 4.0
        poly = eye + (step @ poly) / 3.0
        poly = eye + (step @ poly) / 2.0
        return eye + step @ poly

    def spectral_radius(self, t: float = 0.0) -> float:
        """Bound on the largest Liouvillian eigenvalue magnitude at time t."""
        h = np.asarray(self.hamiltonian(t))
        evals = np.linalg.eigvalsh(h)
        spread = float(np.max(evals[..., -1] - evals[..., 0]))
        return spread + sum(rate for _, rate in self.dissipators)


def _kron(a: ComplexArray, b: ComplexArray) -> ComplexArray:
    """Kronecker product over the last two axes, broadcasting leading ones."""
    a, b = np.broadcast_arrays(a[..., :, None, :, None], b[..., None, :, None, :])
    out = a * b
    n, m = out.shape[-4] * out.shape[-3], out.shape[-2] * out.shape[-1]
    return out.reshape(out.shape[:-4] + (n, m))


def assemble_generator(
    hamiltonian_fn: Callable[[float], ComplexArray] | ComplexArray,
    dissipators: Sequence[tuple[ComplexArray, float]] = (),
    *,
    piecewise_static: bool | None = None,
    breakpoints: Sequence[float] = (),
) -> LindbladGenerator:
    """Build a :class:`LindbladGenerator` after validating shapes and rates.

    A plain matrix is accepted in place of a function and treated as static.
    """
    if callable(hamiltonian_fn):
        fn = hamiltonian_fn
        is_static = bool(piecewise_static)
    else:
        const = np.array(hamiltonian_fn, dtype=complex)
        const.setflags(write=False)
        fn = lambda t: const  # noqa: E731
        is_static = True if piecewise_static is None else piecewise_static
    h0 = np.asarray(fn(0.0))
    if h0.ndim < 2 or h0.shape[-1] != h0.shape[-2]:
        raise ShapeError(f"hamiltonian must be square, got shape {h0.shape}")
    dim = h0.shape[-1]
    checked = []
    for op, rate in dissipators:
        op = np.array(op, dtype=complex)
        if op.shape != (dim, dim):
            raise ShapeError(f"collapse operator shape {op.shape} != {(dim, dim)}")
        if not rate >= 0:
            raise DomainError(f"dissipator rate must be >= 0, got {rate}")
        op.setflags(write=False)
        checked.append((op, float(rate)))
    return LindbladGenerator(fn, tuple(checked), dim, is_static, tuple(breakpoints))


def default_dt(omega_max: float, rate_max: float = 0.0, points_per_period: int = DEFAULT_POINTS_PER_PERIOD) -> float:
    """``min(2 pi / omega_max, 1 / rate_max) / points_per_period``."""
    scales = []
    if omega_max > 0:
        scales.append(2 * math.pi / omega_max)
    if rate_max > 0:
        scales.append(1.0 / rate_max)
    if not scales:
        raise DomainError("need a nonzero frequency or rate to pick a step")
    return min(scales) / points_per_period


class Stepper:
    """Fixed-size RK4 steps for one generator.

    Piecewise-static generators reuse a cached step matrix per segment; steps
    that straddle a breakpoint, and all steps of generally time-dependent
    generators, are taken stage by stage. Times within ``SNAP * dt`` of a
    breakpoint count as lying on it, so grid points computed as ``t0 + n*dt``
    land on the correct side of a switch despite rounding.
    """

    SNAP = 1e-7

    def __init__(self, gen: LindbladGenerator, dt: float):
        if not dt > 0:
            raise DomainError(f"dt must be positive, got {dt}")
        self.gen = gen
        self.dt = dt
        self._tol = self.SNAP * dt
        self._cache: dict[int, ComplexArray] = {}

    def stage_times(self, t: float) -> tuple[float, float, float]:
        return t + self._tol, t + 0.5 * self.dt, t + self.dt - self._tol

    def straddles(self, t: float) -> bool:
        lo, hi = t + self._tol, t + self.dt - self._tol
        return any(lo < b < hi for b in self.gen.breakpoints)

    def step_matrix(self, t: float) -> ComplexArray:
        """Transposed RK4 step matrix for the segment containing t."""
        seg = self.gen.segment(t + self._tol)
        if seg not in self._cache:
            m = self.gen.rk4_superoperator(t + self._tol, self.dt)
            self._cache[seg] = np.ascontiguousarray(np.swapaxes(m, -1, -2))
        return self._cache[seg]

    def step(self, t: float, rho: ComplexArray) -> ComplexArray:
        gen = self.gen
        if gen.piecewise_static and not self.straddles(t):
            mt = self.step_matrix(t)
            flat = rho.reshape(rho.shape[:-2] + (1, gen.dim**2))
            out = np.matmul(flat, mt)
            return out.reshape(out.shape[:-2] + (gen.dim, gen.dim))
        ts, tm, te = self.stage_times(t)
        return rk4_step(
            gen,
            gen.effective_hamiltonian(ts),
            gen.effective_hamiltonian(tm),
            gen.effective_hamiltonian(te),
            rho,
            self.dt,
        )


def rk4_step(gen: LindbladGenerator, h_start, h_mid, h_end, rho, dt):
    """One RK4 step given effective Hamiltonians at the three stage times."""
    k1 = gen.apply(h_start, rho)
    k2 = gen.apply(h_mid, rho + 0.5 * dt * k1)
    k3 = gen.apply(h_mid, rho + 0.5 * dt * k2)
    k4 = gen.apply(h_end, rho + dt * k3)
    return rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def check_step(gen: LindbladGenerator, grid: TimeGrid) -> None:
    probe = [grid.t0] + [b for b in gen.breakpoints if grid.t0 <= b <= grid.t1] + [grid.t1]
    radius = max(gen.spectral_radius(t) for t in probe)
    if radius * grid.dt > RK4_IMAG_STABILITY:
        warnings.warn(
            f"dt={grid.dt:.3g} ns exceeds the RK4 stability bound "
            f"{RK4_IMAG_STABILITY / radius:.3g} ns",
            StabilityWarning,
            stacklevel=3,
        )


def iter_propagate(
    rho0: ComplexArray, gen: LindbladGenerator, grid: TimeGrid
) -> Iterator[tuple[float, ComplexArray]]:
    """Yield ``(t, rho(t))`` at every grid point, starting with ``rho0``."""
    rho = np.array(rho0, dtype=complex)
    if rho.shape[-2:] != (gen.dim, gen.dim):
        raise ShapeError(f"state shape {rho.shape} does not match dim {gen.dim}")
    check_step(gen, grid)
    stepper = Stepper(gen, grid.dt)
    times = grid.times
    yield float(times[0]), rho
    for n in range(grid.n_steps):
        rho = stepper.step(float(times[n]), rho)
        yield float(times[n + 1]), rho


def propagate(rho0: ComplexArray, gen: LindbladGenerator, grid: TimeGrid) -> ComplexArray:
    """Density matrices at every grid point, shape ``(len(grid), ..., dim, dim)``."""
    return np.stack([rho for _, rho in iter_propagate(rho0, gen, grid)])


def expectation(rho: ComplexArray, op: ComplexArray) -> complex | ComplexArray:
    """``Tr(A rho)``; broadcasts over leading axes of ``rho``."""
    rho = np.asarray(rho)
    op = np.asarray(op)
    if rho.shape[-2:] != op.shape[-2:]:
        raise ShapeError(f"operator shape {op.shape} does not match state {rho.shape}")
    value = np.einsum("ij,...ji->...", op, rho) if op.ndim == 2 else np.einsum(
        "...ij,...ji->...", op, rho
    )
    return value[()] if np.ndim(value) == 0 else value


def state_violations(
    rhos: ComplexArray,
    trace_tol: float = 1e-9,
    herm_tol: float = 1e-10,
    pos_tol: float = 1e-8,
) -> list[str]:
    """Describe any density-matrix invariant broken in a stack of states."""
    rhos = np.asarray(rhos)
    problems = []
    trace_err = np.max(np.abs(np.trace(rhos, axis1=-2, axis2=-1) - 1.0))
    if trace_err > trace_tol:
        problems.append(f"trace deviates from 1 by {trace_err:.3g}")
    herm_err = np.max(np.abs(rhos - dag(rhos)))
    if herm_err > herm_tol:
        problems.append(f"hermiticity error {herm_err:.3g}")
    herm = 0.5 * (rhos + dag(rhos))
    min_eig = float(np.min(np.linalg.eigvalsh(herm)))
    if min_eig < -pos_tol:
        problems.append(f"negative eigenvalue {min_eig:.3g}")
    return problems
