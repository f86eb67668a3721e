"""Runtime scaling of the analytic and sensor TRPS methods.

Each series varies one grid size (``Nt`` or ``Nw``) with the other fixed,
times the full pipeline on the no-switch case, and fits the log-log slope.
Work counters are recorded next to wall time; they are deterministic and
must equal the closed-form cost formulas exactly.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import stats
from threadpoolctl import threadpool_limits

from .analytic import correlator_steps, runtime_profile

METHODS = ("analytic", "sensor")
AXES = ("Nt", "Nw")
PRESETS = ("bench-fig7", "no-switch")

# Per-method defaults. Each range sits where the counted work dominates
# fixed per-call overhead, so the fitted slope measures the cost exponent.
DEFAULT_SIZES = {
    ("analytic", "Nt"): (512, 1024, 2048, 4096),
    ("sensor", "Nt"): (2048, 4096, 8192, 16384),
    ("analytic", "Nw"): (4096, 8192, 16384, 32768, 65536),
    ("sensor", "Nw"): (64, 128, 256, 512, 1024),
}
# the size held fixed while the other axis varies
DEFAULT_FIXED = {
    ("analytic", "Nt"): 32,
    ("sensor", "Nt"): 16,
    ("analytic", "Nw"): 64,
    ("sensor", "Nw"): 1024,
}
SENSOR_CHUNK = 8


@dataclass
class ScalingReport:
    method: str
    axis: str
    sizes: list[int]
    runtimes: list[float]
    fitted_slope: float
    slope_stderr: float
    normalized_runtimes: list[float]
    fixed_size: int
    ops_counts: list[int] = field(default_factory=list)
    expected_ops: list[int] = field(default_factory=list)
    correlator_steps: list[int] = field(default_factory=list)
    monotone: bool = True
    repeats: int = 3

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.sizes, self.sizes[1:])):
            raise ValueError(f"sizes must be strictly increasing, got {self.sizes}")
        if len(self.sizes) < 4:
            raise ValueError(f"need at least 4 sizes per fit, got {len(self.sizes)}")
        if min(self.runtimes) <= 0:
            raise ValueError("runtimes must be positive")

    @property
    def ops_match(self) -> bool:
        return self.ops_counts == self.expected_ops

    def rows(self) -> list[dict]:
        """Table rows: method, axis, size, runtime_s, ops_count, normalized."""
        return [
            {
                "method": self.method,
                "axis": self.axis,
                "size": n,
                "runtime_s": r,
                "ops_count": ops,
                "normalized": x,
            }
            for n, r, ops, x in zip(
                self.sizes, self.runtimes, self.ops_counts, self.normalized_runtimes
            )
        ]

    def as_dict(self) -> dict:
        d = asdict(self)
        d["ops_match"] = self.ops_match
        return d


def normalize(runtimes: Sequence[float]) -> list[float]:
    """Min-max rescaling onto [0, 1]."""
    r = np.asarray(runtimes, dtype=float)
    span = r.max() - r.min()
    if span == 0:
        return [1.0] * r.size
    return list((r - r.min()) / span)


def fit_slope(sizes: Sequence[float], runtimes: Sequence[float]) -> tuple[float, float]:
    """Least-squares slope of log(runtime) against log(size) and its standard error."""
    fit = stats.linregress(np.log(sizes), np.log(runtimes))
    return float(fit.slope), float(fit.stderr)


def is_monotone(runtimes: Sequence[float], band: float) -> bool:
    """False if some runtime drops below its predecessor by more than ``band`` (relative)."""
    return all(b >= a * (1 - band) for a, b in zip(runtimes, runtimes[1:]))


def expected_ops(method: str, n_t: int, n_omega: int) -> int:
    """Closed-form work count: quadrature terms Nt*Ntau*Nw with Ntau = Nt, or
    single-step propagations (Nt - 1)*Nw for the sensors."""
    if method == "analytic":
        return n_t * n_t * n_omega
    return (n_t - 1) * n_omega


def _grid_point(axis: str, size: int, fixed: int) -> tuple[int, int]:
    return (size, fixed) if axis == "Nt" else (fixed, size)


def measure(method: str, n_t: int, n_omega: int, repeats: int) -> tuple[float, float, dict]:
    """Median runtime after one warm-up, relative spread, and the work counters."""
    kwargs = {"chunk": SENSOR_CHUNK} if method == "sensor" else {}
    runtime_profile(method, n_t, n_t, n_omega, **kwargs)
    times = []
    counter: dict = {}
    for k in range(repeats):
        c = {} if k else counter
        times.append(runtime_profile(method, n_t, n_t, n_omega, counter=c, **kwargs))
    med = statistics.median(times)
    return med, (max(times) - min(times)) / med, counter


def run_series(
    method: str,
    axis: str,
    sizes: Sequence[int],
    fixed: int,
    repeats: int = 3,
    noise_floor: float = 0.05,
) -> ScalingReport:
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    if axis not in AXES:
        raise ValueError(f"unknown axis {axis!r}; expected one of {AXES}")
    sizes = [int(n) for n in sizes]
    runtimes, spreads, ops, expect, corr = [], [], [], [], []
    for n in sizes:
        n_t, n_omega = _grid_point(axis, n, fixed)
        med, spread, counter = measure(method, n_t, n_omega, repeats)
        runtimes.append(med)
        spreads.append(spread)
        if method == "analytic":
            ops.append(int(counter["quadrature_evals"]))
            corr.append(int(counter["correlator_steps"]))
        else:
            ops.append(int(counter["propagation_steps"]))
        expect.append(expected_ops(method, n_t, n_omega))
    slope, stderr = fit_slope(sizes, runtimes)
    band = max(noise_floor, max(spreads))
    return ScalingReport(
        method=method,
        axis=axis,
        sizes=sizes,
        runtimes=runtimes,
        fitted_slope=slope,
        slope_stderr=stderr,
        normalized_runtimes=normalize(runtimes),
        fixed_size=int(fixed),
        ops_counts=ops,
        expected_ops=expect,
        correlator_steps=corr,
        monotone=is_monotone(runtimes, band),
        repeats=repeats,
    )


def _sizes_for(spec, method: str, axis: str) -> Sequence[int]:
    if spec is None:
        return DEFAULT_SIZES[(method, axis)]
    if isinstance(spec, Mapping):
        return spec.get(method, DEFAULT_SIZES[(method, axis)])
    return spec


def run_scaling_suite(
    preset: str = "bench-fig7",
    sizes_nt: Sequence[int] | Mapping[str, Sequence[int]] | None = None,
    sizes_nw: Sequence[int] | Mapping[str, Sequence[int]] | None = None,
    repeats: int = 3,
    methods: Sequence[str] = METHODS,
    fixed: Mapping[tuple[str, str], int] | None = None,
) -> list[ScalingReport]:
    """Scaling series for every method along both axes, single-threaded.

    ``sizes_nt`` and ``sizes_nw`` are either one size list for all methods
    or a ``{method: sizes}`` mapping; missing entries use the defaults.
    The analytic method always uses ``Ntau = Nt``.
    """
    if preset not in PRESETS:
        raise ValueError(f"unknown benchmark preset {preset!r}; expected one of {PRESETS}")
    if repeats < 3:
        raise ValueError(f"need at least 3 repeats, got {repeats}")
    fixed = {**DEFAULT_FIXED, **(fixed or {})}
    reports = []
    with threadpool_limits(limits=1):
        for axis, spec in (("Nt", sizes_nt), ("Nw", sizes_nw)):
            for method in methods:
                sizes = list(_sizes_for(spec, method, axis))
                if sizes and math.log2(sizes[-1] / sizes[0]) < 3 - 1e-9:
                    raise ValueError(f"{method} {axis} sizes {sizes} span less than 3 octaves")
                reports.append(run_series(method, axis, sizes, fixed[(method, axis)], repeats))
    return reports


def correlator_cost(n_t: int) -> int:
    """Correlator single-step count with ``Ntau = Nt``."""
    return correlator_steps(n_t, n_t)
