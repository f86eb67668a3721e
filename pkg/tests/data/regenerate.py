"""Rebuild the frozen reference data in this directory.

    python3 tests/data/regenerate.py

tls_population_reference.csv: TLS population at Delta = 1.2 eta with the
default parameters, from a run at a quarter of the default step, sampled
every 64 default steps over 0.3 ns.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from trps import threecavity as tc
from trps.quantum import TimeGrid, propagate

HERE = Path(__file__).parent
DURATION = 0.3
STRIDE = 64


def reference_grid(refine: int) -> TimeGrid:
    s = tc.DetuningSchedule.constant(1.2 * tc.DEFAULT_PARAMS.eta)
    base = tc.time_grid(s, tc.DEFAULT_PARAMS, DURATION, multiple_of=STRIDE)
    return TimeGrid(base.t0, base.t1, base.dt / refine)


def main() -> None:
    s = tc.DetuningSchedule.constant(1.2 * tc.DEFAULT_PARAMS.eta)
    grid = reference_grid(4)
    rhos = propagate(tc.initial_state("e"), tc.build_time_dependent_generator(s), grid)
    pop = tc.populations(rhos)["sigma"][:: 4 * STRIDE]
    times = grid.times[:: 4 * STRIDE]
    np.savetxt(
        HERE / "tls_population_reference.csv",
        np.column_stack([times, pop]),
        delimiter=",",
        header="t_ns,sigma",
        comments="",
        fmt="%.17g",
    )


if __name__ == "__main__":
    main()
