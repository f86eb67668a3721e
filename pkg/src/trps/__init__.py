"""Time-resolved physical spectra of time-dependent open cavity-QED systems.

Two independent routes to the spectrum are provided: weakly coupled sensor
modes (``trps.sensor``) and the quantum-regression double integral
(``trps.analytic``). ``trps.threecavity`` holds the emitter plus three
coupled cavities used as the reference model.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .analytic import CorrelatorGrid, analytic_trps, runtime_profile, two_time_correlator
from .bench import ScalingReport, run_scaling_suite
from .quantum import (
    LindbladGenerator,
    TimeGrid,
    assemble_generator,
    expectation,
    ladder_operators,
    propagate,
)
from .sensor import SensorConfig, TRPSMap, attach_sensor, sensor_population, sensor_trps
from .threecavity import (
    DetuningSchedule,
    ModelParams,
    SupermodeSet,
    build_time_dependent_generator,
    diagonalized_hamiltonian,
    effective_coupling,
    evaluate_schedule,
    hamiltonian,
    supermodes,
)

__all__ = [
    "CorrelatorGrid",
    "DetuningSchedule",
    "LindbladGenerator",
    "ModelParams",
    "ScalingReport",
    "SensorConfig",
    "SupermodeSet",
    "TRPSMap",
    "TimeGrid",
    "analytic_trps",
    "assemble_generator",
    "attach_sensor",
    "build_time_dependent_generator",
    "diagonalized_hamiltonian",
    "effective_coupling",
    "evaluate_schedule",
    "expectation",
    "hamiltonian",
    "ladder_operators",
    "propagate",
    "run_scaling_suite",
    "runtime_profile",
    "sensor_population",
    "sensor_trps",
    "supermodes",
    "two_time_correlator",
]
