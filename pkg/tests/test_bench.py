from __future__ import annotations

import numpy as np
import pytest

from trps import bench
from trps.analytic import correlator_steps, runtime_profile
from trps.cli.io import BENCH_COLUMNS


def test_normalize_is_min_max():
    assert bench.normalize([2.0, 4.0, 3.0]) == [0.0, 1.0, 0.5]
    assert bench.normalize([1.0, 1.0]) == [1.0, 1.0]


def test_fit_slope_recovers_power_law():
    sizes = [16, 32, 64, 128]
    slope, err = bench.fit_slope(sizes, [3e-4 * n**2 for n in sizes])
    assert slope == pytest.approx(2.0, abs=1e-12)
    assert err == pytest.approx(0.0, abs=1e-10)


def test_monotone_flag_tolerates_noise_band():
    assert bench.is_monotone([1.0, 0.97, 2.0], 0.05)
    assert not bench.is_monotone([1.0, 0.9, 2.0], 0.05)


def test_expected_ops_formulas():
    assert bench.expected_ops("analytic", 64, 16) == 64 * 64 * 16
    assert bench.expected_ops("sensor", 64, 16) == 63 * 16
    assert bench.correlator_cost(5) == 4 + 3 + 2 + 1
    assert correlator_steps(6, 3) == 5 + 4


@pytest.mark.parametrize("method", bench.METHODS)
def test_counters_match_formulas(method):
    counter = {}
    runtime_profile(method, 32, 32, 16, counter=counter)
    key = "quadrature_evals" if method == "analytic" else "propagation_steps"
    assert counter[key] == bench.expected_ops(method, 32, 16)
    if method == "analytic":
        assert counter["correlator_steps"] == bench.correlator_cost(32)


def test_runtime_profile_validation():
    with pytest.raises(ValueError):
        runtime_profile("analytic", 8, 8, 16)
    with pytest.raises(ValueError):
        runtime_profile("fourier", 32, 32, 16)


def report(**kw):
    base = dict(
        method="sensor",
        axis="Nt",
        sizes=[16, 32, 64, 128],
        runtimes=[1.0, 2.0, 4.0, 8.0],
        fitted_slope=1.0,
        slope_stderr=0.0,
        normalized_runtimes=[0.0, 1 / 7, 3 / 7, 1.0],
        fixed_size=16,
    )
    base.update(kw)
    return bench.ScalingReport(**base)


def test_report_validation():
    report()
    with pytest.raises(ValueError):
        report(sizes=[16, 16, 64, 128])
    with pytest.raises(ValueError):
        report(sizes=[16, 32, 64], runtimes=[1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        report(runtimes=[0.0, 2.0, 4.0, 8.0])


def test_suite_validation():
    with pytest.raises(ValueError):
        bench.run_scaling_suite("fig7")
    with pytest.raises(ValueError):
        bench.run_scaling_suite(repeats=2)
    with pytest.raises(ValueError):
        bench.run_scaling_suite(sizes_nt=[16, 32, 64, 100], methods=["sensor"])
    with pytest.raises(ValueError):
        bench.run_series("sensor", "Nq", [16, 32, 64, 128], 16)


def test_small_suite_reports():
    reports = bench.run_scaling_suite(
        "no-switch",
        sizes_nt=[16, 32, 64, 128],
        sizes_nw=[16, 32, 64, 128],
        fixed={(m, a): 16 for m in bench.METHODS for a in bench.AXES},
    )
    assert [(r.method, r.axis) for r in reports] == [
        ("analytic", "Nt"),
        ("sensor", "Nt"),
        ("analytic", "Nw"),
        ("sensor", "Nw"),
    ]
    for r in reports:
        assert r.ops_match
        assert min(r.normalized_runtimes) == 0.0 and max(r.normalized_runtimes) == 1.0
        assert np.isfinite(r.fitted_slope)
        rows = r.rows()
        assert len(rows) == 4 and tuple(rows[0]) == BENCH_COLUMNS
        assert r.as_dict()["ops_match"] is True
