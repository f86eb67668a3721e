from __future__ import annotations

import math

import numpy as np
import pytest

from trps import threecavity as tc


def test_default_parameters():
    p = tc.DEFAULT_PARAMS
    assert (p.g, p.eta, p.gamma, p.kappa, p.omega0) == (50.0, 400.0, 1.0, 20.0, 0.0)


@pytest.mark.parametrize("kw", [{"g": 0.0}, {"eta": -1.0}, {"gamma": -0.1}, {"kappa": -1.0}])
def test_invalid_params(kw):
    with pytest.raises(ValueError):
        tc.ModelParams(**kw)


def test_hamiltonian_structure():
    h = tc.hamiltonian(480.0)
    assert np.allclose(h, h.conj().T)
    assert not np.any(h[0]) and not np.any(h[:, 0])
    assert h[1, 3] == 50.0 and h[1, 2] == 0 and h[1, 4] == 0
    assert h[2, 2] == 480.0 and h[4, 4] == -480.0


def test_supermodes_match_numerical_eigensolver(rng):
    for _ in range(200):
        eta = rng.uniform(1.0, 1000.0)
        delta = rng.uniform(-3.0, 3.0) * eta
        modes = tc.supermodes(delta, eta)
        block = tc.cavity_block(delta, eta)
        evals = np.linalg.eigvalsh(block)
        assert np.allclose(modes.frequencies, evals, rtol=1e-12, atol=1e-9 * eta)
        for w, v in zip(modes.frequencies, modes.vectors):
            assert np.allclose(block @ v, w * v, atol=1e-9 * eta)


def test_supermode_basis_is_orthonormal(rng):
    for _ in range(50):
        eta = rng.uniform(1.0, 1000.0)
        v = tc.supermodes(rng.uniform(-3, 3) * eta, eta).vectors
        assert np.allclose(v @ v.T, np.eye(3), atol=1e-12)
        assert np.allclose(v.T @ v, np.eye(3), atol=1e-12)


def test_effective_coupling_is_odd(rng):
    for _ in range(50):
        d, eta, g = rng.uniform(-2000, 2000), rng.uniform(1, 1000), rng.uniform(1, 100)
        assert tc.effective_coupling(-d, eta, g) == pytest.approx(-tc.effective_coupling(d, eta, g))


def test_effective_coupling_at_working_point():
    g_eff = tc.effective_coupling(480.0, 400.0, 50.0)
    assert g_eff == pytest.approx(50 * 1.2 / math.sqrt(2 + 1.44))
    assert g_eff == pytest.approx(32.3498, abs=1e-4)
    # large detuning saturates at g
    assert tc.effective_coupling(1e9, 400.0, 50.0) == pytest.approx(50.0, rel=1e-9)


def test_zero_detuning_examples():
    eta = 400.0
    modes = tc.supermodes(0.0, eta)
    assert np.allclose(modes.frequencies, (-math.sqrt(2) * eta, 0.0, math.sqrt(2) * eta))
    assert np.allclose(modes.vectors[1], np.array([-1, 0, 1]) / math.sqrt(2))
    assert np.allclose(np.abs(modes.vectors[0]), [0.5, 1 / math.sqrt(2), 0.5])
    assert tc.effective_coupling(0.0, eta, 50.0) == 0.0


def test_diagonalized_hamiltonian_is_conjugation(rng):
    for delta in (0.0, 100.0, 480.0, -480.0, 2000.0):
        h = tc.hamiltonian(delta).real[1:, 1:]
        p = tc.transformation(delta, 400.0)
        assert np.allclose(p.T @ h @ p, tc.diagonalized_hamiltonian(delta), atol=1e-10)


def test_diagonalized_hamiltonian_emitter_couples_via_middle_component():
    h = tc.diagonalized_hamiltonian(480.0)
    assert h[0, 2] == pytest.approx(tc.effective_coupling(480.0, 400.0, 50.0))


def test_supermodes_reject_bad_eta():
    with pytest.raises(ValueError):
        tc.supermodes(1.0, 0.0)


# ---------------------------------------------------------------- schedules


def test_step_schedule_right_continuous():
    s = tc.DetuningSchedule("step", 480.0, 0.0, t_switch=0.05)
    assert s(0.05 - 1e-12) == 480.0
    assert s(0.05) == 0.0
    assert s(1.0) == 0.0
    assert s.breakpoints == (0.05,)


def test_gaussian_fall_value_one_width_after_switch():
    s = tc.DetuningSchedule("gaussian-fall", 480.0, 0.0, t_switch=0.05, fall_width=0.003)
    assert s(0.05) == 480.0
    assert s(0.053) == pytest.approx(480.0 * math.exp(-0.5))
    assert s(0.2) == pytest.approx(0.0, abs=1e-100)


def test_gaussian_fall_is_continuous():
    s = tc.DetuningSchedule("gaussian-fall", 480.0, 0.0, t_switch=0.05, fall_width=0.003)
    ts = np.linspace(0.0, 0.1, 200001)
    values = np.array([s(t) for t in ts])
    assert np.max(np.abs(np.diff(values))) < 1.0


def test_constant_schedule():
    s = tc.DetuningSchedule.constant(480.0)
    assert s(0.0) == s(10.0) == 480.0
    assert s.breakpoints == ()
    assert tc.evaluate_schedule(s, 0.3) == 480.0


@pytest.mark.parametrize(
    "args",
    [("ramp", 1.0), ("step", 1.0), ("gaussian-fall", 1.0, 0.0, 0.1), ("gaussian-fall", 1.0, 0.0, 0.1, -1.0)],
)
def test_schedule_validation(args):
    with pytest.raises(ValueError):
        tc.DetuningSchedule(*args)


def test_schedule_equality_and_dict():
    a = tc.DetuningSchedule("step", 480.0, 0.0, t_switch=0.05)
    b = tc.DetuningSchedule(**a.as_dict())
    assert a == b and hash(a) == hash(b)


# ---------------------------------------------------------------- states and helpers


def test_initial_state_labels():
    rho = tc.initial_state("e000")
    assert rho[1, 1] == 1 and np.trace(rho) == 1
    with pytest.raises(ValueError):
        tc.initial_state("x")


def test_mode_operator_combination():
    op = tc.mode_operator({"a": 1 / math.sqrt(2), "c": 1 / math.sqrt(2)})
    assert np.allclose(op, (tc.A + tc.C) / math.sqrt(2))
    with pytest.raises(ValueError):
        tc.mode_operator("d")


def test_time_grid_puts_switch_on_grid():
    s = tc.DetuningSchedule("step", 480.0, 0.0, t_switch=0.0537204825)
    grid = tc.time_grid(s, tc.DEFAULT_PARAMS, 0.4, multiple_of=64)
    times = grid.times
    assert np.min(np.abs(times - s.t_switch)) < 1e-14
    assert (grid.n_steps) % 64 == 0
    assert times[-1] >= 0.4 - 1e-12


def test_undamped_step_is_finer():
    s = tc.DetuningSchedule.constant(0.0)
    p = tc.ModelParams(g=110.0, gamma=0.0, kappa=0.0)
    coarse = tc.default_step(s, p)
    fine = tc.default_step(s, p, duration=0.2)
    assert fine < coarse
    omega = tc.max_frequency(s, p)
    assert 0.2 / fine * (omega * fine) ** 5 / 120 <= tc.UNDAMPED_ERROR_BUDGET


# ---------------------------------------------------------------- switch phases


def test_switch_phases_at_working_point():
    g_eff = tc.effective_coupling(480.0, 400.0, 50.0)
    valley = tc.switch_phase_time("first-valley", 480.0)
    peak = tc.switch_phase_time("first-peak", 480.0)
    assert valley == pytest.approx(0.0537204825, abs=1e-6)
    assert peak == pytest.approx(0.0975598992, abs=1e-6)
    # half a Rabi period apart, roughly
    assert peak - valley == pytest.approx(math.pi / (2 * g_eff), rel=0.1)


def test_switch_phase_errors():
    with pytest.raises(ValueError):
        tc.switch_phase_time("first-shoulder", 480.0)
    with pytest.raises(ValueError):
        tc.switch_phase_time("first-valley", 0.0)
