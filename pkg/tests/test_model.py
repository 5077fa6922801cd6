import math

import numpy as np
import pytest

from noonsim.hilbert import space
from noonsim.model import (
    CompiledSchedule,
    DetuningSegment,
    DrivePulse,
    PulseSchedule,
    default_device,
    device_from_yaml,
    full_space,
    generation_storage_levels,
    hamiltonian_at,
    schedule_from_yaml,
    sequence_tphi,
    to_yaml,
    tomography_storage_levels,
    tphi_from_ramsey,
)


@pytest.fixture(scope="module")
def device():
    return default_device()


def test_table_values(device):
    assert device.couplings[("q0", "A")] == 17.8
    assert device.couplings[("q1", "C")] == 20.0
    assert device.resonators["A"].T1 == 3500.0
    assert device.resonators["A"].f_r == 6.340
    assert device.qubits["q0"].f_nl == 0.200
    assert math.isinf(device.resonators["B"].Tphi)
    assert device.f_ref == 6.55


def test_tphi_from_ramsey_values():
    assert tphi_from_ramsey(150.0, 450.0) == pytest.approx(180.0)
    # 1/(1/120 - 1/640) = 1920/13
    assert tphi_from_ramsey(120.0, 320.0) == pytest.approx(1920.0 / 13.0)


def test_tphi_from_ramsey_error_branch():
    with pytest.raises(ValueError):
        tphi_from_ramsey(900.0, 450.0)  # T2 = 2 T1, boundary
    with pytest.raises(ValueError):
        tphi_from_ramsey(1000.0, 450.0)


def test_sequence_tphi_step(device):
    assert sequence_tphi(device, 50.0)["q0"] == 300.0
    assert sequence_tphi(device, 100.0)["q0"] == 200.0
    assert sequence_tphi(device, 75.0)["q1"] == 300.0  # inclusive boundary
    with pytest.raises(ValueError):
        sequence_tphi(device, 0.0)


def test_storage_level_defaults():
    assert tomography_storage_levels(3, 1.3) == 8
    assert tomography_storage_levels(1, 1.3) == 6
    assert generation_storage_levels(1) == 3


def _resonant_schedule(device, qubit, resonator, duration=60.0):
    f = device.resonators[resonator].f_r
    return PulseSchedule(
        duration=duration,
        detunings={qubit: (DetuningSegment(0.0, duration, f),)},
    )


def test_hamiltonian_hermitian_with_drive(device):
    sp = full_space(3)
    sched = PulseSchedule(
        duration=40.0,
        detunings={"q0": (DetuningSegment(20.0, 40.0, 6.34),)},
        drives={"q0": (DrivePulse(8.5, 10.0, 0.3, "ge"),)},
    )
    for t in (0.0, 4.0, 8.5, 13.0, 25.0, 39.9):
        h = hamiltonian_at(device, sched, t, sp).matrix
        assert np.max(np.abs(h - h.conj().T)) < 1e-12


def test_hamiltonian_time_bounds(device):
    sp = space(("q0", 3), ("A", 3))
    sched = _resonant_schedule(device, "q0", "A")
    with pytest.raises(ValueError):
        hamiltonian_at(device, sched, 61.0, sp)


@pytest.mark.parametrize("qubit,resonator", [("q0", "A"), ("q0", "C"), ("q1", "B"), ("q1", "C")])
def test_avoided_crossing_splitting(device, qubit, resonator):
    sp = space((qubit, 3), (resonator, 3))
    sched = _resonant_schedule(device, qubit, resonator)
    h = hamiltonian_at(device, sched, 30.0, sp).matrix
    i = sp.flat_index({qubit: 1})
    j = sp.flat_index({resonator: 1})
    block = h[np.ix_([i, j], [i, j])]
    gap = np.diff(np.linalg.eigvalsh(block))[0]
    splitting_mhz = gap / (2 * math.pi) * 1e3
    assert splitting_mhz == pytest.approx(device.couplings[(qubit, resonator)], rel=5e-3)


def test_excitation_number_commutes(device):
    sp = full_space(3)
    sched = _resonant_schedule(device, "q0", "A")
    h = hamiltonian_at(device, sched, 10.0, sp).matrix
    idx = np.indices(sp.shape).reshape(5, -1).sum(axis=0).astype(float)
    comm = h * (idx[:, None] - idx[None, :])  # [H, N] elementwise form
    assert np.max(np.abs(comm)) < 1e-12


def test_f_ref_shift_is_total_number(device):
    sp = full_space(3)
    sched = _resonant_schedule(device, "q0", "A")
    h1 = hamiltonian_at(device, sched, 5.0, sp).matrix
    import dataclasses

    dev2 = dataclasses.replace(device, f_ref=6.60)
    h2 = hamiltonian_at(dev2, sched, 5.0, sp).matrix
    idx = np.indices(sp.shape).reshape(5, -1).sum(axis=0).astype(float)
    expected = h1 - 2 * math.pi * 0.05 * np.diag(idx)
    assert np.allclose(h2, expected, atol=1e-9)


def test_drive_matrix_element(device):
    sp = space(("q0", 3),)
    amp = 0.25
    sched = PulseSchedule(
        duration=20.0, drives={"q0": (DrivePulse(10.0, 10.0, amp, "ge"),)}
    )
    h = hamiltonian_at(device, sched, 10.0, sp).matrix
    # peak of the envelope: |<e|H|g>| = amp/2
    assert abs(h[1, 0]) == pytest.approx(amp / 2, rel=1e-12)
    assert abs(h[2, 1]) == pytest.approx(np.sqrt(2) * amp / 2, rel=1e-12)


def test_schedule_validation():
    with pytest.raises(ValueError):
        PulseSchedule(
            duration=10.0,
            detunings={"q0": (DetuningSegment(0, 6, 6.3), DetuningSegment(5, 9, 6.4))},
        )
    with pytest.raises(ValueError):
        PulseSchedule(duration=10.0, drives={"q0": (DrivePulse(9.9, 10.0, 0.1, "ge"),)})
    with pytest.raises(ValueError):
        PulseSchedule(duration=10.0, detunings={"A": (DetuningSegment(0, 5, 6.3),)})


def test_f_ge_lookup(device):
    sched = PulseSchedule(
        duration=30.0, detunings={"q0": (DetuningSegment(10.0, 20.0, 6.34),)}
    )
    assert sched.f_ge(device, "q0", 5.0) == device.qubits["q0"].f_ge_idle
    assert sched.f_ge(device, "q0", 15.0) == 6.34
    assert sched.f_ge(device, "q1", 15.0) == device.qubits["q1"].f_ge_idle


def test_shifted_schedule(device):
    sched = PulseSchedule(
        duration=30.0,
        detunings={"q0": (DetuningSegment(10.0, 20.0, 6.34),)},
        drives={"q0": (DrivePulse(9.0, 10.0, 0.1, "ge"),)},
        markers={"bell_end": 12.0},
    )
    out = sched.shifted(9.0, 7.0)
    assert out.duration == 37.0
    assert out.detunings["q0"][0].t0 == 17.0
    assert out.drives["q0"][0].t_center == 16.0  # before the insertion point
    assert out.markers["bell_end"] == 19.0


def test_yaml_round_trip(device):
    text = to_yaml(device)
    dev2 = device_from_yaml(text)
    assert dev2 == device

    sched = PulseSchedule(
        duration=25.0,
        detunings={"q1": (DetuningSegment(1.0, 11.0, 6.286),)},
        drives={"q0": (DrivePulse(9.0, 10.0, 0.2 + 0.1j, "ef", 0.4),)},
        markers={"x": 1.5},
    )
    sched2 = schedule_from_yaml(to_yaml(sched))
    assert sched2 == sched


def test_compiled_schedule_intervals(device):
    sp = full_space(3)
    sched = PulseSchedule(
        duration=50.0,
        detunings={"q0": (DetuningSegment(20.0, 48.0, 6.34),)},
        drives={"q0": (DrivePulse(8.5, 10.0, 0.3, "ge"),)},
    )
    comp = CompiledSchedule(device, sched, sp)
    assert comp.edges[0] == 0.0 and comp.edges[-1] == 50.0
    assert not comp.is_static
    static = CompiledSchedule(device, PulseSchedule(duration=10.0), sp)
    assert static.is_static
