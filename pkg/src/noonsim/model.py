"""Device parameters and rotating-frame Hamiltonian assembly.

Units across all interfaces: frequencies in GHz, times in ns, coupling
strengths quoted as g/pi in MHz (the measured vacuum-Rabi splitting in
linear frequency). Conversion to angular units (rad/ns) happens only
inside Hamiltonian assembly.

The rotating frame uses a single reference frequency ``f_ref`` for every
subsystem; an element detuned by ``df`` above the reference accumulates
phase as exp(-i 2 pi df t).
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np
import yaml
from scipy import sparse

from .hilbert import (
    CompositeSpace,
    Operator,
    QUBIT_LABELS,
    RESONATOR_LABELS,
    lowering_matrix,
    space,
)

COUPLING_PAIRS = (("q0", "A"), ("q0", "C"), ("q1", "B"), ("q1", "C"))

TPHI_CROSSOVER_NS = 75.0  # inclusive boundary between short and long regimes


@dataclass(frozen=True)
class ResonatorParams:
    f_r: float  # GHz
    T1: float  # ns
    Tphi: float = math.inf  # ns; Tphi >> T1 for these resonators

    def __post_init__(self):
        if self.T1 <= 0 or self.Tphi <= 0:
            raise ValueError("resonator decay times must be positive")


@dataclass(frozen=True)
class QubitParams:
    f_ge_idle: float  # GHz
    f_nl: float  # GHz, f_ge - f_ef
    T1: float  # ns
    Tphi_short: float  # ns, short preparation sequences
    Tphi_long: float  # ns, long preparation sequences

    def __post_init__(self):
        if self.T1 <= 0 or self.Tphi_short <= 0 or self.Tphi_long <= 0:
            raise ValueError("qubit decay times must be positive")
        if self.f_nl <= 0:
            raise ValueError("qubit nonlinearity must be positive")


@dataclass(frozen=True)
class DeviceModel:
    """All device parameters consumed by the simulator."""

    resonators: Mapping[str, ResonatorParams]
    qubits: Mapping[str, QubitParams]
    couplings: Mapping[tuple[str, str], float]  # g/pi in MHz
    f_ref: float  # GHz, rotating-frame reference

    def __post_init__(self):
        object.__setattr__(self, "resonators", dict(self.resonators))
        object.__setattr__(self, "qubits", dict(self.qubits))
        object.__setattr__(
            self, "couplings", {tuple(k): float(v) for k, v in self.couplings.items()}
        )
        if set(self.couplings) != set(COUPLING_PAIRS):
            raise ValueError(f"couplings must cover exactly the pairs {COUPLING_PAIRS}")
        if any(g <= 0 for g in self.couplings.values()):
            raise ValueError("couplings must be positive")

    def g_angular(self, qubit: str, resonator: str) -> float:
        """Coupling g in rad/ns; the splitting g/pi is stored in MHz."""
        return math.pi * self.couplings[(qubit, resonator)] * 1e-3

    def fingerprint(self) -> tuple:
        res = tuple(sorted((k, v.f_r, v.T1, v.Tphi) for k, v in self.resonators.items()))
        qub = tuple(
            sorted(
                (k, v.f_ge_idle, v.f_nl, v.T1, v.Tphi_short, v.Tphi_long)
                for k, v in self.qubits.items()
            )
        )
        cpl = tuple(sorted(self.couplings.items()))
        return (res, qub, cpl, self.f_ref)


def default_device(q1_idle: float = 6.58) -> DeviceModel:
    """Measured device parameters (frequencies GHz, times ns, g/pi MHz).

    The q1 idle frequency is quoted ambiguously as 6.58 or 6.68 GHz; 6.58
    is the default and it stays configurable.
    """
    return DeviceModel(
        resonators={
            "A": ResonatorParams(f_r=6.340, T1=3500.0),
            "B": ResonatorParams(f_r=6.286, T1=3300.0),
            "C": ResonatorParams(f_r=6.816, T1=3400.0),
        },
        qubits={
            "q0": QubitParams(
                f_ge_idle=6.65, f_nl=0.200, T1=450.0, Tphi_short=300.0, Tphi_long=200.0
            ),
            "q1": QubitParams(
                f_ge_idle=q1_idle,
                f_nl=0.200,
                T1=320.0,
                Tphi_short=300.0,
                Tphi_long=200.0,
            ),
        },
        couplings={
            ("q0", "A"): 17.8,
            ("q0", "C"): 20.0,
            ("q1", "B"): 17.4,
            ("q1", "C"): 20.0,
        },
        f_ref=6.55,
    )


def tphi_from_ramsey(T2: float, T1: float) -> float:
    """Pure dephasing time from Ramsey T2 and relaxation T1."""
    if T2 <= 0 or T1 <= 0:
        raise ValueError("T1 and T2 must be positive")
    rate = 1.0 / T2 - 1.0 / (2.0 * T1)
    if rate <= 0:
        raise ValueError(
            f"1/T2 <= 1/(2 T1) for T2={T2}, T1={T1}: no positive pure dephasing time"
        )
    return 1.0 / rate


def sequence_tphi(device: DeviceModel, sequence_length: float) -> dict[str, float]:
    """Per-qubit Tphi for a preparation sequence of the given length.

    The 1/f character of the phase noise makes Tphi shrink with sequence
    length; the two quoted operating points are modeled as a step at 75 ns
    (inclusive on the short side).
    """
    if sequence_length <= 0:
        raise ValueError("sequence length must be positive")
    short = sequence_length <= TPHI_CROSSOVER_NS
    return {
        q: (p.Tphi_short if short else p.Tphi_long) for q, p in device.qubits.items()
    }


# --------------------------------------------------------------------------
# Pulse schedules


@dataclass(frozen=True)
class DetuningSegment:
    """Square frequency-tuning segment: f_ge held at ``f_ge`` on [t0, t1)."""

    t0: float
    t1: float
    f_ge: float  # GHz

    def __post_init__(self):
        if self.t1 <= self.t0:
            raise ValueError("detuning segment must have t1 > t0")


@dataclass(frozen=True)
class DrivePulse:
    """Gaussian microwave pulse on one qubit, truncated at +-2 sigma.

    ``amplitude`` is the complex peak Rabi amplitude in rad/ns; ``carrier``
    selects the ge or ef transition frequency at the pulse center.
    """

    t_center: float
    fwhm: float
    amplitude: complex
    carrier: str  # "ge" | "ef"
    phase: float = 0.0

    def __post_init__(self):
        if self.fwhm <= 0:
            raise ValueError("pulse FWHM must be positive")
        if self.carrier not in ("ge", "ef"):
            raise ValueError(f"unknown carrier {self.carrier!r}")

    @property
    def sigma(self) -> float:
        return self.fwhm / (2.0 * math.sqrt(2.0 * math.log(2.0)))

    @property
    def span(self) -> tuple[float, float]:
        return (self.t_center - 2 * self.sigma, self.t_center + 2 * self.sigma)


@dataclass(frozen=True)
class DisplacementEvent:
    """Instantaneous phase-space displacement of one resonator at time t."""

    t: float
    alpha: complex


@dataclass(frozen=True)
class PulseSchedule:
    duration: float
    detunings: Mapping[str, tuple[DetuningSegment, ...]] = field(default_factory=dict)
    drives: Mapping[str, tuple[DrivePulse, ...]] = field(default_factory=dict)
    displacements: Mapping[str, tuple[DisplacementEvent, ...]] = field(
        default_factory=dict
    )
    markers: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError("schedule duration must be positive")
        eps = 1e-9
        det = {}
        for q, segs in self.detunings.items():
            if q not in QUBIT_LABELS:
                raise ValueError(f"detuning channel {q!r} is not a qubit")
            segs = tuple(sorted(segs, key=lambda s: s.t0))
            for a, b in zip(segs, segs[1:]):
                if b.t0 < a.t1 - eps:
                    raise ValueError(f"overlapping detuning segments on {q}")
            for s in segs:
                if s.t0 < -eps or s.t1 > self.duration + eps:
                    raise ValueError(f"detuning segment outside schedule on {q}")
            det[q] = segs
        drv = {}
        for q, pulses in self.drives.items():
            if q not in QUBIT_LABELS:
                raise ValueError(f"drive channel {q!r} is not a qubit")
            pulses = tuple(sorted(pulses, key=lambda p: p.t_center))
            for p in pulses:
                lo, hi = p.span
                if lo < -eps or hi > self.duration + eps:
                    raise ValueError(f"drive pulse outside schedule on {q}")
            drv[q] = pulses
        dsp = {}
        for r, events in self.displacements.items():
            if r not in RESONATOR_LABELS:
                raise ValueError(f"displacement channel {r!r} is not a resonator")
            events = tuple(sorted(events, key=lambda e: e.t))
            for e in events:
                if e.t < -eps or e.t > self.duration + eps:
                    raise ValueError(f"displacement outside schedule on {r}")
            dsp[r] = events
        object.__setattr__(self, "detunings", det)
        object.__setattr__(self, "drives", drv)
        object.__setattr__(self, "displacements", dsp)
        object.__setattr__(self, "markers", dict(self.markers))

    def f_ge(self, device: DeviceModel, qubit: str, t: float) -> float:
        """Qubit ge frequency at time t (idle unless a segment covers t)."""
        for seg in self.detunings.get(qubit, ()):
            if seg.t0 - 1e-12 <= t < seg.t1 - 1e-12:
                return seg.f_ge
        return device.qubits[qubit].f_ge_idle

    def shifted(self, t_insert: float, delay: float) -> "PulseSchedule":
        """Push everything at or after ``t_insert`` later by ``delay``."""

        def mv(t):
            return t + delay if t >= t_insert - 1e-9 else t

        det = {
            q: tuple(
                DetuningSegment(mv(s.t0), mv(s.t1), s.f_ge) for s in segs
            )
            for q, segs in self.detunings.items()
        }
        drv = {
            q: tuple(
                replace(p, t_center=mv(p.t_center)) for p in pulses
            )
            for q, pulses in self.drives.items()
        }
        dsp = {
            r: tuple(DisplacementEvent(mv(e.t), e.alpha) for e in events)
            for r, events in self.displacements.items()
        }
        markers = {k: mv(v) for k, v in self.markers.items()}
        return PulseSchedule(self.duration + delay, det, drv, dsp, markers)


@dataclass(frozen=True)
class FrameConvention:
    """Single rotating frame; detuned elements rotate as exp(-i 2 pi df t)."""

    f_ref: float

    def phase(self, df: float, t: float) -> complex:
        return np.exp(-2j * math.pi * df * t)


# --------------------------------------------------------------------------
# Space builders

GENERATION_MARGIN = 2
TOMOGRAPHY_MARGIN = 3
DEFAULT_MAX_RADIUS = 1.3


def generation_storage_levels(n_photons: int) -> int:
    """Levels retained while preparing an n-photon state (no displacements)."""
    return n_photons + GENERATION_MARGIN


def tomography_storage_levels(
    n_photons: int, max_radius: float = DEFAULT_MAX_RADIUS
) -> int:
    """Displacements add photons, so the retained ladder grows with the grid."""
    return n_photons + math.ceil(max_radius**2) + TOMOGRAPHY_MARGIN


def full_space(
    levels_a: int, levels_b: int | None = None, levels_c: int = 3
) -> CompositeSpace:
    if levels_b is None:
        levels_b = levels_a
    return space(
        ("q0", 3), ("q1", 3), ("A", levels_a), ("B", levels_b), ("C", levels_c)
    )


# --------------------------------------------------------------------------
# Hamiltonian assembly

_TWO_PI = 2.0 * math.pi


class _SpaceOps:
    """Sparse building blocks for one composite space (cached)."""

    def __init__(self, sp: CompositeSpace):
        self.space = sp
        shape = sp.shape
        idx = np.indices(shape).reshape(len(shape), -1)
        self.level_index = {lbl: idx[i].astype(float) for i, lbl in enumerate(sp.labels)}
        self.lowering = {}
        for lbl in sp.labels:
            mats = [
                sparse.identity(s.levels, format="csr", dtype=complex)
                if s.label != lbl
                else sparse.csr_matrix(lowering_matrix(s.levels))
                for s in sp.subsystems
            ]
            full = mats[0]
            for m in mats[1:]:
                full = sparse.kron(full, m, format="csr")
            self.lowering[lbl] = full
        self.coupling_pattern = {}
        for q, r in COUPLING_PAIRS:
            if sp.has(q) and sp.has(r):
                a, b = self.lowering[q], self.lowering[r]
                x = (a.conj().T @ b + a @ b.conj().T).tocsr()
                x.sort_indices()
                self.coupling_pattern[(q, r)] = x


_space_ops_cache: dict[CompositeSpace, _SpaceOps] = {}


def space_ops(sp: CompositeSpace) -> _SpaceOps:
    ops = _space_ops_cache.get(sp)
    if ops is None:
        ops = _SpaceOps(sp)
        _space_ops_cache[sp] = ops
    return ops


def _qudit_diag_coeffs(levels: int, delta: float, f_nl: float) -> np.ndarray:
    """Rotating-frame qudit level frequencies in GHz: 0, d, 2d - f_nl, ..."""
    k = np.arange(levels, dtype=float)
    return k * delta - np.maximum(0.0, k - 1.0) * f_nl


@dataclass
class _ActiveDrive:
    qubit: str
    coeff: Callable[[float], complex]  # multiplies the raising-operator term


@dataclass
class _Interval:
    t0: float
    t1: float
    f_ge: dict[str, float]
    diag: np.ndarray  # rad/ns
    drives: list[_ActiveDrive]


class CompiledSchedule:
    """Piecewise decomposition of H(t) = diag + couplings + drives.

    Intervals are delimited by detuning edges, pulse edges and displacement
    events; within one interval the diagonal is constant and only the drive
    coefficients vary smoothly.
    """

    def __init__(self, device: DeviceModel, schedule: PulseSchedule, sp: CompositeSpace):
        self.device = device
        self.schedule = schedule
        self.space = sp
        self.ops = space_ops(sp)

        knots = {0.0, schedule.duration}
        for segs in schedule.detunings.values():
            for s in segs:
                knots.update((max(0.0, s.t0), min(schedule.duration, s.t1)))
        for pulses in schedule.drives.values():
            for p in pulses:
                lo, hi = p.span
                knots.update((max(0.0, lo), min(schedule.duration, hi)))
        self.events: list[tuple[float, str, complex]] = []
        for r, events in schedule.displacements.items():
            for e in events:
                knots.add(min(max(e.t, 0.0), schedule.duration))
                self.events.append((e.t, r, e.alpha))
        self.events.sort(key=lambda e: e[0])
        edges = sorted(knots)
        merged = [edges[0]]
        for t in edges[1:]:
            if t - merged[-1] > 1e-9:
                merged.append(t)
        self.edges = np.array(merged)

        # Static coupling part is interval-independent.
        self.vstatic = None
        for (q, r), pattern in self.ops.coupling_pattern.items():
            term = device.g_angular(q, r) * pattern
            self.vstatic = term if self.vstatic is None else self.vstatic + term
        if self.vstatic is None:
            self.vstatic = sparse.csr_matrix((sp.dim, sp.dim), dtype=complex)
        self.vstatic.sort_indices()

        self.intervals: list[_Interval] = []
        for t0, t1 in zip(self.edges[:-1], self.edges[1:]):
            tm = 0.5 * (t0 + t1)
            f_ge = {
                q: schedule.f_ge(device, q, tm)
                for q in sp.labels
                if q in QUBIT_LABELS
            }
            diag = np.zeros(sp.dim)
            for lbl in sp.labels:
                if lbl in RESONATOR_LABELS:
                    df = device.resonators[lbl].f_r - device.f_ref
                    diag += _TWO_PI * df * self.ops.level_index[lbl]
                else:
                    par = device.qubits[lbl]
                    coeff = _qudit_diag_coeffs(
                        sp.levels(lbl), f_ge[lbl] - device.f_ref, par.f_nl
                    )
                    diag += _TWO_PI * coeff[self.ops.level_index[lbl].astype(int)]
            drives = []
            for q, pulses in schedule.drives.items():
                if not sp.has(q):
                    continue
                for p in pulses:
                    lo, hi = p.span
                    if lo < t1 - 1e-12 and hi > t0 + 1e-12:
                        drives.append(_ActiveDrive(q, self._make_coeff(q, p)))
            self.intervals.append(_Interval(float(t0), float(t1), f_ge, diag, drives))

    def _make_coeff(self, qubit: str, pulse: DrivePulse) -> Callable[[float], complex]:
        par = self.device.qubits[qubit]
        f_carrier = self.schedule.f_ge(self.device, qubit, pulse.t_center)
        if pulse.carrier == "ef":
            f_carrier -= par.f_nl
        delta_c = f_carrier - self.device.f_ref
        sig = pulse.sigma
        t0, amp, phase = pulse.t_center, pulse.amplitude, pulse.phase
        lo, hi = pulse.span

        def coeff(t: float) -> complex:
            if t < lo or t > hi:
                return 0.0
            env = math.exp(-((t - t0) ** 2) / (2.0 * sig * sig))
            return 0.5 * amp * env * np.exp(1j * (phase - _TWO_PI * delta_c * t))

        return coeff

    def interval_at(self, t: float) -> _Interval:
        i = bisect_right(self.edges, t) - 1
        i = min(max(i, 0), len(self.intervals) - 1)
        return self.intervals[i]

    @property
    def is_static(self) -> bool:
        return len(self.intervals) == 1 and not self.intervals[0].drives and not self.events

    def dense_h(self, t: float) -> np.ndarray:
        """Full Hamiltonian matrix at time t (rotating frame, rad/ns)."""
        iv = self.interval_at(t)
        h = self.vstatic.toarray()
        h[np.diag_indices_from(h)] += iv.diag
        for drv in iv.drives:
            c = drv.coeff(t)
            if c != 0.0:
                adag = self.ops.lowering[drv.qubit].conj().T
                h += c * adag.toarray() + np.conj(c) * adag.conj().T.toarray()
        return h


def hamiltonian_at(
    device: DeviceModel, schedule: PulseSchedule, t: float, sp: CompositeSpace
) -> Operator:
    """Hermitian rotating-frame Hamiltonian at time t, in rad/ns."""
    if t < -1e-9 or t > schedule.duration + 1e-9:
        raise ValueError(f"t={t} outside schedule [0, {schedule.duration}]")
    return Operator(sp, CompiledSchedule(device, schedule, sp).dense_h(t))


# --------------------------------------------------------------------------
# Serialization (YAML, key-value with nested sections)


def device_to_dict(device: DeviceModel) -> dict:
    return {
        "resonators": {
            k: {"f_r": v.f_r, "T1": v.T1, "Tphi": v.Tphi}
            for k, v in device.resonators.items()
        },
        "qubits": {
            k: {
                "f_ge_idle": v.f_ge_idle,
                "f_nl": v.f_nl,
                "T1": v.T1,
                "Tphi_short": v.Tphi_short,
                "Tphi_long": v.Tphi_long,
            }
            for k, v in device.qubits.items()
        },
        "couplings": {f"{q},{r}": g for (q, r), g in device.couplings.items()},
        "f_ref": device.f_ref,
    }


def device_from_dict(data: Mapping) -> DeviceModel:
    return DeviceModel(
        resonators={k: ResonatorParams(**v) for k, v in data["resonators"].items()},
        qubits={k: QubitParams(**v) for k, v in data["qubits"].items()},
        couplings={
            tuple(k.split(",")): float(v) for k, v in data["couplings"].items()
        },
        f_ref=float(data["f_ref"]),
    )


def schedule_to_dict(schedule: PulseSchedule) -> dict:
    return {
        "duration": schedule.duration,
        "detunings": {
            q: [{"t0": s.t0, "t1": s.t1, "f_ge": s.f_ge} for s in segs]
            for q, segs in schedule.detunings.items()
        },
        "drives": {
            q: [
                {
                    "t_center": p.t_center,
                    "fwhm": p.fwhm,
                    "amplitude": [p.amplitude.real, p.amplitude.imag],
                    "carrier": p.carrier,
                    "phase": p.phase,
                }
                for p in pulses
            ]
            for q, pulses in schedule.drives.items()
        },
        "displacements": {
            r: [{"t": e.t, "alpha": [e.alpha.real, e.alpha.imag]} for e in events]
            for r, events in schedule.displacements.items()
        },
        "markers": dict(schedule.markers),
    }


def schedule_from_dict(data: Mapping) -> PulseSchedule:
    return PulseSchedule(
        duration=float(data["duration"]),
        detunings={
            q: tuple(DetuningSegment(s["t0"], s["t1"], s["f_ge"]) for s in segs)
            for q, segs in data.get("detunings", {}).items()
        },
        drives={
            q: tuple(
                DrivePulse(
                    t_center=p["t_center"],
                    fwhm=p["fwhm"],
                    amplitude=complex(p["amplitude"][0], p["amplitude"][1]),
                    carrier=p["carrier"],
                    phase=p.get("phase", 0.0),
                )
                for p in pulses
            )
            for q, pulses in data.get("drives", {}).items()
        },
        displacements={
            r: tuple(
                DisplacementEvent(e["t"], complex(e["alpha"][0], e["alpha"][1]))
                for e in events
            )
            for r, events in data.get("displacements", {}).items()
        },
        markers=data.get("markers", {}),
    )


def to_yaml(obj: DeviceModel | PulseSchedule) -> str:
    data = device_to_dict(obj) if isinstance(obj, DeviceModel) else schedule_to_dict(obj)
    return yaml.safe_dump(data, sort_keys=True, default_flow_style=False)


def device_from_yaml(text: str) -> DeviceModel:
    return device_from_dict(yaml.safe_load(text))


def schedule_from_yaml(text: str) -> PulseSchedule:
    return schedule_from_dict(yaml.safe_load(text))
