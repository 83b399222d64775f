"""Compile gates into piecewise-constant pendulum controls.

Two physical knobs exist.  Detuning a pendulum (shortening its thread) by
``delta`` for a time ``t`` advances its phase by ``delta * t``.  Hanging a
spring between two pendulums splits the pair into an in-phase mode at the
carrier and an opposite-phase mode ``delta_omega`` above it; over a time
``t`` the opposite-phase combination gains ``delta_omega * t`` relative to the
in-phase one.  Every gate the package knows is one (or, for ``h``, three)
segments built from these knobs, all using the same control budget
``delta_omega`` so that durations follow ``angle / delta_omega``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Sequence, Union

import numpy as np
import scipy.linalg

from .circuit import Circuit, GateOp, rx, rz
from .errors import QubitIndexError, ScheduleError

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class PhysicalParams:
    """Carrier frequency (rad/s), pendulum mass (kg) and control budget (rad/s)."""

    omega0: float = TWO_PI
    mass: float = 1.0
    delta_omega_budget: Optional[float] = None

    def __post_init__(self) -> None:
        if not self.omega0 > 0:
            raise ValueError(f"omega0 must be positive, got {self.omega0}")
        if not self.mass > 0:
            raise ValueError(f"mass must be positive, got {self.mass}")
        if self.delta_omega_budget is None:
            object.__setattr__(self, "delta_omega_budget", self.omega0 / 100.0)
        if not 0 < self.delta_omega_budget < self.omega0:
            raise ValueError(
                f"delta_omega_budget must lie in (0, omega0), got {self.delta_omega_budget}"
            )

    @classmethod
    def from_ratio(cls, ratio: float, omega0: float = TWO_PI, mass: float = 1.0) -> "PhysicalParams":
        return cls(omega0=omega0, mass=mass, delta_omega_budget=ratio * omega0)

    @property
    def ratio(self) -> float:
        return self.delta_omega_budget / self.omega0

    @property
    def carrier_period(self) -> float:
        return TWO_PI / self.omega0

    def to_json(self) -> dict:
        return {"omega0": self.omega0, "mass": self.mass, "delta_omega_budget": self.delta_omega_budget}

    @classmethod
    def from_json(cls, data: Mapping) -> "PhysicalParams":
        return cls(float(data["omega0"]), float(data["mass"]), float(data["delta_omega_budget"]))


@dataclass(frozen=True)
class ControlSegment:
    """Constant controls held for ``duration`` seconds.

    ``detunings`` maps pendulum index to a frequency shift; ``springs`` lists
    ``(i, j, splitting)`` with ``i < j``.  No pendulum may sit in two springs
    or be detuned and sprung at once.
    """

    duration: float
    detunings: Mapping[int, float] = field(default_factory=dict)
    springs: tuple[tuple[int, int, float], ...] = ()
    label: str = ""

    def __post_init__(self) -> None:
        if not (math.isfinite(self.duration) and self.duration >= 0):
            raise ScheduleError(f"segment duration must be finite and >= 0, got {self.duration}")
        det = {int(k): float(v) for k, v in dict(self.detunings).items()}
        springs = tuple((int(i), int(j), float(w)) for i, j, w in self.springs)
        used: set[int] = set()
        for i, j, w in springs:
            if not i < j:
                raise ScheduleError(f"spring ({i}, {j}) must satisfy i < j")
            if i < 0:
                raise ScheduleError(f"negative pendulum index in spring ({i}, {j})")
            if not math.isfinite(w):
                raise ScheduleError(f"spring ({i}, {j}) has non-finite splitting")
            if i in used or j in used:
                raise ScheduleError(f"spring ({i}, {j}) overlaps another spring in the segment")
            used.update((i, j))
        for k, d in det.items():
            if k < 0 or not math.isfinite(d):
                raise ScheduleError(f"bad detuning {d} on pendulum {k}")
            if k in used:
                raise ScheduleError(f"pendulum {k} is both detuned and sprung")
        object.__setattr__(self, "detunings", det)
        object.__setattr__(self, "springs", springs)

    def max_index(self) -> int:
        idx = list(self.detunings) + [j for _, j, _ in self.springs]
        return max(idx, default=-1)

    def scaled(self, factor: float) -> "ControlSegment":
        """Controls times ``factor``, duration divided by it (same rotation angles)."""
        return ControlSegment(
            self.duration / factor,
            {k: d * factor for k, d in self.detunings.items()},
            tuple((i, j, w * factor) for i, j, w in self.springs),
            self.label,
        )

    def to_json(self) -> dict:
        return {
            "type": "segment",
            "label": self.label,
            "duration": self.duration,
            "detunings": {str(k): d for k, d in sorted(self.detunings.items())},
            "springs": [[i, j, w] for i, j, w in self.springs],
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "ControlSegment":
        return cls(
            float(data["duration"]),
            {int(k): float(v) for k, v in data.get("detunings", {}).items()},
            tuple((int(i), int(j), float(w)) for i, j, w in data.get("springs", [])),
            data.get("label", ""),
        )


@dataclass(frozen=True)
class MeasureMarker:
    """Measurement placeholder; ``qubit=None`` measures the whole register."""

    qubit: Optional[int] = None

    def to_json(self) -> dict:
        return {"type": "measure", "qubit": "all" if self.qubit is None else self.qubit}


ScheduleItem = Union[ControlSegment, MeasureMarker]


@dataclass(frozen=True)
class ControlSchedule:
    n_qubits: int
    items: tuple[ScheduleItem, ...] = ()
    params: Optional[PhysicalParams] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "items", tuple(self.items))
        dim = 1 << self.n_qubits
        for item in self.items:
            if isinstance(item, ControlSegment):
                if item.max_index() >= dim:
                    raise QubitIndexError(f"segment {item.label!r} touches pendulum outside 0..{dim - 1}")
            elif item.qubit is not None and not 0 <= item.qubit < self.n_qubits:
                raise QubitIndexError(f"measurement of qubit {item.qubit} out of range")

    @property
    def segments(self) -> list[ControlSegment]:
        return [s for s in self.items if isinstance(s, ControlSegment)]

    @property
    def has_measurements(self) -> bool:
        return any(isinstance(s, MeasureMarker) for s in self.items)

    @property
    def total_duration(self) -> float:
        return sum(s.duration for s in self.segments)

    def scaled(self, factor: float) -> "ControlSchedule":
        items = tuple(s.scaled(factor) if isinstance(s, ControlSegment) else s for s in self.items)
        params = self.params
        if params is not None:
            params = replace(params, delta_omega_budget=params.delta_omega_budget * factor)
        return ControlSchedule(self.n_qubits, items, params)

    def to_json(self) -> dict:
        return {
            "n_qubits": self.n_qubits,
            "params": None if self.params is None else self.params.to_json(),
            "items": [item.to_json() for item in self.items],
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "ControlSchedule":
        items: list[ScheduleItem] = []
        for raw in data["items"]:
            if raw["type"] == "segment":
                items.append(ControlSegment.from_json(raw))
            elif raw["type"] == "measure":
                q = raw["qubit"]
                items.append(MeasureMarker(None if q == "all" else int(q)))
            else:
                raise ScheduleError(f"unknown schedule item type {raw['type']!r}")
        params = data.get("params")
        return cls(int(data["n_qubits"]), tuple(items), None if params is None else PhysicalParams.from_json(params))


# ---------------------------------------------------------------------------
# gate -> segments

def _mask(qubit: int, n_qubits: int) -> int:
    return 1 << (n_qubits - 1 - qubit)


def _reduced_angle(angle: float) -> float:
    """Angle modulo 2pi; negative rotations become their positive equivalent."""
    return angle % TWO_PI


def _check_qubits(g: GateOp, n_qubits: int) -> None:
    for q in g.qubits:
        if not 0 <= q < n_qubits:
            raise QubitIndexError(f"{g}: qubit {q} out of range for {n_qubits} qubits")


def compile_gate(g: GateOp, n_qubits: int, params: PhysicalParams) -> list[ControlSegment]:
    if g.is_measurement:
        raise ValueError("measurements do not compile to control segments")
    _check_qubits(g, n_qubits)
    dw = params.delta_omega_budget
    idx = np.arange(1 << n_qubits)
    label = str(g)

    def has(q: int) -> np.ndarray:
        return (idx & _mask(q, n_qubits)) != 0

    if g.kind == "h":
        half = math.pi / 2
        out: list[ControlSegment] = []
        for part in (rz(g.qubits[0], half), rx(g.qubits[0], half), rz(g.qubits[0], half)):
            out.extend(replace(s, label=f"{label}: {s.label}") for s in compile_gate(part, n_qubits, params))
        return out

    if g.kind in ("rz", "cphase"):
        angle = _reduced_angle(g.angle)
        if angle == 0:
            return []
        sel = has(g.qubits[0]) if g.kind == "rz" else has(g.qubits[0]) & has(g.qubits[1])
        return [ControlSegment(angle / dw, {int(k): dw for k in idx[sel]}, (), label)]

    if g.kind in ("rx", "not"):
        angle = math.pi if g.kind == "not" else _reduced_angle(g.angle)
        if angle == 0:
            return []
        m = _mask(g.qubits[0], n_qubits)
        springs = tuple((int(k), int(k | m), dw) for k in idx[~has(g.qubits[0])])
        return [ControlSegment(angle / dw, {}, springs, label)]

    if g.kind == "cnot":
        c, t = g.qubits
        return [controlled_flip_segment((c,), t, n_qubits, params, label)]

    if g.kind == "swap":
        a, b = g.qubits
        flip = _mask(a, n_qubits) | _mask(b, n_qubits)
        sel = ~has(a) & has(b)
        springs = tuple(sorted((min(int(k), int(k ^ flip)), max(int(k), int(k ^ flip)), dw) for k in idx[sel]))
        return [ControlSegment(math.pi / dw, {}, springs, label)]

    raise ValueError(f"cannot compile gate kind {g.kind!r}")


def controlled_flip_segment(
    controls: Sequence[int], target: int, n_qubits: int, params: PhysicalParams, label: str = ""
) -> ControlSegment:
    """Spring every pendulum pair that differs only in ``target`` and has all controls up.

    One control gives CNOT; two give the Toffoli gate, still a single segment.
    """
    if target in controls or len(set(controls)) != len(controls):
        raise ValueError("controls and target must be distinct qubits")
    for q in (*controls, target):
        if not 0 <= q < n_qubits:
            raise QubitIndexError(f"qubit {q} out of range for {n_qubits} qubits")
    dw = params.delta_omega_budget
    idx = np.arange(1 << n_qubits)
    sel = (idx & _mask(target, n_qubits)) == 0
    for c in controls:
        sel &= (idx & _mask(c, n_qubits)) != 0
    mt = _mask(target, n_qubits)
    springs = tuple((int(k), int(k | mt), dw) for k in idx[sel])
    return ControlSegment(math.pi / dw, {}, springs, label or f"flip {target} if {list(controls)}")


def compile_circuit(circuit: Circuit, params: PhysicalParams) -> ControlSchedule:
    items: list[ScheduleItem] = []
    for op in circuit.ops:
        if op.kind == "measure":
            items.append(MeasureMarker(op.qubits[0]))
        elif op.kind == "measure_all":
            items.append(MeasureMarker(None))
        else:
            items.extend(compile_gate(op, circuit.n_qubits, params))
    return ControlSchedule(circuit.n_qubits, tuple(items), params)


# ---------------------------------------------------------------------------
# physics of a spring-coupled pair

def spring_constant_for_splitting(delta_omega: float, params: PhysicalParams) -> float:
    """Stiffness (N/m) lifting the opposite-phase mode to ``omega0 + delta_omega``.

    The in-phase mode never stretches the spring and stays at ``omega0``; the
    opposite-phase mode sits at ``sqrt(omega0**2 + 2 kappa / m)``.
    """
    if not 0 <= delta_omega < params.omega0:
        raise ValueError(f"splitting must lie in [0, omega0), got {delta_omega}")
    w0 = params.omega0
    return params.mass * ((w0 + delta_omega) ** 2 - w0**2) / 2.0


def splitting_for_spring_constant(kappa: float, params: PhysicalParams) -> float:
    if kappa < 0:
        raise ValueError(f"spring constant must be non-negative, got {kappa}")
    w0 = params.omega0
    return math.sqrt(w0**2 + 2.0 * kappa / params.mass) - w0


# ---------------------------------------------------------------------------
# envelope-level generators

def segment_generator(s: ControlSegment, n_qubits: int) -> np.ndarray:
    """Hermitian ``G`` with envelope evolution ``exp(+i G t)`` over the segment."""
    dim = 1 << n_qubits
    if s.max_index() >= dim:
        raise QubitIndexError(f"segment touches pendulum {s.max_index()} >= {dim}")
    g = np.zeros((dim, dim), dtype=np.complex128)
    for k, d in s.detunings.items():
        g[k, k] += d
    for i, j, w in s.springs:
        # w times the projector onto (e_i - e_j)/sqrt(2)
        g[i, i] += w / 2
        g[j, j] += w / 2
        g[i, j] -= w / 2
        g[j, i] -= w / 2
    return g


def schedule_unitary(sched: Union[ControlSchedule, Sequence[ControlSegment]], n_qubits: Optional[int] = None) -> np.ndarray:
    """Ordered product of the segment exponentials (dense ``expm``)."""
    if isinstance(sched, ControlSchedule):
        if sched.has_measurements:
            raise ValueError("schedule contains measurement markers")
        segments, n = sched.segments, sched.n_qubits
    else:
        if n_qubits is None:
            raise ValueError("n_qubits is required for a bare segment list")
        segments, n = list(sched), n_qubits
    u = np.eye(1 << n, dtype=np.complex128)
    for s in segments:
        u = scipy.linalg.expm(1j * s.duration * segment_generator(s, n)) @ u
    return u
