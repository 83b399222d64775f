"""Exact envelope evolution: gates, control segments, and seeded runs.

This backend works directly on the complex amplitudes and is the oracle the
Newtonian integrator is compared against.  Gates act on amplitude pairs in
place (no dense matrices); control segments use their closed form, a phase
per detuned pendulum and a 2x2 normal-mode rotation per spring.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Union

import numpy as np

from .circuit import Circuit, GateOp, parse_circuit, single_qubit_matrix
from .compiler import ControlSchedule, ControlSegment, MeasureMarker
from .errors import QubitIndexError
from .measure import measure_all, measure_qubit
from .qstate import EnvelopeState, MeasurementRecord, probabilities
from .rng import shot_rng, stream

SINGLET_CIRCUIT = """\
# ground -> (|01> - |10>)/sqrt2 up to a global phase
qubits 2
h 0
cnot 0 1
not 1
rz 0 pi
"""


@lru_cache(maxsize=64)
def _indices(n_qubits: int) -> np.ndarray:
    idx = np.arange(1 << n_qubits)
    idx.setflags(write=False)
    return idx


def _has(n_qubits: int, qubit: int) -> np.ndarray:
    return (_indices(n_qubits) >> (n_qubits - 1 - qubit)) & 1 == 1


def apply_gate(state: EnvelopeState, g: GateOp) -> EnvelopeState:
    if g.is_measurement:
        raise ValueError("apply_gate does not handle measurements")
    n = state.n_qubits
    for q in g.qubits:
        if not 0 <= q < n:
            raise QubitIndexError(f"{g}: qubit {q} out of range for {n} qubits")
    a = state.amplitudes.copy()

    if g.kind in ("rz", "rx", "not", "h"):
        (q,) = g.qubits
        u = single_qubit_matrix(g)
        view = a.reshape(1 << q, 2, -1)
        a = np.einsum("ij,ajb->aib", u, view).reshape(-1)
    elif g.kind == "cnot":
        c, t = g.qubits
        lo = _indices(n)[_has(n, c) & ~_has(n, t)]
        hi = lo | (1 << (n - 1 - t))
        a[lo], a[hi] = a[hi], a[lo].copy()
    elif g.kind == "cphase":
        c, t = g.qubits
        a[_has(n, c) & _has(n, t)] *= np.exp(1j * g.angle)
    elif g.kind == "swap":
        p, q = g.qubits
        lo = _indices(n)[~_has(n, p) & _has(n, q)]
        hi = lo ^ ((1 << (n - 1 - p)) | (1 << (n - 1 - q)))
        a[lo], a[hi] = a[hi], a[lo].copy()
    else:
        raise ValueError(f"unsupported gate kind {g.kind!r}")
    return EnvelopeState(n, a)


def apply_segment(state: EnvelopeState, s: ControlSegment) -> EnvelopeState:
    if s.max_index() >= state.dim:
        raise QubitIndexError(f"segment touches pendulum {s.max_index()} >= {state.dim}")
    if s.duration == 0:
        return state
    a = state.amplitudes.copy()
    t = s.duration
    if s.detunings:
        keys = np.fromiter(s.detunings.keys(), dtype=np.intp)
        vals = np.fromiter(s.detunings.values(), dtype=float)
        a[keys] *= np.exp(1j * vals * t)
    if s.springs:
        spr = np.asarray(s.springs, dtype=float)
        i, j, w = spr[:, 0].astype(np.intp), spr[:, 1].astype(np.intp), spr[:, 2]
        sym = 0.5 * (a[i] + a[j])
        anti = 0.5 * (a[i] - a[j]) * np.exp(1j * w * t)
        a[i] = sym + anti
        a[j] = sym - anti
    return EnvelopeState(state.n_qubits, a)


def apply_schedule(
    state: EnvelopeState, sched: ControlSchedule, rng: Optional[np.random.Generator] = None
) -> tuple[EnvelopeState, list[MeasurementRecord]]:
    """Play a compiled schedule; measurement markers need an ``rng``."""
    records: list[MeasurementRecord] = []
    for item in sched.items:
        if isinstance(item, ControlSegment):
            state = apply_segment(state, item)
            continue
        if rng is None:
            raise ValueError("schedule contains measurements but no rng was given")
        state, rec = _measure_marker(state, item, rng)
        records.append(rec)
    return state, records


def _measure_marker(state: EnvelopeState, item: Union[MeasureMarker, GateOp], rng: np.random.Generator):
    qubit = item.qubit if isinstance(item, MeasureMarker) else (item.qubits[0] if item.qubits else None)
    if qubit is None:
        _, state, rec = measure_all(state, rng)
    else:
        _, state, rec = measure_qubit(state, qubit, rng)
    return state, rec


def prepare_singlet() -> EnvelopeState:
    """Pendulums 2 and 3 in opposite phase, 1 and 4 at rest."""
    r = 1.0 / math.sqrt(2.0)
    return EnvelopeState(2, np.array([0.0, r, -r, 0.0]))


def singlet_circuit() -> Circuit:
    return parse_circuit(SINGLET_CIRCUIT)


@dataclass(frozen=True)
class RunResult:
    state: EnvelopeState
    records: tuple[MeasurementRecord, ...]

    @property
    def outcomes(self) -> list:
        return [r.outcome for r in self.records]


def run(
    circuit: Circuit,
    seed: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
    initial: Optional[EnvelopeState] = None,
) -> RunResult:
    """Execute gates and measurements in program order on the envelope backend."""
    if rng is None:
        rng = stream(0 if seed is None else seed)
    if initial is None:
        state = EnvelopeState(circuit.n_qubits, np.eye(1, 1 << circuit.n_qubits, dtype=np.complex128)[0])
    else:
        state = initial
    records = []
    for op in circuit.ops:
        if op.is_measurement:
            state, rec = _measure_marker(state, op, rng)
            records.append(rec)
        else:
            state = apply_gate(state, op)
    return RunResult(state, tuple(records))


def run_shots(circuit: Circuit, shots: int, seed: int, threads: int = 1) -> list[RunResult]:
    """``shots`` independent runs, shot ``i`` driven by ``shot_rng(seed, i)``."""

    def one(i: int) -> RunResult:
        return run(circuit, rng=shot_rng(seed, i))

    if threads <= 1:
        return [one(i) for i in range(shots)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, range(shots)))


def final_probabilities(result: RunResult) -> list[float]:
    return [float(p) for p in probabilities(result.state)]
