"""Newtonian simulation of the pendulum bank.

Each pendulum obeys the small-angle equation ``x'' = -omega_k(t)**2 x`` plus
Hooke forces from any spring attached to it.  Controls switch instantly at
segment boundaries.  The integrator is classical fixed-step RK4 with
``steps_per_carrier_period`` steps per carrier period; segment durations are
rounded up to whole steps and the rounding is reported.

Positions and velocities use units in which a free pendulum with envelope
``a`` has energy ``|a|**2``: ``x = Re(a e^{i w0 t})``, ``v = -w0 Im(a e^{i w0 t})``
and energies are quoted in units of ``m w0**2 / 2``.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .circuit import Circuit, GateOp, cnot, cphase, not_, rx, rz, swap
from .compiler import (
    ControlSchedule,
    ControlSegment,
    MeasureMarker,
    PhysicalParams,
    compile_circuit,
    compile_gate,
    spring_constant_for_splitting,
)
from .envelope_sim import apply_segment
from .errors import NumericalGuardError, QubitIndexError, ScheduleError
from .measure import MIN_BRANCH_PROBABILITY, bitstring, choose_branch, qubit_mask
from .qstate import EnvelopeState, MeasurementRecord, fidelity, random_state
from .rng import stream

MAX_OMEGA_H = 0.5
MIN_STEPS_PER_PERIOD = 16


@dataclass(frozen=True)
class IntegratorConfig:
    steps_per_carrier_period: int = 200
    method: str = "rk4"

    def __post_init__(self) -> None:
        if self.steps_per_carrier_period < MIN_STEPS_PER_PERIOD:
            raise ValueError(
                f"steps_per_carrier_period must be >= {MIN_STEPS_PER_PERIOD}, "
                f"got {self.steps_per_carrier_period}"
            )
        if self.method != "rk4":
            raise ValueError(f"only fixed-step 'rk4' is available, got {self.method!r}")

    def step(self, params: PhysicalParams) -> float:
        return params.carrier_period / self.steps_per_carrier_period


@dataclass(frozen=True, eq=False)
class MechanicalState:
    """Displacements (m) and velocities (m/s); a leading batch axis is allowed."""

    positions: np.ndarray
    velocities: np.ndarray
    time: float = 0.0

    def __post_init__(self) -> None:
        x = np.array(self.positions, dtype=float)
        v = np.array(self.velocities, dtype=float)
        if x.shape != v.shape:
            raise ValueError(f"positions {x.shape} and velocities {v.shape} differ in shape")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v)) and math.isfinite(self.time)):
            raise ValueError("mechanical state must be finite")
        x.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "positions", x)
        object.__setattr__(self, "velocities", v)

    @property
    def dim(self) -> int:
        return self.positions.shape[-1]


def synthesize_initial(
    state: Union[EnvelopeState, np.ndarray], params: PhysicalParams, time: float = 0.0
) -> MechanicalState:
    """Swing each pendulum to ``|a_k|`` with initial phase ``arg a_k``."""
    amps = state.amplitudes if isinstance(state, EnvelopeState) else np.asarray(state, dtype=np.complex128)
    z = amps * np.exp(1j * params.omega0 * time) if time else amps
    return MechanicalState(z.real.copy(), -params.omega0 * z.imag, time)


def demodulate_array(m: MechanicalState, params: PhysicalParams) -> np.ndarray:
    w0 = params.omega0
    z = m.positions - 1j * m.velocities / w0
    return z * np.exp(-1j * w0 * m.time) if m.time else z


def demodulate(m: MechanicalState, params: PhysicalParams) -> EnvelopeState:
    """Envelope ``(x - i v / w0) e^{-i w0 t}``; not renormalized."""
    if m.positions.ndim != 1:
        raise ValueError("demodulate expects a single (unbatched) mechanical state")
    return EnvelopeState.from_amplitudes(demodulate_array(m, params))


class _Dynamics:
    """Right-hand side and energy for one constant-control segment."""

    def __init__(self, seg: Optional[ControlSegment], dim: int, params: PhysicalParams):
        w0 = params.omega0
        self.w0 = w0
        self.w2 = np.full(dim, w0**2)
        self.max_control = 0.0
        pairs = []
        if seg is not None:
            if seg.max_index() >= dim:
                raise QubitIndexError(f"segment touches pendulum {seg.max_index()} >= {dim}")
            for k, d in seg.detunings.items():
                if not -w0 < d:
                    raise ScheduleError(f"detuning {d} would stop pendulum {k}")
                self.w2[k] = (w0 + d) ** 2
                self.max_control = max(self.max_control, abs(d))
            for i, j, w in seg.springs:
                pairs.append((i, j, spring_constant_for_splitting(w, params) / params.mass))
                self.max_control = max(self.max_control, abs(w))
        self.i = np.array([p[0] for p in pairs], dtype=np.intp)
        self.j = np.array([p[1] for p in pairs], dtype=np.intp)
        self.k = np.array([p[2] for p in pairs], dtype=float)
        hi = self.w2.max()
        if pairs:
            hi = max(hi, w0**2 + 2.0 * self.k.max())
        self.omega_max = math.sqrt(hi)

    def accel(self, x: np.ndarray) -> np.ndarray:
        a = -self.w2 * x
        if self.i.size:
            f = self.k * (x[..., self.i] - x[..., self.j])
            a[..., self.i] -= f
            a[..., self.j] += f
        return a

    def pendulum_energies(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        return (v / self.w0) ** 2 + (self.w2 / self.w0**2) * x**2

    def total_energy(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        e = self.pendulum_energies(x, v).sum(axis=-1)
        if self.i.size:
            e = e + (self.k / self.w0**2 * (x[..., self.i] - x[..., self.j]) ** 2).sum(axis=-1)
        return e


def _rk4(dyn: _Dynamics, x: np.ndarray, v: np.ndarray, h: float, n: int, trace=None, t0: float = 0.0):
    for s in range(n):
        k1x, k1v = v, dyn.accel(x)
        k2x, k2v = v + 0.5 * h * k1v, dyn.accel(x + 0.5 * h * k1x)
        k3x, k3v = v + 0.5 * h * k2v, dyn.accel(x + 0.5 * h * k2x)
        k4x, k4v = v + h * k3v, dyn.accel(x + h * k3x)
        x = x + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        v = v + (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        if trace is not None:
            trace.append(t0 + (s + 1) * h, dyn.pendulum_energies(x, v), dyn.total_energy(x, v))
    return x, v


@dataclass
class EnergyTrace:
    times: list = field(default_factory=list)
    pendulum: list = field(default_factory=list)
    total: list = field(default_factory=list)

    def append(self, t: float, per: np.ndarray, tot) -> None:
        self.times.append(t)
        self.pendulum.append(np.array(per))
        self.total.append(float(tot) if np.ndim(tot) == 0 else np.array(tot))

    def to_csv(self) -> str:
        if not self.times:
            return "time,total_energy\n"
        dim = len(self.pendulum[0])
        head = ["time"] + [f"energy_{k + 1}" for k in range(dim)] + ["total_energy"]
        rows = [",".join(head)]
        for t, per, tot in zip(self.times, self.pendulum, self.total):
            rows.append(",".join([repr(float(t))] + [repr(float(e)) for e in per] + [repr(float(tot))]))
        return "\n".join(rows) + "\n"


@dataclass
class SegmentReport:
    label: str
    steps: int
    rounding_residual: float  # seconds integrated beyond the nominal duration
    phase_residual: float  # largest control frequency times the residual
    relative_drift_per_period: float


@dataclass
class NewtonResult:
    state: EnvelopeState
    raw_amplitudes: np.ndarray
    mechanical: MechanicalState
    trace: Optional[EnergyTrace]
    segments: list[SegmentReport]

    @property
    def max_drift_per_period(self) -> float:
        return max((abs(s.relative_drift_per_period) for s in self.segments), default=0.0)

    @property
    def norm_squared(self) -> float:
        return float(np.vdot(self.raw_amplitudes, self.raw_amplitudes).real)


def integrate_segments(
    m: MechanicalState,
    segments: Iterable[ControlSegment],
    params: PhysicalParams,
    cfg: IntegratorConfig = IntegratorConfig(),
    trace: Optional[EnergyTrace] = None,
) -> tuple[MechanicalState, list[SegmentReport]]:
    """Advance a (possibly batched) mechanical state through control segments."""
    h = cfg.step(params)
    x = np.array(m.positions)
    v = np.array(m.velocities)
    t = m.time
    reports = []
    for seg in segments:
        dyn = _Dynamics(seg, m.dim, params)
        if dyn.omega_max * h > MAX_OMEGA_H:
            raise NumericalGuardError(
                f"step too coarse: omega_max*h = {dyn.omega_max * h:.3f} > {MAX_OMEGA_H}"
            )
        n = math.ceil(seg.duration / h - 1e-9) if seg.duration > 0 else 0
        e0 = dyn.total_energy(x, v)
        if trace is not None:
            trace.append(t, dyn.pendulum_energies(x, v), e0)
        x, v = _rk4(dyn, x, v, h, n, trace, t)
        e1 = dyn.total_energy(x, v)
        t = t + n * h
        periods = n * h / params.carrier_period
        with np.errstate(invalid="ignore", divide="ignore"):
            rel = np.where(e0 > 0, (e1 - e0) / e0, 0.0)
        drift = float(np.max(np.abs(rel))) / periods if periods > 0 else 0.0
        residual = n * h - seg.duration
        reports.append(SegmentReport(seg.label, n, residual, dyn.max_control * residual, drift))
    return MechanicalState(x, v, t), reports


def simulate_schedule(
    initial: EnvelopeState,
    sched: ControlSchedule,
    params: PhysicalParams,
    cfg: IntegratorConfig = IntegratorConfig(),
    record_trace: bool = True,
) -> NewtonResult:
    """Integrate a measurement-free schedule and read the envelope back out."""
    if sched.has_measurements:
        raise ValueError("simulate_schedule needs a measurement-free schedule")
    if initial.dim != 1 << sched.n_qubits:
        raise ValueError("initial state and schedule disagree on the register size")
    trace = EnergyTrace() if record_trace else None
    m0 = synthesize_initial(initial, params)
    m1, reports = integrate_segments(m0, sched.segments, params, cfg, trace)
    raw = demodulate_array(m1, params)
    state = EnvelopeState.from_amplitudes(raw, normalize=True)
    return NewtonResult(state, raw, m1, trace, reports)


def simulate_batch(
    amplitudes: np.ndarray,
    segments: Sequence[ControlSegment],
    params: PhysicalParams,
    cfg: IntegratorConfig = IntegratorConfig(),
) -> np.ndarray:
    """Demodulated (unnormalized) envelopes for a batch of initial envelopes."""
    m0 = synthesize_initial(np.asarray(amplitudes, dtype=np.complex128), params)
    m1, _ = integrate_segments(m0, segments, params, cfg)
    return demodulate_array(m1, params)


def free_energies(m: MechanicalState, params: PhysicalParams) -> np.ndarray:
    """Per-pendulum energy with every pendulum at the carrier and no springs."""
    return m.positions**2 + (m.velocities / params.omega0) ** 2


def stop_and_renormalize(
    m: MechanicalState, keep: Iterable[int], params: PhysicalParams
) -> tuple[MechanicalState, float]:
    """Stop every pendulum outside ``keep`` and adopt the survivors' energy as the unit."""
    keep_idx = np.asarray(sorted(set(int(k) for k in keep)), dtype=np.intp)
    if keep_idx.size == 0:
        raise ValueError("keep must name at least one pendulum")
    if keep_idx[0] < 0 or keep_idx[-1] >= m.dim:
        raise QubitIndexError(f"keep indices must lie in 0..{m.dim - 1}")
    e = free_energies(m, params)
    total = float(e.sum())
    kept = float(e[keep_idx].sum())
    if total <= 0 or kept <= 0:
        raise NumericalGuardError("the kept pendulums carry no energy")
    factor = kept / total
    mask = np.zeros(m.dim, dtype=bool)
    mask[keep_idx] = True
    scale = 1.0 / math.sqrt(kept)
    x = np.where(mask, m.positions, 0.0) * scale
    v = np.where(mask, m.velocities, 0.0) * scale
    return MechanicalState(x, v, m.time), factor


# ---------------------------------------------------------------------------
# measured runs on the Newtonian backend

class NewtonRunner:
    """Runs a compiled schedule shot by shot, measurements included.

    Between measurements the trajectory depends only on the outcomes seen so
    far, so integrated branches are cached by outcome history.
    """

    def __init__(self, sched: ControlSchedule, params: PhysicalParams, cfg: IntegratorConfig = IntegratorConfig()):
        self.sched = sched
        self.params = params
        self.cfg = cfg
        self._cache: dict[tuple, tuple[MechanicalState, list[SegmentReport]]] = {}
        self._lock = threading.Lock()
        # chunk k = segments before the k-th marker (last chunk after the final marker)
        self.chunks: list[list[ControlSegment]] = [[]]
        self.markers: list[MeasureMarker] = []
        for item in sched.items:
            if isinstance(item, MeasureMarker):
                self.markers.append(item)
                self.chunks.append([])
            else:
                self.chunks[-1].append(item)

    def _advance(self, key: tuple, m: MechanicalState, chunk: list[ControlSegment]):
        with self._lock:
            hit = self._cache.get(key)
        if hit is None:
            hit = integrate_segments(m, chunk, self.params, self.cfg)
            with self._lock:
                self._cache[key] = hit
        return hit[0]

    def run(self, rng: np.random.Generator, initial: Optional[EnvelopeState] = None):
        n = self.sched.n_qubits
        if initial is None:
            initial = EnvelopeState(n, np.eye(1, 1 << n, dtype=np.complex128)[0])
        m = synthesize_initial(initial, self.params)
        history: tuple = ()
        records: list[MeasurementRecord] = []
        for k, marker in enumerate(self.markers):
            m = self._advance((k, history), m, self.chunks[k])
            e = free_energies(m, self.params)
            total = float(e.sum())
            if marker.qubit is None:
                idx = choose_branch(e, rng.random())
                keep = [idx]
                weights = e / total
                outcome: Union[int, str] = bitstring(idx, n)
            else:
                mask = qubit_mask(n, marker.qubit)
                groups = [float(e[~mask].sum()), float(e[mask].sum())]
                outcome = choose_branch(groups, rng.random())
                keep = np.flatnonzero(mask == bool(outcome))
                weights = np.array(groups) / total
            m, factor = stop_and_renormalize(m, keep, self.params)
            if factor < MIN_BRANCH_PROBABILITY:
                raise NumericalGuardError(f"selected branch carries energy fraction {factor!r}")
            records.append(
                MeasurementRecord(
                    "all" if marker.qubit is None else marker.qubit,
                    outcome,
                    tuple(float(w) for w in weights),
                    factor,
                )
            )
            history = history + (outcome,)
        m = self._advance((len(self.markers), history), m, self.chunks[-1])
        state = EnvelopeState.from_amplitudes(demodulate_array(m, self.params), normalize=True)
        return state, records


def run_newton(
    circuit: Circuit, rng: np.random.Generator, params: PhysicalParams, cfg: IntegratorConfig = IntegratorConfig()
):
    return NewtonRunner(compile_circuit(circuit, params), params, cfg).run(rng)


# ---------------------------------------------------------------------------
# fidelity against the envelope oracle

def oracle_state(initial: EnvelopeState, segments: Iterable[ControlSegment]) -> EnvelopeState:
    state = initial
    for s in segments:
        state = apply_segment(state, s)
    return state


def primitive_gates(n_qubits: int) -> list[GateOp]:
    half = math.pi / 2
    gates: list[GateOp] = []
    for q in range(n_qubits):
        gates += [rz(q, half), rx(q, half), not_(q)]
    if n_qubits >= 2:
        gates += [cnot(0, 1), cnot(1, 0), cphase(0, 1, half), swap(0, 1)]
    return gates


@dataclass
class GateSweep:
    gate: str
    n_qubits: int
    ratios: list[float]
    infidelities: list[list[float]]  # [ratio][state]

    @property
    def mean(self) -> list[float]:
        return [float(np.mean(row)) for row in self.infidelities]

    @property
    def worst(self) -> list[float]:
        return [float(np.max(row)) for row in self.infidelities]

    def to_json(self) -> dict:
        return {
            "gate": self.gate,
            "n_qubits": self.n_qubits,
            "ratios": self.ratios,
            "mean_infidelity": self.mean,
            "worst_infidelity": self.worst,
            "min_fidelity": [1.0 - w for w in self.worst],
        }


def gate_infidelities(
    g: GateOp,
    n_qubits: int,
    states: Sequence[EnvelopeState],
    params: PhysicalParams,
    cfg: IntegratorConfig = IntegratorConfig(),
) -> list[float]:
    """``1 - F(newton, envelope)`` for one compiled gate on each initial state."""
    segments = compile_gate(g, n_qubits, params)
    batch = np.stack([s.amplitudes for s in states])
    out = simulate_batch(batch, segments, params, cfg)
    result = []
    for s, raw in zip(states, out):
        expected = oracle_state(s, segments)
        result.append(1.0 - fidelity(expected, EnvelopeState(n_qubits, raw)))
    return result


def sweep_gates(
    ratios: Sequence[float],
    n_qubits_list: Sequence[int] = (1, 2),
    n_states: int = 10,
    seed: int = 0,
    cfg: IntegratorConfig = IntegratorConfig(),
    omega0: float = 2 * math.pi,
    threads: int = 1,
) -> list[GateSweep]:
    jobs = []
    for n in n_qubits_list:
        rng = stream(seed, n)
        states = [random_state(n, rng) for _ in range(n_states)]
        for g in primitive_gates(n):
            jobs.append((g, n, states))

    def one(job) -> GateSweep:
        g, n, states = job
        rows = [gate_infidelities(g, n, states, PhysicalParams.from_ratio(r, omega0), cfg) for r in ratios]
        return GateSweep(str(g), n, [float(r) for r in ratios], rows)

    if threads <= 1:
        return [one(j) for j in jobs]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, jobs))
