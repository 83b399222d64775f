"""Scripted entanglement experiments on the four-pendulum register.

Measuring along an axis other than Z is done by rotating the axis onto Z
with the available gates and then measuring Z.  For an axis at Bloch angles
``(theta, phi)`` that rotation is ``rz(phi - pi/2)`` followed by
``rx(theta)``; for the Y axis it reduces to a single 90 degree X rotation.
Outcome 1 (``|up>``) then means "spin along +axis".
"""

from __future__ import annotations

import cmath
import math
from dataclasses import asdict, dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .circuit import GateOp, cnot, not_, rx, rz
from .compiler import PhysicalParams, controlled_flip_segment
from .envelope_sim import apply_gate, apply_segment, prepare_singlet
from .measure import collapse, measure_qubit, sample_indices
from .qstate import (
    EnvelopeState,
    bloch_from_state,
    probabilities,
    random_state,
    tensor,
    wrap_angle,
)
from .rng import shot_rng, stream

SQRT2 = math.sqrt(2.0)
OPTIMAL_CHSH_A = (0.0, math.pi / 2)
OPTIMAL_CHSH_B = (math.pi / 4, -math.pi / 4)


def axis_to_z(qubit: int, theta: float, phi: float) -> list[GateOp]:
    """Gates carrying the Bloch direction ``(theta, phi)`` onto the north pole."""
    gates = []
    if theta % (2 * math.pi) == 0:
        return gates
    if (phi - math.pi / 2) % (2 * math.pi) != 0:
        gates.append(rz(qubit, phi - math.pi / 2))
    gates.append(rx(qubit, theta))
    return gates


def _apply_all(state: EnvelopeState, gates: Sequence[GateOp]) -> EnvelopeState:
    for g in gates:
        state = apply_gate(state, g)
    return state


# ---------------------------------------------------------------------------
# singlet anti-correlation

@dataclass
class AnticorrelationStats:
    theta: float
    phi: float
    shots: int
    seed: int
    counts: dict[str, int]
    p_opposite: float
    p_first_up: float
    sigma: float

    def to_json(self) -> dict:
        return asdict(self)


def run_anticorrelation(theta: float, phi: float, shots: int, seed: int = 0) -> AnticorrelationStats:
    """Measure both halves of a singlet along the same axis, shot by shot."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    state = prepare_singlet()
    state = _apply_all(state, axis_to_z(0, theta, phi) + axis_to_z(1, theta, phi))
    counts = {"00": 0, "01": 0, "10": 0, "11": 0}
    for i in range(shots):
        rng = shot_rng(seed, i)
        o1, post, _ = measure_qubit(state, 0, rng)
        o2, _, _ = measure_qubit(post, 1, rng)
        if o1 == o2:
            raise AssertionError(f"shot {i}: equal outcomes {o1}{o2} on a singlet")
        counts[f"{o1}{o2}"] += 1
    opposite = counts["01"] + counts["10"]
    return AnticorrelationStats(
        theta=theta,
        phi=phi,
        shots=shots,
        seed=seed,
        counts=counts,
        p_opposite=opposite / shots,
        p_first_up=(counts["10"] + counts["11"]) / shots,
        sigma=math.sqrt(0.25 / shots),
    )


# ---------------------------------------------------------------------------
# walk-through of the Y-then-Y measurement of a singlet

def _phase_diff(a: complex, b: complex) -> float:
    """``arg(b) - arg(a)`` wrapped to [-pi, pi)."""
    return wrap_angle(cmath.phase(b) - cmath.phase(a))


def fig3_trace(tol: float = 1e-12) -> dict:
    """Intermediate states of measuring Y on both halves of a singlet.

    Returns a report with the amplitudes after the first X rotation, the
    phase differences inside the pendulum pairs, and for each outcome of the
    first measurement the surviving state of the second qubit and the
    (deterministic) outcome of its own Y measurement.
    """
    singlet = prepare_singlet()
    half = math.pi / 2
    rotated = apply_gate(singlet, rx(0, half))
    a = rotated.amplitudes
    mags = [float(abs(x)) for x in a]
    d12 = _phase_diff(a[0], a[1])
    d34 = _phase_diff(a[2], a[3])

    branches = []
    for outcome in (0, 1):
        post, prob = collapse(rotated, 0, outcome)
        pair = post.amplitudes[2 * outcome : 2 * outcome + 2]
        second = EnvelopeState.from_amplitudes(pair, normalize=True)
        point = bloch_from_state(second)
        final = apply_gate(post, rx(1, half))
        p_second_up = float(probabilities(final)[[1, 3]].sum())
        second_outcome = int(round(p_second_up))
        branches.append(
            {
                "first_outcome": outcome,
                "probability": prob,
                "post_state": EnvelopeState.to_json(post),
                "second_qubit_bloch": {"theta": point.theta, "phi": point.phi},
                "second_is_y_eigenstate": abs(point.theta - half) <= 1e-9 and abs(abs(point.phi) - half) <= 1e-9,
                "p_second_up_after_x2": p_second_up,
                "second_outcome": second_outcome,
                "opposite": second_outcome != outcome and abs(p_second_up - second_outcome) <= 1e-9,
            }
        )

    checks = {
        "equal_magnitudes": all(abs(m - 0.5) <= tol for m in mags),
        "quarter_turn_phases": abs(abs(d12) - half) <= tol and abs(abs(d34) - half) <= tol,
        "opposite_signs": d12 * d34 < 0,
        "y_eigenstates": all(b["second_is_y_eigenstate"] for b in branches),
        "always_opposite": all(b["opposite"] for b in branches),
    }
    return {
        "singlet": singlet.to_json(),
        "after_x1": rotated.to_json(),
        "magnitudes": mags,
        "phase_diff_pair_12": d12,
        "phase_diff_pair_34": d34,
        "branches": branches,
        "checks": checks,
        "ok": all(checks.values()),
    }


# ---------------------------------------------------------------------------
# CHSH

def singlet_outcome_distribution(a: float, b: float) -> np.ndarray:
    """Exact probabilities of outcomes 00, 01, 10, 11 for axes ``a`` and ``b`` in the X-Z plane."""
    state = _apply_all(prepare_singlet(), axis_to_z(0, a, 0.0) + axis_to_z(1, b, 0.0))
    p = probabilities(state)
    return p / p.sum()


PARITY = np.array([1.0, -1.0, -1.0, 1.0])


@dataclass
class ChshResult:
    angles_a: tuple[float, float]
    angles_b: tuple[float, float]
    mode: str
    shots_per_setting: Optional[int]
    seed: Optional[int]
    correlators: list[float]  # E(a1,b1), E(a1,b2), E(a2,b1), E(a2,b2)
    standard_errors: list[float]
    S: float
    S_standard_error: float

    def to_json(self) -> dict:
        d = asdict(self)
        d["angles_a"] = list(self.angles_a)
        d["angles_b"] = list(self.angles_b)
        d["classical_bound"] = 2.0
        d["tsirelson_bound"] = 2.0 * SQRT2
        return d


def chsh_combination(e: Sequence[float]) -> float:
    return e[0] + e[1] + e[2] - e[3]


def run_chsh(
    angles_a: Sequence[float] = OPTIMAL_CHSH_A,
    angles_b: Sequence[float] = OPTIMAL_CHSH_B,
    shots_per_setting: int = 10_000,
    seed: int = 0,
    exact: bool = False,
) -> ChshResult:
    """CHSH value ``E11 + E12 + E21 - E22`` for a singlet.

    Exact mode enumerates the four outcome probabilities.  Sampled mode draws
    ``shots_per_setting`` joint outcomes per setting from stream
    ``(seed, setting)``, one categorical draw per shot.
    """
    settings = [(a, b) for a in angles_a for b in angles_b]
    corr, errs = [], []
    for k, (a, b) in enumerate(settings):
        p = singlet_outcome_distribution(a, b)
        if exact:
            corr.append(float(PARITY @ p))
            errs.append(0.0)
            continue
        if shots_per_setting < 100:
            raise ValueError("shots_per_setting must be >= 100")
        outcomes = sample_indices(p, shots_per_setting, stream(seed, k))
        e = float(PARITY[outcomes].mean())
        corr.append(e)
        errs.append(math.sqrt(max(1.0 - e * e, 0.0) / shots_per_setting))
    return ChshResult(
        angles_a=tuple(float(x) for x in angles_a),
        angles_b=tuple(float(x) for x in angles_b),
        mode="exact" if exact else "sampled",
        shots_per_setting=None if exact else shots_per_setting,
        seed=None if exact else seed,
        correlators=corr,
        standard_errors=errs,
        S=chsh_combination(corr),
        S_standard_error=math.sqrt(sum(x * x for x in errs)),
    )


# ---------------------------------------------------------------------------
# three-pendulum-qubit repetition code

def _qubit0_fidelity(state: EnvelopeState, logical: EnvelopeState) -> float:
    m = state.amplitudes.reshape(2, -1)
    rho = m @ m.conj().T
    psi = logical.amplitudes
    return float(np.real(psi.conj() @ rho @ psi))


def run_bitflip_demo(
    flips: Union[None, int, Sequence[int]] = None, seed: int = 0, params: Optional[PhysicalParams] = None
) -> dict:
    """Bit-flip repetition code on three qubits (eight pendulums).

    The logical state ``alpha|0> + beta|1>`` is spread to ``alpha|000> +
    beta|111>`` by two CNOTs, the requested NOTs are applied, the CNOTs are
    undone, and the majority vote is a single spring between pendulums
    ``|011>`` and ``|111>`` (a Toffoli gate) held for ``pi / delta_omega``.
    """
    if flips is None:
        flips = ()
    elif isinstance(flips, int):
        flips = (flips,)
    flips = tuple(flips)
    for q in flips:
        if q not in (0, 1, 2):
            raise ValueError(f"flip index must be 0, 1 or 2, got {q}")
    params = params or PhysicalParams()
    logical = random_state(1, stream(seed))
    ground2 = EnvelopeState(2, np.array([1, 0, 0, 0]))
    state = tensor(logical, ground2)
    encode = [cnot(0, 1), cnot(0, 2)]
    state = _apply_all(state, encode)
    encoded = state
    state = _apply_all(state, [not_(q) for q in flips])
    state = _apply_all(state, encode)
    p = probabilities(state)
    syndrome_index = int(np.argmax([p[k::4].sum() for k in range(4)]))
    state = apply_segment(state, controlled_flip_segment((1, 2), 0, 3, params, "majority vote"))
    fid = _qubit0_fidelity(state, logical)
    return {
        "flips": list(flips),
        "seed": seed,
        "logical": logical.to_json(),
        "encoded": encoded.to_json(),
        "syndrome": format(syndrome_index, "02b"),
        "output_fidelity": fid,
        "corrected": fid >= 1.0 - 1e-9,
        "note": "3-qubit bit-flip repetition code; majority vote realized as one spring",
    }
