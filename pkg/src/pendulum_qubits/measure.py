"""Measurement as a random choice among groups of pendulums.

A group is chosen with probability equal to its share of the oscillation
energy.  Pendulums outside the chosen group are stopped and the surviving
energy becomes the new unit, which at the amplitude level means dividing by
the square root of the chosen probability.  The shrink factor is kept in the
record so the bookkeeping stays observable.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import NumericalGuardError, QubitIndexError
from .qstate import EnvelopeState, MeasurementRecord, probabilities

PRE_NORM_TOL = 1e-9
MIN_BRANCH_PROBABILITY = 1e-15


def choose_branch(weights: Sequence[float], u: float) -> int:
    """Map a uniform draw ``u`` in [0, 1) onto a branch by cumulative weight.

    Branches are scanned in index order.  Zero-weight branches can never be
    selected, even when rounding leaves the total slightly below 1.
    """
    w = np.asarray(weights, dtype=float)
    cdf = np.cumsum(w) / w.sum()
    k = int(np.searchsorted(cdf, u, side="right"))
    # u can exceed a total that rounded below 1
    return min(k, int(np.flatnonzero(w > 0)[-1]))


def _check_ready(state: EnvelopeState) -> None:
    if abs(state.norm_squared() - 1.0) > PRE_NORM_TOL:
        raise ValueError(f"state is not normalized (|a|^2 = {state.norm_squared()!r})")


def qubit_mask(n_qubits: int, qubit: int) -> np.ndarray:
    """Boolean mask of pendulums whose digit for ``qubit`` is 1."""
    idx = np.arange(1 << n_qubits)
    return (idx >> (n_qubits - 1 - qubit)) & 1 == 1


def qubit_probabilities(state: EnvelopeState, qubit: int) -> tuple[float, float]:
    if not 0 <= qubit < state.n_qubits:
        raise QubitIndexError(f"qubit {qubit} out of range for {state.n_qubits} qubits")
    p = probabilities(state)
    mask = qubit_mask(state.n_qubits, qubit)
    p0, p1 = float(p[~mask].sum()), float(p[mask].sum())
    return p0, p1


def collapse(state: EnvelopeState, qubit: int, outcome: int) -> tuple[EnvelopeState, float]:
    """Post-measurement state for a given outcome and that outcome's probability."""
    p0, p1 = qubit_probabilities(state, qubit)
    chosen = (p0, p1)[outcome] / (p0 + p1)
    if chosen < MIN_BRANCH_PROBABILITY:
        raise NumericalGuardError(f"outcome {outcome} has probability {chosen!r}")
    keep = qubit_mask(state.n_qubits, qubit) == bool(outcome)
    amps = np.where(keep, state.amplitudes, 0.0)
    return EnvelopeState.from_amplitudes(amps, normalize=True), chosen


def measure_qubit(
    state: EnvelopeState, qubit: int, rng: np.random.Generator
) -> tuple[int, EnvelopeState, MeasurementRecord]:
    """Choose between the pendulums with digit 0 and digit 1 for ``qubit``."""
    _check_ready(state)
    p0, p1 = qubit_probabilities(state, qubit)
    outcome = choose_branch([p0, p1], rng.random())
    chosen = (p0, p1)[outcome]
    if chosen < MIN_BRANCH_PROBABILITY:
        raise NumericalGuardError(f"selected branch has probability {chosen!r}")
    keep = qubit_mask(state.n_qubits, qubit) == bool(outcome)
    amps = np.where(keep, state.amplitudes, 0.0) / np.sqrt(chosen)
    total = p0 + p1
    record = MeasurementRecord(qubit, outcome, (p0 / total, p1 / total), chosen / total)
    return outcome, EnvelopeState(state.n_qubits, amps), record


def bitstring(index: int, n_qubits: int) -> str:
    return format(index, f"0{n_qubits}b")


def measure_all(state: EnvelopeState, rng: np.random.Generator) -> tuple[str, EnvelopeState, MeasurementRecord]:
    """One categorical draw over every pendulum; only the chosen one keeps swinging."""
    _check_ready(state)
    p = probabilities(state)
    k = choose_branch(p, rng.random())
    if p[k] < MIN_BRANCH_PROBABILITY:
        raise NumericalGuardError(f"selected pendulum has probability {p[k]!r}")
    amps = np.zeros_like(state.amplitudes)
    amps[k] = state.amplitudes[k] / np.sqrt(p[k])
    total = float(p.sum())
    bits = bitstring(k, state.n_qubits)
    record = MeasurementRecord("all", bits, tuple(float(x) / total for x in p), float(p[k]) / total)
    return bits, EnvelopeState(state.n_qubits, amps), record


def sample_indices(weights: Sequence[float], shots: int, rng: np.random.Generator) -> np.ndarray:
    """Vectorized :func:`choose_branch`: one draw per shot from one stream."""
    w = np.asarray(weights, dtype=float)
    cdf = np.cumsum(w) / w.sum()
    k = np.searchsorted(cdf, rng.random(shots), side="right")
    last = int(np.flatnonzero(w > 0)[-1])
    return np.minimum(k, last)
