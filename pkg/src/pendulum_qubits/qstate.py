"""Complex-amplitude register for a bank of 2**N pendulums.

Pendulum ``k`` carries the complex envelope ``a_k``: its magnitude squared is
the oscillation energy (in units of the total energy) and its argument is the
phase relative to the common carrier.  Basis states are labelled by the binary
digits of ``k`` with qubit 0 as the most significant bit, digit 0 meaning
``|down>`` and digit 1 meaning ``|up>``.  For two qubits, index 0 is
``|down down>`` and index 3 is ``|up up>``; the 1-based pendulum number used
in drawings is ``k + 1``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import ArityError, DimensionError, InvalidSizeError

MAX_QUBITS = 20
NORM_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class EnvelopeState:
    """Immutable vector of 2**n_qubits complex pendulum amplitudes."""

    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        if self.n_qubits < 0:
            raise InvalidSizeError(f"n_qubits must be non-negative, got {self.n_qubits}")
        amps = np.array(self.amplitudes, dtype=np.complex128).reshape(-1)
        if amps.shape[0] != 1 << self.n_qubits:
            raise DimensionError(
                f"{self.n_qubits} qubits need {1 << self.n_qubits} amplitudes, got {amps.shape[0]}"
            )
        if not np.all(np.isfinite(amps)):
            raise ValueError("amplitudes must be finite")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_amplitudes(cls, amplitudes: Sequence[complex], normalize: bool = False) -> "EnvelopeState":
        amps = np.asarray(amplitudes, dtype=np.complex128).reshape(-1)
        size = amps.shape[0]
        if size < 1 or size & (size - 1):
            raise DimensionError(f"amplitude count must be a power of two, got {size}")
        if normalize:
            norm = np.linalg.norm(amps)
            if norm == 0:
                raise ValueError("cannot normalize the zero vector")
            amps = amps / norm
        return cls(size.bit_length() - 1, amps)

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def norm_squared(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def is_normalized(self, tol: float = NORM_TOL) -> bool:
        return abs(self.norm_squared() - 1.0) <= tol

    def normalized(self) -> "EnvelopeState":
        return EnvelopeState.from_amplitudes(self.amplitudes, normalize=True)

    def to_json(self) -> dict:
        return {
            "n_qubits": self.n_qubits,
            "amplitudes": [[float(a.real), float(a.imag)] for a in self.amplitudes],
        }

    @classmethod
    def from_json(cls, data: dict) -> "EnvelopeState":
        amps = [complex(re, im) for re, im in data["amplitudes"]]
        return cls(int(data["n_qubits"]), np.asarray(amps, dtype=np.complex128))

    def __repr__(self) -> str:
        return f"EnvelopeState(n_qubits={self.n_qubits}, amplitudes={self.amplitudes!r})"


@dataclass(frozen=True)
class BlochPoint:
    """Polar angle from the north pole (``|up>``) and azimuth in [-pi, pi)."""

    theta: float
    phi: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.theta) and math.isfinite(self.phi)):
            raise ValueError("Bloch angles must be finite")
        object.__setattr__(self, "phi", wrap_angle(self.phi))

    def vector(self) -> np.ndarray:
        """Cartesian unit vector (x, y, z)."""
        st = math.sin(self.theta)
        return np.array([st * math.cos(self.phi), st * math.sin(self.phi), math.cos(self.theta)])


@dataclass(frozen=True)
class MeasurementRecord:
    """Outcome of one measurement plus the energy bookkeeping it implies.

    ``energy_unit_factor`` is the fraction of the energy left swinging after
    the other pendulums were stopped, which equals the pre-measurement
    probability of the observed outcome.
    """

    qubit: Union[int, str]
    outcome: Union[int, str]
    pre_probabilities: tuple[float, ...]
    energy_unit_factor: float

    def to_json(self) -> dict:
        return {
            "qubit": self.qubit,
            "outcome": self.outcome,
            "pre_probabilities": [float(p) for p in self.pre_probabilities],
            "energy_unit_factor": float(self.energy_unit_factor),
        }


def wrap_angle(angle: float) -> float:
    """Map an angle onto [-pi, pi)."""
    wrapped = (angle + math.pi) % (2.0 * math.pi) - math.pi
    # rounding can land exactly on +pi
    return -math.pi if wrapped >= math.pi else wrapped


def init_ground(n_qubits: int, max_qubits: int = MAX_QUBITS) -> EnvelopeState:
    """Only the first pendulum swings, with unit amplitude."""
    if n_qubits < 1 or n_qubits > max_qubits:
        raise InvalidSizeError(f"n_qubits must lie in [1, {max_qubits}], got {n_qubits}")
    amps = np.zeros(1 << n_qubits, dtype=np.complex128)
    amps[0] = 1.0
    return EnvelopeState(n_qubits, amps)


def basis_state(n_qubits: int, index: int) -> EnvelopeState:
    amps = np.zeros(1 << n_qubits, dtype=np.complex128)
    amps[index] = 1.0
    return EnvelopeState(n_qubits, amps)


def probabilities(state: EnvelopeState) -> np.ndarray:
    """Per-pendulum energy fractions ``|a_k|**2``."""
    return np.abs(state.amplitudes) ** 2


def state_from_bloch(point: BlochPoint) -> EnvelopeState:
    """Synthesize ``(sin(theta/2) e^{i phi}, cos(theta/2))``."""
    down = math.sin(point.theta / 2.0) * cmath.exp(1j * point.phi)
    up = math.cos(point.theta / 2.0)
    return EnvelopeState(1, np.array([down, up]))


def bloch_from_state(state: EnvelopeState) -> BlochPoint:
    """Locate a single-qubit state on the Bloch sphere.

    The azimuth is ``arg(A_down) - arg(A_up)`` and is pinned to 0 whenever
    either amplitude vanishes.
    """
    if state.n_qubits != 1:
        raise ArityError(f"expected a single-qubit state, got {state.n_qubits} qubits")
    down, up = state.amplitudes
    theta = 2.0 * math.atan2(abs(down), abs(up))
    if down == 0 or up == 0:
        phi = 0.0
    else:
        phi = cmath.phase(down) - cmath.phase(up)
    return BlochPoint(theta, phi)


def is_product_two_qubit(state: EnvelopeState, tol: float = 1e-12) -> tuple[bool, float]:
    """Return ``(factorizes, |a0 a3 - a1 a2|)`` for a two-qubit state."""
    if state.n_qubits != 2:
        raise ArityError(f"expected a two-qubit state, got {state.n_qubits} qubits")
    a0, a1, a2, a3 = state.amplitudes
    residual = float(abs(a0 * a3 - a1 * a2))
    return residual <= tol, residual


def fidelity(a: EnvelopeState, b: EnvelopeState) -> float:
    """Global-phase-invariant overlap ``|<a|b>|^2 / (|a|^2 |b|^2)``."""
    if a.dim != b.dim:
        raise DimensionError(f"dimension mismatch: {a.dim} vs {b.dim}")
    na, nb = a.norm_squared(), b.norm_squared()
    if na == 0 or nb == 0:
        raise ValueError("fidelity is undefined for a zero-norm state")
    overlap = np.vdot(a.amplitudes, b.amplitudes)
    return float(min(1.0, abs(overlap) ** 2 / (na * nb)))


def tensor(*states: EnvelopeState) -> EnvelopeState:
    """Kronecker product; the first argument becomes qubit 0."""
    amps = np.array([1.0 + 0j])
    for s in states:
        amps = np.kron(amps, s.amplitudes)
    return EnvelopeState.from_amplitudes(amps)


def random_state(n_qubits: int, rng: np.random.Generator) -> EnvelopeState:
    """Haar-random pure state (normalized complex Gaussian vector)."""
    dim = 1 << n_qubits
    amps = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return EnvelopeState.from_amplitudes(amps, normalize=True)
